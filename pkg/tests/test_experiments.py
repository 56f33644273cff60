import itertools
import math

import numpy as np
import pytest

from marginfer import experiments as ex
from marginfer.rulebase import RuleIndex


def bayes_optimal_reference(p):
    """Plain-python enumeration of all 128 patterns."""
    clean = [[c == "1" for c in ex.SEGMENTS[d]] for d in range(10)]
    total = 0.0
    for pattern in itertools.product((False, True), repeat=7):
        best = 0.0
        for seg in clean:
            like = 1.0
            for a, b in zip(pattern, seg):
                like *= (1 - p) if a == b else p
            best = max(best, like)
        total += best
    return total / 10


class TestRandomDistribution:
    def test_simplex(self, rng):
        for l in (2, 16, 1024):
            z = ex.random_distribution(l, rng)
            assert z.shape == (l,)
            assert z.min() >= 0
            assert z.sum() == pytest.approx(1.0, abs=1e-12)

    def test_mean_entry(self):
        rng = np.random.default_rng(7)
        draws = np.array([ex.random_distribution(8, rng)[3] for _ in range(100_000)])
        sigma = draws.std() / math.sqrt(draws.size)
        assert abs(draws.mean() - 1 / 8) < 3 * sigma

    def test_too_short(self, rng):
        with pytest.raises(ValueError):
            ex.random_distribution(1, rng)


class TestAgreement:
    def test_tie(self):
        z = np.array([0.25, 0.75])
        assert ex.sign_agreement(z, z[::-1])

    def test_extremes_agree(self):
        uniform = np.full(4, 0.25)
        point = np.array([1.0, 0, 0, 0])
        assert ex.sign_agreement(point, uniform)
        assert ex.sign_agreement(uniform, point)

    def test_known_disagreement(self):
        # I orders these one way, the norm the other
        z = np.array([0.5, 0.5, 0.0])
        y = np.array([0.68, 0.16, 0.16])
        d_info = float((z[z > 0] * np.log(z[z > 0])).sum() - (y * np.log(y)).sum())
        d_norm = float(np.linalg.norm(z) - np.linalg.norm(y))
        assert np.sign(d_info) != np.sign(d_norm)
        assert not ex.sign_agreement(z, y)

    def test_reproducible(self):
        a = ex.agreement_study((4, 64), trials=2000, seed=3)
        b = ex.agreement_study((4, 64), trials=2000, seed=3)
        assert a.to_dict() == b.to_dict()
        assert a.to_csv() == b.to_csv()

    def test_chunking_does_not_change_result(self):
        a = ex.agreement_study((8, 32), trials=3000, seed=1, chunk_cells=1 << 21)
        b = ex.agreement_study((8, 32), trials=3000, seed=1, chunk_cells=64)
        assert a.to_dict() == b.to_dict()

    def test_matches_pairwise_loop(self):
        report = ex.agreement_study((16,), trials=500, seed=11)
        rng = np.random.default_rng(np.random.SeedSequence(11).spawn(1)[0])
        hits = 0
        for _ in range(500):
            z = rng.random(16)
            y = rng.random(16)
            hits += ex.sign_agreement(z / z.sum(), y / y.sum())
        assert report.records[0].agreement == hits / 500

    def test_band(self):
        report = ex.agreement_study((4, 32, 256), trials=5000, seed=0)
        for rec in report.records:
            assert 0.85 <= rec.agreement <= 1.0

    def test_rejects_bad_length(self):
        with pytest.raises(ValueError):
            ex.agreement_study((12,), trials=10)

    def test_text_report(self):
        text = ex.agreement_study((4,), trials=100, seed=5).to_text()
        assert text.startswith("seed 5") and "pooled" in text


class TestLedRulebase:
    def test_rule_count(self):
        rb = ex.led_rulebase(0.1)
        assert len(rb.rules) == 672
        assert rb.class_model.classes == tuple(str(d) for d in range(10))

    def test_noiseless_marginals_are_binary(self):
        for rule in ex.led_rulebase(0.0).rules:
            assert set(rule.marginals.values()) <= {0.0, 1.0}

    def test_marginals_sum_to_one_per_subset(self):
        rb = ex.led_rulebase(0.2)
        sums = {}
        for rule in rb.rules:
            key = rule.attributes
            for c, v in rule.marginals.items():
                sums[key, c] = sums.get((key, c), 0.0) + v
        assert all(v == pytest.approx(1.0) for v in sums.values())

    def test_21_rules_fire(self, rng):
        rb = ex.led_rulebase(0.1)
        index = RuleIndex(rb.rules)
        for _ in range(20):
            assert len(index.firing(ex.led_trial(int(rng.integers(10)), 0.1, rng))) == 21

    def test_estimated_marginals_close(self):
        exact = ex.led_rulebase(0.1)
        est = ex.led_rulebase(0.1, estimate_from_samples=20_000, rng=np.random.default_rng(0))
        diff = max(abs(a.marginals[c] - b.marginals[c])
                   for a, b in zip(exact.rules, est.rules) for c in a.marginals)
        assert diff < 0.02

    def test_noise_range(self):
        with pytest.raises(ValueError):
            ex.led_rulebase(0.6)


class TestNoiseChannel:
    def test_flip_rate_and_independence(self):
        rng = np.random.default_rng(1)
        clean = ex.segment_table()[8]
        patterns = ex.led_noisy_patterns(clean, 0.1, 100_000, rng)
        flips = (patterns != clean).astype(float)
        assert abs(flips.mean() - 0.1) < 0.005
        corr = np.corrcoef(flips.T)
        off = corr[~np.eye(7, dtype=bool)]
        assert np.abs(off).max() < 0.02

    def test_zero_noise_is_clean(self, rng):
        for d in range(10):
            assert ex.led_trial(d, 0.0, rng).values == tuple(ex.segment_table()[d])


class TestBayesOptimal:
    @pytest.mark.parametrize("p", [0.0, 0.05, 0.1, 0.2, 0.3, 0.5])
    def test_matches_reference(self, p):
        assert ex.led_bayes_optimal(p) == pytest.approx(bayes_optimal_reference(p), abs=1e-14)

    def test_anchors(self):
        assert ex.led_bayes_optimal(0.0) == 1.0
        assert ex.led_bayes_optimal(0.5) == pytest.approx(0.1)
        assert 0.72 <= ex.led_bayes_optimal(0.1) <= 0.78


class TestLedBenchmark:
    @pytest.mark.parametrize("p", [0.0, 0.05, 0.1, 0.2])
    def test_not_above_bayes(self, p):
        report = ex.led_benchmark(1500, p, seed=2)
        assert report.accuracy <= report.bayes_optimal + 3 * report.sigma + 1e-12
        assert report.confusion.sum() == 1500

    def test_noiseless_perfect(self):
        report = ex.led_benchmark(300, 0.0, seed=0)
        assert report.accuracy == 1.0
        assert report.undefined == 0

    def test_reproducible(self):
        a = ex.led_benchmark(200, 0.1, seed=9)
        b = ex.led_benchmark(200, 0.1, seed=9)
        assert a.to_dict() == b.to_dict()
        assert a.to_csv() == b.to_csv()

    def test_estimated_mode(self):
        report = ex.led_benchmark(500, 0.1, seed=4, estimate_from_samples=5000)
        assert report.to_dict()["estimate_from_samples"] == 5000
        assert 0.6 <= report.accuracy <= 0.85

    def test_report_formats(self):
        report = ex.led_benchmark(50, 0.1, seed=0)
        assert "confusion" in report.to_text()
        assert report.to_csv().splitlines()[0] == "seed,noise_p,trials,accuracy,bayes_optimal"
