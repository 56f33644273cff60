"""Two empirical studies.

* Sign agreement: how often ordering two random distributions by their
  discrimination information agrees with ordering them by Euclidean norm.
* Noisy LED digits: classify a seven-segment pattern with independent segment
  flips, using every 5-attribute conjunction as a rule.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.special import xlogy

from .inference import UndefinedPosteriorError, classify
from .rulebase import AttributeSpace, ClassModel, Evidence, RuleBase, RuleIndex, make_rule

TIE_TOL = 1e-14
DEFAULT_LENGTHS = tuple(2 ** k for k in range(2, 15))

# segments a-g are attributes F1-F7
SEGMENTS = {
    0: "1111110",
    1: "0110000",
    2: "1101101",
    3: "1111001",
    4: "0110011",
    5: "1011011",
    6: "1011111",
    7: "1110000",
    8: "1111111",
    9: "1111011",
}
LED_ATTRIBUTES = tuple(f"F{k}" for k in range(1, 8))
LED_LHS_SIZE = 5


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


# ---------------------------------------------------------------------------
# sign agreement between information measure and Euclidean norm
# ---------------------------------------------------------------------------

def random_distribution(l: int, rng) -> np.ndarray:
    """Uniform [0, 1) entries divided by their sum."""
    if l < 2:
        raise ValueError("length must be at least 2")
    z = _rng(rng).random(l)
    return z / z.sum()


def _plogp_rows(z: np.ndarray) -> np.ndarray:
    if z.all():
        # plain log is much faster than xlogy; exact zeros are vanishingly rare
        return np.einsum("...k,...k->...", z, np.log(z))
    return xlogy(z, z).sum(axis=-1)


def _agree(d_info: np.ndarray, d_norm: np.ndarray) -> np.ndarray:
    tie_info = np.abs(d_info) < TIE_TOL
    tie_norm = np.abs(d_norm) < TIE_TOL
    same_sign = np.sign(d_info) == np.sign(d_norm)
    return np.where(tie_info | tie_norm, tie_info & tie_norm, same_sign)


def sign_agreement(z, y) -> bool:
    """True when ``I(z) - I(y)`` and ``||z|| - ||y||`` have the same sign (or both tie)."""
    z = np.asarray(z, dtype=float)
    y = np.asarray(y, dtype=float)
    d_info = _plogp_rows(z) - _plogp_rows(y)
    d_norm = np.linalg.norm(z) - np.linalg.norm(y)
    return bool(_agree(np.asarray(d_info), np.asarray(d_norm)))


@dataclass(frozen=True)
class AgreementRecord:
    l: int
    trials: int
    agreement: float


@dataclass
class AgreementReport:
    records: list[AgreementRecord]
    seed: int | None

    @property
    def pooled(self) -> float:
        return float(np.mean([rec.agreement for rec in self.records]))

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "pooled_agreement": self.pooled,
            "records": [vars(rec) for rec in self.records],
        }

    def to_csv(self) -> str:
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["l", "trials", "agreement"])
        for rec in self.records:
            writer.writerow([rec.l, rec.trials, repr(rec.agreement)])
        writer.writerow(["pooled", sum(r.trials for r in self.records), repr(self.pooled)])
        return out.getvalue()

    def to_text(self) -> str:
        lines = [f"seed {self.seed}"]
        lines += [f"l={rec.l:<6d} trials={rec.trials:<8d} agreement={rec.agreement:.4f}"
                  for rec in self.records]
        lines.append(f"pooled agreement {self.pooled:.4f}")
        return "\n".join(lines) + "\n"


def agreement_study(lengths: Sequence[int] = DEFAULT_LENGTHS, trials: int = 100_000,
                    seed: int | None = 0, chunk_cells: int = 1 << 21) -> AgreementReport:
    """Fraction of random pairs ``(z, y)`` ordered identically by I and by the norm.

    Each length draws from its own child of ``seed``, so a record depends only
    on the seed and the length's position in ``lengths``.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    children = np.random.SeedSequence(seed).spawn(len(lengths))
    records = []
    for l, child in zip(lengths, children):
        if l < 2 or l & (l - 1):
            raise ValueError(f"length {l} is not a power of two >= 2")
        rng = np.random.default_rng(child)
        batch = max(1, chunk_cells // (2 * l))
        buf = np.empty((batch, 2, l))
        agree = 0
        done = 0
        while done < trials:
            # pairs are interleaved in the stream, so chunking never changes the draws
            m = min(batch, trials - done)
            pair = buf[:m]
            rng.random(out=pair)
            pair /= pair.sum(axis=2, keepdims=True)
            info = _plogp_rows(pair)
            norm = np.sqrt(np.einsum("ijk,ijk->ij", pair, pair))
            agree += int(_agree(info[:, 0] - info[:, 1], norm[:, 0] - norm[:, 1]).sum())
            done += m
        records.append(AgreementRecord(int(l), trials, agree / trials))
    return AgreementReport(records, seed if isinstance(seed, int) else None)


# ---------------------------------------------------------------------------
# noisy LED digits
# ---------------------------------------------------------------------------

def segment_table(segments: Mapping[int, str] = SEGMENTS) -> np.ndarray:
    table = np.array([[c == "1" for c in segments[d]] for d in sorted(segments)], dtype=bool)
    if table.shape[1] != len(LED_ATTRIBUTES):
        raise ValueError("segment patterns must have 7 entries")
    return table


def _channel_likelihood(values: np.ndarray, clean: np.ndarray, noise_p: float) -> np.ndarray:
    """``p(values | clean)`` for independent flips, over the last axis."""
    return np.prod(np.where(values == clean, 1.0 - noise_p, noise_p), axis=-1)


def led_rulebase(noise_p: float, segments: Mapping[int, str] = SEGMENTS,
                 estimate_from_samples: int | None = None, rng=None) -> RuleBase:
    """672 rules: every 5-attribute subset with every value assignment.

    Marginals are the exact channel probabilities, or, with
    ``estimate_from_samples=N``, frequencies over ``N`` noisy draws per digit.
    """
    if not 0.0 <= noise_p <= 0.5:
        raise ValueError("noise_p must lie in [0, 0.5]")
    table = segment_table(segments)
    digits = sorted(segments)
    classes = tuple(str(d) for d in digits)
    samples = None
    if estimate_from_samples:
        gen = _rng(rng)
        samples = [led_noisy_patterns(table[k], noise_p, estimate_from_samples, gen)
                   for k in range(len(digits))]

    rules = []
    for attrs in itertools.combinations(range(len(LED_ATTRIBUTES)), LED_LHS_SIZE):
        cols = list(attrs)
        for values in itertools.product((False, True), repeat=LED_LHS_SIZE):
            vals = np.array(values)
            if samples is None:
                probs = _channel_likelihood(vals, table[:, cols], noise_p)
            else:
                probs = np.array([np.mean(np.all(s[:, cols] == vals, axis=1)) for s in samples])
            rid = "".join(LED_ATTRIBUTES[a] for a in attrs) + "=" + "".join(
                "1" if v else "0" for v in values)
            rules.append(make_rule(rid, dict(zip(attrs, values)),
                                   {c: float(p) for c, p in zip(classes, probs)}))
    model = ClassModel(classes, {c: 1.0 / len(classes) for c in classes})
    return RuleBase(AttributeSpace(LED_ATTRIBUTES), tuple(rules), model)


def led_noisy_patterns(clean: np.ndarray, noise_p: float, count: int, rng) -> np.ndarray:
    flips = _rng(rng).random((count, clean.shape[0])) < noise_p
    return clean[None, :] ^ flips


def led_trial(digit: int, noise_p: float, rng, segments: Mapping[int, str] = SEGMENTS
              ) -> Evidence:
    """Clean pattern of ``digit`` with each segment flipped independently."""
    clean = segment_table(segments)[sorted(segments).index(digit)]
    return Evidence(tuple(led_noisy_patterns(clean, noise_p, 1, rng)[0]))


def led_bayes_optimal(noise_p: float, segments: Mapping[int, str] = SEGMENTS) -> float:
    """Best achievable accuracy under uniform digit priors, by enumerating all patterns."""
    if not 0.0 <= noise_p <= 0.5:
        raise ValueError("noise_p must lie in [0, 0.5]")
    table = segment_table(segments)
    patterns = np.array(list(itertools.product((False, True), repeat=table.shape[1])))
    like = _channel_likelihood(patterns[:, None, :], table[None, :, :], noise_p)
    return float(like.max(axis=1).sum() / table.shape[0])


@dataclass
class LedBenchmarkReport:
    noise_p: float
    trials: int
    accuracy: float
    confusion: np.ndarray
    bayes_optimal: float
    seed: int | None
    floored: int = 0
    undefined: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def sigma(self) -> float:
        """Binomial standard error of the accuracy."""
        p = self.bayes_optimal
        return math.sqrt(p * (1.0 - p) / self.trials)

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "noise_p": self.noise_p,
            "trials": self.trials,
            "accuracy": self.accuracy,
            "bayes_optimal": self.bayes_optimal,
            "sigma": self.sigma,
            "floored_likelihoods": self.floored,
            "undefined_posteriors": self.undefined,
            "confusion": self.confusion.tolist(),
            **self.extra,
        }

    def to_csv(self) -> str:
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["seed", "noise_p", "trials", "accuracy", "bayes_optimal"])
        writer.writerow([self.seed, repr(self.noise_p), self.trials, repr(self.accuracy),
                         repr(self.bayes_optimal)])
        writer.writerow([])
        writer.writerow(["true\\predicted"] + list(range(self.confusion.shape[1])))
        for d, row in enumerate(self.confusion):
            writer.writerow([d] + row.tolist())
        return out.getvalue()

    def to_text(self) -> str:
        lines = [
            f"seed {self.seed}  noise {self.noise_p}  trials {self.trials}",
            f"accuracy {self.accuracy:.4f}  bayes optimum {self.bayes_optimal:.4f}",
            "confusion (rows true digit, columns predicted):",
        ]
        lines += ["  " + " ".join(f"{v:6d}" for v in row) for row in self.confusion]
        return "\n".join(lines) + "\n"


def led_benchmark(trials: int, noise_p: float, seed: int | None = 0,
                  segments: Mapping[int, str] = SEGMENTS,
                  estimate_from_samples: int | None = None) -> LedBenchmarkReport:
    """Classify ``trials`` noisy digits (uniformly drawn) and tally the confusion matrix."""
    if trials < 1:
        raise ValueError("trials must be at least 1")
    rng = np.random.default_rng(seed)
    rulebase = led_rulebase(noise_p, segments, estimate_from_samples, rng)
    index = RuleIndex(rulebase.rules)
    table = segment_table(segments)
    digits = sorted(segments)
    confusion = np.zeros((len(digits), len(digits)), dtype=np.int64)
    floored = 0
    undefined = 0
    truth = rng.integers(len(digits), size=trials)
    patterns = table[truth] ^ (rng.random((trials, table.shape[1])) < noise_p)
    classes = rulebase.class_model.classes
    for k, pattern in zip(truth, patterns):
        try:
            result = classify(rulebase.rules, Evidence(tuple(pattern)), rulebase.class_model,
                              index=index)
            floored += bool(result.diagnostics.floored)
            predicted = result.argmax
        except UndefinedPosteriorError as exc:
            # every likelihood is <= 0: fall back to the largest raw value
            undefined += 1
            predicted = max(classes, key=exc.likelihoods.__getitem__)
        confusion[k, classes.index(predicted)] += 1
    accuracy = float(np.trace(confusion) / trials)
    extra = {"estimate_from_samples": estimate_from_samples} if estimate_from_samples else {}
    return LedBenchmarkReport(noise_p, trials, accuracy, confusion,
                              led_bayes_optimal(noise_p, segments), seed, floored, undefined,
                              extra)
