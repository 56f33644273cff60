import math

import numpy as np
import pytest
import sympy
from hypothesis import given, settings, strategies as st
from scipy.linalg import null_space

from marginfer import oracle
from marginfer.rulebase import make_rule

WORKED_A = [[0, 0, 0, 0, 1, 1, 1, 1], [0, 0, 0, 0, 0, 1, 0, 1], [1, 1, 1, 1, 1, 1, 1, 1]]


def exact_min_norm(A, b):
    A = sympy.Matrix(A)
    b = sympy.Matrix([sympy.Rational(str(v)) for v in b])
    return np.array([float(v) for v in A.pinv() * b])


class TestMaterialize:
    def test_worked_example(self, worked_rules):
        np.testing.assert_array_equal(oracle.materialize_A(worked_rules, 3), WORKED_A)

    def test_single_attribute(self):
        A = oracle.materialize_A([make_rule("a", {0: True}, {})], 1)
        np.testing.assert_array_equal(A, [[0, 1], [1, 1]])

    def test_row_sums(self):
        rules = [make_rule("a", {0: True, 3: False}, {}), make_rule("b", {2: True}, {})]
        A = oracle.materialize_A(rules, 5)
        np.testing.assert_array_equal(A.sum(axis=1), [2 ** 3, 2 ** 4, 2 ** 5])

    def test_limit(self):
        with pytest.raises(oracle.OracleLimitError):
            oracle.materialize_A([], 21)


class TestMinNorm:
    def test_worked_example_uniform(self):
        z = oracle.min_norm_solution(WORKED_A, [0.5, 0.25, 1.0]).values
        np.testing.assert_allclose(z, exact_min_norm(WORKED_A, [0.5, 0.25, 1.0]), atol=1e-15)
        np.testing.assert_allclose(z, np.full(8, 0.125), atol=1e-15)

    def test_normalization_only(self):
        z = oracle.min_norm_solution(np.ones((1, 4)), [1.0]).values
        np.testing.assert_allclose(z, 0.25)

    def test_negativity_instance(self, negativity_rules):
        A = oracle.materialize_A(negativity_rules, 2)
        b = [0.9, 0.9, 1.0]
        z = oracle.min_norm_solution(A, b).values
        np.testing.assert_allclose(z, exact_min_norm(A, b), atol=1e-14)
        np.testing.assert_allclose(z, [-0.15, 0.25, 0.25, 0.65], atol=1e-14)

    def test_exact_inference(self):
        assert oracle.exact_inference(WORKED_A, [0.5, 0.25, 1.0]) == pytest.approx(0.125)
        for n in (1, 4, 9):
            assert oracle.exact_inference(np.ones((1, 2 ** n)), [1.0]) == pytest.approx(2.0 ** -n)

    def test_full_evidence_rule(self):
        rule = make_rule("all", {0: True, 1: False, 2: True}, {})
        A = oracle.materialize_A([rule], 3)
        assert oracle.exact_inference(A, [0.37, 1.0]) == pytest.approx(0.37, abs=1e-15)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_min_norm_beats_feasible_perturbations(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 7))
    rules = [make_rule(f"r{i}", {a: True for a in rng.choice(n, rng.integers(1, n + 1), False)},
                       {}) for i in range(int(rng.integers(0, 5)))]
    A = oracle.materialize_A(rules, n)
    b = A @ (rng.random(2 ** n) / 2 ** (n - 1))
    z = oracle.min_norm_solution(A, b).values
    basis = null_space(A)
    for _ in range(200):
        other = z + basis @ rng.standard_normal(basis.shape[1]) * rng.uniform(1e-3, 1)
        np.testing.assert_allclose(A @ other, b, atol=1e-9)
        assert np.linalg.norm(z) <= np.linalg.norm(other) + 1e-12


class TestInformation:
    @pytest.mark.parametrize("n", [1, 3, 10])
    def test_equiprobable_is_zero(self, n):
        assert oracle.information_measure(np.full(2 ** n, 2.0 ** -n)) == pytest.approx(0.0, abs=1e-12)

    def test_point_mass(self):
        z = np.zeros(8)
        z[5] = 1.0
        assert oracle.information_measure(z) == pytest.approx(3 * math.log(2), abs=1e-12)
        assert oracle.entropy(z) == 0.0

    def test_half_half(self):
        z = [0.5, 0.5, 0.0, 0.0]
        assert oracle.information_measure(z) == pytest.approx(math.log(2), abs=1e-15)
        assert oracle.entropy(z) == pytest.approx(math.log(2), abs=1e-15)

    def test_negative_entry_rejected(self):
        with pytest.raises(ValueError):
            oracle.information_measure([1.2, -0.2])

    def test_sum_checked(self):
        with pytest.raises(ValueError):
            oracle.entropy([0.5, 0.6])

    def test_entropy_plus_information(self, rng):
        for k in range(1, 12):
            z = rng.random(2 ** k)
            z /= z.sum()
            total = oracle.entropy(z) + oracle.information_measure(z)
            assert total == pytest.approx(k * math.log(2), abs=1e-12)


class TestClampExplicit:
    def test_negativity_instance(self, negativity_rules):
        A = oracle.materialize_A(negativity_rules, 2)
        res = oracle.clamp_resolve_explicit(A, [0.9, 0.9, 1.0])
        np.testing.assert_allclose(res.z.values, [0.0, 0.1, 0.1, 0.8], atol=1e-12)
        assert res.likelihood == pytest.approx(0.8, abs=1e-12)
        assert res.iterations == 1 and res.converged

    def test_nonnegative_untouched(self):
        res = oracle.clamp_resolve_explicit(WORKED_A, [0.5, 0.25, 1.0])
        assert res.iterations == 0
        assert res.likelihood == pytest.approx(0.125)

    def test_pinned_cells(self):
        # every cell constrained individually: no freedom left
        A = np.vstack([np.eye(4), np.ones(4)])
        b = [0.1, 0.2, 0.3, 0.4, 1.0]
        res = oracle.clamp_resolve_explicit(A, b)
        assert res.iterations == 0
        assert res.likelihood == pytest.approx(0.4)


def test_explicit_distribution_length():
    with pytest.raises(ValueError):
        oracle.ExplicitDistribution(np.ones(3))
    assert oracle.ExplicitDistribution(np.ones(8)).n == 3
