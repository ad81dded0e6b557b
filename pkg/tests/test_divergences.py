import math

import pytest
from hypothesis import given, strategies as st

from boundslab.divergences import (
    ProbVec,
    binary_entropy,
    binary_kl,
    binomial_entropy_bounds,
    categorical_kl,
    kl_inverse,
    pinsker_relaxations,
)

UNIT_GRID = [i / 100 for i in range(101)]


class TestProbVec:
    def test_renormalizes_within_tolerance(self):
        v = ProbVec([0.5, 0.5 + 5e-10])
        assert math.isclose(sum(v.weights), 1.0, abs_tol=1e-15)

    def test_rejects_far_from_one(self):
        with pytest.raises(ValueError):
            ProbVec([0.5, 0.4])

    def test_rejects_negative_and_nan_and_empty(self):
        with pytest.raises(ValueError):
            ProbVec([1.5, -0.5])
        with pytest.raises(ValueError):
            ProbVec([float("nan"), 1.0])
        with pytest.raises(ValueError):
            ProbVec([])

    def test_sub_normalized_allows_deficit(self):
        v = ProbVec([0.25, 0.25], sub_normalized=True)
        assert v.weights == (0.25, 0.25)
        with pytest.raises(ValueError):
            ProbVec([0.75, 0.75], sub_normalized=True)


class TestBinaryEntropy:
    def test_conventions_and_maximum(self):
        assert binary_entropy(0.0) == 0.0
        assert binary_entropy(1.0) == 0.0
        assert math.isclose(binary_entropy(0.5), math.log(2), rel_tol=1e-12)

    def test_quarter(self):
        expected = -(0.25 * math.log(0.25) + 0.75 * math.log(0.75))
        assert math.isclose(binary_entropy(0.25), expected, rel_tol=1e-12)
        assert math.isclose(binary_entropy(0.25), 0.562335, abs_tol=1e-6)

    def test_range(self):
        for p in UNIT_GRID:
            assert 0.0 <= binary_entropy(p) <= math.log(2) + 1e-15

    def test_domain(self):
        with pytest.raises(ValueError):
            binary_entropy(-0.1)
        with pytest.raises(ValueError):
            binary_entropy(1.1)


class TestBinaryKl:
    def test_zero_iff_equal(self):
        assert binary_kl(0.5, 0.5) == 0.0
        assert binary_kl(0.0, 0.0) == 0.0
        assert binary_kl(1.0, 1.0) == 0.0
        assert binary_kl(0.3, 0.31) > 0.0

    def test_closed_forms(self):
        assert math.isclose(binary_kl(0.0, 0.5), math.log(2), rel_tol=1e-12)
        expected = 0.25 * math.log(0.5) + 0.75 * math.log(1.5)
        assert math.isclose(binary_kl(0.25, 0.5), expected, rel_tol=1e-12)
        assert math.isclose(binary_kl(0.25, 0.5), 0.130812, abs_tol=1e-6)

    def test_support_violations_are_infinite(self):
        assert binary_kl(0.5, 0.0) == math.inf
        assert binary_kl(0.5, 1.0) == math.inf
        assert binary_kl(1.0, 0.0) == math.inf
        assert binary_kl(0.0, 1.0) == math.inf

    def test_nan_rejected(self):
        with pytest.raises(ValueError):
            binary_kl(float("nan"), 0.5)

    def test_pinsker_on_grid(self):
        for p in UNIT_GRID:
            for q in UNIT_GRID:
                assert binary_kl(p, q) >= 2.0 * (p - q) ** 2 - 1e-12

    def test_refined_pinsker_on_grid(self):
        for p in UNIT_GRID:
            for q in UNIT_GRID:
                if q > p:
                    assert binary_kl(p, q) >= (p - q) ** 2 / (2.0 * q) - 1e-12


class TestCategoricalKl:
    def test_identical_is_zero(self):
        assert categorical_kl([0.2, 0.3, 0.5], [0.2, 0.3, 0.5]) == 0.0

    def test_point_mass_vs_uniform(self):
        assert math.isclose(categorical_kl([1.0, 0.0], [0.5, 0.5]), math.log(2))

    def test_support_violation(self):
        assert categorical_kl([0.5, 0.5], [1.0, 0.0]) == math.inf

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            categorical_kl([1.0], [0.5, 0.5])

    def test_product_distribution_doubles_kl(self):
        rho = [0.7, 0.2, 0.1]
        pi = [0.3, 0.3, 0.4]
        rho2 = [a * b for a in rho for b in rho]
        pi2 = [a * b for a in pi for b in pi]
        assert math.isclose(
            categorical_kl(rho2, pi2), 2.0 * categorical_kl(rho, pi), rel_tol=1e-12
        )


def grid_scan_upper(p_hat, eps, step=1e-6):
    """Brute-force oracle: largest q on a fine grid with kl(p_hat||q) <= eps."""
    best = p_hat
    q = p_hat
    while q <= 1.0:
        if binary_kl(p_hat, min(q, 1.0)) <= eps:
            best = q
        q += step
    return min(best, 1.0)


class TestKlInverse:
    def test_zero_budget_is_identity(self):
        assert kl_inverse(0.3, 0.0, "upper") == pytest.approx(0.3, abs=1e-7)
        assert kl_inverse(0.3, 0.0, "lower") == pytest.approx(0.3, abs=1e-7)

    def test_closed_form_at_zero(self):
        eps = 0.25
        assert math.isclose(kl_inverse(0.0, eps, "upper"), 1.0 - math.exp(-eps))
        assert kl_inverse(0.0, eps, "lower") == 0.0

    def test_closed_form_at_one(self):
        eps = 0.25
        assert kl_inverse(1.0, eps, "upper") == 1.0
        assert math.isclose(kl_inverse(1.0, eps, "lower"), math.exp(-eps))

    def test_infinite_budget(self):
        assert kl_inverse(0.4, math.inf, "upper") == 1.0
        assert kl_inverse(0.4, math.inf, "lower") == 0.0

    def test_matches_grid_scan_oracle(self):
        q = kl_inverse(0.1, 0.05, "upper")
        assert 0.1 < q < 1.0
        assert abs(q - grid_scan_upper(0.1, 0.05)) < 1e-5

    def test_round_trip_when_interior(self):
        for p_hat in (0.05, 0.1, 0.3, 0.5, 0.9):
            for eps in (1e-4, 1e-2, 0.1):
                q = kl_inverse(p_hat, eps, "upper")
                if q < 1.0:
                    assert abs(binary_kl(p_hat, q) - eps) < 1e-9
                q = kl_inverse(p_hat, eps, "lower")
                if q > 0.0:
                    assert abs(binary_kl(p_hat, q) - eps) < 1e-9

    @given(
        st.floats(min_value=0.0, max_value=1.0),
        st.floats(min_value=0.0, max_value=2.0),
        st.floats(min_value=0.0, max_value=2.0),
    )
    def test_monotone_in_eps(self, p_hat, e1, e2):
        lo, hi = min(e1, e2), max(e1, e2)
        assert kl_inverse(p_hat, lo, "upper") <= kl_inverse(p_hat, hi, "upper") + 1e-10

    @given(
        st.floats(min_value=0.0, max_value=1.0),
        st.floats(min_value=0.0, max_value=1.0),
        st.floats(min_value=0.0, max_value=2.0),
    )
    def test_monotone_in_p_hat(self, p1, p2, eps):
        lo, hi = min(p1, p2), max(p1, p2)
        assert kl_inverse(lo, eps, "upper") <= kl_inverse(hi, eps, "upper") + 1e-10

    def test_tighter_than_relaxations(self):
        for p_hat in UNIT_GRID:
            for eps in (1e-4, 1e-3, 1e-2, 0.1, 0.5):
                q = kl_inverse(p_hat, eps, "upper")
                plain, refined_upper, _ = pinsker_relaxations(p_hat, eps)
                assert q <= min(plain, refined_upper) + 1e-9

    def test_lower_bounded_by_refined_lower(self):
        for p_hat in UNIT_GRID:
            for eps in (1e-4, 1e-2, 0.1):
                q = kl_inverse(p_hat, eps, "lower")
                _, _, refined_lower = pinsker_relaxations(p_hat, eps)
                assert q >= refined_lower - 1e-9

    def test_bad_inputs(self):
        with pytest.raises(ValueError):
            kl_inverse(0.5, -1.0)
        with pytest.raises(ValueError):
            kl_inverse(0.5, 0.1, "sideways")


class TestPinskerRelaxations:
    def test_plain(self):
        plain, _, _ = pinsker_relaxations(0.1, 0.02)
        assert math.isclose(plain, 0.2, rel_tol=1e-12)

    def test_refined_upper(self):
        _, ru, _ = pinsker_relaxations(0.01, 0.005)
        assert math.isclose(ru, 0.03, rel_tol=1e-12)

    def test_refined_lower_clips_at_zero(self):
        _, _, rl = pinsker_relaxations(0.02, 0.01)
        assert rl == 0.0


class TestBinomialEntropyBounds:
    def test_loose_example(self):
        lower, upper = binomial_entropy_bounds(4, 2, tight=False)
        assert math.isclose(lower, 3.2, rel_tol=1e-9)
        assert math.isclose(upper, 16.0, rel_tol=1e-9)

    def test_tight_example(self):
        lower, upper = binomial_entropy_bounds(4, 2, tight=True)
        assert math.isclose(lower, 5.657, abs_tol=1e-3)
        assert math.isclose(upper, 6.517, abs_tol=1e-3)

    def test_k_zero(self):
        lower, upper = binomial_entropy_bounds(7, 0, tight=False)
        assert math.isclose(lower, 1.0 / 8.0)
        assert upper == 1.0

    def test_brackets_exact_coefficient(self):
        for n in range(1, 31):
            for k in range(n + 1):
                exact = math.comb(n, k)
                lower, upper = binomial_entropy_bounds(n, k, tight=False)
                assert lower <= exact <= upper
                if 1 <= k <= n - 1:
                    lower, upper = binomial_entropy_bounds(n, k, tight=True)
                    assert lower <= exact <= upper

    def test_domain(self):
        with pytest.raises(ValueError):
            binomial_entropy_bounds(4, 5)
        with pytest.raises(ValueError):
            binomial_entropy_bounds(4, 0, tight=True)
