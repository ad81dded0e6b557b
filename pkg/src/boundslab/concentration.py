"""High-confidence bounds on the mean of bounded samples.

Covers the Markov/Chebyshev tails, the Hoeffding radius/sample-size pair, the
kl and split-kl mean bounds, the Bernstein family (plain, empirical,
"unexpected" with a lambda grid), plus exact finite-summation verifiers for
the moment-generating-function lemmas the bounds rest on.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .divergences import kl_inverse


@dataclass(frozen=True)
class BoundResult:
    """A computed high-confidence bound: its value, confidence level and the
    auxiliary quantities (budget, chosen lambda, variance proxy, ...) that
    produced it."""

    value: float
    delta: float
    method: str
    detail: dict = field(default_factory=dict)


class Sample:
    """A finite sample of reals known to be bounded above by ``upper_bound``
    (and optionally below by ``lower_bound``)."""

    __slots__ = ("values", "upper_bound", "lower_bound")

    def __init__(self, values: Sequence[float], upper_bound: float,
                 lower_bound: Optional[float] = None):
        vals = tuple(float(v) for v in values)
        if not vals:
            raise ValueError("sample must be nonempty")
        b = float(upper_bound)
        if any(math.isnan(v) for v in vals) or math.isnan(b):
            raise ValueError("sample values must not be NaN")
        if max(vals) > b:
            raise ValueError(f"sample value {max(vals)} exceeds upper bound {b}")
        if lower_bound is not None:
            lower_bound = float(lower_bound)
            if min(vals) < lower_bound:
                raise ValueError(
                    f"sample value {min(vals)} below lower bound {lower_bound}")
        self.values = vals
        self.upper_bound = b
        self.lower_bound = lower_bound

    @classmethod
    def unit(cls, values: Sequence[float]) -> "Sample":
        """A sample declared to live in [0, 1]."""
        return cls(values, upper_bound=1.0, lower_bound=0.0)

    @property
    def is_unit_range(self) -> bool:
        return self.lower_bound == 0.0 and self.upper_bound == 1.0

    @property
    def n(self) -> int:
        return len(self.values)

    @property
    def mean(self) -> float:
        return math.fsum(self.values) / self.n

    @property
    def mean_sq(self) -> float:
        return math.fsum(v * v for v in self.values) / self.n


class SplitGrid:
    """Strictly increasing grid b_0 < ... < b_K with segment widths
    alpha_j = b_j - b_{j-1}; decomposes a bounded value into segment
    indicators: x = b_0 + sum_j alpha_j * x_{|j}."""

    __slots__ = ("points", "alphas")

    def __init__(self, points: Sequence[float]):
        pts = tuple(float(p) for p in points)
        if len(pts) < 2:
            raise ValueError("grid needs at least two points (K >= 1)")
        if any(b <= a for a, b in zip(pts, pts[1:])):
            raise ValueError("grid points must be strictly increasing")
        self.points = pts
        self.alphas = tuple(b - a for a, b in zip(pts, pts[1:]))

    @property
    def K(self) -> int:
        return len(self.alphas)

    def segment_values(self, x: float) -> tuple:
        """The per-segment components x_{|j} = clamp((x - b_{j-1})/alpha_j).

        On grid points this reduces to the indicator 1[x >= b_j]; off-grid
        (continuous) values get the fractional clamped form.  Either way
        b_0 + sum_j alpha_j * x_{|j} reconstructs x exactly.
        """
        out = []
        for j in range(self.K):
            lo, alpha = self.points[j], self.alphas[j]
            out.append(min(1.0, max(0.0, (x - lo) / alpha)))
        return tuple(out)


class LambdaGrid:
    """A decreasing grid of admissible lambda values for a Bernstein-type
    bound; the union-bound cost of the grid is ln(k/delta)."""

    __slots__ = ("lambdas",)

    def __init__(self, lambdas: Sequence[float]):
        lams = tuple(float(x) for x in lambdas)
        if not lams:
            raise ValueError("lambda grid must be nonempty")
        if any(x <= 0 for x in lams):
            raise ValueError("lambda grid values must be positive")
        if any(b >= a for a, b in zip(lams, lams[1:])):
            raise ValueError("lambda grid must be strictly decreasing")
        self.lambdas = lams

    @property
    def k(self) -> int:
        return len(self.lambdas)

    @classmethod
    def default(cls, n: int, delta: float, b: float) -> "LambdaGrid":
        """The geometric grid {1/(2b), 1/(4b), ..., 1/(2^k b)} with
        k = ceil(log2(sqrt(n / ln(1/delta)) / 2)), forced >= 1."""
        _check_delta(delta)
        if n < 1:
            raise ValueError("n must be >= 1")
        if b <= 0:
            raise ValueError("b must be positive")
        k = max(1, math.ceil(math.log2(math.sqrt(n / math.log(1.0 / delta)) / 2.0)))
        return cls([1.0 / (2.0 ** i * b) for i in range(1, k + 1)])


def _check_delta(delta: float) -> float:
    delta = float(delta)
    if math.isnan(delta) or not 0.0 < delta < 1.0:
        raise ValueError(f"delta must be in (0, 1), got {delta}")
    return delta


def markov_chebyshev_tail(kind: str, *, mean: Optional[float] = None,
                          variance: Optional[float] = None,
                          eps: float) -> float:
    """Markov tail E[X]/eps (X >= 0) or Chebyshev tail Var[X]/eps^2, clipped
    to [0, 1] since both bound a probability."""
    eps = float(eps)
    if eps <= 0 or math.isnan(eps):
        raise ValueError(f"eps must be positive, got {eps}")
    if kind == "markov":
        if mean is None or mean < 0:
            raise ValueError("markov needs a nonnegative mean")
        return min(1.0, mean / eps)
    if kind == "chebyshev":
        if variance is None or variance < 0:
            raise ValueError("chebyshev needs a nonnegative variance")
        return min(1.0, variance / eps ** 2)
    raise ValueError(f"kind must be 'markov' or 'chebyshev', got {kind!r}")


def hoeffding_radius(n: int, delta: float, sides: str = "one") -> float:
    """Hoeffding confidence radius sqrt(ln(sides/delta) / (2n)) for the mean
    of n iid [0,1]-valued variables."""
    _check_delta(delta)
    if n < 1:
        raise ValueError("n must be >= 1")
    if sides not in ("one", "two"):
        raise ValueError(f"sides must be 'one' or 'two', got {sides!r}")
    numer = math.log((1.0 if sides == "one" else 2.0) / delta)
    return math.sqrt(numer / (2.0 * n))


def hoeffding_solve_n(eps: float, delta: float, sides: str = "one") -> int:
    """Smallest n whose Hoeffding radius is <= eps: ceil(ln(sides/delta) / (2 eps^2))."""
    _check_delta(delta)
    eps = float(eps)
    if eps <= 0 or math.isnan(eps):
        raise ValueError(f"eps must be positive, got {eps}")
    if sides not in ("one", "two"):
        raise ValueError(f"sides must be 'one' or 'two', got {sides!r}")
    numer = math.log((1.0 if sides == "one" else 2.0) / delta)
    return max(1, math.ceil(numer / (2.0 * eps ** 2)))


def kl_mean_bound(p_hat: float, n: int, delta: float, variant: str = "direct",
                  direction: str = "upper") -> BoundResult:
    """kl confidence bound on a Bernoulli/[0,1] mean.

    ``direct`` inverts kl at budget ln(1/delta)/n; ``via_lemma`` at the
    slightly larger ln(2 sqrt(n)/delta)/n that a uniform (two-sided-capable)
    argument costs.
    """
    _check_delta(delta)
    if n < 1:
        raise ValueError("n must be >= 1")
    if variant == "direct":
        eps = math.log(1.0 / delta) / n
    elif variant == "via_lemma":
        eps = math.log(2.0 * math.sqrt(n) / delta) / n
    else:
        raise ValueError(f"variant must be 'direct' or 'via_lemma', got {variant!r}")
    value = kl_inverse(p_hat, eps, direction)
    return BoundResult(value, delta, f"kl-{variant}-{direction}",
                       {"eps": eps, "p_hat": p_hat, "n": n})


def split_kl_mean_bound(sample: Sample, grid: SplitGrid, delta: float) -> BoundResult:
    """Split-kl upper bound on the mean of a sample in [b_0, b_K].

    Decomposes each value into segment components, applies the kl inverse per
    segment with the shared budget ln(K/delta)/n, and reassembles:
    b_0 + sum_j alpha_j * kl_inverse(p_hat_{|j}, ln(K/delta)/n, upper).
    """
    _check_delta(delta)
    if min(sample.values) < grid.points[0] or max(sample.values) > grid.points[-1]:
        raise ValueError("sample values must lie within [b_0, b_K]")
    n = sample.n
    eps = math.log(grid.K / delta) / n
    value = grid.points[0]
    segment_means = []
    for j in range(grid.K):
        p_hat_j = math.fsum(grid.segment_values(v)[j] for v in sample.values) / n
        segment_means.append(p_hat_j)
        value += grid.alphas[j] * kl_inverse(p_hat_j, eps, "upper")
    return BoundResult(value, delta, "split-kl",
                       {"eps": eps, "segment_means": tuple(segment_means),
                        "K": grid.K, "n": n})


def bernstein_mean_bound(mean_hat: float, nu: float, b: float, n: int,
                         delta: float) -> BoundResult:
    """Bernstein bound mean_hat + sqrt(2 nu ln(1/delta)/n) + b ln(1/delta)/(3n)
    for variables bounded above by b with (known) variance nu."""
    _check_delta(delta)
    if nu < 0:
        raise ValueError("variance must be nonnegative")
    if b <= 0:
        raise ValueError("b must be positive")
    if n < 1:
        raise ValueError("n must be >= 1")
    budget = math.log(1.0 / delta)
    value = mean_hat + math.sqrt(2.0 * nu * budget / n) + b * budget / (3.0 * n)
    return BoundResult(value, delta, "bernstein", {"nu": nu, "b": b, "n": n})


def bernstein_duals(x: float, direction: str = "f") -> float:
    """The pair f(x) = 1 + x - sqrt(1 + 2x) and its inverse
    f_inv(x) = x + sqrt(2x), both on x >= 0."""
    x = float(x)
    if math.isnan(x) or x < 0:
        raise ValueError(f"x must be nonnegative, got {x}")
    if direction == "f":
        return 1.0 + x - math.sqrt(1.0 + 2.0 * x)
    if direction == "f_inv":
        return x + math.sqrt(2.0 * x)
    raise ValueError(f"direction must be 'f' or 'f_inv', got {direction!r}")


def sample_variance(sample: Sample) -> float:
    """Unbiased variance estimate nu_hat = (1/(n(n-1))) sum_{i<j} (X_i - X_j)^2,
    computed via the O(n) identity (n/(n-1)) (mean of squares - mean^2)."""
    n = sample.n
    if n < 2:
        raise ValueError("variance estimate needs n >= 2")
    p_hat = sample.mean
    s_bar = sample.mean_sq
    return max(0.0, (n / (n - 1.0)) * (s_bar - p_hat * p_hat))


def empirical_bernstein_mean_bound(sample: Sample, delta: float) -> BoundResult:
    """Empirical Bernstein bound for a [0,1]-valued sample:
    p_hat + sqrt(2 nu_hat ln(2/delta)/n) + 7 ln(2/delta)/(3(n-1))."""
    _check_delta(delta)
    if not sample.is_unit_range:
        raise ValueError("empirical Bernstein expects a [0,1]-valued sample")
    n = sample.n
    if n < 2:
        raise ValueError("empirical Bernstein needs n >= 2")
    nu_hat = sample_variance(sample)
    budget = math.log(2.0 / delta)
    value = sample.mean + math.sqrt(2.0 * nu_hat * budget / n) \
        + 7.0 * budget / (3.0 * (n - 1.0))
    return BoundResult(min(1.0, value), delta, "empirical-bernstein",
                       {"nu_hat": nu_hat, "n": n})


def psi(u: float) -> float:
    """psi(u) = u - ln(1 + u), the rate function behind the unexpected
    Bernstein bound (defined for u > -1)."""
    u = float(u)
    if u <= -1.0:
        raise ValueError("psi requires u > -1")
    return u - math.log1p(u)


def unexpected_bernstein_mean_bound(sample: Sample, delta: float,
                                    grid: Optional[LambdaGrid] = None) -> BoundResult:
    """Unexpected Bernstein bound: min over lambda in the grid of
    p_hat + psi(-lambda b)/(lambda b^2) * s_n + ln(k/delta)/(lambda n),
    where s_n is the mean of squares and b the sample's upper bound."""
    _check_delta(delta)
    b = sample.upper_bound
    if b <= 0:
        raise ValueError("upper bound b must be positive")
    n = sample.n
    if grid is None:
        grid = LambdaGrid.default(n, delta, b)
    if max(grid.lambdas) >= 1.0 / b:
        raise ValueError("every lambda must be < 1/b")
    s_n = sample.mean_sq
    p_hat = sample.mean
    budget = math.log(grid.k / delta)
    best_value = math.inf
    best_lambda = grid.lambdas[0]
    for lam in grid.lambdas:
        value = p_hat + psi(-lam * b) / (lam * b * b) * s_n + budget / (lam * n)
        if value < best_value:
            best_value = value
            best_lambda = lam
    if sample.is_unit_range:
        best_value = min(1.0, best_value)
    return BoundResult(best_value, delta, "unexpected-bernstein",
                       {"lambda": best_lambda, "k": grid.k, "s_n": s_n, "n": n})


def kl_mgf_exact(n: int, p: float) -> float:
    """Exact E[e^{n kl(p_hat || p)}] for p_hat the mean of n Bernoulli(p)
    draws, by finite summation in log space.

    The summand C(n,k) p^k (1-p)^{n-k} e^{n kl(k/n||p)} simplifies to
    C(n,k) (k/n)^k ((n-k)/n)^{n-k}, so the value is p-free for p in (0,1);
    at p in {0,1} the expectation is trivially 1.
    """
    n = int(n)
    if n < 1:
        raise ValueError("n must be >= 1")
    p = float(p)
    if math.isnan(p) or not 0.0 <= p <= 1.0:
        raise ValueError(f"p must be in [0, 1], got {p}")
    if p in (0.0, 1.0):
        return 1.0
    log_terms = []
    for k in range(n + 1):
        log_c = math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)
        term = log_c
        if k > 0:
            term += k * math.log(k / n)
        if k < n:
            term += (n - k) * math.log((n - k) / n)
        log_terms.append(term)
    peak = max(log_terms)
    return math.exp(peak) * math.fsum(math.exp(t - peak) for t in log_terms)


def mgf_lemma_check(values: Sequence[float], probs: Sequence[float],
                    lam: float, lemma: str) -> tuple:
    """Exactly evaluate both sides of a moment-generating-function lemma on a
    finite support; returns (lhs, rhs) with the contract lhs <= rhs.

    hoeffding:   E[e^{lam Z}]  vs  e^{lam mu + lam^2 (b-a)^2 / 8}
    bernstein:   E[e^{lam Z}] (mean-zero Z <= b, lam in (0, 3/b))
                 vs  exp(lam^2 nu / (2 (1 - lam b / 3)))
    unexpected:  E[e^{lam (mu - Z) + ((b lam + ln(1 - b lam)) / b^2) Z^2}]
                 (Z <= b, lam in [0, 1/b))  vs  1
    """
    vals = [float(v) for v in values]
    ps = [float(q) for q in probs]
    if len(vals) != len(ps) or not vals:
        raise ValueError("values and probs must be nonempty and equal length")
    if any(q < 0 for q in ps) or abs(math.fsum(ps) - 1.0) > 1e-9:
        raise ValueError("probs must be a probability vector")
    lam = float(lam)
    mu = math.fsum(v * q for v, q in zip(vals, ps))

    if lemma == "hoeffding":
        a, b = min(vals), max(vals)
        lhs = math.fsum(q * math.exp(lam * v) for v, q in zip(vals, ps))
        rhs = math.exp(lam * mu + lam * lam * (b - a) ** 2 / 8.0)
        return lhs, rhs

    if lemma == "bernstein":
        b = max(vals)
        if abs(mu) > 1e-9:
            raise ValueError("bernstein lemma requires a mean-zero variable")
        if b <= 0 or not 0.0 < lam < 3.0 / b:
            raise ValueError("bernstein lemma requires lam in (0, 3/b) with b > 0")
        nu = math.fsum(q * v * v for v, q in zip(vals, ps))
        lhs = math.fsum(q * math.exp(lam * v) for v, q in zip(vals, ps))
        exponent = lam * lam * nu / (2.0 * (1.0 - lam * b / 3.0))
        rhs = math.exp(exponent) if exponent < 700 else math.inf
        return lhs, rhs

    if lemma == "unexpected":
        b = max(vals)
        if b <= 0 or not 0.0 <= lam < 1.0 / b:
            raise ValueError("unexpected lemma requires lam in [0, 1/b) with b > 0")
        coeff = (b * lam + math.log1p(-b * lam)) / (b * b)
        lhs = math.fsum(
            q * math.exp(lam * (mu - v) + coeff * v * v) for v, q in zip(vals, ps))
        return lhs, 1.0

    raise ValueError(
        f"lemma must be 'hoeffding', 'bernstein' or 'unexpected', got {lemma!r}")
