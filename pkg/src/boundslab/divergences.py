"""Entropy and divergence primitives, numerical inverses, and relaxations.

Everything here is a pure function on plain floats (natural-log units
throughout); this is the shared numerical core for the confidence bounds in
the rest of the package.
"""
from __future__ import annotations

import math
from typing import Iterable, Sequence

# Bisection settings for kl_inverse: absolute tolerance on q with a hard
# iteration cap so results are deterministic across platforms.
BISECT_TOL = 1e-11
BISECT_MAX_ITER = 200

# How far a weight vector may be from summing to one before construction
# refuses to silently renormalize it.
NORMALIZATION_TOL = 1e-9


def _check_unit(x: float, name: str) -> float:
    x = float(x)
    if math.isnan(x):
        raise ValueError(f"{name} must not be NaN")
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"{name} must be in [0, 1], got {x}")
    return x


class ProbVec:
    """A finite probability distribution as an ordered weight vector.

    Weights within ``NORMALIZATION_TOL`` of summing to one are renormalized;
    anything further off is rejected.  Sub-normalized vectors (sum <= 1, used
    for confidence-budget priors) are allowed only with ``sub_normalized=True``
    and are kept as given.
    """

    __slots__ = ("_weights", "sub_normalized")

    def __init__(self, weights: Iterable[float], sub_normalized: bool = False):
        ws = [float(w) for w in weights]
        if len(ws) < 1:
            raise ValueError("ProbVec needs at least one weight")
        for w in ws:
            if math.isnan(w):
                raise ValueError("ProbVec weights must not be NaN")
            if w < 0.0:
                raise ValueError(f"ProbVec weights must be nonnegative, got {w}")
        total = math.fsum(ws)
        if sub_normalized:
            if total > 1.0 + NORMALIZATION_TOL:
                raise ValueError(f"sub-normalized weights sum to {total} > 1")
        else:
            if abs(total - 1.0) > NORMALIZATION_TOL:
                raise ValueError(f"weights sum to {total}, not 1")
            ws = [w / total for w in ws]
        self._weights = tuple(ws)
        self.sub_normalized = bool(sub_normalized)

    @property
    def weights(self) -> tuple:
        return self._weights

    def __len__(self) -> int:
        return len(self._weights)

    def __getitem__(self, i: int) -> float:
        return self._weights[i]

    def __iter__(self):
        return iter(self._weights)

    def __eq__(self, other) -> bool:
        return isinstance(other, ProbVec) and self._weights == other._weights

    def __repr__(self) -> str:
        return f"ProbVec({list(self._weights)!r})"


def binary_entropy(p: float) -> float:
    """Entropy of a Bernoulli(p), in nats: -p ln p - (1-p) ln(1-p)."""
    p = _check_unit(p, "p")
    total = 0.0
    if p > 0.0:
        total -= p * math.log(p)
    if p < 1.0:
        total -= (1.0 - p) * math.log(1.0 - p)
    return max(total, 0.0)


def binary_kl(p: float, q: float) -> float:
    """kl(p || q) between Bernoulli biases, with the usual 0 ln 0 conventions.

    Returns +inf when p puts mass where q has none.
    """
    p = _check_unit(p, "p")
    q = _check_unit(q, "q")
    if p == q:
        return 0.0
    total = 0.0
    if p > 0.0:
        if q == 0.0:
            return math.inf
        total += p * math.log(p / q)
    if p < 1.0:
        if q == 1.0:
            return math.inf
        total += (1.0 - p) * math.log((1.0 - p) / (1.0 - q))
    return max(total, 0.0)


def categorical_kl(rho: Sequence[float], pi: Sequence[float]) -> float:
    """KL(rho || pi) between two finite distributions of equal length."""
    r = list(rho)
    p = list(pi)
    if len(r) != len(p):
        raise ValueError(f"length mismatch: {len(r)} vs {len(p)}")
    total = 0.0
    for ri, pi_i in zip(r, p):
        ri = float(ri)
        pi_i = float(pi_i)
        if math.isnan(ri) or math.isnan(pi_i):
            raise ValueError("KL arguments must not be NaN")
        if ri == 0.0:
            continue
        if pi_i == 0.0:
            return math.inf
        total += ri * math.log(ri / pi_i)
    return total


def kl_inverse(p_hat: float, eps: float, direction: str = "upper") -> float:
    """Numerically invert kl(p_hat || q) <= eps.

    ``upper`` returns max{q in [p_hat, 1] : kl(p_hat||q) <= eps}; ``lower``
    the min over [0, p_hat].  Bisection works because kl(p_hat||q) is convex
    in q with a minimum of zero at q = p_hat, hence monotone on each side.
    """
    p_hat = _check_unit(p_hat, "p_hat")
    eps = float(eps)
    if math.isnan(eps) or eps < 0.0:
        raise ValueError(f"eps must be a nonnegative real, got {eps}")
    if direction not in ("upper", "lower"):
        raise ValueError(f"direction must be 'upper' or 'lower', got {direction!r}")

    if direction == "upper":
        if math.isinf(eps) or p_hat == 1.0:
            return 1.0
        if p_hat == 0.0:
            # kl(0||q) = -ln(1-q), solved in closed form.
            return 1.0 - math.exp(-eps)
        if binary_kl(p_hat, 1.0) <= eps:
            return 1.0
        lo, hi = p_hat, 1.0
        for _ in range(BISECT_MAX_ITER):
            if hi - lo <= BISECT_TOL:
                break
            mid = 0.5 * (lo + hi)
            if binary_kl(p_hat, mid) <= eps:
                lo = mid
            else:
                hi = mid
        return lo

    if math.isinf(eps) or p_hat == 0.0:
        return 0.0
    if p_hat == 1.0:
        # kl(1||q) = -ln q.
        return math.exp(-eps)
    if binary_kl(p_hat, 0.0) <= eps:
        return 0.0
    lo, hi = 0.0, p_hat
    for _ in range(BISECT_MAX_ITER):
        if hi - lo <= BISECT_TOL:
            break
        mid = 0.5 * (lo + hi)
        if binary_kl(p_hat, mid) <= eps:
            hi = mid
        else:
            lo = mid
    return hi


def pinsker_relaxations(p_hat: float, eps: float) -> tuple:
    """Closed-form relaxations of the kl upper/lower inverse.

    Returns (plain, refined_upper, refined_lower):
      plain          = min(1, p_hat + sqrt(eps/2))
      refined_upper  = min(1, p_hat + sqrt(2 p_hat eps) + 2 eps)
      refined_lower  = max(0, p_hat - sqrt(2 p_hat eps))
    """
    p_hat = _check_unit(p_hat, "p_hat")
    eps = float(eps)
    if math.isnan(eps) or eps < 0.0:
        raise ValueError(f"eps must be a nonnegative real, got {eps}")
    plain = min(1.0, p_hat + math.sqrt(eps / 2.0))
    refined_upper = min(1.0, p_hat + math.sqrt(2.0 * p_hat * eps) + 2.0 * eps)
    refined_lower = max(0.0, p_hat - math.sqrt(2.0 * p_hat * eps))
    return plain, refined_upper, refined_lower


def binomial_entropy_bounds(n: int, k: int, tight: bool = False) -> tuple:
    """Entropy-based lower/upper bounds on the binomial coefficient C(n, k).

    Loose: e^{n H(k/n)} / (n+1)  <=  C(n,k)  <=  e^{n H(k/n)}.
    Tight (Stirling-based, requires 1 <= k <= n-1):
      (1/2) sqrt(n / (2 k (n-k))) e^{n H(k/n)}
        <= C(n,k) <=
      (e^{1/(12n)} / sqrt(2 pi)) sqrt(n / (k (n-k))) e^{n H(k/n)}.
    """
    n = int(n)
    k = int(k)
    if n < 1 or not 0 <= k <= n:
        raise ValueError(f"need 0 <= k <= n with n >= 1, got n={n}, k={k}")
    ent = n * binary_entropy(k / n)
    if not tight:
        return math.exp(ent) / (n + 1), math.exp(ent)
    if not 1 <= k <= n - 1:
        raise ValueError("tight bounds need 1 <= k <= n-1")
    lower = 0.5 * math.sqrt(n / (2.0 * k * (n - k))) * math.exp(ent)
    upper = (math.exp(1.0 / (12.0 * n)) / math.sqrt(2.0 * math.pi)) \
        * math.sqrt(n / (k * (n - k))) * math.exp(ent)
    return lower, upper
