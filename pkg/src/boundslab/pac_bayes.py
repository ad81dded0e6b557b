"""Generalization bounds over finite hypothesis classes and their minimization.

Hypotheses are represented purely by loss/prediction tables, so every quantity
in a bound is exactly computable.  Covers Occam-style union bounds, the
PAC-Bayes-kl / lambda / split-kl / Unexpected-Bernstein inequalities, weighted
majority-vote bounds (first order, tandem, disagreement), posterior
construction by alternating minimization, and the recursive (stage-wise)
bound built on excess losses.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .concentration import BoundResult, LambdaGrid, SplitGrid
from .divergences import ProbVec, categorical_kl, kl_inverse


class LossTable:
    """An m x n matrix of per-hypothesis, per-example losses in [0, 1].

    Optionally carries a matching matrix of binary predictions (+-1) for
    majority-vote quantities, and per-hypothesis validation masks (boolean
    column selectors) for bounds that must not evaluate a hypothesis on the
    data it was trained on.
    """

    def __init__(self, losses, predictions=None, masks=None):
        self.losses = np.asarray(losses, dtype=float)
        if self.losses.ndim != 2:
            raise ValueError("losses must be a 2-D matrix")
        if np.isnan(self.losses).any():
            raise ValueError("losses must not contain NaN")
        if self.losses.min() < 0.0 or self.losses.max() > 1.0:
            raise ValueError("losses must lie in [0, 1]")
        self.predictions = None
        if predictions is not None:
            preds = np.asarray(predictions)
            if preds.shape != self.losses.shape:
                raise ValueError("predictions shape must match losses")
            if not np.isin(preds, (-1, 1)).all():
                raise ValueError("predictions must be +-1")
            self.predictions = preds.astype(int)
        self.masks = None
        if masks is not None:
            mk = [np.asarray(row, dtype=bool) for row in masks]
            if len(mk) != self.losses.shape[0]:
                raise ValueError("one mask per hypothesis required")
            for row in mk:
                if row.shape != (self.losses.shape[1],):
                    raise ValueError("each mask must select columns")
                if not row.any():
                    raise ValueError("masks must keep at least one column")
            self.masks = mk

    @property
    def m(self) -> int:
        return self.losses.shape[0]

    @property
    def n(self) -> int:
        return self.losses.shape[1]

    def emp_losses(self) -> np.ndarray:
        """Per-hypothesis empirical loss; masked row mean when masks are set."""
        if self.masks is None:
            return self.losses.mean(axis=1)
        return np.array([self.losses[h, self.masks[h]].mean()
                         for h in range(self.m)])

    def tandem_losses(self) -> np.ndarray:
        """m x m matrix of empirical tandem losses: the rate at which both
        hypotheses err on the same example.  With masks, entry (h, h') is
        evaluated on the overlap of the two validation sets."""
        if self.predictions is None:
            raise ValueError("tandem losses need a prediction table")
        err = self.losses
        if not np.isin(err, (0.0, 1.0)).all():
            raise ValueError("tandem losses are defined for zero-one losses")
        if self.masks is None:
            return err @ err.T / self.n
        out = np.empty((self.m, self.m))
        for h in range(self.m):
            for g in range(self.m):
                overlap = self.masks[h] & self.masks[g]
                if not overlap.any():
                    raise ValueError("empty validation overlap")
                out[h, g] = (err[h, overlap] * err[g, overlap]).mean()
        return out

    def disagreements(self) -> np.ndarray:
        """m x m matrix of empirical disagreement rates between predictions."""
        if self.predictions is None:
            raise ValueError("disagreements need a prediction table")
        agree = self.predictions @ self.predictions.T  # in [-n, n]
        return (self.n - agree) / (2.0 * self.n)

    def min_pairwise_overlap(self) -> int:
        if self.masks is None:
            return self.n
        best = self.n
        for h in range(self.m):
            for g in range(self.m):
                best = min(best, int((self.masks[h] & self.masks[g]).sum()))
        return best


@dataclass(frozen=True)
class PacBayesQuery:
    """Posterior, prior, sample size and confidence for one bound evaluation."""

    rho: ProbVec
    pi: ProbVec
    n: int
    delta: float

    def __post_init__(self):
        if len(self.rho) != len(self.pi):
            raise ValueError("rho and pi must have equal length")
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must be in (0, 1)")
        if self.n < 1:
            raise ValueError("n must be >= 1")

    @property
    def kl_term(self) -> float:
        return categorical_kl(self.rho, self.pi)


def occam_bound(table: LossTable, pi: ProbVec, delta: float,
                flavor: str = "hoeffding") -> list:
    """Per-hypothesis bounds with the confidence budget delta distributed
    according to pi (which may be sub-normalized).

    hoeffding: L_hat(h) + sqrt(ln(1/(pi(h) delta)) / (2n))
    kl:        kl_inverse(L_hat(h), ln(1/(pi(h) delta)) / n, upper)
    A hypothesis with pi(h) = 0 gets the vacuous bound 1.
    """
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must be in (0, 1)")
    if flavor not in ("hoeffding", "kl"):
        raise ValueError(f"flavor must be 'hoeffding' or 'kl', got {flavor!r}")
    if len(pi) != table.m:
        raise ValueError("pi length must match the number of hypotheses")
    if math.fsum(pi.weights) > 1.0 + 1e-9:
        raise ValueError("pi must sum to at most 1")
    n = table.n
    results = []
    for h, emp in enumerate(table.emp_losses()):
        w = pi[h]
        if w == 0.0:
            results.append(BoundResult(1.0, delta, f"occam-{flavor}",
                                       {"pi_h": 0.0, "emp_loss": float(emp)}))
            continue
        budget = math.log(1.0 / (w * delta))
        if flavor == "hoeffding":
            value = min(1.0, float(emp) + math.sqrt(budget / (2.0 * n)))
        else:
            value = kl_inverse(float(emp), budget / n, "upper")
        results.append(BoundResult(value, delta, f"occam-{flavor}",
                                   {"pi_h": w, "emp_loss": float(emp)}))
    return results


def tree_prior(depth: int) -> float:
    """Confidence-budget prior for binary decision trees of a given depth:
    2^{-(d+1)} * 2^{-2^d} (geometric over depths, uniform within a depth).

    Computed through the log-space exponent so deep trees underflow to 0.0
    instead of overflowing intermediate integers.
    """
    depth = int(depth)
    if depth < 0:
        raise ValueError("depth must be nonnegative")
    if depth > 10:
        # exponent below -745 ln 2; the double-precision value is exactly 0
        return 0.0
    return math.exp(-(depth + 1 + 2.0 ** depth) * math.log(2.0))


def pb_kl_bound(q: PacBayesQuery, emp_loss: float) -> BoundResult:
    """PAC-Bayes-kl upper bound:
    kl_inverse(emp_loss, (KL(rho||pi) + ln(2 sqrt(n)/delta)) / n, upper)."""
    if not 0.0 <= emp_loss <= 1.0:
        raise ValueError("emp_loss must be in [0, 1]")
    kl_term = q.kl_term
    if math.isinf(kl_term):
        return BoundResult(1.0, q.delta, "pb-kl", {"kl": kl_term})
    eps = (kl_term + math.log(2.0 * math.sqrt(q.n) / q.delta)) / q.n
    value = kl_inverse(emp_loss, eps, "upper")
    return BoundResult(value, q.delta, "pb-kl",
                       {"kl": kl_term, "eps": eps, "emp_loss": emp_loss})


def pb_lambda_bound(q: PacBayesQuery, emp_loss: float, *,
                    lam: Optional[float] = None,
                    gamma: Optional[float] = None,
                    side: str = "upper") -> BoundResult:
    """PAC-Bayes-lambda relaxation.

    upper (lam in (0,2)):
        emp/(1 - lam/2) + (KL + ln(2 sqrt(n)/delta)) / (lam (1 - lam/2) n)
    lower (gamma > 0), clipped at 0:
        (1 - gamma/2) emp - (KL + ln(2 sqrt(n)/delta)) / (gamma n)
    The upper value may exceed 1 (vacuous but valid); it is returned raw.
    """
    kl_term = q.kl_term
    complexity = kl_term + math.log(2.0 * math.sqrt(q.n) / q.delta)
    if side == "upper":
        if lam is None or not 0.0 < lam < 2.0:
            raise ValueError("upper side needs lam in (0, 2)")
        value = emp_loss / (1.0 - lam / 2.0) \
            + complexity / (lam * (1.0 - lam / 2.0) * q.n)
        return BoundResult(value, q.delta, "pb-lambda-upper",
                           {"kl": kl_term, "lambda": lam})
    if side == "lower":
        if gamma is None or gamma <= 0.0:
            raise ValueError("lower side needs gamma > 0")
        value = max(0.0, (1.0 - gamma / 2.0) * emp_loss - complexity / (gamma * q.n))
        return BoundResult(value, q.delta, "pb-lambda-lower",
                           {"kl": kl_term, "gamma": gamma})
    raise ValueError(f"side must be 'upper' or 'lower', got {side!r}")


def gibbs_posterior(pi: ProbVec, losses: Sequence[float], scale: float) -> ProbVec:
    """The distribution rho(h) proportional to pi(h) e^{-scale * loss(h)},
    computed with subtract-min stabilization; the exact minimizer of
    scale * E_rho[loss] + KL(rho || pi)."""
    scale = float(scale)
    if scale < 0.0:
        raise ValueError("scale must be nonnegative")
    ls = np.asarray(list(losses), dtype=float)
    if len(ls) != len(pi):
        raise ValueError("losses length must match pi")
    w = np.asarray(pi.weights)
    if not w.any():
        raise ValueError("pi must have positive mass somewhere")
    weights = w * np.exp(-scale * (ls - ls.min()))
    return ProbVec(weights / weights.sum())


def optimal_lambda(emp_loss: float, kl_term: float, n: int, delta: float) -> float:
    """Closed-form minimizer of the PAC-Bayes-lambda upper bound in lam:
    2 / (sqrt(2 n emp / (KL + ln(2 sqrt(n)/delta)) + 1) + 1), always in (0, 1]."""
    if emp_loss < 0 or kl_term < 0:
        raise ValueError("inputs must be nonnegative")
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must be in (0, 1)")
    complexity = kl_term + math.log(2.0 * math.sqrt(n) / delta)
    return _optimal_lambda_raw(emp_loss, complexity, n)


def _optimal_lambda_raw(emp_loss: float, complexity: float, n: int) -> float:
    return 2.0 / (math.sqrt(2.0 * n * emp_loss / complexity + 1.0) + 1.0)


@dataclass(frozen=True)
class MinimizationResult:
    rho: ProbVec
    lam: float
    bound: float
    trace: tuple


def _lambda_objective(emp, kl_term, complexity, lam, n):
    return emp / (1.0 - lam / 2.0) \
        + (kl_term + complexity) / (lam * (1.0 - lam / 2.0) * n)


def _alternating_minimize_core(pi: ProbVec, losses: np.ndarray, n_eff: int,
                               complexity: float, rel_tol: float = 1e-9,
                               max_iter: int = 1000) -> MinimizationResult:
    """Alternate the closed-form Gibbs update for rho with the closed-form
    lambda update until the bound's relative decrease falls below rel_tol.
    ``complexity`` is the log confidence budget added to KL(rho||pi)."""
    rho = pi
    trace = []
    emp = float(np.dot(rho.weights, losses))
    lam = _optimal_lambda_raw(emp, complexity, n_eff)
    bound = _lambda_objective(emp, 0.0, complexity, lam, n_eff)
    trace.append(bound)
    for _ in range(max_iter):
        rho = gibbs_posterior(pi, losses, scale=lam * n_eff)
        emp = float(np.dot(rho.weights, losses))
        kl_term = categorical_kl(rho, pi)
        lam = _optimal_lambda_raw(emp, kl_term + complexity, n_eff)
        new_bound = _lambda_objective(emp, kl_term, complexity, lam, n_eff)
        trace.append(new_bound)
        if bound - new_bound < rel_tol * max(bound, 1e-300):
            bound = min(bound, new_bound)
            break
        bound = new_bound
    return MinimizationResult(rho, lam, bound, tuple(trace))


def alternating_minimize(pi: ProbVec, table: LossTable, delta: float,
                         r: int = 0) -> MinimizationResult:
    """Minimize the PAC-Bayes-lambda upper bound over (rho, lambda).

    With r = 0 the bound is evaluated on full-sample losses with denominator
    n.  With r > 0 (aggregation of hypotheses each trained on r examples),
    the table must carry validation masks and the denominator becomes n - r.
    """
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must be in (0, 1)")
    if len(pi) != table.m:
        raise ValueError("pi length must match the number of hypotheses")
    if r < 0 or r >= table.n:
        raise ValueError("r must be in [0, n)")
    if r > 0:
        if table.masks is None:
            raise ValueError("aggregation (r > 0) needs validation masks")
        for mask in table.masks:
            if int(mask.sum()) != table.n - r:
                raise ValueError("each validation mask must keep n - r columns")
    n_eff = table.n - r
    complexity = math.log(2.0 * math.sqrt(n_eff) / delta)
    return _alternating_minimize_core(pi, table.emp_losses(), n_eff, complexity)


def mv_predict(rho: ProbVec, predictions: Sequence[int]) -> int:
    """rho-weighted majority vote over +-1 predictions; ties go to +1."""
    if len(predictions) != len(rho):
        raise ValueError("predictions length must match rho")
    total = math.fsum(w * p for w, p in zip(rho.weights, predictions))
    return 1 if total >= 0.0 else -1


def mv_bound(kind: str, table: LossTable, q: PacBayesQuery,
             unlabeled_predictions=None, lam: float = 1.0,
             gamma: float = 1.0) -> BoundResult:
    """Bounds on the loss of the rho-weighted majority vote.

    first_order:  2 x PAC-Bayes-kl bound on E_rho[L_hat].
    tandem:       4 x lambda-form bound on the expected tandem loss, with
                  complexity 2 KL + ln(2 sqrt(n)/delta); n is the minimum
                  pairwise validation overlap when masks are present.
    disagreement: 4 x upper bound on E_rho[L_hat] (budget ln(4 sqrt(n)/delta))
                  minus 2 x lower bound on the expected disagreement
                  (complexity 2 KL + ln(4 sqrt(m)/delta)), where the
                  disagreements may come from a separate unlabeled table.
    """
    rho_w = np.asarray(q.rho.weights)
    if kind == "first_order":
        emp = float(np.dot(rho_w, table.emp_losses()))
        inner = pb_kl_bound(q, emp)
        return BoundResult(2.0 * inner.value, q.delta, "mv-first-order",
                           {"gibbs_bound": inner.value, "emp_loss": emp})

    if kind == "tandem":
        if not 0.0 < lam < 2.0:
            raise ValueError("tandem needs lam in (0, 2)")
        tandem = table.tandem_losses()
        emp_tandem = float(rho_w @ tandem @ rho_w)
        n_eff = table.min_pairwise_overlap()
        complexity = 2.0 * q.kl_term + math.log(2.0 * math.sqrt(n_eff) / q.delta)
        inner = emp_tandem / (1.0 - lam / 2.0) \
            + complexity / (lam * (1.0 - lam / 2.0) * n_eff)
        return BoundResult(4.0 * inner, q.delta, "mv-tandem",
                           {"emp_tandem": emp_tandem, "lambda": lam,
                            "n_eff": n_eff})

    if kind == "disagreement":
        if not 0.0 < lam < 2.0 or gamma <= 0.0:
            raise ValueError("disagreement needs lam in (0, 2) and gamma > 0")
        emp = float(np.dot(rho_w, table.emp_losses()))
        n = table.n
        kl_term = q.kl_term
        upper = emp / (1.0 - lam / 2.0) \
            + (kl_term + math.log(4.0 * math.sqrt(n) / q.delta)) \
            / (lam * (1.0 - lam / 2.0) * n)
        if unlabeled_predictions is not None:
            dis_table = LossTable(np.zeros_like(np.asarray(unlabeled_predictions),
                                                dtype=float),
                                  predictions=unlabeled_predictions)
        else:
            dis_table = table
        dis = dis_table.disagreements()
        emp_dis = float(rho_w @ dis @ rho_w)
        m_eff = dis_table.n
        lower = (1.0 - gamma / 2.0) * emp_dis \
            - (2.0 * kl_term + math.log(4.0 * math.sqrt(m_eff) / q.delta)) \
            / (gamma * m_eff)
        return BoundResult(4.0 * upper - 2.0 * lower, q.delta, "mv-disagreement",
                           {"emp_loss": emp, "emp_disagreement": emp_dis,
                            "lambda": lam, "gamma": gamma})

    raise ValueError(
        f"kind must be 'first_order', 'tandem' or 'disagreement', got {kind!r}")


def pb_split_kl_bound(grid: SplitGrid, segment_means: Sequence[float],
                      q: PacBayesQuery) -> BoundResult:
    """PAC-Bayes-split-kl bound for losses on the grid b_0 < ... < b_K:
    b_0 + sum_j alpha_j kl_inverse(E_rho[F_hat_{|j}],
                                   (KL + ln(2 K sqrt(n)/delta)) / n, upper)."""
    means = [float(x) for x in segment_means]
    if len(means) != grid.K:
        raise ValueError("one segment mean per grid segment required")
    kl_term = q.kl_term
    if math.isinf(kl_term):
        return BoundResult(grid.points[-1], q.delta, "pb-split-kl",
                           {"kl": kl_term})
    eps = (kl_term + math.log(2.0 * grid.K * math.sqrt(q.n) / q.delta)) / q.n
    value = grid.points[0]
    for alpha, mean in zip(grid.alphas, means):
        value += alpha * kl_inverse(mean, eps, "upper")
    return BoundResult(value, q.delta, "pb-split-kl",
                       {"kl": kl_term, "eps": eps,
                        "segment_means": tuple(means)})


def pb_unexpected_bernstein_bound(q: PacBayesQuery, emp_loss: float,
                                  emp_sq_loss: float,
                                  grid: LambdaGrid) -> BoundResult:
    """PAC-Bayes-Unexpected-Bernstein bound with a lambda grid in (0, 1/2]:
    emp_loss + min over lam of (lam * emp_sq_loss + (KL + ln(k/delta))/(n lam))."""
    if any(not 0.0 < lam <= 0.5 for lam in grid.lambdas):
        raise ValueError("lambda grid must lie in (0, 1/2]")
    if emp_sq_loss < 0.0:
        raise ValueError("emp_sq_loss must be nonnegative")
    kl_term = q.kl_term
    budget = kl_term + math.log(grid.k / q.delta)
    best = math.inf
    best_lam = grid.lambdas[0]
    for lam in grid.lambdas:
        value = lam * emp_sq_loss + budget / (q.n * lam)
        if value < best:
            best = value
            best_lam = lam
    return BoundResult(emp_loss + best, q.delta, "pb-unexpected-bernstein",
                       {"kl": kl_term, "lambda": best_lam, "k": grid.k})


def geometric_split(n: int, T: int) -> list:
    """Split n into stage sizes [n_1, ..., n_T] with |S_T| = ceil(n/2),
    |S_{T-1}| = ceil(remaining/2), ..., and the remainder going to S_1."""
    if T < 1:
        raise ValueError("T must be >= 1")
    if n < 2 ** (T - 1):
        raise ValueError(f"n={n} too small for {T} geometric stages")
    sizes = []
    remaining = n
    for _ in range(T - 1):
        s = math.ceil(remaining / 2)
        sizes.append(s)
        remaining -= s
    sizes.append(remaining)
    sizes.reverse()
    if min(sizes) < 1:
        raise ValueError("geometric split produced an empty stage")
    return sizes


@dataclass(frozen=True)
class RecursiveStage:
    """Per-stage record of the recursive bound computation."""

    t: int
    n_t: int
    n_val: int
    gamma_t: float
    pi_star: ProbVec
    levels: tuple
    excess_bound: Optional[float]
    bound: float


def recursive_pb(table: LossTable, delta: float, T: int,
                 gammas: Optional[Sequence[float]] = None,
                 pi0: Optional[ProbVec] = None, seed: int = 0,
                 reference_draws: Optional[dict] = None) -> list:
    """Stage-wise recursive bound on E_{pi_T*}[L(h)].

    The sample is split geometrically into S_1..S_T (column order).  Stage 1
    trains pi_1* on S_1 and certifies it on all of S with budget
    ln(2 T sqrt(n)/delta).  Each later stage t draws one reference hypothesis
    per validation example from pi_{t-1}* (stage-scoped seeded stream, or the
    injected ``reference_draws[t]``), forms the four-valued excess losses
    f = loss(h) - gamma_t loss(h'), trains pi_t* on the S_t portion, and
    certifies E_t with the split-kl form at budget ln(6 T sqrt(n_val)/delta),
    recomposing B_t = E_t + gamma_t B_{t-1}.  Returns one BoundResult per
    stage, each carrying its RecursiveStage record.
    """
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must be in (0, 1)")
    m, n = table.m, table.n
    sizes = geometric_split(n, T)
    starts = np.concatenate(([0], np.cumsum(sizes))).astype(int)
    if gammas is None:
        gammas = [0.5] * T
    gammas = [float(g) for g in gammas]
    if len(gammas) != T:
        raise ValueError("need one gamma per stage")
    if any(not 0.0 <= g <= 1.0 for g in gammas):
        raise ValueError("each gamma must be in [0, 1]")
    pi_prev = pi0 if pi0 is not None else ProbVec([1.0 / m] * m)
    if len(pi_prev) != m:
        raise ValueError("pi0 length must match the number of hypotheses")
    seed_seq = np.random.SeedSequence(seed)
    stage_seeds = seed_seq.spawn(T)
    losses = table.losses

    results = []
    bound_prev = None
    for t in range(1, T + 1):
        start, end = starts[t - 1], starts[t]
        n_t = end - start
        val_cols = slice(start, n)
        n_val = n - start

        if t == 1:
            complexity = math.log(2.0 * T * math.sqrt(n) / delta)
            train_losses = losses[:, start:end].mean(axis=1)
            fit = _alternating_minimize_core(pi_prev, train_losses, n_val,
                                             complexity)
            pi_star = fit.rho
            emp = float(np.dot(pi_star.weights, losses.mean(axis=1)))
            kl_term = categorical_kl(pi_star, pi_prev)
            bound = kl_inverse(emp, (kl_term + complexity) / n_val, "upper")
            stage = RecursiveStage(t, n_t, n_val, 0.0, pi_star, (0.0, 1.0),
                                   None, bound)
        else:
            gamma = gammas[t - 1]
            if reference_draws is not None and t in reference_draws:
                draws = np.asarray(reference_draws[t], dtype=int)
                if draws.shape != (n_val,):
                    raise ValueError("reference draws must cover the "
                                     "validation columns of the stage")
            else:
                rng = np.random.default_rng(stage_seeds[t - 1])
                draws = rng.choice(m, size=n_val, p=np.asarray(pi_prev.weights))
            # excess losses f[h, i] = loss(h, i) - gamma * loss(h'_i, i)
            ref_losses = losses[draws, np.arange(start, n)]
            excess = losses[:, val_cols] - gamma * ref_losses[None, :]
            levels = (-gamma, 0.0, 1.0 - gamma, 1.0)

            complexity = math.log(6.0 * T * math.sqrt(n_val) / delta)
            # construct pi_t* on the S_t portion via the [0,1]-rescaled
            # lambda surrogate, with the evaluation denominator n_val
            const_losses = (excess[:, :n_t].mean(axis=1) + gamma) / (1.0 + gamma)
            fit = _alternating_minimize_core(pi_prev, const_losses, n_val,
                                             complexity)
            pi_star = fit.rho

            kl_term = categorical_kl(pi_star, pi_prev)
            eps = (kl_term + complexity) / n_val
            rho_w = np.asarray(pi_star.weights)
            excess_bound = -gamma
            for j in range(1, 4):
                width = levels[j] - levels[j - 1]
                if width == 0.0:
                    continue
                seg = (excess >= levels[j] - 1e-12).mean(axis=1)
                seg_mean = float(np.dot(rho_w, seg))
                excess_bound += width * kl_inverse(seg_mean, eps, "upper")
            bound = excess_bound + gamma * bound_prev
            stage = RecursiveStage(t, n_t, n_val, gamma, pi_star, levels,
                                   excess_bound, bound)

        results.append(BoundResult(stage.bound, delta, "recursive-pb",
                                   {"stage": stage}))
        pi_prev = pi_star
        bound_prev = stage.bound
    return results
