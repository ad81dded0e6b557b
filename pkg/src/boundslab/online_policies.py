"""Online decision rules for repeated games against losses in [0, 1].

Module-level functions give the closed-form pieces (exponential-weights
distributions, learning rates, confidence indexes, schedules); the policy
classes wrap them into stateful players for the simulation drivers in
:mod:`boundslab.environments`.  Everything is deterministic given the
caller-supplied random stream; ties always break toward the lowest index.
"""
from __future__ import annotations

import math
from typing import Callable, Sequence

from boundslab.divergences import ProbVec

HEDGE_ETA_VARIANTS = ("simple", "tight", "anytime_simple", "anytime_tight")


def hedge_distribution(cum_losses: Sequence[float], eta: float) -> ProbVec:
    """Exponential-weights distribution p(a) ∝ exp(-eta * L(a)).

    Stabilized by subtracting the minimum cumulative loss, which also makes
    the output invariant under shifting all losses by a constant.
    """
    if eta <= 0.0:
        raise ValueError(f"eta must be positive, got {eta}")
    losses = [float(v) for v in cum_losses]
    if not losses:
        raise ValueError("cum_losses must be nonempty")
    low = min(losses)
    weights = [math.exp(-eta * (v - low)) for v in losses]
    total = sum(weights)
    return ProbVec([w / total for w in weights])


def hedge_eta(K: int, *, T: int | None = None, t: int | None = None,
              variant: str = "simple") -> float:
    """Learning rate for Hedge: fixed-horizon ("simple", "tight") or
    round-dependent ("anytime_simple", "anytime_tight")."""
    if K < 2:
        raise ValueError(f"need at least two arms, got K={K}")
    if variant not in HEDGE_ETA_VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    log_k = math.log(K)
    if variant in ("simple", "tight"):
        if T is None or T < 1:
            raise ValueError("fixed-horizon variants need T >= 1")
        base = math.sqrt(2.0 * log_k / T)
        return base if variant == "simple" else 2.0 * base
    if t is None or t < 1:
        raise ValueError("anytime variants need t >= 1")
    base = math.sqrt(log_k / t)
    return base if variant == "anytime_simple" else 2.0 * base


def ftl_choice(cum_losses: Sequence[float]) -> int:
    """Follow-the-leader: the arm with the smallest cumulative loss so far,
    lowest index on ties."""
    if len(cum_losses) == 0:
        raise ValueError("cum_losses must be nonempty")
    best, best_val = 0, float(cum_losses[0])
    for a in range(1, len(cum_losses)):
        if float(cum_losses[a]) < best_val:
            best, best_val = a, float(cum_losses[a])
    return best


def importance_weighted_loss(loss: float, p_chosen: float, chosen: bool) -> float:
    """Inverse-propensity loss estimate: loss/p if this arm was the one
    played, else 0.  Unbiased for the true loss under the playing
    distribution."""
    if not chosen:
        return 0.0
    if p_chosen <= 0.0:
        raise ValueError("cannot importance-weight a zero-probability arm")
    if not 0.0 <= loss <= 1.0:
        raise ValueError(f"loss must be in [0, 1], got {loss}")
    return loss / p_chosen


def exp4_mix(expert_weights: ProbVec, advice: Sequence[Sequence[float]],
             ) -> tuple[ProbVec, Callable[[Sequence[float]], list[float]]]:
    """Mix expert advice into an arm distribution.

    ``advice`` is an N x K row-stochastic matrix (one ProbVec-like row per
    expert).  Returns the mixture p(a) = sum_h w(h) q_h(a) and a projector
    mapping an arm-level estimated-loss vector to expert-level losses
    l̃_h = sum_a q_h(a) l̃_a.
    """
    rows = [ProbVec(row) if not isinstance(row, ProbVec) else row for row in advice]
    if len(rows) != len(expert_weights):
        raise ValueError("one advice row per expert required")
    K = len(rows[0])
    if any(len(row) != K for row in rows):
        raise ValueError("advice rows must share one arm count")
    mixture = [
        sum(expert_weights[h] * rows[h][a] for h in range(len(rows)))
        for a in range(K)
    ]
    total = sum(mixture)
    p = ProbVec([v / total for v in mixture])

    def project(arm_losses: Sequence[float]) -> list[float]:
        if len(arm_losses) != K:
            raise ValueError("arm-loss vector has wrong length")
        return [
            sum(row[a] * float(arm_losses[a]) for a in range(K))
            for row in rows
        ]

    return p, project


def ucb_index(mu_hat: float, t: int, n_pulls: int,
              parametrization: str = "original") -> float:
    """Upper confidence index mu_hat + radius for an arm pulled ``n_pulls``
    times by round ``t``.  "original" uses sqrt(3 ln t / (2 N)); "improved"
    uses sqrt(ln t / N)."""
    if n_pulls < 1:
        raise ValueError("arm must have been played at least once")
    if t < 1:
        raise ValueError(f"round index must be >= 1, got {t}")
    if parametrization == "original":
        radius = math.sqrt(3.0 * math.log(t) / (2.0 * n_pulls))
    elif parametrization == "improved":
        radius = math.sqrt(math.log(t) / n_pulls)
    else:
        raise ValueError(f"unknown parametrization {parametrization!r}")
    return mu_hat + radius


def epsilon_first_schedule(gap: float, T: int) -> tuple[float, int]:
    """Exploration budget for the two-armed explore-then-commit rule.

    Returns (epsilon, exploration_rounds) with epsilon = max(0,
    4 ln(T gap^2) / (T gap^2)) and the round count rounded up to an even
    number, capped at T.
    """
    if not 0.0 < gap <= 1.0:
        raise ValueError(f"gap must be in (0, 1], got {gap}")
    if T < 1:
        raise ValueError(f"T must be >= 1, got {T}")
    scale = T * gap * gap
    eps = max(0.0, 4.0 * math.log(scale) / scale) if scale > 0 else 0.0
    rounds = min(T, 2 * math.ceil(eps * T / 2.0))
    return eps, rounds


def doubling_schedule(t: int, K: int) -> tuple[int, float, bool]:
    """Doubling-trick period index, per-period Hedge rate and reset flag.

    Period m covers rounds [2^m, 2^{m+1}); the rate is the tight fixed-horizon
    rate for horizon 2^m and a reset happens exactly at period boundaries.
    """
    if t < 1:
        raise ValueError(f"t must be >= 1, got {t}")
    m = t.bit_length() - 1
    eta_m = math.sqrt(8.0 * math.log(K) / float(2 ** m))
    return m, eta_m, t == 2 ** m


def sample_arm(dist: Sequence[float], u: float) -> int:
    """Inverse-CDF draw from a distribution over arm indexes with a single
    uniform ``u`` in [0, 1)."""
    cum = 0.0
    for a, w in enumerate(dist):
        cum += float(w)
        if u < cum:
            return a
    return len(dist) - 1


class HedgePolicy:
    """Full-information exponential weights with a pluggable rate schedule.

    ``variant`` picks the rate: "simple"/"tight" need a horizon ``T``;
    "anytime_simple"/"anytime_tight" use the running round; ``doubling``
    restarts a tight fixed-horizon rate on periods of doubling length.
    An explicit ``eta`` overrides the schedule.
    """

    def __init__(self, K: int, *, variant: str = "anytime_tight",
                 eta: float | None = None, T: int | None = None,
                 doubling: bool = False) -> None:
        if K < 2:
            raise ValueError(f"need at least two arms, got K={K}")
        if eta is None and not doubling:
            # validate the schedule eagerly so config errors surface early
            hedge_eta(K, T=T, t=1, variant=variant)
        self.K = K
        self.variant = variant
        self.eta = eta
        self.T = T
        self.doubling = doubling
        self.cum_losses = [0.0] * K
        self.t = 0  # completed rounds
        self._last_reset = 0

    def _current_eta(self) -> float:
        round_t = self.t + 1
        if self.doubling:
            _, eta_m, reset = doubling_schedule(round_t, self.K)
            if reset and self._last_reset != round_t:
                self.cum_losses = [0.0] * self.K
                self._last_reset = round_t
            return eta_m
        if self.eta is not None:
            return self.eta
        return hedge_eta(self.K, T=self.T, t=round_t, variant=self.variant)

    def distribution(self) -> ProbVec:
        eta = self._current_eta()  # may reset losses at a period boundary
        return hedge_distribution(self.cum_losses, eta)

    def act(self, rng) -> int:
        return sample_arm(self.distribution(), rng.random())

    def observe(self, losses: Sequence[float]) -> None:
        """Consume the full loss column for the current round."""
        if len(losses) != self.K:
            raise ValueError("loss column has wrong length")
        self._current_eta()  # applies any pending doubling reset
        for a in range(self.K):
            self.cum_losses[a] += float(losses[a])
        self.t += 1


class FTLPolicy:
    """Deterministic follow-the-leader over full-information feedback."""

    def __init__(self, K: int) -> None:
        if K < 1:
            raise ValueError(f"need at least one arm, got K={K}")
        self.K = K
        self.cum_losses = [0.0] * K
        self.t = 0

    def act(self, rng=None) -> int:
        return ftl_choice(self.cum_losses)

    def observe(self, losses: Sequence[float]) -> None:
        if len(losses) != self.K:
            raise ValueError("loss column has wrong length")
        for a in range(self.K):
            self.cum_losses[a] += float(losses[a])
        self.t += 1


class EXP3Policy:
    """Bandit exponential weights.

    The "losses" variant plays Hedge on importance-weighted loss estimates;
    with no explicit ``eta`` it uses the anytime rate sqrt(ln K / (t K)), or
    the fixed rate sqrt(2 ln K / (K T)) when a horizon ``T`` is given.  The
    "rewards" variant mixes exponential weights on importance-weighted
    rewards with an explicit uniform-exploration floor eta/K and requires
    eta in (0, 1).
    """

    def __init__(self, K: int, *, variant: str = "losses",
                 eta: float | None = None, T: int | None = None) -> None:
        if K < 2:
            raise ValueError(f"need at least two arms, got K={K}")
        if variant not in ("losses", "rewards"):
            raise ValueError(f"unknown variant {variant!r}")
        if variant == "rewards":
            if eta is None or not 0.0 < eta < 1.0:
                raise ValueError("rewards variant needs eta in (0, 1)")
        elif eta is not None and eta <= 0.0:
            raise ValueError(f"eta must be positive, got {eta}")
        self.K = K
        self.variant = variant
        self.eta = eta
        self.T = T
        self.cum_estimates = [0.0] * K  # losses or rewards, per variant
        self.t = 0
        self._p_last: ProbVec | None = None

    def _current_eta(self) -> float:
        if self.eta is not None:
            return self.eta
        if self.T is not None:
            return math.sqrt(2.0 * math.log(self.K) / (self.K * self.T))
        return math.sqrt(math.log(self.K) / ((self.t + 1) * self.K))

    def distribution(self) -> ProbVec:
        eta = self._current_eta()
        if self.variant == "losses":
            return hedge_distribution(self.cum_estimates, eta)
        # rewards: (1 - eta) * softmax(+eta R) + eta / K
        high = max(self.cum_estimates)
        weights = [math.exp(eta * (v - high)) for v in self.cum_estimates]
        total = sum(weights)
        return ProbVec([(1.0 - eta) * w / total + eta / self.K for w in weights])

    def act(self, rng) -> int:
        p = self.distribution()
        self._p_last = p
        return sample_arm(p, rng.random())

    def update(self, arm: int, loss: float) -> None:
        """Consume the bandit loss of the arm played this round."""
        if self._p_last is None:
            raise ValueError("update() requires a preceding act()")
        p_arm = self._p_last[arm]
        if self.variant == "losses":
            self.cum_estimates[arm] += importance_weighted_loss(loss, p_arm, True)
        else:
            reward = 1.0 - float(loss)
            if not 0.0 <= reward <= 1.0:
                raise ValueError(f"loss must be in [0, 1], got {loss}")
            self.cum_estimates[arm] += reward / p_arm
        self.t += 1
        self._p_last = None

    def update_reward(self, arm: int, reward: float) -> None:
        self.update(arm, 1.0 - float(reward))

    def replay_update(self, arm: int, r_tilde: float, K: int) -> None:
        """Offline replay contract: the [0, K]-range estimated reward is
        mapped back to a [0, 1] loss, (K - r̃)/K, and fed as this round's
        bandit loss with the rate unchanged."""
        self.update(arm, (K - r_tilde) / K)


class EXP4Policy:
    """Exponential weights over experts whose per-round advice mixes into an
    arm distribution; bandit feedback is importance-weighted at the arm level
    and projected back onto the experts."""

    def __init__(self, n_experts: int, K: int, *, eta: float | None = None,
                 T: int | None = None) -> None:
        if n_experts < 1:
            raise ValueError("need at least one expert")
        if K < 2:
            raise ValueError(f"need at least two arms, got K={K}")
        if eta is None:
            if T is None or T < 1:
                raise ValueError("need either eta or a horizon T")
            eta = math.sqrt(2.0 * math.log(n_experts) / (K * T))
        if eta <= 0.0:
            raise ValueError(f"eta must be positive, got {eta}")
        self.n_experts = n_experts
        self.K = K
        self.eta = eta
        self.cum_expert_losses = [0.0] * n_experts
        self.t = 0
        self._pending: tuple[ProbVec, Callable] | None = None

    def expert_weights(self) -> ProbVec:
        return hedge_distribution(self.cum_expert_losses, self.eta)

    def act(self, advice: Sequence[Sequence[float]], rng) -> int:
        p, project = exp4_mix(self.expert_weights(), advice)
        self._pending = (p, project)
        return sample_arm(p, rng.random())

    def update(self, arm: int, loss: float) -> None:
        if self._pending is None:
            raise ValueError("update() requires a preceding act()")
        p, project = self._pending
        arm_losses = [0.0] * self.K
        arm_losses[arm] = importance_weighted_loss(loss, p[arm], True)
        for h, val in enumerate(project(arm_losses)):
            self.cum_expert_losses[h] += val
        self.t += 1
        self._pending = None


class UCB1Policy:
    """Deterministic optimism for stochastic bandits.

    Plays each arm once in ascending index order, then the arm with the
    largest confidence index (mean plus radius), ties to the lowest index.
    ``reward_range`` rescales the radius for rewards in [0, range], as
    needed by importance-weighted replay.
    """

    def __init__(self, K: int, *, parametrization: str = "original",
                 reward_range: float = 1.0) -> None:
        if K < 1:
            raise ValueError(f"need at least one arm, got K={K}")
        if parametrization not in ("original", "improved"):
            raise ValueError(f"unknown parametrization {parametrization!r}")
        if reward_range <= 0.0:
            raise ValueError("reward_range must be positive")
        self.K = K
        self.parametrization = parametrization
        self.reward_range = float(reward_range)
        self.counts = [0] * K
        self.sums = [0.0] * K
        self.t = 0

    def act(self, rng=None) -> int:
        if self.t < self.K:
            return self.t  # forced initialization pass
        round_t = self.t + 1
        best, best_index = 0, -math.inf
        for a in range(self.K):
            mu_hat = self.sums[a] / self.counts[a]
            radius = ucb_index(0.0, round_t, self.counts[a],
                               self.parametrization)
            index = mu_hat + self.reward_range * radius
            if index > best_index:
                best, best_index = a, index
        return best

    def update_reward(self, arm: int, reward: float) -> None:
        if not 0.0 <= reward <= self.reward_range + 1e-12:
            raise ValueError(f"reward {reward} outside [0, {self.reward_range}]")
        self.counts[arm] += 1
        self.sums[arm] += float(reward)
        self.t += 1

    def update(self, arm: int, loss: float) -> None:
        """Loss-world adapter: reward = 1 - loss (unit range only)."""
        if self.reward_range != 1.0:
            raise ValueError("loss updates require unit reward range")
        self.update_reward(arm, 1.0 - float(loss))

    def replay_update(self, arm: int, r_tilde: float, K: int) -> None:
        """Offline replay contract: estimated rewards live in [0, K], so the
        policy must have been built with reward_range=K."""
        if self.reward_range != float(K):
            raise ValueError("replay needs a UCB1 policy with reward_range=K")
        self.update_reward(arm, r_tilde)


class EpsilonFirstPolicy:
    """Two-armed explore-then-commit: alternate both arms for the scheduled
    exploration budget, then commit to the empirically best arm (rewards;
    ties to the lowest index)."""

    def __init__(self, T: int, gap: float) -> None:
        self.epsilon, self.exploration_rounds = epsilon_first_schedule(gap, T)
        self.K = 2
        self.T = T
        self.counts = [0, 0]
        self.sums = [0.0, 0.0]
        self.t = 0
        self._commit: int | None = None

    def act(self, rng=None) -> int:
        if self.t < self.exploration_rounds:
            return self.t % 2
        if self._commit is None:
            means = [
                self.sums[a] / self.counts[a] if self.counts[a] else 0.0
                for a in range(2)
            ]
            self._commit = 0 if means[0] >= means[1] else 1
        return self._commit

    def update_reward(self, arm: int, reward: float) -> None:
        self.counts[arm] += 1
        self.sums[arm] += float(reward)
        self.t += 1

    def update(self, arm: int, loss: float) -> None:
        self.update_reward(arm, 1.0 - float(loss))


class FixedPolicy:
    """Non-learning policy playing a fixed arm or a fixed distribution;
    useful as the evaluation target in offline replay."""

    def __init__(self, K: int, *, arm: int | None = None,
                 dist: Sequence[float] | None = None) -> None:
        if (arm is None) == (dist is None):
            raise ValueError("give exactly one of arm or dist")
        if arm is not None and not 0 <= arm < K:
            raise ValueError(f"arm {arm} outside [0, {K})")
        if dist is not None and len(dist) != K:
            raise ValueError("distribution has wrong length")
        self.K = K
        self.arm = arm
        self.dist = ProbVec(dist) if dist is not None else None
        self.t = 0

    def act(self, rng=None) -> int:
        if self.arm is not None:
            return self.arm
        return sample_arm(self.dist, rng.random())

    def update(self, arm: int, loss: float) -> None:
        self.t += 1

    def update_reward(self, arm: int, reward: float) -> None:
        self.t += 1

    def replay_update(self, arm: int, r_tilde: float, K: int) -> None:
        self.t += 1
