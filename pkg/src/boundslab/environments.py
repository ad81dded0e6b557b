"""Game environments and offline-log replay for the policies in
:mod:`boundslab.online_policies`.

Covers the four game variants (iid/adversarial losses crossed with
full/bandit feedback), the adversarial breaker sequences for
follow-the-leader and UCB1, logged-data replay via importance weighting and
rejection sampling, and the regret accounting helpers.  All environments are
oblivious: losses are fully determined by (spec, seed) before play and never
depend on policy state beyond the chosen index at reveal time.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _mix64(x: int) -> int:
    """splitmix64 finalizer: a bijective 64-bit scramble."""
    z = x & _MASK64
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 & _MASK64
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB & _MASK64
    return z ^ (z >> 31)


@dataclass(frozen=True)
class LogRecord:
    """One line of a uniform-logging bandit log: the action id taken, the
    binary reward observed, and ten binary side features (unused here)."""

    action: int
    reward: int
    features: tuple[int, ...]


@dataclass
class GameTranscript:
    """Per-round record of one policy/environment run."""

    arms: np.ndarray
    payoffs: np.ndarray
    kind: str  # "loss" or "reward"
    detail: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.kind not in ("loss", "reward"):
            raise ValueError(f"unknown payoff kind {self.kind!r}")
        if len(self.arms) != len(self.payoffs):
            raise ValueError("arms and payoffs must have equal length")

    def __len__(self) -> int:
        return len(self.arms)

    def arm_counts(self, K: int) -> np.ndarray:
        return np.bincount(self.arms, minlength=K)


class BernoulliEnv:
    """Stochastic losses: each cell (t, a) is an independent Bernoulli draw
    with mean ``means[a]``, derived lazily from (seed, t, a) so that full and
    bandit runs over the same seed agree on every revealed entry and the
    reveal order never changes a value."""

    def __init__(self, means: Sequence[float], seed: int) -> None:
        means = [float(m) for m in means]
        if any(not 0.0 <= m <= 1.0 for m in means):
            raise ValueError("all means must lie in [0, 1]")
        if not means:
            raise ValueError("need at least one arm")
        self.means = tuple(means)
        self.K = len(means)
        self._seed_state = _mix64(int(seed))

    def _uniform(self, t: int, a: int) -> float:
        cell = (t * self.K + a) & _MASK64
        bits = _mix64((self._seed_state + cell * _GOLDEN) & _MASK64)
        return bits / 2.0 ** 64

    def loss(self, t: int, a: int) -> float:
        if not 0 <= a < self.K:
            raise ValueError(f"arm {a} outside [0, {self.K})")
        return 1.0 if self._uniform(t, a) < self.means[a] else 0.0

    def row(self, t: int) -> list[float]:
        return [self.loss(t, a) for a in range(self.K)]


class MatrixEnv:
    """Adversarial losses read from an explicit T x K matrix fixed before
    play."""

    def __init__(self, matrix) -> None:
        matrix = np.asarray(matrix, dtype=float)
        if matrix.ndim != 2 or matrix.shape[1] < 1:
            raise ValueError("need a T x K loss matrix")
        if matrix.min() < 0.0 or matrix.max() > 1.0:
            raise ValueError("loss entries must lie in [0, 1]")
        self.matrix = matrix
        self.K = matrix.shape[1]
        self.horizon = matrix.shape[0]

    def loss(self, t: int, a: int) -> float:
        return float(self.matrix[t, a])

    def row(self, t: int) -> list[float]:
        return [float(v) for v in self.matrix[t]]


def make_ftl_breaker(T: int) -> np.ndarray:
    """Two-arm oblivious loss matrix on which deterministic
    lowest-index-tiebreak follow-the-leader incurs loss 1 every round from
    t=2: row 1 is (0.5, 0) and later rows alternate (0, 1), (1, 0), always
    charging the current leader."""
    if T < 2:
        raise ValueError(f"need T >= 2, got {T}")
    matrix = np.zeros((T, 2))
    matrix[0] = (0.5, 0.0)
    for t in range(1, T):
        matrix[t] = (0.0, 1.0) if t % 2 == 1 else (1.0, 0.0)
    return matrix


def make_ucb_breaker(T: int, K: int = 2, *, parametrization: str = "improved",
                     ) -> tuple[np.ndarray, list[int]]:
    """Oblivious reward matrix that makes deterministic UCB1 suffer linear
    regret: UCB1 (fixed init order, lowest-index ties) is simulated offline
    and the arm it is about to pull is assigned a low reward while every
    other arm gets a high one.  Rewards are interior to [0, 1] with small
    per-arm offsets so no two arms tie within a round.  Returns the matrix
    and the predicted UCB1 trajectory; validated by simulation, not proved.
    """
    from boundslab.online_policies import UCB1Policy

    if T < 2 * K:
        raise ValueError(f"need T >= 2K, got T={T}, K={K}")
    low, high = 0.1, 0.9
    probe = UCB1Policy(K, parametrization=parametrization)
    rewards = np.empty((T, K))
    trajectory = []
    for t in range(T):
        arm = probe.act()
        for a in range(K):
            base = low if a == arm else high
            rewards[t, a] = base - a * 1e-6
        probe.update_reward(arm, rewards[t, arm])
        trajectory.append(arm)
    return rewards, trajectory


def parse_log_line(line: str, K: int) -> LogRecord:
    """Parse one log record: 12 whitespace-separated integers laid out as
    action id, binary reward, then ten binary features."""
    tokens = line.split()
    if len(tokens) != 12:
        raise ValueError(f"expected 12 fields, got {len(tokens)}: {line!r}")
    try:
        values = [int(tok) for tok in tokens]
    except ValueError as exc:
        raise ValueError(f"non-integer token in record {line!r}") from exc
    action, reward = values[0], values[1]
    if not 0 <= action < K:
        raise ValueError(f"action {action} outside [0, {K})")
    if reward not in (0, 1):
        raise ValueError(f"reward must be 0 or 1, got {reward}")
    return LogRecord(action, reward, tuple(values[2:]))


def parse_log(lines: Iterable[str]) -> tuple[int, list[LogRecord]]:
    """Read a full log: a "K=<int>" header line, then one record per line.
    Blank lines and '#'-prefixed comment lines are skipped."""
    K = None
    records = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if K is None:
            if not line.startswith("K="):
                raise ValueError(f"line {lineno}: expected 'K=<int>' header")
            K = int(line[2:])
            if K < 1:
                raise ValueError(f"line {lineno}: K must be positive")
            continue
        try:
            records.append(parse_log_line(line, K))
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from exc
    if K is None:
        raise ValueError("log has no 'K=<int>' header")
    return K, records


def write_log(path, K: int, records: Iterable[LogRecord]) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as handle:
        handle.write(f"K={K}\n")
        for rec in records:
            fields = [rec.action, rec.reward, *rec.features]
            handle.write(" ".join(str(v) for v in fields) + "\n")


def synthesize_uniform_log(means: Sequence[float], T: int, seed: int,
                           ) -> list[LogRecord]:
    """Uniform-logging synthetic log: action ~ Uniform(K), reward ~
    Bernoulli(means[action]), ten iid Bernoulli(1/2) features."""
    means = [float(m) for m in means]
    if any(not 0.0 <= m <= 1.0 for m in means):
        raise ValueError("all means must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    K = len(means)
    actions = rng.integers(0, K, size=T)
    rewards = rng.random(T) < np.asarray(means)[actions]
    features = rng.integers(0, 2, size=(T, 10))
    return [
        LogRecord(int(actions[t]), int(rewards[t]), tuple(int(v) for v in features[t]))
        for t in range(T)
    ]


def play_full_information(policy, env, T: int, rng=None) -> GameTranscript:
    """Run a full-information game: the policy picks an arm, incurs that
    entry, then sees the whole loss column.  The incremental hindsight-regret
    accounting is stored in ``detail`` and is recomputable from the matrix."""
    arms = np.empty(T, dtype=int)
    incurred = np.empty(T)
    column_sums = [0.0] * env.K
    cumulative = 0.0
    for t in range(T):
        arm = policy.act(rng)
        row = env.row(t)
        arms[t] = arm
        incurred[t] = row[arm]
        cumulative += row[arm]
        for a in range(env.K):
            column_sums[a] += row[a]
        policy.observe(row)
    detail = {
        "feedback": "full",
        "column_sums": tuple(column_sums),
        "final_regret": cumulative - min(column_sums),
    }
    return GameTranscript(arms, incurred, "loss", detail)


def play_bandit(policy, env, T: int, rng=None) -> GameTranscript:
    """Run a bandit game: only the chosen entry is generated and revealed."""
    arms = np.empty(T, dtype=int)
    incurred = np.empty(T)
    for t in range(T):
        arm = policy.act(rng)
        loss = env.loss(t, arm)
        arms[t] = arm
        incurred[t] = loss
        policy.update(arm, loss)
    return GameTranscript(arms, incurred, "loss", {"feedback": "bandit"})


def hindsight_regret(loss_matrix, arms: Sequence[int]) -> np.ndarray:
    """Cumulative regret against the best single arm in hindsight,
    recomputed from the stored oblivious matrix."""
    matrix = np.asarray(loss_matrix, dtype=float)
    arms = np.asarray(arms, dtype=int)
    incurred = np.cumsum(matrix[np.arange(len(arms)), arms])
    best = np.min(np.cumsum(matrix[: len(arms)], axis=0), axis=1)
    return incurred - best


def pseudo_regret(arms: Sequence[int], means: Sequence[float]) -> np.ndarray:
    """Cumulative sum of the per-round suboptimality gaps of the chosen arms
    in a stochastic loss environment with known means."""
    means = np.asarray(means, dtype=float)
    gaps = means - means.min()
    return np.cumsum(gaps[np.asarray(arms, dtype=int)])


def replay_importance_weighted(policy, records: Sequence[LogRecord], K: int,
                               rng=None) -> GameTranscript:
    """Evaluate/train a policy offline on a uniformly-logged bandit log.

    Every record is consumed: the policy acts, the estimated reward is
    r̃ = K * r * 1[policy action = logged action] (inverse of the 1/K logging
    propensity, range [0, K]), and the policy ingests r̃ under its own replay
    contract.  The mean of r̃ is an unbiased estimate of the policy's value.
    """
    T = len(records)
    arms = np.empty(T, dtype=int)
    estimates = np.empty(T)
    for t, rec in enumerate(records):
        if not 0 <= rec.action < K:
            raise ValueError(f"logged action {rec.action} outside [0, {K})")
        arm = policy.act(rng)
        r_tilde = float(K * rec.reward) if arm == rec.action else 0.0
        policy.replay_update(arm, r_tilde, K)
        arms[t] = arm
        estimates[t] = r_tilde
    detail = {
        "feedback": "iw-replay",
        "estimated_value": float(estimates.mean()) if T else 0.0,
    }
    return GameTranscript(arms, estimates, "reward", detail)


def replay_rejection_sampling(policy, records: Sequence[LogRecord], K: int,
                              rng=None) -> GameTranscript:
    """Evaluate/train a policy offline by scrolling the log until the logged
    action matches the policy's choice, feeding that (action, reward) as a
    genuine bandit round and discarding the scrolled records.  The effective
    horizon (number of accepted rounds) is reported in ``detail``."""
    arms, rewards = [], []
    idx = 0
    while idx < len(records):
        arm = policy.act(rng)
        while idx < len(records) and records[idx].action != arm:
            idx += 1
        if idx == len(records):
            break
        reward = float(records[idx].reward)
        idx += 1
        policy.update_reward(arm, reward)
        arms.append(arm)
        rewards.append(reward)
    detail = {"feedback": "rs-replay", "effective_horizon": len(arms)}
    return GameTranscript(np.asarray(arms, dtype=int), np.asarray(rewards),
                          "reward", detail)
