import math

import numpy as np
import pytest

from boundslab.environments import (
    BernoulliEnv,
    GameTranscript,
    LogRecord,
    MatrixEnv,
    hindsight_regret,
    make_ftl_breaker,
    make_ucb_breaker,
    parse_log,
    parse_log_line,
    play_bandit,
    play_full_information,
    pseudo_regret,
    replay_importance_weighted,
    replay_rejection_sampling,
    synthesize_uniform_log,
    write_log,
)
from boundslab.online_policies import (
    EXP3Policy,
    FTLPolicy,
    FixedPolicy,
    HedgePolicy,
    UCB1Policy,
)


class TestBernoulliEnv:
    def test_zero_means_zero_losses(self):
        env = BernoulliEnv([0.0, 0.0], seed=4)
        assert all(env.loss(t, a) == 0.0 for t in range(50) for a in range(2))

    def test_all_half_means_have_no_gap(self):
        env = BernoulliEnv([0.5, 0.5, 0.5], seed=9)
        rng = np.random.default_rng(1)
        trans = play_bandit(EXP3Policy(3), env, 200, rng)
        assert np.all(pseudo_regret(trans.arms, env.means) == 0.0)

    def test_empirical_means_match_clt(self):
        T = 100000
        env = BernoulliEnv([0.25, 0.75], seed=2024)
        for a, mu in enumerate(env.means):
            mean = sum(env.loss(t, a) for t in range(T)) / T
            assert abs(mean - mu) <= 3 * math.sqrt(mu * (1 - mu) / T)

    def test_reveal_order_does_not_change_values(self):
        env = BernoulliEnv([0.3, 0.6], seed=7)
        forward = [(t, a, env.loss(t, a)) for t in range(20) for a in range(2)]
        env2 = BernoulliEnv([0.3, 0.6], seed=7)
        for t, a, value in reversed(forward):
            assert env2.loss(t, a) == value

    def test_full_and_bandit_agree_on_revealed_entries(self):
        env = BernoulliEnv([0.4, 0.8], seed=13)
        rows = [env.row(t) for t in range(30)]
        env2 = BernoulliEnv([0.4, 0.8], seed=13)
        for t in range(30):
            arm = t % 2
            assert env2.loss(t, arm) == rows[t][arm]

    def test_rejects_bad_means(self):
        with pytest.raises(ValueError):
            BernoulliEnv([0.5, 1.2], seed=0)
        with pytest.raises(ValueError):
            BernoulliEnv([], seed=0)


class TestFtlBreaker:
    def test_ftl_loses_every_round_after_the_first(self):
        T = 200
        env = MatrixEnv(make_ftl_breaker(T))
        trans = play_full_information(FTLPolicy(2), env, T)
        cumulative = np.cumsum(trans.payoffs)
        for t in range(2, T + 1):
            assert cumulative[t - 1] >= t - 1

    def test_regret_is_linear_in_horizon(self):
        T = 2000
        matrix = make_ftl_breaker(T)
        trans = play_full_information(FTLPolicy(2), MatrixEnv(matrix), T)
        best = min(matrix.sum(axis=0))
        assert abs(best - T / 2) <= 1.0
        assert trans.detail["final_regret"] >= T / 2 - 1

    def test_anytime_hedge_stays_below_theorem_bound(self):
        T = 2000
        env = MatrixEnv(make_ftl_breaker(T))
        regrets = []
        for rep in range(10):
            rng = np.random.default_rng(100 + rep)
            trans = play_full_information(HedgePolicy(2), env, T, rng)
            regrets.append(trans.detail["final_regret"])
        regrets = np.asarray(regrets)
        bound = math.sqrt(T * math.log(2))
        assert regrets.mean() <= bound + 3 * regrets.std()

    def test_domain(self):
        with pytest.raises(ValueError):
            make_ftl_breaker(1)


class TestUcbBreaker:
    def test_entries_interior_and_untied(self):
        matrix, trajectory = make_ucb_breaker(300, K=3)
        assert matrix.min() > 0.0 and matrix.max() < 1.0
        assert len(trajectory) == 300
        for row in matrix:
            assert len(set(row.tolist())) == 3

    def test_ucb_follows_prediction_and_suffers_linear_regret(self):
        T = 10000
        matrix, trajectory = make_ucb_breaker(T, K=2)
        policy = UCB1Policy(2, parametrization="improved")
        earned = 0.0
        for t in range(T):
            arm = policy.act()
            assert arm == trajectory[t]
            earned += matrix[t, arm]
            policy.update_reward(arm, matrix[t, arm])
        best = matrix.sum(axis=0).max()
        assert best - earned >= 0.3 * T

    def test_exp3_is_fine_on_the_same_matrix(self):
        T, K = 4000, 2
        matrix, _ = make_ucb_breaker(T, K=K)
        losses = 1.0 - matrix
        regrets = []
        for rep in range(20):
            rng = np.random.default_rng(rep)
            trans = play_bandit(EXP3Policy(K), MatrixEnv(losses), T, rng)
            regrets.append(hindsight_regret(losses, trans.arms)[-1])
        assert np.mean(regrets) <= math.sqrt(2 * K * T * math.log(K))


class TestLogParsing:
    def test_example_records(self):
        rec = parse_log_line("7 0 1 0 0 1 0 1 0 0 1 0", K=16)
        assert (rec.action, rec.reward) == (7, 0)
        assert rec.features == (1, 0, 0, 1, 0, 1, 0, 0, 1, 0)
        rec = parse_log_line("0 1 0 0 0 0 0 0 0 0 0 0", K=16)
        assert (rec.action, rec.reward) == (0, 1)

    def test_validation_errors(self):
        with pytest.raises(ValueError):
            parse_log_line("1 2 0 0 0 0 0 0 0 0 0 0", K=4)  # non-binary reward
        with pytest.raises(ValueError):
            parse_log_line("1 0 0 0 0", K=4)  # wrong field count
        with pytest.raises(ValueError):
            parse_log_line("1 0 x 0 0 0 0 0 0 0 0 0", K=4)
        with pytest.raises(ValueError):
            parse_log_line("5 0 0 0 0 0 0 0 0 0 0 0", K=4)  # action >= K

    def test_header_comments_and_round_trip(self, tmp_path):
        records = synthesize_uniform_log([0.2, 0.8], T=50, seed=3)
        path = tmp_path / "game.log"
        write_log(path, 2, records)
        text = path.read_text().splitlines()
        assert text[0] == "K=2"
        K, parsed = parse_log(["# comment", "", *text])
        assert K == 2
        assert parsed == records

    def test_missing_header(self):
        with pytest.raises(ValueError):
            parse_log(["7 0 1 0 0 1 0 1 0 0 1 0"])


class TestImportanceWeightedReplay:
    def test_single_record_values(self):
        match = [LogRecord(3, 1, (0,) * 10)]
        trans = replay_importance_weighted(FixedPolicy(16, arm=3), match, 16)
        assert trans.payoffs[0] == 16.0
        trans = replay_importance_weighted(FixedPolicy(16, arm=4), match, 16)
        assert trans.payoffs[0] == 0.0

    def test_per_record_unbiasedness_by_enumeration(self):
        # exact expectation over the uniformly logged action, K <= 8
        for K in (2, 5, 8):
            means = [(a + 1) / (K + 1) for a in range(K)]
            for target in range(K):
                estimate = sum(
                    (1.0 / K) * (K * means[logged] if logged == target else 0.0)
                    for logged in range(K)
                )
                assert math.isclose(estimate, means[target], rel_tol=1e-12)

    def test_fixed_policy_value_estimate(self):
        K = 8
        means = [0.1 * (a % 5) + 0.1 for a in range(K)]
        records = synthesize_uniform_log(means, T=40000, seed=11)
        trans = replay_importance_weighted(FixedPolicy(K, arm=3), records, K)
        truth = means[3]
        se = np.std(trans.payoffs) / math.sqrt(len(records))
        assert abs(trans.detail["estimated_value"] - truth) <= 3 * se

    def test_every_record_consumed(self):
        records = synthesize_uniform_log([0.5] * 4, T=123, seed=5)
        trans = replay_importance_weighted(FixedPolicy(4, arm=0), records, 4)
        assert len(trans) == 123


class TestRejectionSamplingReplay:
    def test_all_matching_log_fully_consumed(self):
        records = [LogRecord(1, 1, (0,) * 10) for _ in range(40)]
        trans = replay_rejection_sampling(FixedPolicy(2, arm=1), records, 2)
        assert trans.detail["effective_horizon"] == 40
        assert np.all(trans.payoffs == 1.0)

    def test_effective_horizon_matches_matching_rate(self):
        records = synthesize_uniform_log([0.5, 0.5], T=1000, seed=21)
        trans = replay_rejection_sampling(FixedPolicy(2, arm=0), records, 2)
        assert abs(trans.detail["effective_horizon"] - 500) <= 3 * math.sqrt(250)

    def test_ucb_replay_matches_live_play(self):
        K, T = 4, 4000
        means = [0.2, 0.45, 0.7, 0.35]
        replayed, live = [], []
        for rep in range(20):
            records = synthesize_uniform_log(means, T=T, seed=1000 + rep)
            trans = replay_rejection_sampling(
                UCB1Policy(K, parametrization="improved"), records, K)
            replayed.append(trans.payoffs.mean())
            rng = np.random.default_rng(5000 + rep)
            policy = UCB1Policy(K, parametrization="improved")
            horizon = trans.detail["effective_horizon"]
            earned = []
            for t in range(horizon):
                arm = policy.act()
                reward = float(rng.random() < means[arm])
                policy.update_reward(arm, reward)
                earned.append(reward)
            live.append(np.mean(earned))
        replayed, live = np.asarray(replayed), np.asarray(live)
        se = math.sqrt(replayed.var() / 20 + live.var() / 20)
        assert abs(replayed.mean() - live.mean()) <= 3 * se


class TestRegretAccounting:
    def test_pseudo_regret_examples(self):
        got = pseudo_regret([1, 1, 0], [0.0, 0.25])
        assert np.allclose(got, [0.25, 0.5, 0.5])
        assert np.all(pseudo_regret([0, 0, 0], [0.1, 0.9]) == 0.0)

    def test_pseudo_regret_identity(self):
        rng = np.random.default_rng(8)
        means = np.array([0.3, 0.7, 0.5])
        arms = rng.integers(0, 3, size=100)
        got = pseudo_regret(arms, means)
        direct = np.cumsum(means[arms]) - np.arange(1, 101) * means.min()
        assert np.allclose(got, direct, atol=1e-12)

    def test_full_information_accounting_is_recomputable(self):
        T = 500
        matrix = make_ftl_breaker(T)
        rng = np.random.default_rng(17)
        trans = play_full_information(HedgePolicy(2), MatrixEnv(matrix), T, rng)
        recomputed = hindsight_regret(matrix, trans.arms)[-1]
        assert trans.detail["final_regret"] == recomputed

    def test_transcript_validation(self):
        with pytest.raises(ValueError):
            GameTranscript(np.array([0]), np.array([0.5]), "points")
        with pytest.raises(ValueError):
            GameTranscript(np.array([0, 1]), np.array([0.5]), "loss")
        trans = GameTranscript(np.array([0, 1, 1]), np.zeros(3), "loss")
        assert list(trans.arm_counts(3)) == [1, 2, 0]
