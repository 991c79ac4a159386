import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from risnoma.agents import (
    DqnAgent,
    EpsilonSchedule,
    HybridAgent,
    PpoAgent,
    ReplayBuffer,
    gae,
)
from risnoma.nn import finite_difference_gradient, gaussian_log_prob


class ChainMdp:
    """Deterministic 5-state chain: right moves up, left moves down, reward 1
    on entering the terminal top state.  The value-iteration oracle is exact."""

    def __init__(self, n_states=5, gamma=0.9):
        self.n = n_states
        self.gamma = gamma

    def encode(self, s):
        x = np.zeros(self.n)
        x[s] = 1.0
        return x

    def step(self, s, a):
        nxt = min(s + 1, self.n - 1) if a == 1 else max(s - 1, 0)
        reward = 1.0 if (nxt == self.n - 1 and s != self.n - 1) else 0.0
        done = nxt == self.n - 1
        return nxt, reward, done

    def q_star(self):
        q = np.zeros((self.n, 2))
        for _ in range(500):
            new = np.zeros_like(q)
            for s in range(self.n - 1):
                for a in (0, 1):
                    nxt, r, done = self.step(s, a)
                    new[s, a] = r + (0.0 if done else self.gamma * q[nxt].max())
            q = new
        return q


def train_chain_dqn(max_steps=50_000, tol=1e-2, seed=0):
    env = ChainMdp()
    rng = np.random.default_rng(seed)
    agent = DqnAgent(
        state_dim=env.n,
        head_sizes=[2],
        hidden=(32,),
        rng=np.random.default_rng(seed + 1),
        lr=1e-3,
        gamma=env.gamma,
        tau=1e-2,
        schedule=EpsilonSchedule(1.0, 0.05, 5000),
        buffer_capacity=10_000,
        batch_size=64,
    )
    q_star = env.q_star()
    s = 0
    for t in range(max_steps):
        a = int(agent.select(env.encode(s), t, rng)[0])
        nxt, r, done = env.step(s, a)
        agent.store(env.encode(s), [a], r, env.encode(nxt), done)
        if agent.buffer.size >= 500:
            agent.update(rng)
        s = 0 if done else nxt
        if t % 1000 == 999:
            q_hat = np.array([agent.q_values(env.encode(i))[0] for i in range(env.n)])
            if np.max(np.abs(q_hat[:-1] - q_star[:-1])) < tol:
                return t + 1, q_hat, q_star
    q_hat = np.array([agent.q_values(env.encode(i))[0] for i in range(env.n)])
    return max_steps, q_hat, q_star


class TestEpsilonSchedule:
    def test_linear_midpoint(self):
        sched = EpsilonSchedule(1.0, 0.0, 1e4)
        assert sched.value(5000) == pytest.approx(0.5)

    def test_clamps_at_min(self):
        sched = EpsilonSchedule(1.0, 0.0, 1e4)
        assert sched.value(10_000) == 0.0
        assert sched.value(50_000) == 0.0

    def test_infinite_decay_is_constant(self):
        sched = EpsilonSchedule(0.7, 0.0, np.inf)
        assert sched.value(10**9) == 0.7


class TestDqnSelect:
    @staticmethod
    def forced_agent(rng, n_heads=4, prefer=1):
        agent = DqnAgent(3, [2] * n_heads, (8,), rng, schedule=EpsilonSchedule(0, 0, 1))
        for i in range(0, len(agent.q_net.parameters), 2):
            agent.q_net.parameters[i][...] = 0.0
        bias = agent.q_net.parameters[-1]
        bias[...] = 0.0
        bias[prefer :: 2] = 1.0  # Q[m][prefer] > Q[m][other], all heads
        return agent

    def test_fully_random_bits_are_fair(self, rng):
        agent = DqnAgent(3, [2] * 10, (8,), rng, schedule=EpsilonSchedule(1.0, 1.0, 1))
        state = np.zeros(3)
        draws = np.stack([agent.select(state, 0, rng) for _ in range(10_000)])
        means = draws.mean(axis=0)
        assert np.all(means > 0.48) and np.all(means < 0.52)

    def test_greedy_picks_forced_maximum(self, rng):
        agent = self.forced_agent(rng, prefer=1)
        assert np.all(agent.select(np.zeros(3), 10**9, rng) == 1)

    def test_tie_breaks_to_zero(self, rng):
        agent = DqnAgent(3, [2] * 5, (8,), rng, schedule=EpsilonSchedule(0, 0, 1))
        for i in range(0, len(agent.q_net.parameters), 2):
            agent.q_net.parameters[i][...] = 0.0
        agent.q_net.parameters[-1][...] = 0.0
        assert np.all(agent.greedy(np.zeros(3)) == 0)


class TestDqnUpdate:
    def test_zero_discount_targets_are_rewards(self, rng):
        # identical transitions so the sampled batch is irrelevant
        agent = DqnAgent(2, [2, 2], (8,), rng, gamma=0.0, batch_size=4)
        s = rng.standard_normal(2)
        s2 = rng.standard_normal(2)
        for _ in range(4):
            agent.store(s, [0, 1], 0.7, s2)
        q_before = agent.q_net.copy()
        loss = agent.update(rng)
        q = q_before.forward(s)
        chosen = np.array([q[0], q[2 + 1]])
        assert loss == pytest.approx(float(np.mean((chosen - 0.7) ** 2)))

    def test_perfect_q_zero_loss_and_no_motion(self, rng):
        # Zero nets everywhere; pick rewards so y = r + gamma*0 = 0 = Q.
        agent = DqnAgent(2, [2], (4,), rng, gamma=0.9, batch_size=4)
        for p in agent.q_net.parameters:
            p[...] = 0.0
        for p in agent.target_net.parameters:
            p[...] = 0.0
        for _ in range(4):
            agent.store(rng.standard_normal(2), [1], 0.0, rng.standard_normal(2))
        before = [p.copy() for p in agent.q_net.parameters]
        loss = agent.update(rng)
        assert loss == 0.0
        assert all(np.array_equal(a, b) for a, b in zip(before, agent.q_net.parameters))

    def test_q_loss_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(42)
        worst = 0.0
        for _ in range(5):
            agent = DqnAgent(3, [2, 3], (5, 4), rng, batch_size=6)
            states = rng.standard_normal((6, 3))
            actions = np.stack([rng.integers(0, 2, 6), rng.integers(0, 3, 6)], axis=1)
            rewards = rng.standard_normal(6)
            next_states = rng.standard_normal((6, 3))

            def loss_value():
                q_next = agent.target_net.forward(next_states)
                next_max = np.stack(
                    [h.max(axis=1) for h in agent._per_head(q_next)], axis=1
                )
                targets = rewards[:, None] + agent.gamma * next_max
                q = agent.q_net.forward(states)
                cols = agent.head_offsets[:-1][None, :] + actions
                chosen = q[np.arange(6)[:, None], cols]
                return float(np.mean((chosen - targets) ** 2))

            q_next = agent.target_net.forward(next_states)
            next_max = np.stack([h.max(axis=1) for h in agent._per_head(q_next)], axis=1)
            targets = rewards[:, None] + agent.gamma * next_max
            q, cache = agent.q_net.forward_cached(states)
            cols = agent.head_offsets[:-1][None, :] + actions
            rows = np.arange(6)[:, None]
            diff = q[rows, cols] - targets
            dout = np.zeros_like(q)
            dout[rows, cols] = 2.0 * diff / diff.size
            grads, _ = agent.q_net.backward(cache, dout)
            numeric = finite_difference_gradient(loss_value, agent.q_net.parameters)
            for a, n in zip(grads, numeric):
                worst = max(worst, float(np.max(np.abs(a - n) / np.maximum(np.abs(n), 1e-8))))
        assert worst <= 1e-4

    def test_chain_mdp_reaches_value_iteration_fixpoint(self):
        steps, q_hat, q_star = train_chain_dqn()
        assert np.max(np.abs(q_hat[:-1] - q_star[:-1])) < 1e-2, (
            f"after {steps} steps: {q_hat} vs {q_star}"
        )
        # greedy rollout attains the optimal return (always step right)
        greedy = np.argmax(q_hat[:-1], axis=1)
        assert np.all(greedy == 1)

    def test_insufficient_samples_rejected(self, rng):
        agent = DqnAgent(2, [2], (4,), rng, batch_size=64)
        with pytest.raises(ValueError):
            agent.update(rng)


class TestSoftUpdate:
    def test_contraction_under_frozen_source(self, rng):
        agent = DqnAgent(2, [2], (4,), rng, tau=0.1)
        gaps = []
        for _ in range(5):
            gap = sum(
                float(np.linalg.norm(t - s))
                for t, s in zip(agent.target_net.parameters, agent.q_net.parameters)
            )
            gaps.append(gap + 1e-300)
            agent.soft_update_target()
        # target starts as a copy; perturb and check the (1 - tau) contraction
        agent.target_net.parameters[0][...] += 1.0
        d0 = float(np.linalg.norm(agent.target_net.parameters[0] - agent.q_net.parameters[0]))
        agent.soft_update_target()
        d1 = float(np.linalg.norm(agent.target_net.parameters[0] - agent.q_net.parameters[0]))
        assert d1 == pytest.approx(0.9 * d0, rel=1e-12)

    def test_update_only_touches_target_via_soft_rule(self, rng):
        agent = DqnAgent(2, [2], (4,), rng, tau=0.0, batch_size=4)
        for _ in range(4):
            agent.store(rng.standard_normal(2), [0], 0.1, rng.standard_normal(2))
        before = [p.copy() for p in agent.target_net.parameters]
        agent.update(rng)
        assert all(np.array_equal(a, b) for a, b in zip(before, agent.target_net.parameters))


class TestReplayBuffer:
    def test_fifo_at_capacity(self):
        buf = ReplayBuffer(3, 1, 1)
        for i in range(5):
            buf.push([float(i)], [0], float(i), [0.0])
        assert len(buf) == 3
        assert sorted(buf.rewards.tolist()) == [2.0, 3.0, 4.0]

    def test_uniform_sampling(self, rng):
        buf = ReplayBuffer(20, 1, 1)
        for i in range(20):
            buf.push([float(i)], [0], float(i), [0.0])
        draws = np.concatenate(
            [buf.sample(100, rng)[2] for _ in range(100)]
        ).astype(int)
        counts = np.bincount(draws, minlength=20)
        assert stats.chisquare(counts).pvalue > 0.01


class TestGae:
    def test_single_step_zero_values(self):
        adv = gae(np.array([0.7]), np.zeros(2), 0.9, 0.95)
        assert adv[0] == pytest.approx(0.7)

    def test_lambda_zero_is_one_step_td(self, rng):
        rewards = rng.standard_normal(6)
        values = rng.standard_normal(7)
        adv = gae(rewards, values, 0.8, 0.0)
        expected = rewards + 0.8 * values[1:] - values[:-1]
        assert np.allclose(adv, expected, atol=1e-12)

    def test_two_step_hand_value(self):
        adv = gae(np.array([1.0, 1.0]), np.zeros(3), 0.5, 0.5)
        assert adv[0] == pytest.approx(1.25)
        assert adv[1] == pytest.approx(1.0)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            gae(np.ones(3), np.ones(3), 0.9, 0.9)

    def test_matches_direct_double_sum(self, rng):
        rewards = rng.standard_normal(8)
        values = rng.standard_normal(9)
        gamma, lam = 0.93, 0.9
        adv = gae(rewards, values, gamma, lam)
        for t in range(8):
            direct = sum(
                (gamma * lam) ** (i - t)
                * (rewards[i] + gamma * values[i + 1] - values[i])
                for i in range(t, 8)
            )
            assert adv[t] == pytest.approx(direct, rel=1e-12)


def filled_ppo(rng, state_dim=3, action_dim=2, horizon=12, **kw):
    agent = PpoAgent(state_dim, action_dim, (8, 8), rng, horizon=horizon,
                     epochs=2, minibatch=6, **kw)
    for _ in range(horizon):
        s = rng.standard_normal(state_dim)
        a, lp, v = agent.act(s, rng)
        agent.store(s, a, lp, rng.standard_normal(), v)
    return agent


class TestPpoUpdate:
    def test_ratio_one_before_first_step(self, rng):
        agent = filled_ppo(rng)
        _, _, diag = agent.update(0.0, rng, return_diagnostics=True)
        assert np.allclose(diag["ratios"], 1.0, atol=1e-6)
        assert diag["objective"] == pytest.approx(diag["mean_advantage"], abs=1e-12)

    def test_clip_arithmetic(self):
        ratio, clip_r, adv = 1.5, 0.2, 1.0
        contrib = min(ratio * adv, float(np.clip(ratio, 1 - clip_r, 1 + clip_r)) * adv)
        assert contrib == pytest.approx(1.2)

    def test_zero_advantage_zero_policy_motion(self, rng):
        agent = filled_ppo(rng)
        agent.buffer.rewards[...] = 0.0
        agent.buffer.values[...] = 0.0
        before = [p.copy() for p in agent.policy.parameters]
        agent.update(0.0, rng)
        after = agent.policy.parameters
        assert all(np.array_equal(a, b) for a, b in zip(before, after))

    @given(st.integers(0, 2**31 - 1))
    @settings(max_examples=20, deadline=None)
    def test_clipped_never_exceeds_unclipped(self, seed):
        rng = np.random.default_rng(seed)
        ratio = np.exp(rng.standard_normal(50))
        adv = rng.standard_normal(50)
        clipped = np.clip(ratio, 0.8, 1.2) * adv
        assert np.all(np.minimum(ratio * adv, clipped) <= ratio * adv + 1e-15)

    def test_advantage_shift_invariance_after_normalization(self, rng):
        a1 = filled_ppo(np.random.default_rng(5))
        a2 = filled_ppo(np.random.default_rng(5))
        adv = np.random.default_rng(6).standard_normal(12)
        idx = np.arange(12)

        def normalize(x):
            return (x - x.mean()) / (x.std() + 1e-8)

        a1._policy_step(a1.buffer, idx, normalize(adv))
        a2._policy_step(a2.buffer, idx, normalize(adv + 123.4))
        assert all(
            np.allclose(p1, p2, atol=1e-12)
            for p1, p2 in zip(a1.policy.parameters, a2.policy.parameters)
        )

    def test_clip_loss_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(17)
        worst = 0.0
        for _ in range(5):
            agent = filled_ppo(rng, state_dim=4, action_dim=3, horizon=8)
            buf = agent.buffer
            adv = rng.standard_normal(8)
            old_lp = buf.log_probs[:8]

            def loss_value():
                lp, _ = agent.policy.log_prob(buf.states, buf.actions)
                ratio = np.exp(lp - old_lp)
                clipped = np.clip(ratio, 0.8, 1.2) * adv
                return -float(np.mean(np.minimum(ratio * adv, clipped)))

            lp, lp_cache = agent.policy.log_prob(buf.states, buf.actions)
            ratio = np.exp(lp - old_lp)
            unclipped = ratio * adv
            clipped = np.clip(ratio, 0.8, 1.2) * adv
            inside = (ratio > 0.8) & (ratio < 1.2)
            active = (unclipped <= clipped) | inside
            dlogp = -(adv * ratio * active) / 8
            grads = agent.policy.log_prob_backward(lp_cache, dlogp)
            numeric = finite_difference_gradient(loss_value, agent.policy.parameters)
            for a, n in zip(grads, numeric):
                worst = max(worst, float(np.max(np.abs(a - n) / np.maximum(np.abs(n), 1e-8))))
        assert worst <= 1e-4

    def test_value_loss_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(23)
        agent = filled_ppo(rng, state_dim=4, action_dim=2, horizon=8)
        buf = agent.buffer
        targets = rng.standard_normal(8)

        def loss_value():
            v = agent.value_net.forward(buf.states)[:, 0]
            return float(np.mean((v - targets) ** 2))

        out, cache = agent.value_net.forward_cached(buf.states)
        diff = out[:, 0] - targets
        grads, _ = agent.value_net.backward(cache, (2.0 * diff / 8)[:, None])
        numeric = finite_difference_gradient(loss_value, agent.value_net.parameters)
        for a, n in zip(grads, numeric):
            assert np.max(np.abs(a - n) / np.maximum(np.abs(n), 1e-8)) <= 1e-4


class TestHybridAgent:
    @staticmethod
    def make(rng, state_dim=4, n_modes=3, share=True):
        dqn = DqnAgent(state_dim, [2] * n_modes, (8,), rng)
        ppo = PpoAgent(state_dim + (n_modes if share else 0), 2, (8,), rng, horizon=5)
        return HybridAgent(dqn, ppo, n_modes, share=share)

    def test_first_call_uses_all_relay_cache(self, rng):
        agent = self.make(rng)
        state = rng.standard_normal(4)
        info = agent.act(state, 10**9, rng)  # epsilon fully decayed
        assert np.allclose(info["ppo_state"][-3:], 1.0)

    def test_cache_advances_to_last_modes(self, rng):
        agent = self.make(rng)
        state = rng.standard_normal(4)
        info1 = agent.act(state, 10**9, rng)
        info2 = agent.act(state, 10**9, rng)
        assert np.allclose(info2["ppo_state"][-3:], info1["modes"])

    def test_only_gaussian_source_of_randomness_when_greedy(self, rng):
        agent = self.make(rng)
        state = rng.standard_normal(4)
        i1 = agent.act(state, 10**9, rng)
        agent.reset_cache()
        i2 = agent.act(state, 10**9, rng)
        assert np.array_equal(i1["modes"], i2["modes"])
        assert not np.allclose(i1["continuous"], i2["continuous"])

    def test_no_share_dimension(self, rng):
        agent = self.make(rng, share=False)
        state = rng.standard_normal(4)
        info = agent.act(state, 0, rng)
        assert info["ppo_state"].shape == (4,)
