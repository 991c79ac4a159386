"""Learning agents: branching DQN, PPO with clipped objective, hybrid wrapper.

The discrete agent factorizes a combinatorial action into independent heads
(one per surface element, or per quantized control for the pure-DQN
baseline) sharing one trunk; TD targets are computed per head.  The
continuous agent is PPO with a diagonal-Gaussian policy, GAE advantages
normalized per trajectory, and separate actor/critic Adam optimizers.  The
hybrid agent chains them: the discrete action chosen at step t-1 is part of
the continuous sub-agent's state at step t.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from risnoma.nn import Adam, GaussianPolicy, Mlp

__all__ = [
    "EpsilonSchedule",
    "ReplayBuffer",
    "DqnAgent",
    "TrajectoryBuffer",
    "PpoAgent",
    "HybridAgent",
    "gae",
]


@dataclass(frozen=True)
class EpsilonSchedule:
    """Linear exploration decay: eps(t) = eps_max - t*(eps_max-eps_min)/decay."""

    eps_max: float = 1.0
    eps_min: float = 0.0
    decay_steps: float = 1e4

    def value(self, step: int) -> float:
        if not math.isfinite(self.decay_steps):
            return self.eps_max
        frac = min(1.0, step / self.decay_steps)
        return self.eps_max - (self.eps_max - self.eps_min) * frac


class ReplayBuffer:
    """Fixed-capacity FIFO ring of (s, a, r, s', done) with uniform sampling."""

    def __init__(self, capacity: int, state_dim: int, n_heads: int):
        self.capacity = int(capacity)
        self.states = np.zeros((self.capacity, state_dim))
        self.actions = np.zeros((self.capacity, n_heads), dtype=np.int64)
        self.rewards = np.zeros(self.capacity)
        self.next_states = np.zeros((self.capacity, state_dim))
        self.dones = np.zeros(self.capacity, dtype=bool)
        self.ptr = 0
        self.size = 0

    def push(self, state, action, reward, next_state, done=False):
        i = self.ptr
        self.states[i] = state
        self.actions[i] = action
        self.rewards[i] = reward
        self.next_states[i] = next_state
        self.dones[i] = done
        self.ptr = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def __len__(self):
        return self.size

    def sample(self, batch_size: int, rng: np.random.Generator):
        idx = rng.integers(0, self.size, size=batch_size)
        return (
            self.states[idx],
            self.actions[idx],
            self.rewards[idx],
            self.next_states[idx],
            self.dones[idx],
        )


class DqnAgent:
    """Branching-head Q-learner with replay, target net, epsilon-greedy.

    ``head_sizes`` lists the cardinality of each independent discrete head;
    the trunk outputs their concatenated Q-values.  Ties in a head's argmax
    resolve to the lowest index.
    """

    def __init__(
        self,
        state_dim: int,
        head_sizes: list[int],
        hidden: tuple,
        rng: np.random.Generator,
        lr: float = 1e-3,
        gamma: float = 0.99,
        tau: float = 1e-2,
        schedule: EpsilonSchedule = EpsilonSchedule(),
        buffer_capacity: int = 1_000_000,
        batch_size: int = 64,
        init_bias: np.ndarray | None = None,
    ):
        self.head_sizes = list(head_sizes)
        self.n_heads = len(head_sizes)
        self.head_offsets = np.concatenate([[0], np.cumsum(head_sizes)])
        out_dim = int(self.head_offsets[-1])
        self.q_net = Mlp([state_dim, *hidden, out_dim], rng)
        if init_bias is not None:
            # optimistic prior over actions, e.g. to favor relaying until
            # evidence accumulates; decays through ordinary TD updates
            self.q_net.parameters[-1][...] = init_bias
        self.target_net = self.q_net.copy()
        self.optimizer = Adam(self.q_net.parameters, lr)
        self.gamma = gamma
        self.tau = tau
        self.schedule = schedule
        self.buffer = ReplayBuffer(buffer_capacity, state_dim, self.n_heads)
        self.batch_size = batch_size
        self.uniform_heads = len(set(head_sizes)) == 1

    def _per_head(self, q_flat: np.ndarray):
        """Split (..., sum sizes) Q output into per-head views."""
        return [
            q_flat[..., self.head_offsets[h] : self.head_offsets[h + 1]]
            for h in range(self.n_heads)
        ]

    def q_values(self, state: np.ndarray) -> list[np.ndarray]:
        """Per-head Q-value vectors for one state."""
        return self._per_head(self.q_net.forward(state))

    def greedy(self, state: np.ndarray) -> np.ndarray:
        q = self.q_net.forward(state)
        return np.array([int(np.argmax(head)) for head in self._per_head(q)])

    def select(self, state: np.ndarray, step: int, rng: np.random.Generator) -> np.ndarray:
        """Per-head epsilon-greedy: each head explores independently."""
        eps = self.schedule.value(step)
        action = self.greedy(state)
        explore = rng.random(self.n_heads) < eps
        if explore.any():
            sizes = np.asarray(self.head_sizes)[explore]
            action[explore] = rng.integers(0, sizes)
        return action

    def store(self, state, action, reward, next_state, done=False):
        self.buffer.push(state, action, reward, next_state, done)

    def update(self, rng: np.random.Generator) -> float:
        """One TD step on a uniform minibatch; returns the scalar loss.

        Per-head targets y_h = r + gamma * max_a' Q_target_h(s', a'); the loss
        is the squared error averaged over batch and heads.  The target net
        only ever moves through the soft update.
        """
        if self.buffer.size < self.batch_size:
            raise ValueError("not enough samples in the replay buffer")
        states, actions, rewards, next_states, dones = self.buffer.sample(
            self.batch_size, rng
        )
        q_next = self.target_net.forward(next_states)
        next_max = np.stack([h.max(axis=1) for h in self._per_head(q_next)], axis=1)
        targets = rewards[:, None] + self.gamma * (~dones)[:, None] * next_max

        q, cache = self.q_net.forward_cached(states)
        cols = self.head_offsets[:-1][None, :] + actions
        rows = np.arange(self.batch_size)[:, None]
        chosen = q[rows, cols]
        diff = chosen - targets
        loss = float(np.mean(diff**2))

        dout = np.zeros_like(q)
        dout[rows, cols] = 2.0 * diff / diff.size
        grads, _ = self.q_net.backward(cache, dout)
        self.optimizer.step(self.q_net.parameters, grads)
        self.soft_update_target()
        return loss

    def soft_update_target(self):
        for tgt, src in zip(self.target_net.parameters, self.q_net.parameters):
            tgt *= 1.0 - self.tau
            tgt += self.tau * src


class TrajectoryBuffer:
    """On-policy rollout storage of fixed horizon T."""

    def __init__(self, horizon: int, state_dim: int, action_dim: int):
        self.horizon = horizon
        self.states = np.zeros((horizon, state_dim))
        self.actions = np.zeros((horizon, action_dim))
        self.log_probs = np.zeros(horizon)
        self.rewards = np.zeros(horizon)
        self.values = np.zeros(horizon)
        self.ptr = 0

    def push(self, state, action, log_prob, reward, value):
        i = self.ptr
        self.states[i] = state
        self.actions[i] = action
        self.log_probs[i] = log_prob
        self.rewards[i] = reward
        self.values[i] = value
        self.ptr = i + 1

    @property
    def full(self) -> bool:
        return self.ptr >= self.horizon

    def reset(self):
        self.ptr = 0


def gae(rewards: np.ndarray, values: np.ndarray, gamma: float, lam: float) -> np.ndarray:
    """Generalized advantage estimation over one trajectory.

    ``values`` has length T+1 (the last entry is the bootstrap value).
    Advantage(t) = sum_i (gamma*lam)^(i-t) * [r(i) + gamma*V(i+1) - V(i)].
    """
    t_len = len(rewards)
    if len(values) != t_len + 1:
        raise ValueError("values must include a bootstrap entry")
    adv = np.zeros(t_len)
    running = 0.0
    for t in reversed(range(t_len)):
        delta = rewards[t] + gamma * values[t + 1] - values[t]
        running = delta + gamma * lam * running
        adv[t] = running
    return adv


class PpoAgent:
    """Clipped-surrogate PPO with a Gaussian policy and a value critic.

    The behavior policy's log-probabilities are frozen into the trajectory at
    rollout time, which is the "old policy" snapshot; it refreshes implicitly
    when the next rollout starts after an update.
    """

    def __init__(
        self,
        state_dim: int,
        action_dim: int,
        hidden: tuple,
        rng: np.random.Generator,
        lr_actor: float = 1e-3,
        lr_critic: float = 1e-4,
        gamma: float = 0.99,
        lam: float = 0.97,
        clip_ratio: float = 0.2,
        horizon: int = 1000,
        epochs: int = 10,
        minibatch: int = 64,
        entropy_coef: float = 0.0,
        log_std_init: float = -0.5,
        log_std_bounds: tuple = (-4.0, 1.0),
        max_grad_norm: float = 0.0,
    ):
        self.policy = GaussianPolicy([state_dim, *hidden, action_dim], rng, log_std_init)
        self.value_net = Mlp([state_dim, *hidden, 1], rng)
        self.actor_opt = Adam(self.policy.parameters, lr_actor)
        self.critic_opt = Adam(self.value_net.parameters, lr_critic)
        self.gamma = gamma
        self.lam = lam
        self.clip_ratio = clip_ratio
        self.epochs = epochs
        self.minibatch = minibatch
        self.entropy_coef = entropy_coef
        self.log_std_bounds = log_std_bounds
        self.max_grad_norm = max_grad_norm
        self.buffer = TrajectoryBuffer(horizon, state_dim, action_dim)

    def act(self, state: np.ndarray, rng: np.random.Generator):
        action, log_prob = self.policy.sample(state, rng)
        value = float(self.value_net.forward(state)[0])
        return action, log_prob, value

    def mean_act(self, state: np.ndarray) -> np.ndarray:
        return self.policy.mean_action(state)

    def store(self, state, action, log_prob, reward, value):
        self.buffer.push(state, action, log_prob, reward, value)

    def value_of(self, state: np.ndarray) -> float:
        return float(self.value_net.forward(state)[0])

    def update(self, bootstrap_value: float, rng: np.random.Generator,
               return_diagnostics: bool = False):
        """Run the PPO epochs on the stored trajectory.

        Returns (mean clip loss, mean value loss) and, when requested, a
        diagnostics dict with the pre-update full-batch probability ratios and
        clipped objective.
        """
        buf = self.buffer
        if not buf.full:
            raise ValueError("trajectory buffer is not full")
        values = np.concatenate([buf.values, [bootstrap_value]])
        adv = gae(buf.rewards, values, self.gamma, self.lam)
        v_targets = buf.values + adv
        adv = (adv - adv.mean()) / (adv.std() + 1e-8)

        diagnostics = None
        if return_diagnostics:
            lp, _ = self.policy.log_prob(buf.states, buf.actions)
            ratio = np.exp(lp - buf.log_probs)
            clipped = np.clip(ratio, 1.0 - self.clip_ratio, 1.0 + self.clip_ratio)
            objective = float(np.mean(np.minimum(ratio * adv, clipped * adv)))
            diagnostics = {
                "ratios": ratio,
                "objective": objective,
                "mean_advantage": float(adv.mean()),
            }

        t_len = buf.horizon
        clip_losses, value_losses = [], []
        for _ in range(self.epochs):
            perm = rng.permutation(t_len)
            for start in range(0, t_len, self.minibatch):
                idx = perm[start : start + self.minibatch]
                clip_losses.append(self._policy_step(buf, idx, adv))
                value_losses.append(self._value_step(buf, idx, v_targets))
        buf.reset()
        result = (float(np.mean(clip_losses)), float(np.mean(value_losses)))
        return (*result, diagnostics) if return_diagnostics else result

    def _policy_step(self, buf, idx, adv) -> float:
        states, actions = buf.states[idx], buf.actions[idx]
        lp_new, lp_cache = self.policy.log_prob(states, actions)
        ratio = np.exp(lp_new - buf.log_probs[idx])
        a = adv[idx]
        unclipped = ratio * a
        clipped = np.clip(ratio, 1.0 - self.clip_ratio, 1.0 + self.clip_ratio) * a
        loss = -float(np.mean(np.minimum(unclipped, clipped)))
        inside = (ratio > 1.0 - self.clip_ratio) & (ratio < 1.0 + self.clip_ratio)
        active = (unclipped <= clipped) | inside
        dlogp = -(a * ratio * active) / len(idx)
        grads = self.policy.log_prob_backward(lp_cache, dlogp)
        if self.entropy_coef:
            # Gaussian entropy depends only on log_std; bonus raises it.
            grads[-1] -= self.entropy_coef
        if self.max_grad_norm:
            total = np.sqrt(sum(float(np.sum(g * g)) for g in grads))
            if total > self.max_grad_norm:
                grads = [g * (self.max_grad_norm / total) for g in grads]
        self.actor_opt.step(self.policy.parameters, grads)
        # keep stddevs banded: too small and the advantage signal drowns in
        # environment noise (the policy then diffuses), too small also blows
        # up later ratios; too large and exploration dominates the actions
        np.clip(self.policy.log_std, *self.log_std_bounds, out=self.policy.log_std)
        return loss

    def _value_step(self, buf, idx, v_targets) -> float:
        out, cache = self.value_net.forward_cached(buf.states[idx])
        v = out[:, 0]
        diff = v - v_targets[idx]
        loss = float(np.mean(diff**2))
        dout = (2.0 * diff / len(idx))[:, None]
        grads, _ = self.value_net.backward(cache, dout)
        self.critic_opt.step(self.value_net.parameters, grads)
        return loss


class HybridAgent:
    """Discrete + continuous sub-agents with parametrized sharing.

    At step t the DQN picks the element modes from the channel state; the PPO
    state is the channel state concatenated with the modes chosen at t-1
    (all-relay before the first step).  With ``share=False`` the PPO sees the
    channel state alone.
    """

    def __init__(self, dqn: DqnAgent, ppo: PpoAgent, n_modes: int, share: bool = True):
        self.dqn = dqn
        self.ppo = ppo
        self.n_modes = n_modes
        self.share = share
        self.prev_modes = np.ones(n_modes)

    def ppo_state(self, channel_state: np.ndarray) -> np.ndarray:
        if not self.share:
            return np.asarray(channel_state, dtype=float)
        return np.concatenate([channel_state, self.prev_modes])

    def act(self, channel_state: np.ndarray, step: int, rng: np.random.Generator):
        """Joint action: modes from the DQN, continuous raw from the PPO."""
        modes = self.dqn.select(channel_state, step, rng)
        state_c = self.ppo_state(channel_state)
        cont, log_prob, value = self.ppo.act(state_c, rng)
        self.prev_modes = modes.astype(float)
        return {
            "modes": modes,
            "continuous": cont,
            "log_prob": log_prob,
            "value": value,
            "ppo_state": state_c,
        }

    def act_deterministic(self, channel_state: np.ndarray):
        modes = self.dqn.greedy(channel_state)
        state_c = self.ppo_state(channel_state)
        cont = self.ppo.mean_act(state_c)
        self.prev_modes = modes.astype(float)
        return {"modes": modes, "continuous": cont, "ppo_state": state_c}

    def reset_cache(self):
        self.prev_modes = np.ones(self.n_modes)
