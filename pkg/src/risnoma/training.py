"""Training orchestration: config, episode loop, logging, checkpoints, eval.

``train`` wires the environment to one controller per agent and runs the
episodic loop with fixed clocking: the discrete sub-agents take one TD step
per environment step once their replay buffers pass the warmup size, and the
continuous sub-agents update whenever their trajectory buffer fills.  All
randomness flows from one master seed through named SeedSequence children, so
a seed fully determines the run on the single-threaded reference path.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from risnoma import config_io
from risnoma.agents import DqnAgent, EpsilonSchedule, HybridAgent, PpoAgent
from risnoma.baselines import oma_override, sdma_override
from risnoma.env import BS_AGENT, EnvFlags, MfRisNomaEnv, surface_agent_id
from risnoma.geometry import NetworkScenario
from risnoma.mfris import CircuitPowerModel, HarvestModel
from risnoma.nn import Adam, load_checkpoint, save_checkpoint
from risnoma.noma import PenaltyWeights

__all__ = [
    "TrainConfig",
    "RunLog",
    "TrainResult",
    "build_env",
    "build_controllers",
    "train",
    "evaluate",
    "STEP_COLUMNS",
    "EPISODE_COLUMNS",
]

STEP_COLUMNS = (
    "episode", "step", "reward", "ee", "sum_rate", "p_total",
    "c1", "c2", "c3", "epsilon", "dqn_loss", "ppo_clip_loss", "ppo_value_loss",
)
EPISODE_COLUMNS = ("episode", "reward", "ee", "sum_rate", "p_total", "c1", "c2", "c3")

AGENT_MODES = ("hybrid", "continuous_only", "pure_ppo", "pure_dqn", "random")
RATE_MODELS = ("noma", "oma", "sdma")


@dataclass
class TrainConfig:
    """All knobs of one training run; defaults follow the reference setup."""

    episodes: int = 300
    t_env: int = 1000
    traj_len: int = 0                 # 0 means: one trajectory per episode
    hidden: tuple = (256, 256)
    lr_actor: float = 1e-3
    lr_critic: float = 1e-4
    lr_dqn: float = 1e-3
    gamma_ppo: float = 0.99
    gamma_dqn: float = 0.99
    clip_ratio: float = 0.2
    gae_lambda: float = 0.97
    eps_max: float = 1.0
    eps_min: float = 0.0
    eps_decay_steps: float = 1e4
    tau_target: float = 1e-2
    buffer_capacity: int = 1_000_000
    batch_size: int = 64
    ppo_epochs: int = 10
    ppo_minibatch: int = 64
    warmup_steps: int = 1000
    dqn_update_every: int = 1
    entropy_coef: float = 0.0
    log_std_init: float = -0.5
    log_std_min: float = -4.0
    log_std_max: float = 1.0
    max_grad_norm: float = 0.0
    rho_rate: float = 1e-3
    rho_power: float = 1e-5
    rho_sustain: float = 1e-5
    beta_max: float = 10.0
    r_min: float = 0.2
    p_bs_max: float = 10.0
    seed: int = 0
    eval_interval: int = 0            # episodes between extra checkpoints; 0 = end only
    agent_mode: str = "hybrid"
    sharing: bool = True
    force_relay_modes: bool = False
    unit_amplitudes: bool = False
    reflect_only: bool = False
    fixed_users: bool = False
    rate_model: str = "noma"
    relay_optimism: float = 0.0       # initial Q advantage of S mode per element
    amplitude_start: float = 0.0      # initial mean amplitude; 0 keeps beta_max/2

    def validate(self):
        for name in ("lr_actor", "lr_critic", "lr_dqn", "gamma_ppo", "gamma_dqn",
                     "clip_ratio", "gae_lambda", "tau_target", "eps_max", "eps_min"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} must lie in [0, 1]")
        for name in ("episodes", "t_env", "buffer_capacity", "batch_size",
                     "ppo_epochs", "ppo_minibatch", "dqn_update_every"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be a positive count")
        if not 0.0 < self.clip_ratio < 1.0:
            raise ValueError("clip_ratio must lie in (0, 1)")
        if self.agent_mode not in AGENT_MODES:
            raise ValueError(f"unknown agent_mode {self.agent_mode!r}")
        if self.rate_model not in RATE_MODELS:
            raise ValueError(f"unknown rate_model {self.rate_model!r}")
        if self.traj_len < 0 or self.warmup_steps < 0:
            raise ValueError("traj_len and warmup_steps must be nonnegative")
        return self

    @property
    def trajectory_len(self) -> int:
        return self.traj_len if self.traj_len > 0 else self.t_env

    def flags(self) -> EnvFlags:
        return EnvFlags(
            force_relay_modes=self.force_relay_modes,
            unit_amplitudes=self.unit_amplitudes,
            reflect_only=self.reflect_only,
            fixed_users=self.fixed_users,
            rate_model=self.rate_model,
        )

    def to_sections(self) -> dict:
        body = asdict(self)
        body["hidden"] = list(self.hidden)
        return {"train": body}

    @classmethod
    def from_sections(cls, sections: dict) -> "TrainConfig":
        body = dict(sections.get("train", {}))
        if "hidden" in body:
            hidden = body["hidden"]
            body["hidden"] = tuple(hidden) if isinstance(hidden, list) else (hidden,)
        cfg = cls(**body)
        cfg.validate()
        return cfg


class RunLog:
    """Append-only per-step and per-episode records with CSV export."""

    def __init__(self, n_steps: int, n_episodes: int):
        self.steps = np.zeros((n_steps, len(STEP_COLUMNS)))
        self.episodes = np.zeros((n_episodes, len(EPISODE_COLUMNS)))
        self.n_steps = 0
        self.n_episodes = 0

    def add_step(self, values):
        self.steps[self.n_steps] = values
        self.n_steps += 1

    def add_episode(self, values):
        self.episodes[self.n_episodes] = values
        self.n_episodes += 1

    def column(self, name: str) -> np.ndarray:
        return self.steps[: self.n_steps, STEP_COLUMNS.index(name)]

    def fraction_mean(self, name: str, first: float | None = None,
                      last: float | None = None) -> float:
        """Mean of a step column over the first or last fraction of steps."""
        col = self.column(name)
        if first is not None:
            return float(col[: max(1, int(len(col) * first))].mean())
        if last is not None:
            return float(col[-max(1, int(len(col) * last)) :].mean())
        return float(col.mean())

    @staticmethod
    def _csv(header, rows) -> str:
        lines = [",".join(header)]
        for row in rows:
            lines.append(",".join(repr(float(v)) for v in row))
        return "\n".join(lines) + "\n"

    def steps_csv(self) -> str:
        return self._csv(STEP_COLUMNS, self.steps[: self.n_steps])

    def episodes_csv(self) -> str:
        return self._csv(EPISODE_COLUMNS, self.episodes[: self.n_episodes])

    def save(self, out_dir):
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "steps.csv").write_text(self.steps_csv())
        (out_dir / "episodes.csv").write_text(self.episodes_csv())


# ---------------------------------------------------------------- controllers


def _pack_mlp(prefix: str, mlp) -> dict:
    return {f"{prefix}.{i}": p for i, p in enumerate(mlp.parameters)}


def _unpack_mlp(prefix: str, mlp, arrays: dict):
    for i, p in enumerate(mlp.parameters):
        p[...] = arrays[f"{prefix}.{i}"]


def _pack_adam(prefix: str, opt: Adam) -> dict:
    out = {f"{prefix}.t": np.array([opt.t], dtype=np.int64)}
    for i, (m, v) in enumerate(zip(opt.m, opt.v)):
        out[f"{prefix}.m.{i}"] = m
        out[f"{prefix}.v.{i}"] = v
    return out


def _unpack_adam(prefix: str, opt: Adam, arrays: dict):
    opt.t = int(arrays[f"{prefix}.t"][0])
    for i in range(len(opt.m)):
        opt.m[i][...] = arrays[f"{prefix}.m.{i}"]
        opt.v[i][...] = arrays[f"{prefix}.v.{i}"]


def _pack_ppo(prefix: str, ppo: PpoAgent) -> dict:
    out = _pack_mlp(f"{prefix}.policy", ppo.policy.mlp)
    out[f"{prefix}.log_std"] = ppo.policy.log_std
    out.update(_pack_mlp(f"{prefix}.value", ppo.value_net))
    out.update(_pack_adam(f"{prefix}.actor_opt", ppo.actor_opt))
    out.update(_pack_adam(f"{prefix}.critic_opt", ppo.critic_opt))
    return out


def _unpack_ppo(prefix: str, ppo: PpoAgent, arrays: dict):
    _unpack_mlp(f"{prefix}.policy", ppo.policy.mlp, arrays)
    ppo.policy.log_std[...] = arrays[f"{prefix}.log_std"]
    _unpack_mlp(f"{prefix}.value", ppo.value_net, arrays)
    _unpack_adam(f"{prefix}.actor_opt", ppo.actor_opt, arrays)
    _unpack_adam(f"{prefix}.critic_opt", ppo.critic_opt, arrays)


def _pack_dqn(prefix: str, dqn: DqnAgent) -> dict:
    out = _pack_mlp(f"{prefix}.q", dqn.q_net)
    out.update(_pack_mlp(f"{prefix}.target", dqn.target_net))
    out.update(_pack_adam(f"{prefix}.opt", dqn.optimizer))
    return out


def _unpack_dqn(prefix: str, dqn: DqnAgent, arrays: dict):
    _unpack_mlp(f"{prefix}.q", dqn.q_net, arrays)
    _unpack_mlp(f"{prefix}.target", dqn.target_net, arrays)
    _unpack_adam(f"{prefix}.opt", dqn.optimizer, arrays)


class HybridSurfaceController:
    """Hybrid discrete+continuous control of one surface."""

    def __init__(self, agent_id, env, hybrid: HybridAgent, cfg: TrainConfig):
        self.agent_id = agent_id
        self.env = env
        self.hybrid = hybrid
        self.cfg = cfg
        self._pending = None

    def begin_episode(self):
        self.hybrid.reset_cache()

    def act(self, state, step, rng):
        info = self.hybrid.act(state, step, rng)
        self._pending = (state, info)
        return self.env.project_actions(info["continuous"], self.agent_id,
                                        modes=info["modes"])

    def act_deterministic(self, state):
        info = self.hybrid.act_deterministic(state)
        return self.env.project_actions(info["continuous"], self.agent_id,
                                        modes=info["modes"])

    def observe(self, reward, next_state, step, rng):
        state, info = self._pending
        losses = {}
        dqn = self.hybrid.dqn
        dqn.store(state, info["modes"], reward, next_state)
        if (
            dqn.buffer.size >= max(self.cfg.warmup_steps, dqn.batch_size)
            and step % self.cfg.dqn_update_every == 0
        ):
            losses["dqn_loss"] = dqn.update(rng)
        ppo = self.hybrid.ppo
        ppo.store(info["ppo_state"], info["continuous"], info["log_prob"],
                  reward, info["value"])
        if ppo.buffer.full:
            bootstrap = ppo.value_of(self.hybrid.ppo_state(next_state))
            clip_loss, value_loss = ppo.update(bootstrap, rng)
            losses["ppo_clip_loss"] = clip_loss
            losses["ppo_value_loss"] = value_loss
        return losses

    def checkpoint_arrays(self):
        out = _pack_dqn("dqn", self.hybrid.dqn)
        out.update(_pack_ppo("ppo", self.hybrid.ppo))
        out["prev_modes"] = self.hybrid.prev_modes
        return out

    def load_arrays(self, arrays):
        _unpack_dqn("dqn", self.hybrid.dqn, arrays)
        _unpack_ppo("ppo", self.hybrid.ppo, arrays)
        self.hybrid.prev_modes = arrays["prev_modes"].copy()


class PpoController:
    """PPO-only control: the BS agent, and surfaces whose modes are pinned."""

    def __init__(self, agent_id, env, ppo: PpoAgent, cfg: TrainConfig):
        self.agent_id = agent_id
        self.env = env
        self.ppo = ppo
        self.cfg = cfg
        self._pending = None

    def begin_episode(self):
        pass

    def _project(self, raw):
        return self.env.project_actions(raw, self.agent_id)

    def act(self, state, step, rng):
        action, log_prob, value = self.ppo.act(state, rng)
        self._pending = (state, action, log_prob, value)
        return self._project(action)

    def act_deterministic(self, state):
        return self._project(self.ppo.mean_act(state))

    def observe(self, reward, next_state, step, rng):
        state, action, log_prob, value = self._pending
        self.ppo.store(state, action, log_prob, reward, value)
        losses = {}
        if self.ppo.buffer.full:
            clip_loss, value_loss = self.ppo.update(self.ppo.value_of(next_state), rng)
            losses["ppo_clip_loss"] = clip_loss
            losses["ppo_value_loss"] = value_loss
        return losses

    def checkpoint_arrays(self):
        return _pack_ppo("ppo", self.ppo)

    def load_arrays(self, arrays):
        _unpack_ppo("ppo", self.ppo, arrays)


class PurePpoSurfaceController(PpoController):
    """Surface control with the mode bits relaxed to continuous logits.

    The first M action entries pass through a sigmoid and threshold at 0.5
    when applied; the rest projects like the hybrid continuous action.
    """

    def _project(self, raw):
        m = self.env.scenario.m_elements
        modes = (raw[:m] > 0.0).astype(float)  # sigmoid(x) > 0.5 iff x > 0
        return self.env.project_actions(raw[m:], self.agent_id, modes=modes)


class PureDqnSurfaceController:
    """Fully discrete surface control over quantized grids."""

    def __init__(self, agent_id, env, dqn: DqnAgent, cfg: TrainConfig):
        self.agent_id = agent_id
        self.env = env
        self.dqn = dqn
        self.cfg = cfg
        self._pending = None
        s = env.scenario
        circuit = env.circuit
        self.k_dirs, self.m = s.n_directions, s.m_elements
        self.amp_levels = circuit.levels_amplitude
        self.phase_levels = circuit.levels_phase

    @staticmethod
    def head_sizes(env) -> list[int]:
        s = env.scenario
        c = env.circuit
        km = s.n_directions * s.m_elements
        return (
            [2] * s.m_elements
            + [c.levels_amplitude] * km
            + [c.levels_phase] * km
            + [c.levels_amplitude]
        )

    def _physical(self, levels):
        s = self.env.scenario
        km = self.k_dirs * self.m
        modes = levels[: self.m].astype(float)
        amp = levels[self.m : self.m + km].reshape(self.k_dirs, self.m)
        phase = levels[self.m + km : self.m + 2 * km].reshape(self.k_dirs, self.m)
        y_level = int(levels[-1])
        return {
            "modes": modes,
            "amplitudes": self.env.beta_max * amp / (self.amp_levels - 1),
            "phases": 2.0 * np.pi * phase / self.phase_levels,
            "position_y": float(
                s.w_min[1]
                + (s.w_max[1] - s.w_min[1]) * y_level / (self.amp_levels - 1)
            ),
        }

    def begin_episode(self):
        pass

    def act(self, state, step, rng):
        levels = self.dqn.select(state, step, rng)
        self._pending = (state, levels)
        return self._physical(levels)

    def act_deterministic(self, state):
        return self._physical(self.dqn.greedy(state))

    def observe(self, reward, next_state, step, rng):
        state, levels = self._pending
        self.dqn.store(state, levels, reward, next_state)
        losses = {}
        if (
            self.dqn.buffer.size >= max(self.cfg.warmup_steps, self.dqn.batch_size)
            and step % self.cfg.dqn_update_every == 0
        ):
            losses["dqn_loss"] = self.dqn.update(rng)
        return losses

    def checkpoint_arrays(self):
        return _pack_dqn("dqn", self.dqn)

    def load_arrays(self, arrays):
        _unpack_dqn("dqn", self.dqn, arrays)


class PureDqnBsController(PureDqnSurfaceController):
    """Quantized BS control: power-fraction levels and beam phase levels.

    Beam amplitudes are fixed so all beams together carry half the power
    budget; only their phases are learned, on the phase grid.
    """

    @staticmethod
    def head_sizes(env) -> list[int]:
        s = env.scenario
        c = env.circuit
        return (
            [c.levels_amplitude] * (s.n_directions * s.users_per_direction)
            + [c.levels_phase] * (s.n_antennas * s.n_directions)
        )

    def _physical(self, levels):
        s = self.env.scenario
        kj = s.n_directions * s.users_per_direction
        frac_levels = levels[:kj].reshape(s.n_directions, s.users_per_direction)
        fractions = frac_levels / (self.amp_levels - 1)
        sums = fractions.sum(axis=1, keepdims=True)
        uniform = np.full_like(fractions, 1.0 / s.users_per_direction)
        fractions = np.where(sums > 0, fractions / np.maximum(sums, 1e-300), uniform)
        phases = (
            2.0 * np.pi
            * levels[kj:].reshape(s.n_directions, s.n_antennas)
            / self.phase_levels
        )
        amp = np.sqrt(self.env.p_bs_max / (2.0 * s.n_directions * s.n_antennas))
        return {"power_fractions": fractions, "beams": amp * np.exp(1j * phases)}


# ------------------------------------------------------------------- assembly


def build_env(scenario: NetworkScenario, cfg: TrainConfig, rng) -> MfRisNomaEnv:
    override = {"noma": None, "oma": oma_override, "sdma": sdma_override}[cfg.rate_model]
    return MfRisNomaEnv(
        scenario,
        HarvestModel(),
        CircuitPowerModel(),
        PenaltyWeights(cfg.rho_rate, cfg.rho_power, cfg.rho_sustain),
        beta_max=cfg.beta_max,
        r_min=cfg.r_min,
        p_bs_max=cfg.p_bs_max,
        t_env=cfg.t_env,
        flags=cfg.flags(),
        rate_override=override,
        seed=rng,
    )


def build_controllers(env: MfRisNomaEnv, cfg: TrainConfig, init_rng) -> dict:
    """One controller per agent according to the configured agent mode."""
    if cfg.agent_mode == "random":
        return {}
    s = env.scenario
    schedule = EpsilonSchedule(cfg.eps_max, cfg.eps_min, cfg.eps_decay_steps)
    controllers: dict[str, object] = {}

    def make_ppo(state_dim, action_dim):
        return PpoAgent(
            state_dim, action_dim, cfg.hidden, init_rng,
            lr_actor=cfg.lr_actor, lr_critic=cfg.lr_critic,
            gamma=cfg.gamma_ppo, lam=cfg.gae_lambda, clip_ratio=cfg.clip_ratio,
            horizon=cfg.trajectory_len, epochs=cfg.ppo_epochs,
            minibatch=cfg.ppo_minibatch, entropy_coef=cfg.entropy_coef,
            log_std_init=cfg.log_std_init,
            log_std_bounds=(cfg.log_std_min, cfg.log_std_max),
            max_grad_norm=cfg.max_grad_norm,
        )

    def make_dqn(state_dim, head_sizes, init_bias=None):
        return DqnAgent(
            state_dim, head_sizes, cfg.hidden, init_rng,
            lr=cfg.lr_dqn, gamma=cfg.gamma_dqn, tau=cfg.tau_target,
            schedule=schedule, buffer_capacity=cfg.buffer_capacity,
            batch_size=cfg.batch_size, init_bias=init_bias,
        )

    def amplitude_bias(ppo, lead_dims):
        """Start the policy mean at a chosen amplitude instead of beta_max/2.

        Matches the environment's neutral reset; raw logits invert the
        sigmoid projection.
        """
        if not cfg.amplitude_start:
            return
        frac = min(max(cfg.amplitude_start / cfg.beta_max, 1e-6), 1 - 1e-6)
        raw = float(np.log(frac / (1.0 - frac)))
        km = s.n_directions * s.m_elements
        ppo.policy.mlp.parameters[-1][lead_dims : lead_dims + km] = raw

    for q in range(s.n_surfaces):
        aid = surface_agent_id(q)
        if cfg.agent_mode == "hybrid" and not cfg.force_relay_modes:
            bias = None
            if cfg.relay_optimism:
                bias = np.zeros(2 * s.m_elements)
                bias[1::2] = cfg.relay_optimism
            dqn = make_dqn(env.channel_state_dim, [2] * s.m_elements, bias)
            ppo_dim = env.channel_state_dim + (s.m_elements if cfg.sharing else 0)
            ppo = make_ppo(ppo_dim, env.surface_action_dim)
            amplitude_bias(ppo, 0)
            controllers[aid] = HybridSurfaceController(
                aid, env, HybridAgent(dqn, ppo, s.m_elements, share=cfg.sharing), cfg
            )
        elif cfg.agent_mode in ("hybrid", "continuous_only"):
            # Modes pinned by the variant: the discrete sub-agent is bypassed.
            ppo = make_ppo(env.channel_state_dim, env.surface_action_dim)
            amplitude_bias(ppo, 0)
            controllers[aid] = PpoController(aid, env, ppo, cfg)
        elif cfg.agent_mode == "pure_ppo":
            ppo = make_ppo(env.channel_state_dim, s.m_elements + env.surface_action_dim)
            amplitude_bias(ppo, s.m_elements)
            controllers[aid] = PurePpoSurfaceController(aid, env, ppo, cfg)
        elif cfg.agent_mode == "pure_dqn":
            controllers[aid] = PureDqnSurfaceController(
                aid, env,
                make_dqn(env.channel_state_dim, PureDqnSurfaceController.head_sizes(env)),
                cfg,
            )
    if cfg.rate_model != "oma":  # under OMA the BS action is fully determined
        if cfg.agent_mode == "pure_dqn":
            controllers[BS_AGENT] = PureDqnBsController(
                BS_AGENT, env,
                make_dqn(env.channel_state_dim, PureDqnBsController.head_sizes(env)),
                cfg,
            )
        else:
            controllers[BS_AGENT] = PpoController(
                BS_AGENT, env, make_ppo(env.channel_state_dim, env.bs_action_dim), cfg
            )
    return controllers


@dataclass
class TrainResult:
    run_log: RunLog
    env: MfRisNomaEnv
    controllers: dict
    out_dir: Path | None = None


def _rng_streams(cfg: TrainConfig, n_agents: int):
    root = np.random.SeedSequence(cfg.seed)
    env_ss, init_ss, act_ss, upd_ss = root.spawn(4)
    return (
        np.random.default_rng(env_ss),
        np.random.default_rng(init_ss),
        [np.random.default_rng(s) for s in act_ss.spawn(max(1, n_agents))],
        [np.random.default_rng(s) for s in upd_ss.spawn(max(1, n_agents))],
    )


def train(scenario: NetworkScenario, cfg: TrainConfig,
          out_dir=None, run_id: str | None = None) -> TrainResult:
    """Run the full training loop; optionally persist logs and checkpoints."""
    cfg.validate()
    n_agents = scenario.n_surfaces + 1
    env_rng, init_rng, act_rngs, upd_rngs = _rng_streams(cfg, n_agents)
    env = build_env(scenario, cfg, env_rng)
    controllers = build_controllers(env, cfg, init_rng)
    ids = list(controllers)
    agent_index = {aid: i for i, aid in enumerate(env.agent_ids)}

    log = RunLog(cfg.episodes * cfg.t_env, cfg.episodes)
    schedule = EpsilonSchedule(cfg.eps_max, cfg.eps_min, cfg.eps_decay_steps)
    latched = {"dqn_loss": 0.0, "ppo_clip_loss": 0.0, "ppo_value_loss": 0.0}
    random_rng = act_rngs[0]

    target = None
    if out_dir is not None:
        target = Path(out_dir) / (run_id or f"seed_{cfg.seed}")
        target.mkdir(parents=True, exist_ok=True)

    rng_bundle = {
        "env": env._rng,
        **{f"act_{i}": r for i, r in enumerate(act_rngs)},
        **{f"upd_{i}": r for i, r in enumerate(upd_rngs)},
    }
    global_step = 0
    for ep in range(cfg.episodes):
        states = env.reset()
        for c in controllers.values():
            c.begin_episode()
        ep_rows = []
        for _ in range(cfg.t_env):
            if cfg.agent_mode == "random":
                physical = env.uniform_random_actions(random_rng)
            else:
                physical = {
                    aid: controllers[aid].act(
                        states[aid], global_step, act_rngs[agent_index[aid]]
                    )
                    for aid in ids
                }
            next_states, reward, report, _ = env.step_physical(physical)
            dqn_losses = []
            for aid in ids:
                losses = controllers[aid].observe(
                    reward, next_states[aid], global_step, upd_rngs[agent_index[aid]]
                )
                if "dqn_loss" in losses:
                    dqn_losses.append(losses["dqn_loss"])
                for key in ("ppo_clip_loss", "ppo_value_loss"):
                    if key in losses:
                        latched[key] = losses[key]
            if dqn_losses:
                latched["dqn_loss"] = float(np.mean(dqn_losses))
            row = (
                ep, global_step, reward, report.ee, report.sum_rate, report.p_total,
                report.c1, report.c2, report.c3, schedule.value(global_step),
                latched["dqn_loss"], latched["ppo_clip_loss"], latched["ppo_value_loss"],
            )
            log.add_step(row)
            ep_rows.append(row)
            states = next_states
            global_step += 1
        block = np.asarray(ep_rows)
        log.add_episode((
            ep, block[:, 2].mean(), block[:, 3].mean(), block[:, 4].mean(),
            block[:, 5].mean(), block[:, 6].mean(), block[:, 7].mean(),
            block[:, 8].mean(),
        ))
        if target is not None and cfg.eval_interval and (ep + 1) % cfg.eval_interval == 0:
            _save_run(target, scenario, cfg, env, controllers, log, global_step, rng_bundle)

    if target is not None:
        _save_run(target, scenario, cfg, env, controllers, log, global_step, rng_bundle)
    return TrainResult(log, env, controllers, target)


def _save_run(target: Path, scenario, cfg, env, controllers, log, step, rng_bundle):
    log.save(target)
    sections = {**config_io.scenario_to_sections(scenario), **cfg.to_sections()}
    (target / "config.cfg").write_text(config_io.serialize_config(sections))
    meta = {
        "global_step": step,
        "norm_bs": env.norm_bs,
        "norm_ris": env.norm_ris,
        "rng_states": {
            name: json.dumps(rng.bit_generator.state)
            for name, rng in rng_bundle.items()
        },
    }
    for aid, controller in controllers.items():
        save_checkpoint(
            target / f"agent_{aid}" / f"step_{step}",
            controller.checkpoint_arrays(),
            {**meta, "agent_id": aid},
        )
    (target / "run_meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True))


def _latest_step_dir(agent_dir: Path) -> Path:
    steps = sorted(
        (p for p in agent_dir.iterdir() if p.name.startswith("step_")),
        key=lambda p: int(p.name.split("_")[1]),
    )
    if not steps:
        raise FileNotFoundError(f"no checkpoints under {agent_dir}")
    return steps[-1]


def load_run(run_dir):
    """Rebuild (scenario, cfg, env, controllers) from a saved run directory."""
    run_dir = Path(run_dir)
    sections = config_io.load_config(run_dir / "config.cfg")
    scenario = config_io.scenario_from_sections(sections)
    cfg = TrainConfig.from_sections(sections)
    env_rng, init_rng, _, _ = _rng_streams(cfg, scenario.n_surfaces + 1)
    env = build_env(scenario, cfg, env_rng)
    controllers = build_controllers(env, cfg, init_rng)
    for aid, controller in controllers.items():
        arrays, _ = load_checkpoint(_latest_step_dir(run_dir / f"agent_{aid}"))
        controller.load_arrays(arrays)
    return scenario, cfg, env, controllers


def evaluate(run_dir, n_episodes: int = 5, seed: int = 0,
             scenario: NetworkScenario | None = None):
    """Deterministic-policy evaluation of a checkpointed run.

    Greedy discrete actions, Gaussian means, no learning.  Returns
    (mean EE, std EE, per-episode means).  The run's own scenario is used
    unless a dimension-compatible override is given.  The random-baseline
    mode has no deterministic policy and keeps sampling from the given seed.
    """
    stored, cfg, env, controllers = load_run(run_dir)
    if scenario is not None:
        env = build_env(scenario, cfg, np.random.default_rng(seed))
    return evaluate_controllers(env, cfg, controllers, n_episodes, seed)


def evaluate_controllers(env, cfg, controllers, n_episodes: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    per_episode = []
    for ep in range(n_episodes):
        states = env.reset(seed=int(rng.integers(2**31)) if ep == 0 else None)
        for c in controllers.values():
            c.begin_episode()
        ee = []
        for _ in range(cfg.t_env):
            if cfg.agent_mode == "random":
                physical = env.uniform_random_actions(rng)
            else:
                physical = {
                    aid: c.act_deterministic(states[aid])
                    for aid, c in controllers.items()
                }
            states, _, report, _ = env.step_physical(physical)
            ee.append(report.ee)
        per_episode.append(float(np.mean(ee)))
    arr = np.asarray(per_episode)
    return float(arr.mean()), float(arr.std()), per_episode
