"""Multi-agent episodic environment over the network physics.

One agent per surface plus one for the base station.  Surface agents observe
their own cascaded channels; the BS agent observes the combined channels.
Raw continuous actions are squashed onto the feasible set (amplitudes,
phases, position, power fractions), while beam vectors stay raw so the power
budget stays a learnable penalty rather than a hard projection.  Every agent
receives the identical shared reward; episodes truncate at a fixed horizon.

Within an episode the user positions persist and small-scale fading is
redrawn every step; line-of-sight structure and pathloss follow the moved
surfaces.  The environment's rng stream is consumed a fixed number of times
per reset/step, so matched seeds give matched fading across scenario variants
with equal dimensions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from risnoma import noma
from risnoma.geometry import NetworkScenario, draw_realization, pathloss
from risnoma.mfris import CircuitPowerModel, HarvestModel, MfRisConfig
from risnoma.noma import BsConfig, PenaltyWeights

__all__ = ["EnvFlags", "MfRisNomaEnv", "BS_AGENT", "surface_agent_id"]

BS_AGENT = "bs"


def surface_agent_id(q: int) -> str:
    """Agent id of surface q (0-based index, 1-based id)."""
    return f"ris_{q + 1}"


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x, dtype=float)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


@dataclass(frozen=True)
class EnvFlags:
    """Variant switches; the default is the fully optimized system."""

    force_relay_modes: bool = False    # pin every element to S mode (no harvesting)
    unit_amplitudes: bool = False      # pin every amplitude to 1 (no amplification)
    reflect_only: bool = False         # drop cascades to users behind a surface
    fixed_users: bool = False          # keep the first reset's user draw forever
    rate_model: str = "noma"           # "noma" | "oma" | "sdma"


class MfRisNomaEnv:
    """Episodic environment; see the module docstring for the conventions."""

    def __init__(
        self,
        scenario: NetworkScenario,
        harvest: HarvestModel | None = None,
        circuit: CircuitPowerModel | None = None,
        weights: PenaltyWeights | None = None,
        *,
        beta_max: float = 10.0,
        r_min: float = 0.2,
        p_bs_max: float = 10.0,
        t_env: int = 200,
        flags: EnvFlags = EnvFlags(),
        rate_override=None,
        seed: int | np.random.Generator = 0,
    ):
        self.scenario = scenario
        self.harvest = harvest or HarvestModel()
        self.circuit = circuit or CircuitPowerModel()
        self.weights = weights or PenaltyWeights()
        self.beta_max = beta_max
        self.r_min = r_min
        self.p_bs_max = p_bs_max
        self.t_env = t_env
        self.flags = flags
        self.rate_override = rate_override
        self._rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)

        s = scenario
        self.agent_ids = [surface_agent_id(q) for q in range(s.n_surfaces)] + [BS_AGENT]
        self.channel_state_dim = 2 * s.n_directions * s.users_per_direction * s.n_antennas
        self.surface_action_dim = 2 * s.n_directions * s.m_elements + 1
        if flags.rate_model == "sdma":
            self.bs_action_dim = 2 * s.n_antennas * s.n_directions * s.users_per_direction
        else:
            self.bs_action_dim = (
                s.n_directions * s.users_per_direction
                + 2 * s.n_antennas * s.n_directions
            )

        # Static feature normalizers: median pathloss amplitude per link type,
        # with the element count folded in on the cascade side.  Recorded in
        # checkpoints so loaded policies see identically scaled inputs.
        mid = 0.5 * (s.w_min + s.w_max)
        d_direct = np.linalg.norm(s.user_centers - s.bs_position, axis=2)
        d_su = np.linalg.norm(s.user_centers - mid, axis=2)
        pl_direct = pathloss(float(np.median(d_direct)), s.h0, s.k0)
        self.norm_bs = float(np.sqrt(pl_direct))
        if s.n_surfaces:
            pl_bs_mid = pathloss(float(np.linalg.norm(s.bs_position - mid)), s.h0, s.k0)
            pl_mid_user = pathloss(float(np.median(d_su)), s.h0, s.k0)
            self.norm_ris = float(s.m_elements * np.sqrt(pl_bs_mid * pl_mid_user))
        else:
            self.norm_ris = 1.0

        self.user_positions: np.ndarray | None = None
        self.surfaces: list[MfRisConfig] = []
        self.bs: BsConfig | None = None
        self.channels = None
        self.t = 0
        self._episode = 0

    # ------------------------------------------------------------------ reset

    def reset(self, seed: int | None = None) -> dict[str, np.ndarray]:
        """Start an episode: draw users, center the surfaces, neutral config."""
        if seed is not None:
            self._rng = np.random.default_rng(seed)
        s = self.scenario
        if self.user_positions is None or not self.flags.fixed_users:
            self.user_positions = self._draw_users()
        mid = 0.5 * (s.w_min + s.w_max)
        k_dirs, m = s.n_directions, s.m_elements
        self.surfaces = [
            MfRisConfig(
                modes=np.ones(m),
                amplitudes=np.ones((k_dirs, m)),
                phases=np.zeros((k_dirs, m)),
                position=mid.copy(),
            )
            for _ in range(s.n_surfaces)
        ]
        self.bs = self._neutral_bs()
        self._redraw_channels()
        self.t = 0
        self._episode += 1
        return self.encode_states()

    def _draw_users(self) -> np.ndarray:
        s = self.scenario
        centers = s.user_centers
        radii = s.user_drop_radius * np.sqrt(
            self._rng.random(centers.shape[:2])
        )
        angles = 2.0 * np.pi * self._rng.random(centers.shape[:2])
        pos = centers.copy()
        pos[:, :, 0] += radii * np.cos(angles)
        pos[:, :, 1] += radii * np.sin(angles)
        return pos

    def _neutral_bs(self) -> BsConfig:
        """Uniform power split, equal-power beams with random phases carrying
        half the power budget in total."""
        s = self.scenario
        k_dirs, n = s.n_directions, s.n_antennas
        n_beams = k_dirs * s.users_per_direction if self.flags.rate_model == "sdma" else k_dirs
        amp = np.sqrt(self.p_bs_max / (2.0 * n_beams * n))
        phases = 2.0 * np.pi * self._rng.random((n_beams, n))
        beams = amp * np.exp(1j * phases)
        fractions = np.full((k_dirs, s.users_per_direction), 1.0 / s.users_per_direction)
        return BsConfig(power_fractions=fractions, beams=beams)

    # ------------------------------------------------------------------- step

    def step(self, actions: dict[str, dict]):
        """Apply raw agent actions, advance the fading, evaluate the network.

        ``actions[agent]`` is a dict with key "continuous" (raw vector) and,
        for surface agents, "modes" (element bits; ignored when the variant
        pins them).  Returns (states, shared reward, report, truncated).
        """
        physical = {
            aid: self.project_actions(np.asarray(act["continuous"], dtype=float), aid,
                                      modes=act.get("modes"))
            for aid, act in actions.items()
        }
        return self.step_physical(physical)

    def step_physical(self, physical: dict[str, dict]):
        """Like ``step`` but takes already-feasible physical configurations."""
        s = self.scenario
        for q in range(s.n_surfaces):
            act = physical.get(surface_agent_id(q))
            if act is None:
                continue
            cfg = self.surfaces[q]
            if "position_y" in act:
                cfg.position = cfg.position.copy()
                cfg.position[1] = act["position_y"]
            if act.get("modes") is not None:
                cfg.modes = np.asarray(act["modes"], dtype=float)
            if "amplitudes" in act:
                cfg.amplitudes = act["amplitudes"]
            if "phases" in act:
                cfg.phases = act["phases"]
            if self.flags.force_relay_modes:
                cfg.modes = np.ones(s.m_elements)
            if self.flags.unit_amplitudes:
                cfg.amplitudes = np.ones_like(cfg.amplitudes)
        bs_act = physical.get(BS_AGENT)
        if bs_act is not None:
            self.bs = BsConfig(bs_act["power_fractions"], bs_act["beams"])

        self._redraw_channels()
        report = self.evaluate_current()
        self.t += 1
        return self.encode_states(), report.reward, report, self.t >= self.t_env

    def evaluate_current(self) -> noma.EeReport:
        return noma.evaluate(
            self.channels,
            self.bs,
            self.surfaces,
            self.harvest,
            self.circuit,
            self.weights,
            sigma_s2=self.scenario.sigma_s2,
            sigma_u2=self.scenario.sigma_u2,
            r_min=self.r_min,
            p_bs_max=self.p_bs_max,
            cascade_mask=self._cascade_mask(),
            rate_override=self.rate_override,
        )

    def _redraw_channels(self):
        self.channels = draw_realization(
            self.scenario,
            self.user_positions,
            np.stack([c.position for c in self.surfaces])
            if self.surfaces
            else np.zeros((0, 3)),
            self._rng,
        )

    def _cascade_mask(self) -> np.ndarray | None:
        """Reflect-only surfaces cannot serve users behind their plane."""
        if not self.flags.reflect_only or not self.surfaces:
            return None
        s = self.scenario
        mask = np.ones((s.n_surfaces, s.n_directions, s.users_per_direction), dtype=bool)
        for q, cfg in enumerate(self.surfaces):
            bs_side = s.bs_position[0] - cfg.position[0]
            if bs_side == 0.0:
                continue
            user_side = self.user_positions[:, :, 0] - cfg.position[0]
            mask[q] = user_side * bs_side >= 0.0
        return mask

    # ------------------------------------------------------------- projection

    def project_actions(self, raw: np.ndarray, agent_id: str, modes=None) -> dict:
        """Map a raw action vector onto the feasible physical set.

        Amplitudes, phases, and the surface y-coordinate squash through
        sigmoids onto their boxes; power fractions go through a per-direction
        softmax; beam components pass through raw as Re/Im pairs.
        """
        if np.isnan(raw).any():
            raise ValueError("raw action contains NaN")
        s = self.scenario
        if agent_id == BS_AGENT:
            if raw.shape[0] != self.bs_action_dim:
                raise ValueError("bad BS action length")
            if self.flags.rate_model == "sdma":
                n_beams = s.n_directions * s.users_per_direction
                beams = raw.reshape(n_beams, s.n_antennas, 2)
                fractions = np.full(
                    (s.n_directions, s.users_per_direction), 1.0 / s.users_per_direction
                )
            else:
                kj = s.n_directions * s.users_per_direction
                logits = raw[:kj].reshape(s.n_directions, s.users_per_direction)
                shifted = logits - logits.max(axis=1, keepdims=True)
                e = np.exp(shifted)
                fractions = e / e.sum(axis=1, keepdims=True)
                beams = raw[kj:].reshape(s.n_directions, s.n_antennas, 2)
            return {
                "power_fractions": fractions,
                "beams": beams[..., 0] + 1j * beams[..., 1],
            }

        if raw.shape[0] != self.surface_action_dim:
            raise ValueError("bad surface action length")
        k_dirs, m = s.n_directions, s.m_elements
        km = k_dirs * m
        amplitudes = self.beta_max * _sigmoid(raw[:km]).reshape(k_dirs, m)
        # phase is circular: saturated sigmoids wrap back into [0, 2*pi)
        phases = np.mod(
            2.0 * np.pi * _sigmoid(raw[km : 2 * km]).reshape(k_dirs, m), 2.0 * np.pi
        )
        y = s.w_min[1] + (s.w_max[1] - s.w_min[1]) * float(_sigmoid(raw[2 * km :])[0])
        out = {"amplitudes": amplitudes, "phases": phases, "position_y": y}
        if modes is not None:
            out["modes"] = np.asarray(modes, dtype=float)
        return out

    def uniform_random_actions(self, rng: np.random.Generator) -> dict[str, dict]:
        """Sample the feasible set uniformly (the no-learning baseline).

        Modes are fair coin flips, amplitudes/phases/positions uniform on
        their boxes, fractions uniform on the simplex, and each beam is an
        isotropic direction carrying power uniform in [0, budget / n_beams].
        """
        s = self.scenario
        k_dirs, m, n = s.n_directions, s.m_elements, s.n_antennas
        out: dict[str, dict] = {}
        for q in range(s.n_surfaces):
            out[surface_agent_id(q)] = {
                "modes": rng.integers(0, 2, m).astype(float),
                "amplitudes": self.beta_max * rng.random((k_dirs, m)),
                "phases": 2.0 * np.pi * rng.random((k_dirs, m)),
                "position_y": float(
                    s.w_min[1] + (s.w_max[1] - s.w_min[1]) * rng.random()
                ),
            }
        n_beams = k_dirs * s.users_per_direction if self.flags.rate_model == "sdma" else k_dirs
        expo = rng.exponential(size=(k_dirs, s.users_per_direction))
        fractions = expo / expo.sum(axis=1, keepdims=True)
        raw = (rng.standard_normal((n_beams, n)) + 1j * rng.standard_normal((n_beams, n)))
        raw /= np.linalg.norm(raw, axis=1, keepdims=True)
        power = (self.p_bs_max / n_beams) * rng.random(n_beams)
        out[BS_AGENT] = {
            "power_fractions": fractions,
            "beams": np.sqrt(power)[:, None] * raw,
        }
        return out

    # --------------------------------------------------------------- encoding

    def encode_states(self) -> dict[str, np.ndarray]:
        """Per-agent channel feature vectors (Re/Im pairs, normalized)."""
        s = self.scenario
        states: dict[str, np.ndarray] = {}
        mask = self._cascade_mask()
        combined = self.channels.direct.conj().copy()
        for q in range(s.n_surfaces):
            cascades = np.zeros_like(combined)
            for k in range(s.n_directions):
                prof = self.surfaces[q].modes * np.sqrt(
                    self.surfaces[q].amplitudes[k]
                ) * np.exp(1j * self.surfaces[q].phases[k])
                for j in range(s.users_per_direction):
                    if mask is not None and not mask[q, k, j]:
                        continue
                    cascades[k, j] = (
                        self.channels.surface_to_user[q, k, j].conj() * prof
                    ) @ self.channels.bs_to_surface[q]
            combined += cascades
            states[surface_agent_id(q)] = self._features(cascades, self.norm_ris)
        states[BS_AGENT] = self._features(combined, self.norm_bs)
        return states

    @staticmethod
    def _features(rows: np.ndarray, norm: float) -> np.ndarray:
        flat = rows.ravel() / norm
        return np.concatenate([flat.real, flat.imag])

    def shared_state_for_ppo(
        self, agent_id: str, channel_state: np.ndarray, prev_modes: np.ndarray
    ) -> np.ndarray:
        """Concatenate channel features with the previous discrete action.

        Only surface agents have a discrete sub-agent to share from.
        """
        if agent_id == BS_AGENT:
            raise ValueError("the BS agent has no discrete sub-agent")
        if len(prev_modes) != self.scenario.m_elements:
            raise ValueError("previous mode vector has the wrong length")
        return np.concatenate([channel_state, np.asarray(prev_modes, dtype=float)])
