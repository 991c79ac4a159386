"""Multi-functional surface model: element configuration, harvesting, power.

Each surface element either relays signals (mode bit 1, with a per-direction
amplitude/phase coefficient) or harvests RF energy (mode bit 0).  Harvesting
follows a logistic nonlinearity with a zero-input/zero-output correction;
circuit power combines a PIN-diode control term, a fixed conversion term, and
an amplifier term proportional to the surface output power.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "MfRisConfig",
    "HarvestModel",
    "CircuitPowerModel",
    "element_profile",
    "theta_matrix",
    "rf_power_element",
    "rf_power_all",
    "harvested_power",
    "harvested_total",
    "pin_diode_count",
    "output_power",
    "consumed_power",
    "self_sustain_margin",
]


@dataclass
class MfRisConfig:
    """Configuration of one surface.

    ``modes``: (M,) bits, 1 = relay (S mode), 0 = harvest (H mode); shared
    across directions.  ``amplitudes``/``phases``: (K, M), one row per
    direction.  ``position``: (3,) meters.
    """

    modes: np.ndarray
    amplitudes: np.ndarray
    phases: np.ndarray
    position: np.ndarray

    def __post_init__(self):
        self.modes = np.asarray(self.modes, dtype=float)
        self.amplitudes = np.asarray(self.amplitudes, dtype=float)
        self.phases = np.asarray(self.phases, dtype=float)
        self.position = np.asarray(self.position, dtype=float)

    def validate(self, beta_max: float, w_min: np.ndarray, w_max: np.ndarray):
        if not np.all(np.isin(self.modes, (0.0, 1.0))):
            raise ValueError("mode bits must be 0 or 1")
        if np.any(self.amplitudes < 0) or np.any(self.amplitudes > beta_max):
            raise ValueError("amplitudes outside [0, beta_max]")
        if np.any(self.phases < 0) or np.any(self.phases >= 2 * np.pi):
            raise ValueError("phases outside [0, 2*pi)")
        if np.any(self.position < w_min) or np.any(self.position > w_max):
            raise ValueError("position outside the deployable box")


@dataclass(frozen=True)
class HarvestModel:
    """Logistic RF-to-DC harvesting curve.

    ``max_power`` is the saturation level (W); ``steepness`` (1/W) and
    ``midpoint`` (W) shape the logistic; ``offset`` removes the zero-input
    response so that zero incident power harvests exactly zero.
    """

    max_power: float = 24e-3
    steepness: float = 150.0
    midpoint: float = 14e-3

    def __post_init__(self):
        if self.max_power <= 0 or self.steepness <= 0 or self.midpoint <= 0:
            raise ValueError("harvest parameters must be positive")

    @property
    def offset(self) -> float:
        # Same expression shape as the logistic at zero input so the
        # correction cancels bit-exactly and zero power harvests exactly zero.
        return float(1.0 / (1.0 + np.exp(self.steepness * self.midpoint)))


@dataclass(frozen=True)
class CircuitPowerModel:
    """Surface control/conversion/amplifier power parameters."""

    pin_power: float = 0.33e-3          # W per PIN diode
    conversion_power: float = 2.1e-3    # W
    amp_inefficiency: float = 1.1       # >= 1, multiplies output power
    levels_mode: int = 2
    levels_amplitude: int = 10
    levels_phase: int = 8

    def __post_init__(self):
        if self.pin_power < 0 or self.conversion_power < 0:
            raise ValueError("power terms must be nonnegative")
        if self.amp_inefficiency < 1:
            raise ValueError("amplifier inefficiency must be >= 1")
        if min(self.levels_mode, self.levels_amplitude, self.levels_phase) < 2:
            raise ValueError("quantization levels must be >= 2")


def element_profile(cfg: MfRisConfig, direction: int) -> np.ndarray:
    """Diagonal entries (M,) of the surface response for one direction.

    Entry m = mode_m * sqrt(amplitude_m) * exp(j*phase_m); harvesting
    elements contribute zero.
    """
    return cfg.modes * np.sqrt(cfg.amplitudes[direction]) * np.exp(1j * cfg.phases[direction])


def theta_matrix(cfg: MfRisConfig, direction: int) -> np.ndarray:
    """Full (M, M) diagonal response matrix for one direction."""
    return np.diag(element_profile(cfg, direction))


def rf_power_element(
    h_row: np.ndarray, beams: np.ndarray, mode: float, sigma_s2: float
) -> float:
    """Expected RF power (W) incident on one element.

    ``h_row`` is the element's (N,) row of the BS-to-surface channel,
    ``beams`` the (K, N) transmit beams.  Uses the closed-form expectation
    over the zero-mean element noise: (1 - mode) * (|h . sum_k f_k|^2 +
    sigma_s2); a relaying element (mode 1) harvests nothing.
    """
    beam_sum = beams.sum(axis=0)
    return float((1.0 - mode) * (np.abs(h_row @ beam_sum) ** 2 + sigma_s2))


def rf_power_all(
    h_q: np.ndarray, beams: np.ndarray, modes: np.ndarray, sigma_s2: float
) -> np.ndarray:
    """Vectorized ``rf_power_element`` over all M elements of one surface."""
    incident = np.abs(h_q @ beams.sum(axis=0)) ** 2 + sigma_s2
    return (1.0 - modes) * incident


def harvested_power(p_rf, model: HarvestModel):
    """Nonlinear harvested power (W) for incident RF power ``p_rf``.

    Logistic response shifted so the zero-input output is exactly zero;
    saturates below ``model.max_power``.  Accepts scalars or arrays.
    """
    p_rf = np.asarray(p_rf, dtype=float)
    if np.any(p_rf < 0):
        raise ValueError("incident RF power must be nonnegative")
    logistic = 1.0 / (1.0 + np.exp(-model.steepness * (p_rf - model.midpoint)))
    out = model.max_power * (logistic - model.offset) / (1.0 - model.offset)
    return float(out) if out.ndim == 0 else out


def harvested_total(
    cfg: MfRisConfig, h_q: np.ndarray, beams: np.ndarray, model: HarvestModel, sigma_s2: float
) -> float:
    """Total power harvested by one surface across its elements."""
    return float(np.sum(harvested_power(rf_power_all(h_q, beams, cfg.modes, sigma_s2), model)))


def pin_diode_count(
    levels_mode: int, levels_amplitude: int, levels_phase: int, n_directions: int
) -> int:
    """PIN diodes needed per element: ceil(log2 Lm + K*log2 La + K*log2 Lp)."""
    if min(levels_mode, levels_amplitude, levels_phase) < 2:
        raise ValueError("quantization levels must be >= 2")
    bits = (
        math.log2(levels_mode)
        + n_directions * math.log2(levels_amplitude)
        + n_directions * math.log2(levels_phase)
    )
    return int(math.ceil(bits))


def output_power(
    cfg: MfRisConfig, h_q: np.ndarray, beams: np.ndarray, sigma_s2: float
) -> float:
    """Signal plus amplified-noise power (W) radiated by one surface.

    Sum over directions k of (sum over beams k' of |Theta_k H f_k'|^2) plus
    the noise term sigma_s2 * |Theta_k|_F^2.  The beam count may exceed the
    direction count (per-user beams); every beam passes through every
    direction profile.
    """
    incident = h_q @ beams.T            # (M, n_beams), column k' = H f_k'
    total = 0.0
    for k in range(cfg.amplitudes.shape[0]):
        prof = element_profile(cfg, k)
        total += float(np.sum(np.abs(prof[:, None] * incident) ** 2))
        total += sigma_s2 * float(np.sum(np.abs(prof) ** 2))
    return total


def consumed_power(
    circuit: CircuitPowerModel, n_directions: int, m_elements: int, output_pwr: float
) -> float:
    """Total power (W) one surface consumes: control + conversion + amplifier."""
    if output_pwr < 0:
        raise ValueError("output power must be nonnegative")
    diodes = pin_diode_count(
        circuit.levels_mode, circuit.levels_amplitude, circuit.levels_phase, n_directions
    )
    return diodes * m_elements * circuit.pin_power + circuit.conversion_power + (
        circuit.amp_inefficiency * output_pwr
    )


def self_sustain_margin(
    cfg: MfRisConfig,
    h_q: np.ndarray,
    beams: np.ndarray,
    harvest: HarvestModel,
    circuit: CircuitPowerModel,
    sigma_s2: float,
) -> float:
    """Harvested minus consumed power of one surface; >= 0 means the surface
    sustains itself."""
    harvested = harvested_total(cfg, h_q, beams, harvest, sigma_s2)
    consumed = consumed_power(
        circuit, cfg.amplitudes.shape[0], cfg.modes.shape[0],
        output_power(cfg, h_q, beams, sigma_s2),
    )
    return harvested - consumed
