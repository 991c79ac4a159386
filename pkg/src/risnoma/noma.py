"""Downlink NOMA evaluation: SIC ordering, SINR, rates, power, penalties.

Conventions fixed here once for the whole package:

* The per-user channel row g_kj (1, N) is conj(direct) + sum_q r^H Theta_k H.
* The scalar seen by user (k, j) under beam k' is g_kj . f_k'.
* Users in a direction are decoded in ascending order of the decodability
  metric |g_kj f_k|^2 / (I_kj + sigma_u2); intra-group interference for user j
  sums the power fractions of users placed after j in that order.
* The rate shortfall penalty clamps per user before summing, so over-achieving
  users cannot cancel violators.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from risnoma import mfris
from risnoma.geometry import ChannelRealization, combined_channel
from risnoma.mfris import CircuitPowerModel, HarvestModel, MfRisConfig

__all__ = [
    "BsConfig",
    "PenaltyWeights",
    "LinkBudget",
    "EeReport",
    "link_budget",
    "sic_order",
    "sinr",
    "sinr_parts",
    "rate",
    "total_power",
    "penalties",
    "evaluate",
    "P_TOTAL_FLOOR",
]

P_TOTAL_FLOOR = 1e-6  # W; keeps energy efficiency finite in degenerate configs


@dataclass
class BsConfig:
    """Base-station action: power-allocation fractions and transmit beams.

    ``power_fractions``: (K, J), each direction's row sums to 1.
    ``beams``: (K, N) complex, ||f_k||^2 is the beam's transmit power in W.
    """

    power_fractions: np.ndarray
    beams: np.ndarray

    def __post_init__(self):
        self.power_fractions = np.asarray(self.power_fractions, dtype=float)
        self.beams = np.asarray(self.beams, dtype=complex)
        if np.any(self.power_fractions < 0):
            raise ValueError("power fractions must be nonnegative")
        if not np.allclose(self.power_fractions.sum(axis=1), 1.0, atol=1e-9):
            raise ValueError("power fractions must sum to 1 per direction")


@dataclass(frozen=True)
class PenaltyWeights:
    rate: float = 1e-3
    power: float = 1e-5
    sustain: float = 1e-5


@dataclass
class LinkBudget:
    """Per-user effective link quantities of one network configuration.

    ``combined``: (K, J, N) channel rows; ``beam_gains``: (K, J, K) with entry
    [k, j, k'] = |g_kj f_k'|^2; ``surface_noise``: (K, J) noise power relayed
    by the surfaces to each user.
    """

    combined: np.ndarray
    beam_gains: np.ndarray
    surface_noise: np.ndarray


@dataclass
class EeReport:
    """Everything the reward and the logs need from one evaluation."""

    rates: np.ndarray          # (K, J) bits/s/Hz
    sum_rate: float
    p_total: float             # W
    ee: float                  # bits/s/Hz/W
    c1: float
    c2: float
    c3: float
    reward: float
    sinr: np.ndarray           # (K, J)
    sic_orders: np.ndarray     # (K, J) user indices, ascending decodability
    beam_power: float          # sum_k ||f_k||^2
    harvested: np.ndarray      # (Q,)
    consumed: np.ndarray       # (Q,)
    margins: np.ndarray        # (Q,) harvested - consumed
    p_total_floored: bool = False


def link_budget(
    channels: ChannelRealization,
    surfaces: list[MfRisConfig],
    bs: BsConfig,
    sigma_s2: float,
    cascade_mask: np.ndarray | None = None,
) -> LinkBudget:
    """Assemble combined channels, beam gains, and relayed-noise powers.

    ``cascade_mask`` (Q, K, J) zeroes individual surface-user cascades, e.g.
    for users on the far side of a reflect-only surface.
    """
    k_dirs, j_users, n = channels.direct.shape
    q_n = channels.bs_to_surface.shape[0]
    profiles = [
        np.stack([mfris.element_profile(surfaces[q], k) for k in range(k_dirs)])
        for q in range(q_n)
    ]  # per surface: (K, M)

    combined = np.zeros((k_dirs, j_users, n), dtype=complex)
    surface_noise = np.zeros((k_dirs, j_users))
    for k in range(k_dirs):
        for j in range(j_users):
            cascades = []
            for q in range(q_n):
                if cascade_mask is not None and not cascade_mask[q, k, j]:
                    continue
                weighted = channels.surface_to_user[q, k, j].conj() * profiles[q][k]
                cascades.append(weighted @ channels.bs_to_surface[q])
                surface_noise[k, j] += sigma_s2 * float(np.sum(np.abs(weighted) ** 2))
            combined[k, j] = combined_channel(channels.direct[k, j], cascades)

    beam_gains = np.abs(combined @ bs.beams.T) ** 2  # [k, j, k'] = |g_kj f_k'|^2
    return LinkBudget(combined, beam_gains, surface_noise)


def sic_order(budget: LinkBudget, k: int, sigma_u2: float) -> np.ndarray:
    """Users of direction k sorted ascending by decodability.

    Metric: |g_kj f_k|^2 / (surface_noise_kj + sigma_u2).  Ties break by user
    index ascending (stable sort), which makes the order label-invariant.
    """
    metric = budget.beam_gains[k, :, k] / (budget.surface_noise[k] + sigma_u2)
    return np.argsort(metric, kind="stable")


def sinr_parts(
    k: int,
    j: int,
    budget: LinkBudget,
    power_fractions: np.ndarray,
    sigma_u2: float,
    orders: np.ndarray | None = None,
) -> tuple[float, float]:
    """(numerator, denominator) of the post-SIC SINR of user j in direction k.

    Numerator: |g_kj f_k|^2 p_kj.  Denominator: own-channel power times the
    fractions of users decoded after j, plus inter-group interference from
    every other direction's beam, plus surface-relayed noise, plus receiver
    noise.
    """
    if orders is None:
        orders = np.stack(
            [sic_order(budget, kk, sigma_u2) for kk in range(budget.combined.shape[0])]
        )
    order = list(orders[k])
    pos = order.index(j)
    later = order[pos + 1 :]
    own_gain = budget.beam_gains[k, j, k]
    intra = own_gain * float(power_fractions[k, later].sum()) if later else 0.0
    inter = float(budget.beam_gains[k, j].sum() - own_gain)  # other beams, fractions sum to 1
    denom = intra + inter + budget.surface_noise[k, j] + sigma_u2
    return float(own_gain * power_fractions[k, j]), denom


def sinr(
    k: int,
    j: int,
    budget: LinkBudget,
    power_fractions: np.ndarray,
    sigma_u2: float,
    orders: np.ndarray | None = None,
) -> float:
    """SINR of user j in direction k after SIC; see ``sinr_parts``."""
    num, denom = sinr_parts(k, j, budget, power_fractions, sigma_u2, orders)
    return num / denom


def rate(gamma: float) -> float:
    """Achievable spectral efficiency log2(1 + gamma)."""
    if gamma < 0:
        raise ValueError("SINR must be nonnegative")
    return float(np.log2(1.0 + gamma))


def total_power(beam_power: float, margins: np.ndarray) -> tuple[float, bool]:
    """System power: surface net consumption plus transmit power, floored.

    Returns (power, floored_flag); the floor keeps the efficiency ratio finite
    when harvesting exceeds consumption plus transmit power.
    """
    p = float(beam_power - margins.sum())
    if p < P_TOTAL_FLOOR:
        return P_TOTAL_FLOOR, True
    return p, False


def penalties(
    rates: np.ndarray,
    r_min: float,
    beam_power: float,
    p_bs_max: float,
    margins: np.ndarray,
) -> tuple[float, float, float]:
    """Constraint penalties: rate shortfall, power budget excess, sustain deficit."""
    c1 = float(np.sum(np.maximum(0.0, r_min - rates)))
    c2 = max(0.0, beam_power - p_bs_max)
    c3 = float(np.sum(np.maximum(0.0, -margins)))
    return c1, c2, c3


def evaluate(
    channels: ChannelRealization,
    bs: BsConfig,
    surfaces: list[MfRisConfig],
    harvest: HarvestModel,
    circuit: CircuitPowerModel,
    weights: PenaltyWeights,
    *,
    sigma_s2: float,
    sigma_u2: float,
    r_min: float,
    p_bs_max: float,
    cascade_mask: np.ndarray | None = None,
    rate_override=None,
) -> EeReport:
    """Evaluate one full network configuration into an ``EeReport``.

    ``rate_override``, when given, replaces the NOMA rate model: it is called
    as (budget, bs, sigma_u2, p_bs_max) and must return ((K, J) rates,
    effective beam power).  Used by the OMA/SDMA baselines.
    """
    k_dirs = channels.direct.shape[0]
    budget = link_budget(channels, surfaces, bs, sigma_s2, cascade_mask)

    if rate_override is None:
        orders = np.stack([sic_order(budget, k, sigma_u2) for k in range(k_dirs)])
        gammas = np.zeros_like(budget.surface_noise)
        for k in range(k_dirs):
            for j in range(channels.direct.shape[1]):
                gammas[k, j] = sinr(k, j, budget, bs.power_fractions, sigma_u2, orders)
        rates = np.log2(1.0 + gammas)
        beam_power = float(np.sum(np.abs(bs.beams) ** 2))
    else:
        rates, beam_power = rate_override(budget, bs, sigma_u2, p_bs_max)
        gammas = np.exp2(rates) - 1.0
        orders = np.stack([np.arange(channels.direct.shape[1]) for _ in range(k_dirs)])

    q_n = channels.bs_to_surface.shape[0]
    harvested = np.zeros(q_n)
    consumed = np.zeros(q_n)
    for q in range(q_n):
        harvested[q] = mfris.harvested_total(
            surfaces[q], channels.bs_to_surface[q], bs.beams, harvest, sigma_s2
        )
        consumed[q] = mfris.consumed_power(
            circuit,
            k_dirs,
            channels.bs_to_surface.shape[1],
            mfris.output_power(surfaces[q], channels.bs_to_surface[q], bs.beams, sigma_s2),
        )
    margins = harvested - consumed

    p_total, floored = total_power(beam_power, margins)
    sum_rate = float(rates.sum())
    ee = sum_rate / p_total
    c1, c2, c3 = penalties(rates, r_min, beam_power, p_bs_max, margins)
    reward = ee - weights.rate * c1 - weights.power * c2 - weights.sustain * c3
    return EeReport(
        rates=rates,
        sum_rate=sum_rate,
        p_total=p_total,
        ee=ee,
        c1=c1,
        c2=c2,
        c3=c3,
        reward=reward,
        sinr=gammas,
        sic_orders=orders,
        beam_power=beam_power,
        harvested=harvested,
        consumed=consumed,
        margins=margins,
        p_total_floored=floored,
    )
