"""Simplified multiple-access baselines: OMA time sharing and SDMA.

Both are deliberately simple, documented contracts rather than faithful
reproductions of any external scheme: OMA gives every user an equal time
share served by a dedicated full-power maximum-ratio beam; SDMA serves all
users simultaneously with one beam each and no interference cancellation.
"""

from __future__ import annotations

import numpy as np

from risnoma.noma import BsConfig, LinkBudget

__all__ = ["oma_rate", "sdma_rate", "oma_override", "sdma_override"]


def oma_rate(combined: np.ndarray, p_bs_max: float, sigma_u2: float) -> np.ndarray:
    """Per-user OMA rates for combined channels of shape (K, J, N).

    Each of the K*J users gets time share 1/(K*J) and, during its slot, a
    maximum-ratio beam carrying the full power budget:
    R = (1/(K*J)) * log2(1 + p_max * ||g||^2 / sigma_u2).
    """
    k_dirs, j_users, _ = combined.shape
    share = 1.0 / (k_dirs * j_users)
    gains = p_bs_max * np.sum(np.abs(combined) ** 2, axis=2)
    return share * np.log2(1.0 + gains / sigma_u2)


def sdma_rate(combined: np.ndarray, beams: np.ndarray, sigma_u2: float) -> np.ndarray:
    """Per-user SDMA rates: one beam per user, others interfere, no SIC.

    ``combined`` is (K, J, N); ``beams`` is (K*J, N), user (k, j) owning beam
    k * J + j.  SINR_u = |g_u f_u|^2 / (sum_{u' != u} |g_u f_u'|^2 + sigma_u2).
    """
    k_dirs, j_users, n = combined.shape
    flat = combined.reshape(k_dirs * j_users, n)
    cross = np.abs(flat @ beams.T) ** 2  # [u, u'] = |g_u f_u'|^2
    own = np.diagonal(cross)
    interference = cross.sum(axis=1) - own
    gammas = own / (interference + sigma_u2)
    return np.log2(1.0 + gammas).reshape(k_dirs, j_users)


def oma_override(budget: LinkBudget, bs: BsConfig, sigma_u2: float, p_bs_max: float):
    """Rate-model hook: OMA rates; effective transmit power is the full budget."""
    return oma_rate(budget.combined, p_bs_max, sigma_u2), p_bs_max


def sdma_override(budget: LinkBudget, bs: BsConfig, sigma_u2: float, p_bs_max: float):
    """Rate-model hook: SDMA rates from the BS agent's per-user beams."""
    rates = sdma_rate(budget.combined, bs.beams, sigma_u2)
    return rates, float(np.sum(np.abs(bs.beams) ** 2))
