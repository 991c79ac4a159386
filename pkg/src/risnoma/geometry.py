"""Network geometry, steering vectors, and Rician fading channel synthesis.

All channels follow the same composition: a deterministic line-of-sight (LoS)
phasor structure derived from Cartesian positions, mixed with an i.i.d.
Rayleigh (complex Gaussian) component through a Rician factor, and scaled by a
power-law pathloss gain.  Conventions:

* Distances are Euclidean norms in meters.
* Angles are derived from positions: azimuth = atan2 of the horizontal
  offsets, elevation = atan2 of the vertical offset against horizontal range.
* Element/antenna spacings enter only as spacing-to-wavelength ratios.
* Surface elements are indexed vertical-major: element m = v * m_h + h.
* The per-user channel row used downstream is conj(direct) + sum of cascades,
  so the direct link enters with the Hermitian inner-product convention.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "NetworkScenario",
    "ChannelRealization",
    "pathloss",
    "ula_steering",
    "bs_ris_los",
    "bs_user_los",
    "ris_user_los",
    "draw_nlos",
    "compose_rician",
    "rician_channel",
    "cascaded_channel",
    "combined_channel",
    "draw_realization",
]


@dataclass
class NetworkScenario:
    """Static geometry, device counts, and physical constants of one network.

    ``user_centers`` has shape (K, J, 3) with z = 0: K directions (NOMA
    groups) of J users each; actual user positions are drawn uniformly in a
    disk of ``user_drop_radius`` around each center.  ``w_min``/``w_max``
    bound the deployable box of every surface.
    """

    bs_position: np.ndarray
    user_centers: np.ndarray
    user_drop_radius: float
    n_antennas: int
    n_surfaces: int
    m_h: int
    m_v: int
    h0: float                      # linear pathloss gain at 1 m
    k0: float                      # pathloss exponent
    beta0: float                   # Rician factor, linear
    sigma_s2: float                # surface element noise power, W
    sigma_u2: float                # receiver noise power, W
    w_min: np.ndarray = field(default_factory=lambda: np.array([5.0, 10.0, 10.0]))
    w_max: np.ndarray = field(default_factory=lambda: np.array([5.0, 45.0, 10.0]))
    element_spacing_ratio: float = 0.5
    antenna_spacing_ratio: float = 0.5

    def __post_init__(self):
        self.bs_position = np.asarray(self.bs_position, dtype=float)
        self.user_centers = np.asarray(self.user_centers, dtype=float)
        self.w_min = np.asarray(self.w_min, dtype=float)
        self.w_max = np.asarray(self.w_max, dtype=float)
        if self.user_centers.ndim != 3 or self.user_centers.shape[2] != 3:
            raise ValueError("user_centers must have shape (K, J, 3)")
        if np.any(self.user_centers[:, :, 2] != 0.0):
            raise ValueError("users sit at ground level: z coordinates must be 0")
        if self.h0 <= 0 or self.k0 <= 0:
            raise ValueError("h0 and k0 must be positive")
        if self.beta0 < 0:
            raise ValueError("Rician factor must be nonnegative")
        if self.sigma_s2 <= 0 or self.sigma_u2 <= 0:
            raise ValueError("noise powers must be positive")
        if np.any(self.w_min > self.w_max):
            raise ValueError("w_min must be componentwise <= w_max")
        if self.m_h < 1 or self.m_v < 1 or self.n_antennas < 1:
            raise ValueError("array sizes must be >= 1")
        if self.n_surfaces < 0:
            raise ValueError("n_surfaces must be >= 0")

    @property
    def n_directions(self) -> int:
        return self.user_centers.shape[0]

    @property
    def users_per_direction(self) -> int:
        return self.user_centers.shape[1]

    @property
    def m_elements(self) -> int:
        return self.m_h * self.m_v


@dataclass
class ChannelRealization:
    """All channel matrices/vectors of one fading draw.

    ``bs_to_surface``: (Q, M, N); ``direct``: (K, J, N);
    ``surface_to_user``: (Q, K, J, M).  The ``*_nlos`` fields cache the
    unit-variance small-scale draws so LoS/pathloss can be recomposed after a
    surface moves without redrawing fading.
    """

    bs_to_surface: np.ndarray
    direct: np.ndarray
    surface_to_user: np.ndarray
    bs_to_surface_nlos: np.ndarray
    direct_nlos: np.ndarray
    surface_to_user_nlos: np.ndarray

    def validate(self):
        for name in ("bs_to_surface", "direct", "surface_to_user"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"non-finite entries in {name}")


def pathloss(distance: float, h0: float, k0: float) -> float:
    """Power-law gain h0 * d**(-k0); h0 is the linear gain at 1 m."""
    if distance <= 0:
        raise ValueError("pathloss needs a positive distance")
    return h0 * distance ** (-k0)


def ula_steering(n_elems: int, spacing_ratio: float, angle_term: float) -> np.ndarray:
    """Uniform-linear-array response: entry i = exp(-j*2pi*spacing*i*angle_term)."""
    if n_elems < 1:
        raise ValueError("need at least one element")
    idx = np.arange(n_elems)
    return np.exp(-2j * np.pi * spacing_ratio * angle_term * idx)


def _azimuth_elevation(src: np.ndarray, dst: np.ndarray) -> tuple[float, float]:
    off = dst - src
    horiz = float(np.hypot(off[0], off[1]))
    if horiz == 0.0 and off[2] == 0.0:
        raise ValueError("coincident positions have no direction")
    return float(np.arctan2(off[1], off[0])), float(np.arctan2(off[2], horiz))


def bs_ris_los(scenario: NetworkScenario, surface_pos: np.ndarray) -> np.ndarray:
    """Rank-1 LoS matrix (M, N) between the BS array and one surface.

    Outer product of the surface response (Kronecker of vertical and
    horizontal steering at the arrival angles) and the BS steering at the
    departure angles.
    """
    az_r, el_r = _azimuth_elevation(surface_pos, scenario.bs_position)
    az_t, el_t = _azimuth_elevation(scenario.bs_position, surface_pos)
    d_r = scenario.element_spacing_ratio
    vert = ula_steering(scenario.m_v, d_r, np.sin(az_r) * np.sin(el_r))
    horz = ula_steering(scenario.m_h, d_r, np.sin(az_r) * np.cos(el_r))
    a_surf = np.kron(vert, horz)
    a_bs = ula_steering(
        scenario.n_antennas, scenario.antenna_spacing_ratio, np.sin(az_t) * np.cos(el_t)
    )
    return np.outer(a_surf, a_bs)


def bs_user_los(scenario: NetworkScenario, user_pos: np.ndarray) -> np.ndarray:
    """LoS steering (N,) of the direct BS-to-user link."""
    az, el = _azimuth_elevation(scenario.bs_position, user_pos)
    return ula_steering(
        scenario.n_antennas, scenario.antenna_spacing_ratio, np.sin(az) * np.sin(el)
    )


def ris_user_los(
    scenario: NetworkScenario, surface_pos: np.ndarray, user_pos: np.ndarray
) -> np.ndarray:
    """LoS steering (M,) of a surface-to-user link, flat over all M elements."""
    az, el = _azimuth_elevation(surface_pos, user_pos)
    return ula_steering(
        scenario.m_elements, scenario.element_spacing_ratio, np.sin(az) * np.sin(el)
    )


def draw_nlos(shape: tuple, rng: np.random.Generator) -> np.ndarray:
    """Unit-variance circularly-symmetric complex Gaussian draws."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def compose_rician(
    los: np.ndarray, nlos: np.ndarray, beta0: float, pathloss_gain: float
) -> np.ndarray:
    """Mix LoS and small-scale components and apply the pathloss amplitude."""
    los_w = np.sqrt(beta0 / (beta0 + 1.0))
    nlos_w = np.sqrt(1.0 / (beta0 + 1.0))
    return np.sqrt(pathloss_gain) * (los_w * los + nlos_w * nlos)


def rician_channel(
    los: np.ndarray, beta0: float, pathloss_gain: float, rng: np.random.Generator
) -> np.ndarray:
    """Draw one Rician-faded channel around the given LoS structure."""
    if beta0 < 0:
        raise ValueError("Rician factor must be nonnegative")
    return compose_rician(los, draw_nlos(los.shape, rng), beta0, pathloss_gain)


def cascaded_channel(r: np.ndarray, theta, h_q: np.ndarray) -> np.ndarray:
    """Surface-cascaded channel row r^H Theta H, returned as an (N,) vector.

    ``theta`` may be the full (M, M) diagonal matrix or just its (M,)
    diagonal entries.
    """
    theta = np.asarray(theta)
    diag = np.diagonal(theta) if theta.ndim == 2 else theta
    if r.shape[0] != diag.shape[0] or h_q.shape[0] != diag.shape[0]:
        raise ValueError("element dimensions of r, theta, and H must agree")
    return (r.conj() * diag) @ h_q


def combined_channel(h_direct: np.ndarray, cascades) -> np.ndarray:
    """Total BS-to-user row: conj(direct link) plus the sum of cascades."""
    total = h_direct.conj().astype(complex)
    for g in cascades:
        total = total + g
    return total


def draw_realization(
    scenario: NetworkScenario,
    user_positions: np.ndarray,
    surface_positions: np.ndarray,
    rng: np.random.Generator,
) -> ChannelRealization:
    """Draw every link of the network for one fading realization.

    ``user_positions``: (K, J, 3); ``surface_positions``: (Q, 3).  The rng is
    consumed in a fixed order (surfaces, direct links, surface-user links) so
    that two scenarios with equal dimensions consume identical stream counts.
    """
    k_dirs, j_users = scenario.n_directions, scenario.users_per_direction
    q_n, m, n = scenario.n_surfaces, scenario.m_elements, scenario.n_antennas

    hq_nlos = draw_nlos((q_n, m, n), rng)
    h_nlos = draw_nlos((k_dirs, j_users, n), rng)
    r_nlos = draw_nlos((q_n, k_dirs, j_users, m), rng)

    hq = np.zeros((q_n, m, n), dtype=complex)
    for q in range(q_n):
        d = float(np.linalg.norm(scenario.bs_position - surface_positions[q]))
        gain = pathloss(d, scenario.h0, scenario.k0)
        hq[q] = compose_rician(
            bs_ris_los(scenario, surface_positions[q]), hq_nlos[q], scenario.beta0, gain
        )

    direct = np.zeros((k_dirs, j_users, n), dtype=complex)
    for k in range(k_dirs):
        for j in range(j_users):
            d = float(np.linalg.norm(scenario.bs_position - user_positions[k, j]))
            gain = pathloss(d, scenario.h0, scenario.k0)
            direct[k, j] = compose_rician(
                bs_user_los(scenario, user_positions[k, j]),
                h_nlos[k, j],
                scenario.beta0,
                gain,
            )

    r_su = np.zeros((q_n, k_dirs, j_users, m), dtype=complex)
    for q in range(q_n):
        for k in range(k_dirs):
            for j in range(j_users):
                d = float(np.linalg.norm(surface_positions[q] - user_positions[k, j]))
                gain = pathloss(d, scenario.h0, scenario.k0)
                r_su[q, k, j] = compose_rician(
                    ris_user_los(scenario, surface_positions[q], user_positions[k, j]),
                    r_nlos[q, k, j],
                    scenario.beta0,
                    gain,
                )

    return ChannelRealization(hq, direct, r_su, hq_nlos, h_nlos, r_nlos)
