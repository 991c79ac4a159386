"""Canonical scenario/config presets.

``full_sections`` mirrors the reference simulation setup (32-element
surfaces, 6 BS antennas, users clustered 30-45 m down-range, surfaces
deployable 10-45 m at 10 m height).  ``desk_sections`` is the small fast
profile used by the test suite: 8-element surfaces, 4 antennas, a deeper user
field with a low wide deployment box so surface placement, amplification, and
full-space coverage all matter at this scale, and compact networks that train
in minutes.  The checked-in ``configs/*.cfg`` files are serializations of
these dictionaries.
"""

from __future__ import annotations

from risnoma import config_io
from risnoma.geometry import NetworkScenario
from risnoma.training import TrainConfig

__all__ = [
    "full_sections",
    "desk_sections",
    "full_scenario",
    "desk_scenario",
    "desk_train_config",
    "scenario_from",
    "train_config_from",
]


def full_sections() -> dict:
    return {
        "scenario": {
            "bs_position": [0.0, 0.0, 5.0],
            "n_directions": 2,
            "user_centers": [
                [0.0, 30.0, 0.0], [0.0, 35.0, 0.0],
                [10.0, 40.0, 0.0], [10.0, 45.0, 0.0],
            ],
            "user_drop_radius_m": 2.0,
            "n_antennas": 6,
            "n_surfaces": 2,
            "m_h": 8,
            "m_v": 4,
            "h0_db": -20.0,
            "k0": 2.2,
            "beta0_db": 3.0,
            "sigma_s2_dbm": -70.0,
            "sigma_u2_dbm": -70.0,
            "w_min_m": [5.0, 10.0, 10.0],
            "w_max_m": [5.0, 45.0, 10.0],
            "element_spacing_ratio": 0.5,
            "antenna_spacing_ratio": 0.5,
        },
        "train": {
            "episodes": 300,
            "t_env": 1000,
            "hidden": [256, 256],
            "buffer_capacity": 1000000,
            "p_bs_max": 10.0,   # 40 dBm
            "beta_max": 10.0,
            "r_min": 0.2,
        },
    }


def desk_sections() -> dict:
    sections = full_sections()
    sections["scenario"].update(
        {
            # Two user groups straddling the surface plane (x = 5), deep
            # down-range and close to the plane so cascades rival the direct
            # links; a low, wide deployment box lets placement learning range
            # from the BS to the user field.
            "user_centers": [
                [3.0, 58.0, 0.0], [3.0, 66.0, 0.0],
                [7.0, 60.0, 0.0], [7.0, 68.0, 0.0],
            ],
            "n_antennas": 4,
            "m_h": 4,
            "m_v": 2,
            "w_min_m": [5.0, 4.0, 2.0],
            "w_max_m": [5.0, 70.0, 2.0],
        }
    )
    sections["train"].update(
        {
            "episodes": 300,
            "t_env": 200,
            "hidden": [64, 64],
            "buffer_capacity": 100000,
            # Desk-scale actions set each configuration absolutely, so the
            # reward is effectively immediate; discounting future steps only
            # injects other agents' exploration noise into the advantages.
            "gamma_ppo": 0.0,
            "gae_lambda": 0.0,
            "log_std_init": -1.0,
            # heavy-tailed efficiency spikes otherwise produce destructive
            # actor steps that send beam power on a random walk
            "max_grad_norm": 0.5,
        }
    )
    return sections


def scenario_from(sections: dict) -> NetworkScenario:
    return config_io.scenario_from_sections(sections)


def train_config_from(sections: dict) -> TrainConfig:
    return TrainConfig.from_sections(sections)


def full_scenario() -> NetworkScenario:
    return scenario_from(full_sections())


def desk_scenario() -> NetworkScenario:
    return scenario_from(desk_sections())


def desk_train_config() -> TrainConfig:
    return train_config_from(desk_sections())
