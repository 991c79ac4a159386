"""RIS-aided downlink NOMA network simulator and hybrid multi-agent RL optimizer.

The package is organized bottom-up:

* ``geometry``    -- positions, steering vectors, Rician channel synthesis.
* ``mfris``       -- surface element configuration, energy harvesting, circuit power.
* ``noma``        -- SIC ordering, SINR/rate evaluation, energy efficiency, penalties.
* ``nn``          -- small numpy MLP stack with analytic gradients and Adam.
* ``agents``      -- DQN (branching heads), PPO (clipped objective, GAE), hybrid agent.
* ``env``         -- the multi-agent episodic environment tying physics to agents.
* ``training``    -- training/evaluation loops, run logs, checkpoints.
* ``experiments`` -- scenario variants, baselines, curve export.
* ``cli``         -- ``risnoma run | eval | curves`` command line front end.
"""

from risnoma.geometry import NetworkScenario, ChannelRealization
from risnoma.mfris import MfRisConfig, HarvestModel, CircuitPowerModel
from risnoma.noma import BsConfig, PenaltyWeights, EeReport
from risnoma.env import MfRisNomaEnv, EnvFlags
from risnoma.training import TrainConfig, train, evaluate

__all__ = [
    "NetworkScenario",
    "ChannelRealization",
    "MfRisConfig",
    "HarvestModel",
    "CircuitPowerModel",
    "BsConfig",
    "PenaltyWeights",
    "EeReport",
    "MfRisNomaEnv",
    "EnvFlags",
    "TrainConfig",
    "train",
    "evaluate",
]

__version__ = "0.1.0"
