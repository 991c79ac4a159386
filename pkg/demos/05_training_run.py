"""Train the hybrid multi-agent optimizer on a reduced desk scenario.

A shortened run (60 episodes) that still shows the energy-efficiency climb;
takes well under a minute.  For the full desk profile use the CLI:

    risnoma run --config configs/desk.cfg --variant full --seeds 11 --out runs/

Run:  python demos/05_training_run.py
"""

import numpy as np

from risnoma import presets
from risnoma.training import train

scenario = presets.desk_scenario()
cfg = presets.desk_train_config()
cfg.episodes = 60
cfg.seed = 5

print(f"training {scenario.n_surfaces} surface agents + 1 BS agent for "
      f"{cfg.episodes} episodes x {cfg.t_env} steps")
result = train(scenario, cfg)
log = result.run_log

ee = log.column("ee")
reward = log.column("reward")
for block in range(0, cfg.episodes, 10):
    seg = slice(block * cfg.t_env, (block + 10) * cfg.t_env)
    print(f"  episodes {block:3d}-{block + 10:3d}: "
          f"mean EE {ee[seg].mean():7.3f}  mean reward {reward[seg].mean():7.3f}")

print(f"\nfirst-10% EE {log.fraction_mean('ee', first=0.1):.3f}  ->  "
      f"final-10% EE {log.fraction_mean('ee', last=0.1):.3f}")
print(f"final penalties: C1 {log.column('c1')[-2000:].mean():.3f}  "
      f"C2 {log.column('c2')[-2000:].mean():.3f}  "
      f"C3 {log.column('c3')[-2000:].mean():.4f}")
