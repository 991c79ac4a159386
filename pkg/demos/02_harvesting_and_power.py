"""The surface power story: nonlinear harvesting vs circuit consumption.

Run:  python demos/02_harvesting_and_power.py
"""

import numpy as np

from risnoma.mfris import (
    CircuitPowerModel,
    HarvestModel,
    MfRisConfig,
    consumed_power,
    harvested_power,
    output_power,
    pin_diode_count,
    self_sustain_margin,
)

harvest = HarvestModel()
circuit = CircuitPowerModel()

print("== nonlinear harvesting curve ==")
for p_rf in (0.0, 1e-4, 1e-3, 5e-3, 14e-3, 50e-3, 1.0):
    print(f"  incident {p_rf*1e3:8.3f} mW -> harvested {harvested_power(p_rf, harvest)*1e3:8.4f} mW")

print("\n== control power ==")
diodes = pin_diode_count(circuit.levels_mode, circuit.levels_amplitude,
                         circuit.levels_phase, n_directions=2)
print(f"  {diodes} PIN diodes per element")
for m in (8, 32):
    print(f"  M = {m:2d}: idle consumption {consumed_power(circuit, 2, m, 0.0)*1e3:.2f} mW")

print("\n== self-sustainability margin ==")
rng = np.random.default_rng(1)
m = 8
h_q = 0.02 * (rng.standard_normal((m, 4)) + 1j * rng.standard_normal((m, 4)))
beams = np.sqrt(0.5) * (rng.standard_normal((2, 4)) + 1j * rng.standard_normal((2, 4)))
for harvesters in (0, 4, 8):
    modes = np.ones(m)
    modes[:harvesters] = 0.0
    cfg = MfRisConfig(modes, np.ones((2, m)), np.zeros((2, m)),
                      np.array([5.0, 10.0, 2.0]))
    margin = self_sustain_margin(cfg, h_q, beams, harvest, circuit, 1e-10)
    out = output_power(cfg, h_q, beams, 1e-10)
    print(f"  {harvesters} harvesting elements: margin {margin*1e3:9.3f} mW "
          f"(output power {out*1e3:.3f} mW)")
print("  (positive margin would mean the surface fully powers itself)")
