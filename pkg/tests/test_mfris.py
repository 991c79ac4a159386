import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from risnoma.mfris import (
    CircuitPowerModel,
    HarvestModel,
    MfRisConfig,
    consumed_power,
    element_profile,
    harvested_power,
    harvested_total,
    output_power,
    pin_diode_count,
    rf_power_all,
    rf_power_element,
    self_sustain_margin,
    theta_matrix,
)


def make_config(modes, amplitudes, phases):
    return MfRisConfig(
        modes=np.asarray(modes, dtype=float),
        amplitudes=np.asarray(amplitudes, dtype=float),
        phases=np.asarray(phases, dtype=float),
        position=np.array([5.0, 10.0, 2.0]),
    )


class TestThetaMatrix:
    def test_all_harvest_is_zero(self):
        cfg = make_config(np.zeros(3), np.ones((2, 3)), np.zeros((2, 3)))
        assert np.allclose(theta_matrix(cfg, 0), 0.0)
        assert np.allclose(theta_matrix(cfg, 1), 0.0)

    def test_neutral_is_identity(self):
        cfg = make_config(np.ones(3), np.ones((1, 3)), np.zeros((1, 3)))
        assert np.allclose(theta_matrix(cfg, 0), np.eye(3))

    def test_single_element_amplified_quarter_turn(self):
        cfg = make_config([1.0], [[4.0]], [[np.pi / 2]])
        assert theta_matrix(cfg, 0)[0, 0] == pytest.approx(2.0j)

    def test_entry_magnitudes(self):
        modes = np.array([1.0, 0.0, 1.0])
        amps = np.array([[2.0, 5.0, 0.0]])
        cfg = make_config(modes, amps, np.zeros((1, 3)))
        prof = element_profile(cfg, 0)
        assert np.allclose(np.abs(prof), modes * np.sqrt(amps[0]))
        # zero exactly when harvesting or zero amplitude
        assert prof[1] == 0.0 and prof[2] == 0.0 and prof[0] != 0.0


class TestRfPower:
    def test_relaying_element_harvests_nothing(self):
        h = np.array([1.0 + 2.0j, 0.5])
        beams = np.ones((2, 2), dtype=complex)
        assert rf_power_element(h, beams, 1.0, 1e-10) == 0.0

    def test_noise_only(self):
        h = np.array([1.0 + 2.0j, 0.5])
        beams = np.zeros((2, 2), dtype=complex)
        assert rf_power_element(h, beams, 0.0, 1e-10) == pytest.approx(1e-10)

    def test_hand_value(self):
        # h . sum(f) = 3 + 4j  ->  |.|^2 = 25
        h = np.array([3.0 + 4.0j, 0.0])
        beams = np.array([[1.0, 0.0], [0.0, 0.0]], dtype=complex)
        assert rf_power_element(h, beams, 0.0, 1e-10) == pytest.approx(25.0 + 1e-10)

    def test_vectorized_matches_scalar(self, rng):
        h_q = rng.standard_normal((4, 3)) + 1j * rng.standard_normal((4, 3))
        beams = rng.standard_normal((2, 3)) + 1j * rng.standard_normal((2, 3))
        modes = np.array([0.0, 1.0, 0.0, 1.0])
        vec = rf_power_all(h_q, beams, modes, 1e-10)
        for m in range(4):
            assert vec[m] == pytest.approx(
                rf_power_element(h_q[m], beams, modes[m], 1e-10)
            )


class TestHarvestedPower:
    def test_zero_in_zero_out(self, harvest):
        assert harvested_power(0.0, harvest) == 0.0

    def test_midpoint_value(self, harvest):
        # At the logistic midpoint the raw response is half the saturation
        # level; the zero-input correction maps that to
        # (Z/2 - Z*Omega) / (1 - Omega).
        omega = 1.0 / (1.0 + math.exp(150.0 * 0.014))
        expected = (0.012 - 0.024 * omega) / (1.0 - omega)
        got = harvested_power(0.014, harvest)
        assert got == pytest.approx(expected, abs=1e-12)
        assert got == pytest.approx(1.05305e-2, abs=5e-8)

    def test_saturation(self, harvest):
        assert harvested_power(1.0, harvest) == pytest.approx(0.024, abs=1e-9)

    def test_negative_rejected(self, harvest):
        with pytest.raises(ValueError):
            harvested_power(-1e-9, harvest)

    @given(st.floats(0.0, 10.0), st.floats(0.0, 10.0))
    @settings(max_examples=60, deadline=None)
    def test_monotone_and_bounded(self, a, b):
        harvest = HarvestModel()
        lo, hi = sorted((a, b))
        p_lo, p_hi = harvested_power(lo, harvest), harvested_power(hi, harvest)
        assert p_lo <= p_hi + 1e-15
        # mathematically < max_power; float saturation can land exactly on it
        assert 0.0 <= p_lo <= harvest.max_power
        assert 0.0 <= p_hi <= harvest.max_power


class TestPinDiodes:
    def test_reference_levels(self):
        assert pin_diode_count(2, 10, 8, 2) == 14

    def test_all_binary_single_direction(self):
        assert pin_diode_count(2, 2, 2, 1) == 3

    def test_all_binary_two_directions(self):
        assert pin_diode_count(2, 2, 2, 2) == 5

    def test_levels_below_two_rejected(self):
        with pytest.raises(ValueError):
            pin_diode_count(1, 10, 8, 2)


class TestOutputPower:
    def test_all_harvest(self, rng):
        cfg = make_config(np.zeros(2), np.ones((2, 2)), np.zeros((2, 2)))
        h_q = rng.standard_normal((2, 3)) + 1j * rng.standard_normal((2, 3))
        beams = rng.standard_normal((2, 3)) + 1j * rng.standard_normal((2, 3))
        assert output_power(cfg, h_q, beams, 1e-10) == 0.0

    def test_noise_term_only(self):
        cfg = make_config([1.0], [[4.0]], [[0.0]])
        h_q = np.ones((1, 2), dtype=complex)
        beams = np.zeros((1, 2), dtype=complex)
        assert output_power(cfg, h_q, beams, 1e-10) == pytest.approx(4e-10)

    def test_linear_in_amplitude(self, rng):
        h_q = rng.standard_normal((3, 2)) + 1j * rng.standard_normal((3, 2))
        beams = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
        amps = rng.random((2, 3)) * 5.0
        cfg1 = make_config(np.ones(3), amps, rng.random((2, 3)))
        cfg2 = make_config(np.ones(3), 2.0 * amps, cfg1.phases)
        assert output_power(cfg2, h_q, beams, 1e-10) == pytest.approx(
            2.0 * output_power(cfg1, h_q, beams, 1e-10)
        )


class TestConsumedPower:
    def test_reference_parameters(self, circuit):
        # 14 diodes * 32 elements * 0.33 mW + 2.1 mW
        assert consumed_power(circuit, 2, 32, 0.0) == pytest.approx(0.14994, abs=1e-9)

    def test_amplifier_slope(self, circuit):
        base = consumed_power(circuit, 2, 32, 0.0)
        assert consumed_power(circuit, 2, 32, 0.01) - base == pytest.approx(0.011)

    def test_passthrough(self):
        circuit = CircuitPowerModel(pin_power=0.0, conversion_power=0.0,
                                    amp_inefficiency=1.0)
        assert consumed_power(circuit, 2, 8, 0.123) == pytest.approx(0.123)

    def test_negative_output_rejected(self, circuit):
        with pytest.raises(ValueError):
            consumed_power(circuit, 2, 8, -1e-6)


class TestSelfSustainMargin:
    def test_all_relay_is_pure_deficit(self, harvest, circuit, rng):
        cfg = make_config(np.ones(4), np.ones((2, 4)), np.zeros((2, 4)))
        h_q = 1e-3 * (rng.standard_normal((4, 2)) + 1j * rng.standard_normal((4, 2)))
        beams = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
        margin = self_sustain_margin(cfg, h_q, beams, harvest, circuit, 1e-10)
        consumed = consumed_power(circuit, 2, 4, output_power(cfg, h_q, beams, 1e-10))
        assert margin == pytest.approx(-consumed)
        assert margin < 0

    def test_zero_beams_all_harvest(self, harvest, circuit):
        cfg = make_config(np.zeros(4), np.ones((2, 4)), np.zeros((2, 4)))
        h_q = np.ones((4, 2), dtype=complex)
        beams = np.zeros((2, 2), dtype=complex)
        margin = self_sustain_margin(cfg, h_q, beams, harvest, circuit, 1e-10)
        fixed = consumed_power(circuit, 2, 4, 0.0)
        assert margin == pytest.approx(-fixed, abs=1e-8)

    def test_mode_split_composes(self, harvest, circuit, rng):
        # Each element contributes either harvest (H mode) or profile power
        # (S mode), never both.
        modes = np.array([1.0, 0.0, 1.0, 0.0])
        cfg = make_config(modes, 2.0 * np.ones((2, 4)), np.zeros((2, 4)))
        h_q = 0.1 * (rng.standard_normal((4, 2)) + 1j * rng.standard_normal((4, 2)))
        beams = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
        per_elem = rf_power_all(h_q, beams, modes, 1e-10)
        assert per_elem[0] == 0.0 and per_elem[2] == 0.0
        assert per_elem[1] > 0.0 and per_elem[3] > 0.0
        prof = element_profile(cfg, 0)
        assert prof[1] == 0.0 and prof[3] == 0.0
        assert abs(prof[0]) > 0.0 and abs(prof[2]) > 0.0
        expected_harvest = float(np.sum(harvested_power(per_elem, harvest)))
        assert harvested_total(cfg, h_q, beams, harvest, 1e-10) == pytest.approx(
            expected_harvest
        )
