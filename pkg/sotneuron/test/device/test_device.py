import numpy as np
import pytest

from sotneuron.device import (
    DEMAG_CACHE_SIZE, DeviceParams, HeavyMetalParams, MTJParams, NeuronState, PulseSchedule, _demag,
    clock_power, hm_resistance, mtj_spin_current, random_pole, read_voltage, she_spin_current,
)
from sotneuron.exc import InvalidParameterError
from sotneuron.magnetodynamics import MagnetGeometry


def test_injection_efficiency(device):
    assert device.beta == pytest.approx(4.712, abs=0.01)

def test_heavy_metal_resistance(device):
    assert device.R_HM == pytest.approx(1000.0)
    assert hm_resistance(HeavyMetalParams(length=80e-9)) == pytest.approx(2000.0)

def test_clock_power():
    power = clock_power(PulseSchedule(I_clock=85e-6, t_clock=2e-9), HeavyMetalParams())
    assert power.power == pytest.approx(7.225e-6, rel=1e-9)
    assert power.energy == pytest.approx(14.45e-15, rel=1e-9)

def test_clock_power_sign_independent():
    hm = HeavyMetalParams()
    assert clock_power(PulseSchedule(I_clock=-50e-6), hm) == clock_power(PulseSchedule(I_clock=50e-6), hm)
    assert clock_power(PulseSchedule(I_clock=0.0), hm).power == 0

def test_number_of_spins(device):
    # Ms·V/muB for a 20 nm radius, 1.5 nm thick disc
    assert device.n_spins == pytest.approx(2.0328e5, rel=1e-3)

def test_she_spin_current():
    hm, geom = HeavyMetalParams(), MagnetGeometry()
    i_s = she_spin_current(85e-6, hm, geom)
    assert i_s.magnitude == pytest.approx(hm.injection_efficiency(geom) * 85e-6)
    assert i_s.sigma == (0.0, 1.0, 0.0)
    assert she_spin_current(-85e-6, hm, geom).sigma == (0.0, -1.0, 0.0)
    assert she_spin_current(0.0, hm, geom).magnitude == 0

def test_mtj_spin_current():
    mtj = MTJParams()
    i_s = mtj_spin_current(4e-6, mtj)
    assert i_s.magnitude == pytest.approx(2.8e-6)
    assert i_s.sigma == (0.0, 0.0, -1.0)
    assert mtj_spin_current(-4e-6, mtj).sigma == (0.0, 0.0, 1.0)
    assert not np.any(mtj_spin_current(0.0, mtj).vector)

@pytest.mark.parametrize("current", [float("nan"), float("inf")])
def test_non_finite_currents(current):
    with pytest.raises(InvalidParameterError):
        she_spin_current(current, HeavyMetalParams(), MagnetGeometry())
    with pytest.raises(InvalidParameterError):
        mtj_spin_current(current, MTJParams())

def test_schedule():
    schedule = PulseSchedule(gap=0.5e-9)
    assert schedule.duration == pytest.approx(8.5e-9)
    changed = schedule.with_currents(60e-6, -2e-6)
    assert (changed.I_clock, changed.I_write, changed.gap) == (60e-6, -2e-6, 0.5e-9)
    with pytest.raises(ValueError):
        PulseSchedule(t_clock=0)
    with pytest.raises(ValueError):
        PulseSchedule(I_write=float("nan"))

def test_state_from_mz():
    assert NeuronState.from_mz(0.9) is NeuronState.P
    assert NeuronState.from_mz(0.0) is NeuronState.P
    assert NeuronState.from_mz(-1e-6) is NeuronState.AP
    assert NeuronState.AP.logic == 1
    assert NeuronState.P.logic == 0

def test_read_parallel():
    mtj = MTJParams()
    out = read_voltage(NeuronState.P, mtj)
    assert out.v_mid == pytest.approx(1 / 3, abs=1e-3)
    assert out.logic == 0
    assert out.output == 0

def test_read_antiparallel():
    out = read_voltage(NeuronState.AP, MTJParams(), V_DD=1.2)
    assert out.v_mid == pytest.approx(0.6)
    assert out.logic == 1
    assert out.output == pytest.approx(1.2)

def test_random_pole_cold(cold_device):
    rng = np.random.default_rng(0)
    poles = np.array([random_pole(rng, cold_device) for _ in range(50)])
    np.testing.assert_array_equal(np.abs(poles[:, 2]), 1.0)
    assert set(poles[:, 2]) == {-1.0, 1.0}

def test_random_pole_thermal(device):
    rng = np.random.default_rng(0)
    poles = np.array([random_pole(rng, device) for _ in range(200)])
    np.testing.assert_allclose(np.linalg.norm(poles, axis=1), 1.0)
    assert np.all(np.abs(poles[:, 2]) > 0.7)
    assert np.any(poles[:, 0] != 0)
    assert 60 < np.count_nonzero(poles[:, 2] > 0) < 140

def test_device_parameters_validated():
    with pytest.raises(ValueError):
        DeviceParams(energy_barrier_kT=-1)
    with pytest.raises(ValueError):
        DeviceParams(unknown=1)

def test_explicit_anisotropy():
    device = DeviceParams(Ku2=7e5)
    assert device.calibrated_material.Ku2 == 7e5

def test_write_path_defaults():
    # A 10 µA write must commit within one default write window
    assert MTJParams().P_MTJ == 0.7
    schedule = PulseSchedule()
    assert (schedule.t_clock, schedule.t_write, schedule.relax) == (2e-9, 3e-9, 3e-9)

def test_demag_cache_is_bounded():
    _demag.cache_clear()
    geom = MagnetGeometry(semi_axis_a=25e-9, semi_axis_b=25e-9)
    first = DeviceParams(geometry=geom).demag
    second = DeviceParams(geometry=geom, energy_barrier_kT=20.0).demag
    assert first == second
    info = _demag.cache_info()
    assert info.hits >= 1
    assert info.maxsize == DEMAG_CACHE_SIZE
