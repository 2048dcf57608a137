from .constants import CONSTANTS, PhysicalConstants
from .magnetodynamics import (
    MagnetGeometry, MaterialParams, DemagTensor, SpinCurrentVector, IntegratorConfig, Trajectory, Macrospin,
    demag_factors, shape_field, uniaxial_field, thermal_field, effective_field, llg_step,
    magnetic_energy, calibrate_anisotropy,
)
from .device import (
    HeavyMetalParams, MTJParams, PulseSchedule, NeuronState, DeviceParams,
    she_spin_current, mtj_spin_current, hm_resistance, clock_power, simulate_two_step, read_voltage,
)
from .montecarlo import SweepGrid, PhaseDiagram, switching_probability, phase_diagram, probability_lookup

try:
    from ._version import *
except ImportError:
    # Package was not built the standard way
    __version__ = version = '0.0.0.UNKNOWN'
    __version_tuple__ = version_tuple = (0, 0, 0, 'UNKNOWN', '')
