"""Spin-orbit-torque neuron device.

The neuron is a three-terminal MTJ on a heavy-metal strip. A
clock current through the strip (spin Hall effect) pulls the
free layer onto the in-plane hard axis; the synaptic write
current through the MTJ then tips it into one of the two
perpendicular wells. The AP state (free layer opposing the
pinned layer at +ẑ) is the firing output.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from functools import cached_property, lru_cache
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from sotneuron.constants import CONSTANTS
from sotneuron.exc import InvalidParameterError
from sotneuron.magnetodynamics import (
    DemagTensor, IntegratorConfig, Macrospin, MagnetGeometry, MaterialParams,
    SpinCurrentVector, Trajectory, barrier_height, calibrate_anisotropy,
    demag_factors, effective_stiffness, energy_in_kT, magnetic_energy, n_spins, normalize,
)

logger = logging.getLogger(__name__)

DEMAG_CACHE_SIZE = 64


class HeavyMetalParams(BaseModel):
    """Spin Hall metal strip under the free layer

    Parameters
    ----------
    width, length, thickness : float
        Strip dimensions [m], current flows along the length
    resistivity : float
        [Ω·m]
    theta_SH : float
        Spin Hall angle
    """
    model_config = ConfigDict(frozen=True, extra="forbid")

    width: float = Field(default=40e-9, gt=0)
    length: float = Field(default=40e-9, gt=0)
    thickness: float = Field(default=2e-9, gt=0)
    resistivity: float = Field(default=2e-6, gt=0)
    theta_SH: float = Field(default=0.3, gt=0)

    @property
    def cross_section(self) -> float:
        "A_HM = width·thickness [m²]"
        return self.width * self.thickness

    def injection_efficiency(self, geom: MagnetGeometry) -> float:
        "beta = theta_SH·A_MTJ/A_HM"
        return self.theta_SH * geom.area / self.cross_section


class MTJParams(BaseModel):
    "Write and read path of the neuron MTJ"
    model_config = ConfigDict(frozen=True, extra="forbid")

    R_P: float = Field(default=8e3, gt=0)
    TMR: float = Field(default=1.0, gt=0)
    P_MTJ: float = Field(default=0.7, gt=0, le=1)
    tox: float = Field(default=1e-9, gt=0)

    @property
    def R_AP(self) -> float:
        return self.R_P * (1 + self.TMR)

    def resistance(self, state: 'NeuronState') -> float:
        return self.R_AP if state is NeuronState.AP else self.R_P


class PulseSchedule(BaseModel):
    """Two-step drive of one neuron evaluation

    Parameters
    ----------
    I_clock : float
        Clock current through the heavy metal [A]
    t_clock : float
        Clock pulse width [s]
    I_write : float
        Signed synaptic current through the MTJ [A]
    t_write : float
        Write pulse width [s]
    gap : float
        Idle time between the clock and write pulses [s]
    relax : float
        Torque-free settling before the state is read [s]

    Pulses have zero rise and fall times.
    """
    model_config = ConfigDict(frozen=True, extra="forbid")

    I_clock: float = 85e-6
    t_clock: float = Field(default=2e-9, gt=0)
    I_write: float = 0.0
    t_write: float = Field(default=3e-9, gt=0)
    gap: float = Field(default=0.0, ge=0)
    relax: float = Field(default=3e-9, ge=0)

    @model_validator(mode="after")
    def check_finite(self):
        if not (math.isfinite(self.I_clock) and math.isfinite(self.I_write)):
            raise ValueError("Pulse currents must be finite")
        return self

    def with_currents(self, I_clock: float, I_write: float) -> 'PulseSchedule':
        return self.model_copy(update={"I_clock": float(I_clock), "I_write": float(I_write)})

    @property
    def duration(self) -> float:
        return self.t_clock + self.gap + self.t_write + self.relax


class NeuronState(str, Enum):
    "Binary neuron output, AP fires"
    P = "P"
    AP = "AP"

    @classmethod
    def from_mz(cls, mz: float) -> 'NeuronState':
        return cls.AP if mz < 0 else cls.P

    @property
    def logic(self) -> int:
        return 1 if self is NeuronState.AP else 0


class DeviceParams(BaseModel):
    """Complete neuron device

    Ku2 is calibrated from ``energy_barrier_kT``, in units of
    kB·T at ``calibration_T``, unless given explicitly. A device
    simulated at another temperature keeps the same anisotropy.

    Examples
    --------
    .. code-block:: python

        device = DeviceParams()
        device.beta      # 4.712
        device.R_HM      # 1000.0
    """
    model_config = ConfigDict(frozen=True, extra="forbid")

    geometry: MagnetGeometry = MagnetGeometry()
    material: MaterialParams = MaterialParams()
    heavy_metal: HeavyMetalParams = HeavyMetalParams()
    mtj: MTJParams = MTJParams()
    H_a: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    energy_barrier_kT: float = Field(default=31.44, ge=0)
    calibration_T: float = Field(default=300.0, gt=0)
    Ku2: Optional[float] = None

    @cached_property
    def demag(self) -> DemagTensor:
        return _demag(self.geometry)

    @cached_property
    def calibrated_material(self) -> MaterialParams:
        "Material with the Ku2 actually simulated"
        Ku2 = self.Ku2
        if Ku2 is None:
            reference = self.material.model_copy(update={"T": self.calibration_T})
            Ku2 = calibrate_anisotropy(self.energy_barrier_kT, reference, self.geometry, self.demag)
        material = self.material.model_copy(update={"Ku2": Ku2})
        logger.debug("Device anisotropy Ku2 = %.6g J/m³, H_K,eff = %.6g A/m", Ku2, effective_stiffness(material, self.demag))
        return material

    @property
    def stiffness_field(self) -> float:
        "Net perpendicular stiffness field H_K,eff of the simulated device [A/m]"
        return effective_stiffness(self.calibrated_material, self.demag)

    @property
    def beta(self) -> float:
        return self.heavy_metal.injection_efficiency(self.geometry)

    @property
    def R_HM(self) -> float:
        return hm_resistance(self.heavy_metal)

    @property
    def n_spins(self) -> float:
        return n_spins(self.material, self.geometry)

    @property
    def barrier(self) -> float:
        "Easy-axis barrier of the simulated device [J]"
        return barrier_height(self.calibrated_material, self.geometry, self.demag)

    def macrospin(self, cfg: IntegratorConfig) -> Macrospin:
        return Macrospin(self.calibrated_material, self.geometry, self.demag, cfg, H_a=self.H_a)


@lru_cache(maxsize=DEMAG_CACHE_SIZE)
def _demag(geom: MagnetGeometry) -> DemagTensor:
    return demag_factors(geom)


# Charge to spin conversion
# -------------------------

def she_spin_current(I_clock: float, hm: HeavyMetalParams, geom: MagnetGeometry) -> SpinCurrentVector:
    "Spin current injected by the clock, beta·|I| along sign(I)·ŷ"
    if not math.isfinite(I_clock):
        raise InvalidParameterError(f"Clock current must be finite, got {I_clock!r}")
    if I_clock == 0:
        return SpinCurrentVector.zero()
    sign = math.copysign(1.0, I_clock)
    return SpinCurrentVector(magnitude=hm.injection_efficiency(geom) * abs(I_clock), sigma=(0.0, sign, 0.0))


def mtj_spin_current(I_write: float, mtj: MTJParams) -> SpinCurrentVector:
    "Spin current of the write path; positive current drives toward AP (-ẑ)"
    if not math.isfinite(I_write):
        raise InvalidParameterError(f"Write current must be finite, got {I_write!r}")
    if I_write == 0:
        return SpinCurrentVector.zero()
    sign = -math.copysign(1.0, I_write)
    return SpinCurrentVector(magnitude=mtj.P_MTJ * abs(I_write), sigma=(0.0, 0.0, sign))


# Power
# -----

class ClockPower(NamedTuple):
    power: float
    energy: float


def hm_resistance(hm: HeavyMetalParams) -> float:
    "Resistance of the heavy-metal strip ρ·L/A [Ω]"
    if hm.length <= 0 or hm.cross_section <= 0:
        raise InvalidParameterError(f"Heavy metal dimensions must be positive: {hm!r}")
    return hm.resistivity * hm.length / hm.cross_section


def clock_power(schedule: PulseSchedule, hm: HeavyMetalParams) -> ClockPower:
    "Power and energy of one clock pulse, I²·R_HM and P·t_clock"
    power = schedule.I_clock ** 2 * hm_resistance(hm)
    return ClockPower(power=power, energy=power * schedule.t_clock)


# Switching
# ---------

def random_pole(rng: np.random.Generator, device: DeviceParams) -> np.ndarray:
    """Thermalized easy-axis state of a fresh neuron

    Picks ±ẑ with equal probability and tilts it by a
    Gaussian of variance kT/(2·K_eff·V) per transverse
    component, K_eff·V being the device barrier.
    """
    sign = 1.0 if rng.integers(0, 2) else -1.0
    T = device.material.T
    if T == 0:
        return np.array([0.0, 0.0, sign])
    barrier = device.barrier
    spread = math.sqrt(CONSTANTS.kB * T / (2 * barrier)) if barrier > 0 else 1.0
    mx, my = spread * rng.standard_normal(2)
    mz = sign * math.sqrt(max(1.0 - mx * mx - my * my, 0.0))
    return normalize(np.array([mx, my, mz]))


def hard_axis_captured(m: np.ndarray, threshold: float=0.9) -> np.ndarray:
    "Whether the magnetization sits on the hard axis, |my| > threshold"
    return np.abs(np.asarray(m)[..., 1]) > threshold


@dataclass
class EnsembleResult:
    "Outcome of a batch of two-step evaluations"
    m_clock: np.ndarray
    m_final: np.ndarray
    times: np.ndarray
    samples: List[np.ndarray]
    phases: List[Tuple[str, float, float]]

    @property
    def ap(self) -> np.ndarray:
        "Boolean array, True where the neuron fired"
        return self.m_final[:, 2] < 0

    @property
    def states(self) -> List[NeuronState]:
        return [NeuronState.from_mz(mz) for mz in self.m_final[:, 2]]


def simulate_ensemble(device: DeviceParams, schedule: PulseSchedule, cfg: IntegratorConfig, rngs: Sequence[np.random.Generator], initial: Optional[np.ndarray]=None, record_every: int=0, I_write: Optional[Sequence[float]]=None) -> EnsembleResult:
    """Run the two-step protocol for independent trials

    Each trial draws its initial state (unless given) and then
    its thermal noise from its own generator, so a trial's
    outcome does not depend on the batch it runs in.

    Parameters
    ----------
    device : DeviceParams
    schedule : PulseSchedule
        Currents and phase durations
    cfg : IntegratorConfig
    rngs : sequence of numpy.random.Generator
        One stream per trial
    initial : array (n, 3), optional
        Initial magnetizations, random poles by default
    record_every : int
        Sampling period in steps, 0 records nothing
    I_write : sequence of float, optional
        Write current of each trial [A], overriding the schedule
    """
    if initial is None:
        m = np.stack([random_pole(rng, device) for rng in rngs])
    else:
        m = np.array(initial, dtype=float).reshape(len(rngs), 3)

    kernel = device.macrospin(cfg)
    noise = kernel.noise(rngs)
    clock = she_spin_current(schedule.I_clock, device.heavy_metal, device.geometry).vector
    if I_write is None:
        write = mtj_spin_current(schedule.I_write, device.mtj).vector
    else:
        write = np.stack([mtj_spin_current(float(current), device.mtj).vector for current in I_write])

    phases = [
        ("clock", clock, schedule.t_clock),
        ("gap", None, schedule.gap),
        ("write", write, schedule.t_write),
        ("relax", None, schedule.relax),
    ]
    samples, times, spans = [], [], []
    if record_every:
        samples.append(m.copy())
        times.append(0.0)
    step, m_clock = 0, None
    for name, i_s, duration in phases:
        n_steps = cfg.steps(duration)
        t_start = step * cfg.dt
        m, recorded = kernel.run(m, i_s, n_steps, noise, record_every=record_every, step0=step)
        if record_every:
            times.extend((step + k * record_every) * cfg.dt for k in range(1, len(recorded) + 1))
            samples.extend(recorded)
        step += n_steps
        spans.append((name, t_start, step * cfg.dt))
        if name == "clock":
            m_clock = m.copy()
    return EnsembleResult(m_clock=m_clock, m_final=m, times=np.asarray(times), samples=samples, phases=spans)


def simulate_two_step(schedule: PulseSchedule, device: DeviceParams, cfg: IntegratorConfig, initial: Optional[np.ndarray]=None, rng: Optional[np.random.Generator]=None) -> Tuple[Trajectory, NeuronState]:
    """Simulate one neuron evaluation and record its trajectory

    Examples
    --------
    .. code-block:: python

        schedule = PulseSchedule(I_clock=85e-6, I_write=5e-6)
        trajectory, state = simulate_two_step(schedule, DeviceParams(), IntegratorConfig(), rng=np.random.default_rng(1))
    """
    rng = np.random.default_rng() if rng is None else rng
    result = simulate_ensemble(
        device, schedule, cfg, [rng],
        initial=None if initial is None else np.asarray(initial, dtype=float)[None, :],
        record_every=cfg.record_every,
    )
    m = np.stack(result.samples)[:, 0, :]
    mat = device.calibrated_material
    energy = magnetic_energy(m, mat, device.geometry, device.demag)
    energy_kT = energy_in_kT(energy, mat.T) if mat.T > 0 else energy / CONSTANTS.kB
    trajectory = Trajectory(t=result.times, m=m, energy_kT=energy_kT, phases=result.phases)
    state = result.states[0]
    logger.debug("Two-step evaluation %r ended in %s", schedule, state.value)
    return trajectory, state


# Read circuit
# ------------

class ReadOut(NamedTuple):
    v_mid: float
    output: float
    logic: int


def read_voltage(state: NeuronState, mtj: MTJParams, V_DD: float=1.0) -> ReadOut:
    """Sense the neuron against a reference MTJ held in AP

    The divider node sits at V_DD·R_neuron/(R_neuron + R_AP).
    The inverter drives V_DD when that node reaches V_DD/2,
    which happens exactly for the AP state.
    """
    r_neuron = mtj.resistance(state)
    v_mid = V_DD * r_neuron / (r_neuron + mtj.R_AP)
    logic = 1 if v_mid >= V_DD / 2 else 0
    return ReadOut(v_mid=v_mid, output=V_DD * logic, logic=logic)
