"""Macrospin magnetization dynamics of the free layer.

The free layer is a single-domain elliptic cylinder whose unit
magnetization ``m`` evolves under the stochastic
Landau-Lifshitz-Gilbert equation with a Slonczewski-like
spin-torque term. Axes: x is the charge-current direction in
the heavy metal, y the in-plane hard axis used by the clock
and z the perpendicular easy axis.

Magnetizations and fields are plain NumPy arrays with the
Cartesian components in the last axis so that every operation
accepts a single vector ``(3,)`` or an ensemble ``(n, 3)``.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy import integrate, optimize, special

from sotneuron.constants import CONSTANTS, PhysicalConstants
from sotneuron.exc import CalibrationError, IntegrationDivergedError, InvalidGeometryError

try:
    from typing import Literal
except ImportError: # pragma: no cover
    from typing_extensions import Literal

logger = logging.getLogger(__name__)

FieldLike = Union[np.ndarray, Callable[[np.ndarray], np.ndarray]]


class MagnetGeometry(BaseModel):
    """Elliptic-cylinder free layer

    Parameters
    ----------
    semi_axis_a : float
        In-plane semi-axis along x [m]
    semi_axis_b : float
        In-plane semi-axis along y [m]
    thickness : float
        Layer thickness [m]
    """
    model_config = ConfigDict(frozen=True, extra="forbid")

    semi_axis_a: float = Field(default=20e-9, gt=0)
    semi_axis_b: float = Field(default=20e-9, gt=0)
    thickness: float = Field(default=1.5e-9, gt=0)

    @property
    def area(self) -> float:
        "Cross-section of the MTJ pillar, π·a·b [m²]"
        return math.pi * self.semi_axis_a * self.semi_axis_b

    @property
    def volume(self) -> float:
        "Free layer volume, π·a·b·t [m³]"
        return self.area * self.thickness


class MaterialParams(BaseModel):
    """Free layer material

    Parameters
    ----------
    Ms : float
        Saturation magnetization [A/m]
    alpha : float
        Gilbert damping
    Ku2 : float
        Uniaxial perpendicular anisotropy density [J/m³].
        Usually calibrated from the energy barrier,
        see :func:`calibrate_anisotropy`.
    T : float
        Temperature [K]
    """
    model_config = ConfigDict(frozen=True, extra="forbid")

    Ms: float = Field(default=1e6, gt=0)
    alpha: float = Field(default=0.0122, gt=0, lt=1)
    Ku2: float = 0.0
    T: float = Field(default=300.0, ge=0)


class DemagTensor(BaseModel):
    "Diagonal demagnetization tensor"
    model_config = ConfigDict(frozen=True, extra="forbid")

    Nxx: float = Field(ge=0, le=1)
    Nyy: float = Field(ge=0, le=1)
    Nzz: float = Field(ge=0, le=1)

    @model_validator(mode="after")
    def check_sum_rule(self):
        total = self.Nxx + self.Nyy + self.Nzz
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"Demagnetization factors must sum to 1, got {total!r}")
        return self

    def as_array(self) -> np.ndarray:
        return np.array([self.Nxx, self.Nyy, self.Nzz])


class SpinCurrentVector(BaseModel):
    """Spin current injected into the free layer

    Parameters
    ----------
    magnitude : float
        Non-negative spin current [A]
    sigma : tuple of float
        Unit polarization; the sign of the driving
        charge current is carried here.
    """
    model_config = ConfigDict(frozen=True)

    magnitude: float = Field(ge=0)
    sigma: Tuple[float, float, float]

    @model_validator(mode="after")
    def check_unit_sigma(self):
        if abs(math.sqrt(sum(c * c for c in self.sigma)) - 1.0) > 1e-12:
            raise ValueError(f"Polarization must be a unit vector, got {self.sigma}")
        if not math.isfinite(self.magnitude):
            raise ValueError("Spin current must be finite")
        return self

    @property
    def vector(self) -> np.ndarray:
        "Spin current vector Is·σ [A]"
        return self.magnitude * np.asarray(self.sigma, dtype=float)

    @classmethod
    def zero(cls) -> 'SpinCurrentVector':
        return cls(magnitude=0.0, sigma=(0.0, 0.0, 1.0))


class IntegratorConfig(BaseModel):
    """Settings of the stochastic integrator

    Parameters
    ----------
    dt : float
        Time step [s], by default 0.1 ps
    scheme : {'heun'}
        Stochastic predictor-corrector (Stratonovich)
    renormalize_each_step : bool
        Project m back on the unit sphere after every step
    noise_block : int
        Number of steps of thermal noise drawn at once
        from each trial's stream. Part of the random
        stream layout: changing it changes results.
    record_every : int
        Trajectory decimation (steps between samples)
    """
    model_config = ConfigDict(frozen=True, extra="forbid")

    dt: float = Field(default=1e-13, gt=0)
    scheme: Literal["heun"] = "heun"
    renormalize_each_step: bool = True
    noise_block: int = Field(default=1000, ge=1)
    record_every: int = Field(default=10, ge=1)

    def steps(self, duration:float) -> int:
        "Number of steps covering a duration [s]"
        return int(round(duration / self.dt))


@dataclass
class Trajectory:
    "Sampled magnetization history"
    t: np.ndarray
    m: np.ndarray
    energy_kT: np.ndarray
    phases: List[Tuple[str, float, float]] = field(default_factory=list)

    def to_rows(self) -> Iterator[dict]:
        for t, m, e in zip(self.t, self.m, self.energy_kT):
            yield {"t[s]": float(t), "mx": float(m[0]), "my": float(m[1]), "mz": float(m[2]), "E[kT]": float(e)}


TRAJECTORY_FIELDS = ["t[s]", "mx", "my", "mz", "E[kT]"]


# Geometry
# --------

def demag_factors(geom: MagnetGeometry, n_angles:int=48, q_split:float=400.0) -> DemagTensor:
    """Magnetometric demagnetization factors of an elliptic cylinder

    Evaluates the Fourier-space shape integrals

    .. math::

        N_{zz} = \\frac{1}{\\pi}\\int_0^{\\pi/2} d\\psi \\int_0^\\infty
                 \\frac{4 J_1(q)^2}{q} f(q t \\sqrt{g(\\psi)}) dq,
        \\qquad f(x) = (1 - e^{-x})/x

    with :math:`g(\\psi) = \\cos^2\\psi/a^2 + \\sin^2\\psi/b^2`, the
    in-plane factors being the complementary :math:`1 - f` part
    weighted by the direction cosines. The angular integral uses
    Gauss-Legendre nodes, the radial one adaptive quadrature up to
    ``q_split`` and the cycle-averaged Bessel envelope beyond.

    Parameters
    ----------
    geom : MagnetGeometry
        Free layer shape
    n_angles : int
        Number of Gauss-Legendre nodes over a quarter turn
    q_split : float
        Radial split point between exact and averaged integrand

    Returns
    -------
    DemagTensor
    """
    a, b, t = geom.semi_axis_a, geom.semi_axis_b, geom.thickness

    nodes, weights = np.polynomial.legendre.leggauss(n_angles)
    psi = (nodes + 1.0) * math.pi / 4.0
    weights = weights * math.pi / 4.0
    cos2, sin2 = np.cos(psi) ** 2, np.sin(psi) ** 2
    g = cos2 / a ** 2 + sin2 / b ** 2
    scale = t * np.sqrt(g)
    wx = cos2 / a ** 2 / g
    wy = sin2 / b ** 2 / g

    def _components(envelope, q):
        f = _slab_factor(q * scale)
        return np.concatenate([envelope * f, envelope * (1 - f) * wx, envelope * (1 - f) * wy])

    def exact(q):
        envelope = 4.0 * special.j1(q) ** 2 / q if q > 0 else 0.0
        return _components(envelope, q)

    def averaged(q):
        return _components(4.0 / (math.pi * q ** 2), q)

    head, _ = integrate.quad_vec(exact, 0.0, q_split, epsabs=1e-13, epsrel=1e-11, limit=20000)
    tail, _ = integrate.quad_vec(averaged, q_split, np.inf, epsabs=1e-13, epsrel=1e-11)
    radial = (head + tail).reshape(3, n_angles)
    nzz, nxx_raw, nyy_raw = (radial @ weights) / math.pi

    if not all(math.isfinite(v) for v in (nzz, nxx_raw, nyy_raw)) or nxx_raw + nyy_raw <= 0:
        raise InvalidGeometryError(f"Demagnetization quadrature failed for {geom!r}")

    nzz = min(max(nzz, 0.0), 1.0)
    # The in-plane total follows the sum rule; the quadrature only sets its split
    ratio_x = 0.5 if a == b else nxx_raw / (nxx_raw + nyy_raw)
    in_plane = 1.0 - nzz
    nxx = in_plane * ratio_x
    nyy = in_plane - nxx
    logger.debug("Demag factors for %r: (%g, %g, %g)", geom, nxx, nyy, nzz)
    return DemagTensor(Nxx=nxx, Nyy=nyy, Nzz=nzz)


def _slab_factor(x: np.ndarray) -> np.ndarray:
    "(1 - exp(-x))/x with the x -> 0 limit"
    x = np.asarray(x, dtype=float)
    out = np.ones_like(x)
    nonzero = x > 1e-12
    out[nonzero] = -np.expm1(-x[nonzero]) / x[nonzero]
    return out


def n_spins(mat: MaterialParams, geom: MagnetGeometry, constants: PhysicalConstants=CONSTANTS) -> float:
    "Number of spins in the free layer, Ms·V/muB"
    return mat.Ms * geom.volume / constants.muB


# Fields
# ------

def shape_field(m: np.ndarray, Ms: float, N: Union[DemagTensor, np.ndarray]) -> np.ndarray:
    "Shape anisotropy field -(Nxx·mx, Nyy·my, Nzz·mz)·Ms [A/m]"
    diag = N.as_array() if isinstance(N, DemagTensor) else np.asarray(N, dtype=float)
    return -diag * np.asarray(m, dtype=float) * Ms


def uniaxial_field(m: np.ndarray, Ku2: float, Ms: float, constants: PhysicalConstants=CONSTANTS) -> np.ndarray:
    "First-order uniaxial field (2·Ku2/(mu0·Ms))·mz·ẑ [A/m]"
    m = np.asarray(m, dtype=float)
    H = np.zeros_like(m)
    H[..., 2] = 2.0 * Ku2 / (constants.mu0 * Ms) * m[..., 2]
    return H


def thermal_sigma(mat: MaterialParams, geom: MagnetGeometry, dt: float, constants: PhysicalConstants=CONSTANTS) -> float:
    "Standard deviation of each thermal field component [A/m]"
    if mat.T == 0:
        return 0.0
    damping = mat.alpha / (1 + mat.alpha ** 2)
    return math.sqrt(damping * 2 * constants.kB * mat.T / (constants.gamma * constants.mu0 * mat.Ms * geom.volume * dt))


def thermal_field(mat: MaterialParams, geom: MagnetGeometry, dt: float, rng: np.random.Generator, size:Optional[int]=None, constants: PhysicalConstants=CONSTANTS) -> np.ndarray:
    """Random thermal field of one time step

    Each Cartesian component is ``sigma·G(0, 1)`` with independent
    standard normal draws. At zero temperature the zero vector is
    returned and the stream is not consumed.
    """
    shape = (3,) if size is None else (size, 3)
    sigma = thermal_sigma(mat, geom, dt, constants=constants)
    if sigma == 0:
        return np.zeros(shape)
    return sigma * rng.standard_normal(shape)


def effective_field(m, mat: MaterialParams, geom: MagnetGeometry, N: DemagTensor, H_a=None, thermal=None, constants: PhysicalConstants=CONSTANTS) -> np.ndarray:
    "H_shape + H_Ku2 + H_a + H_thermal [A/m]"
    H = shape_field(m, mat.Ms, N) + uniaxial_field(m, mat.Ku2, mat.Ms, constants=constants)
    if H_a is not None:
        H = H + np.asarray(H_a, dtype=float)
    if thermal is not None:
        H = H + thermal
    return H


# Dynamics
# --------

def llg_torque(m: np.ndarray, H: np.ndarray, i_s: np.ndarray, alpha: float, q_ns: float, constants: PhysicalConstants=CONSTANTS) -> np.ndarray:
    """Right-hand side dm/dt of the explicit (Landau-Lifshitz) form

    .. math::

        (1+\\alpha^2)\\dot{m} = -\\gamma m\\times H - \\alpha\\gamma m\\times(m\\times H)
            + \\frac{1}{qN_s}\\left[m\\times(I_s\\times m) + \\alpha\\, m\\times I_s\\right]

    ``i_s`` may be ``None`` for torque-free phases.
    """
    gamma = constants.gamma
    m_x_h = np.cross(m, H)
    rate = -gamma * m_x_h - alpha * gamma * np.cross(m, m_x_h)
    if i_s is not None:
        a_j = i_s / q_ns
        rate = rate + np.cross(m, np.cross(a_j, m)) + alpha * np.cross(m, a_j)
    return rate / (1 + alpha ** 2)


def normalize(m: np.ndarray) -> np.ndarray:
    "Project onto the unit sphere"
    norm = np.sqrt(m[..., 0] ** 2 + m[..., 1] ** 2 + m[..., 2] ** 2)
    return m / norm[..., None]


def llg_step(m: np.ndarray, H_eff: FieldLike, i_s, mat: MaterialParams, geom: MagnetGeometry, cfg: IntegratorConfig, constants: PhysicalConstants=CONSTANTS, step:int=None) -> np.ndarray:
    """Advance the magnetization by one Heun step

    Parameters
    ----------
    m : array of shape (3,) or (n, 3)
        Current unit magnetization
    H_eff : array or callable
        Effective field. A callable ``H_eff(m)`` is re-evaluated
        at the predictor; a constant array is held over the step.
        Any thermal contribution must already be inside and is
        frozen within the step.
    i_s : SpinCurrentVector, array or None
        Injected spin current
    mat, geom : MaterialParams, MagnetGeometry
    cfg : IntegratorConfig
    step : int, optional
        Step index reported if the state diverges

    Returns
    -------
    array
        The magnetization after ``cfg.dt``
    """
    if isinstance(i_s, SpinCurrentVector):
        i_s = i_s.vector if i_s.magnitude != 0 else None
    field_at = H_eff if callable(H_eff) else (lambda _m: H_eff)
    q_ns = constants.q * n_spins(mat, geom, constants=constants)

    k1 = llg_torque(m, field_at(m), i_s, mat.alpha, q_ns, constants=constants)
    predictor = m + cfg.dt * k1
    k2 = llg_torque(predictor, field_at(predictor), i_s, mat.alpha, q_ns, constants=constants)
    m_next = m + 0.5 * cfg.dt * (k1 + k2)
    if cfg.renormalize_each_step:
        m_next = normalize(m_next)

    if not np.all(np.isfinite(m_next)):
        raise IntegrationDivergedError(f"Magnetization became non-finite at step {step}", step=step, trial=_first_bad(m_next))
    return m_next


def _first_bad(m: np.ndarray) -> Optional[int]:
    if m.ndim < 2:
        return None
    bad = np.flatnonzero(~np.isfinite(m).all(axis=-1))
    return int(bad[0]) if bad.size else None


# Energy
# ------

def magnetic_energy(m, mat: MaterialParams, geom: MagnetGeometry, N: DemagTensor, constants: PhysicalConstants=CONSTANTS) -> np.ndarray:
    """Magnetic energy [J]

    .. math::

        E = V\\left[K_{u2}(1 - m_z^2) + \\frac{\\mu_0}{2}M_s^2
            (N_{xx}m_x^2 + N_{yy}m_y^2 + N_{zz}m_z^2)\\right]

    Use :func:`energy_in_kT` for thermal units.
    """
    m = np.asarray(m, dtype=float)
    mx, my, mz = m[..., 0], m[..., 1], m[..., 2]
    shape = 0.5 * constants.mu0 * mat.Ms ** 2 * (N.Nxx * mx ** 2 + N.Nyy * my ** 2 + N.Nzz * mz ** 2)
    return geom.volume * (mat.Ku2 * (1 - mz ** 2) + shape)


def energy_in_kT(energy, T: float, constants: PhysicalConstants=CONSTANTS):
    "Energy in units of kB·T"
    if T == 0:
        raise ValueError("Thermal energy units are undefined at T = 0")
    return energy / (constants.kB * T)


def barrier_height(mat: MaterialParams, geom: MagnetGeometry, N: DemagTensor, Ku2: float=None, constants: PhysicalConstants=CONSTANTS) -> float:
    "Energy of the in-plane saddle above the easy axis [J]"
    Ku2 = mat.Ku2 if Ku2 is None else Ku2
    n_saddle = min(N.Nxx, N.Nyy)
    return geom.volume * (Ku2 + 0.5 * constants.mu0 * mat.Ms ** 2 * (n_saddle - N.Nzz))


def calibrate_anisotropy(target_barrier: float, mat: MaterialParams, geom: MagnetGeometry, N: DemagTensor, constants: PhysicalConstants=CONSTANTS) -> float:
    """Find Ku2 giving the requested energy barrier

    Parameters
    ----------
    target_barrier : float
        Easy-axis-to-saddle barrier in units of kB·T
    mat : MaterialParams
        Material; its temperature sets the kB·T unit
        and its Ku2 is ignored.

    Returns
    -------
    float
        Ku2 [J/m³]
    """
    if target_barrier < 0 or not math.isfinite(target_barrier):
        raise CalibrationError(f"Energy barrier must be a non-negative number of kT, got {target_barrier!r}")
    if mat.T <= 0:
        raise CalibrationError("Barrier in kT units requires a positive temperature")

    target = target_barrier * constants.kB * mat.T
    shape_density = 0.5 * constants.mu0 * mat.Ms ** 2 * (N.Nzz - min(N.Nxx, N.Nyy))
    if target == 0:
        Ku2 = shape_density
    else:
        def residual(Ku2):
            return barrier_height(mat, geom, N, Ku2=Ku2, constants=constants) - target
        lower = shape_density - 1.0
        upper = shape_density + 2.0 * target / geom.volume + 1.0
        Ku2 = optimize.brentq(residual, lower, upper, xtol=1e-12, rtol=4 * np.finfo(float).eps, maxiter=200)

    if Ku2 <= 0:
        raise CalibrationError(
            f"No positive Ku2 gives a {target_barrier} kT barrier: the shape favours "
            f"a perpendicular axis by {-shape_density:.4g} J/m³ already"
        )
    logger.debug("Calibrated Ku2 = %.6g J/m³ for %.4g kT", Ku2, target_barrier)
    return Ku2


def effective_stiffness(mat: MaterialParams, N: DemagTensor, constants: PhysicalConstants=CONSTANTS) -> float:
    """Net perpendicular stiffness field H_K,eff [A/m]

    ``2Ku2/(mu0·Ms) - (Nzz - N_saddle)·Ms`` with ``N_saddle`` the
    smaller in-plane factor. Positive for a perpendicular easy
    axis; the barrier is ``mu0·Ms·H_K,eff·V/2``.
    """
    n_saddle = min(N.Nxx, N.Nyy)
    return 2 * mat.Ku2 / (constants.mu0 * mat.Ms) - (N.Nzz - n_saddle) * mat.Ms


def boltzmann_mz_density(mz: np.ndarray, barrier_kT: float) -> np.ndarray:
    """Equilibrium probability density of mz on the sphere

    For the uniaxial landscape ``E/kT = barrier·(1 - mz²)`` and
    uniform measure in mz; normalized over [-1, 1].
    """
    mz = np.asarray(mz, dtype=float)
    weight = lambda z: np.exp(-barrier_kT * (1 - z ** 2))
    norm, _ = integrate.quad(weight, -1.0, 1.0)
    return weight(mz) / norm


# Ensemble integration
# --------------------

class ThermalNoise:
    """Per-trial streams of thermal field samples

    Every trial owns its generator and draws blocks of
    ``block`` steps, so a trial's noise depends only on its
    own stream and the block size, never on the ensemble.

    Parameters
    ----------
    rngs : sequence of numpy.random.Generator
        One stream per trial
    sigma : float
        Component standard deviation [A/m]
    block : int
        Steps drawn per refill
    """

    def __init__(self, rngs: Sequence[np.random.Generator], sigma: float, block: int):
        self.rngs = list(rngs)
        self.sigma = sigma
        self.block = block
        self._buffer = None
        self._pos = block

    @property
    def enabled(self) -> bool:
        return self.sigma > 0

    def __call__(self) -> np.ndarray:
        "Thermal field for the next step, shape (n, 3)"
        if self._pos >= self.block:
            self._refill()
        sample = self._buffer[self._pos]
        self._pos += 1
        return sample

    def _refill(self):
        buffer = np.empty((self.block, len(self.rngs), 3))
        for i, rng in enumerate(self.rngs):
            buffer[:, i, :] = rng.standard_normal((self.block, 3))
        self._buffer = buffer * self.sigma
        self._pos = 0


class Macrospin:
    """Integrator of an ensemble of identical free layers

    Field and torque constants are computed once; each call
    to :meth:`run` integrates all members over a phase with
    fixed spin currents.

    Parameters
    ----------
    material : MaterialParams
        Material with calibrated Ku2
    geometry : MagnetGeometry
    demag : DemagTensor
    config : IntegratorConfig
    H_a : array, optional
        Applied field [A/m], zero by default
    """

    def __init__(self, material: MaterialParams, geometry: MagnetGeometry, demag: DemagTensor, config: IntegratorConfig, H_a=None, constants: PhysicalConstants=CONSTANTS):
        self.material = material
        self.geometry = geometry
        self.demag = demag
        self.config = config
        self.constants = constants
        self.H_a = np.zeros(3) if H_a is None else np.asarray(H_a, dtype=float)
        # Shape and uniaxial fields are both diagonal-linear in m
        unit = np.ones(3)
        self.stiffness = shape_field(unit, material.Ms, demag) + uniaxial_field(unit, material.Ku2, material.Ms, constants=constants)
        self.sigma = thermal_sigma(material, geometry, config.dt, constants=constants)
        self.q_ns = constants.q * n_spins(material, geometry, constants=constants)

    def field(self, m: np.ndarray) -> np.ndarray:
        "Deterministic effective field (shape + anisotropy + applied)"
        return self.stiffness * m + self.H_a

    def energy_kT(self, m: np.ndarray) -> np.ndarray:
        energy = magnetic_energy(m, self.material, self.geometry, self.demag, constants=self.constants)
        if self.material.T == 0:
            return energy / self.constants.kB
        return energy_in_kT(energy, self.material.T, constants=self.constants)

    def noise(self, rngs: Sequence[np.random.Generator]) -> ThermalNoise:
        return ThermalNoise(rngs, self.sigma, self.config.noise_block)

    def run(self, m: np.ndarray, i_s: Optional[np.ndarray], n_steps: int, noise: ThermalNoise, record_every:int=0, step0:int=0) -> Tuple[np.ndarray, List[np.ndarray]]:
        """Integrate all members over ``n_steps``

        Parameters
        ----------
        m : array (n, 3)
            Initial magnetizations
        i_s : array (n, 3) or None
            Spin currents held during the phase
        n_steps : int
        noise : ThermalNoise
            Thermal field source of the ensemble
        record_every : int
            Keep every k-th state (0 keeps none)
        step0 : int
            Global index of the first step (diagnostics)

        Returns
        -------
        m : array (n, 3)
            Final magnetizations
        samples : list of arrays
            Recorded states
        """
        alpha, cfg, constants = self.material.alpha, self.config, self.constants
        samples = []
        if i_s is not None and not np.any(i_s):
            i_s = None
        for k in range(n_steps):
            h_th = noise() if noise.enabled else None

            H = self.field(m)
            if h_th is not None:
                H = H + h_th
            k1 = llg_torque(m, H, i_s, alpha, self.q_ns, constants=constants)
            predictor = m + cfg.dt * k1
            H_p = self.field(predictor)
            if h_th is not None:
                H_p = H_p + h_th
            k2 = llg_torque(predictor, H_p, i_s, alpha, self.q_ns, constants=constants)
            m = m + 0.5 * cfg.dt * (k1 + k2)
            if cfg.renormalize_each_step:
                m = normalize(m)

            if record_every and (k + 1) % record_every == 0:
                samples.append(m.copy())
            if not np.isfinite(m).all():
                step = step0 + k
                raise IntegrationDivergedError(f"Magnetization became non-finite at step {step}", step=step, trial=_first_bad(m))
        return m, samples
