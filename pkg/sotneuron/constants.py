"""Physical constants used by the macrospin model.

Values are the CODATA values shipped with SciPy.
"""

import math

from pydantic import BaseModel, ConfigDict, Field
from scipy import constants as _codata


class PhysicalConstants(BaseModel):
    """Physical constants (SI)

    Parameters
    ----------
    mu0 : float
        Vacuum permeability [T·m/A]
    muB : float
        Bohr magneton [A·m²]
    kB : float
        Boltzmann constant [J/K]
    hbar : float
        Reduced Planck constant [J·s]
    q : float
        Elementary charge [C]
    g_factor : float
        Electron g-factor entering the gyromagnetic
        ratio. By default 2, which gives
        ``gamma = 2·muB·mu0/hbar``.
    """
    model_config = ConfigDict(frozen=True, extra="forbid")

    mu0: float = _codata.mu_0
    muB: float = _codata.physical_constants["Bohr magneton"][0]
    kB: float = _codata.k
    hbar: float = _codata.hbar
    q: float = _codata.e
    g_factor: float = Field(default=2.0, gt=0)

    @property
    def gamma(self) -> float:
        "Gyromagnetic ratio [m/(A·s)]"
        return self.g_factor * self.muB * self.mu0 / self.hbar

    def thermal_energy(self, T:float) -> float:
        "kB·T [J]"
        return self.kB * T

    def larmor_frequency(self, H:float, alpha:float=0.0) -> float:
        "Precession frequency [Hz] about a static field H [A/m]"
        return self.gamma * H / (2 * math.pi * (1 + alpha ** 2))


CONSTANTS = PhysicalConstants()
