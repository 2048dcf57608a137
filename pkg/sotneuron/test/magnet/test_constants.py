import math

import pytest

from sotneuron.constants import CONSTANTS, PhysicalConstants


def test_gamma_default():
    assert CONSTANTS.gamma == pytest.approx(2.2102e5, rel=2e-3)

def test_gamma_electron_g_factor():
    constants = PhysicalConstants(g_factor=2.0023)
    assert constants.gamma == pytest.approx(2.2128e5, rel=1e-4)

def test_thermal_energy():
    assert CONSTANTS.thermal_energy(300) == pytest.approx(4.141947e-21, rel=1e-6)

def test_larmor_frequency():
    H = 1e5
    assert CONSTANTS.larmor_frequency(H) == pytest.approx(CONSTANTS.gamma * H / (2 * math.pi))
    assert CONSTANTS.larmor_frequency(H, alpha=0.5) == pytest.approx(CONSTANTS.larmor_frequency(H) / 1.25)

def test_frozen():
    with pytest.raises(ValueError):
        CONSTANTS.kB = 1.0
