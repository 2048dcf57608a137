import math

import numpy as np
import pytest
from scipy import integrate, special

from sotneuron.constants import CONSTANTS
from sotneuron.magnetodynamics import DemagTensor, MagnetGeometry, demag_factors


def loop_oracle_nzz(radius, thickness):
    """Axial factor of a circular cylinder from its equivalent solenoid

    The volume-averaged induction is the mutual flux between
    rings of the surface current, integrated over their
    separation with Maxwell's formula for coaxial loops.
    """
    mu0 = CONSTANTS.mu0

    def mutual(d):
        m = 4 * radius ** 2 / (4 * radius ** 2 + d ** 2)
        k = math.sqrt(m)
        return mu0 * radius * ((2 / k - k) * special.ellipk(m) - 2 / k * special.ellipe(m))

    flux, _ = integrate.quad(lambda d: (thickness - d) * mutual(d), 0, thickness, limit=500, epsabs=0, epsrel=1e-10)
    mean_induction = 2 * flux / (thickness * math.pi * radius ** 2 * mu0)
    return 1 - mean_induction


@pytest.mark.parametrize("radius,thickness", [
    pytest.param(20e-9, 1.5e-9, id="free layer"),
    pytest.param(10e-9, 20e-9, id="pillar"),
    pytest.param(30e-9, 60e-9, id="cube-like"),
])
def test_circular_against_solenoid(radius, thickness):
    N = demag_factors(MagnetGeometry(semi_axis_a=radius, semi_axis_b=radius, thickness=thickness))
    expected = loop_oracle_nzz(radius, thickness)
    assert N.Nzz == pytest.approx(expected, rel=5e-3)
    assert N.Nxx == pytest.approx((1 - expected) / 2, rel=5e-3)

def test_circular_symmetry():
    N = demag_factors(MagnetGeometry())
    assert N.Nxx == N.Nyy
    assert N.Nxx + N.Nyy + N.Nzz == pytest.approx(1.0, abs=1e-12)

def test_thin_film_limit():
    N = demag_factors(MagnetGeometry(semi_axis_a=1e-6, semi_axis_b=1e-6, thickness=1e-10))
    assert N.Nzz > 0.99

def test_long_rod_limit():
    N = demag_factors(MagnetGeometry(semi_axis_a=10e-9, semi_axis_b=10e-9, thickness=1e-6))
    assert N.Nzz < 0.02
    assert N.Nxx == pytest.approx(0.5, abs=0.01)

def test_ellipse_long_axis_is_easier():
    N = demag_factors(MagnetGeometry(semi_axis_a=30e-9, semi_axis_b=20e-9, thickness=1.5e-9))
    assert N.Nxx < N.Nyy < N.Nzz
    swapped = demag_factors(MagnetGeometry(semi_axis_a=20e-9, semi_axis_b=30e-9, thickness=1.5e-9))
    assert swapped.Nxx == pytest.approx(N.Nyy, rel=1e-6)
    assert swapped.Nzz == pytest.approx(N.Nzz, rel=1e-9)

def test_default_free_layer_is_thin():
    N = demag_factors(MagnetGeometry())
    assert 0.85 < N.Nzz < 0.95

@pytest.mark.parametrize("kwargs", [
    {"semi_axis_a": 0},
    {"semi_axis_b": -1e-9},
    {"thickness": 0},
])
def test_invalid_geometry(kwargs):
    with pytest.raises(ValueError):
        MagnetGeometry(**kwargs)

def test_tensor_sum_rule():
    with pytest.raises(ValueError):
        DemagTensor(Nxx=0.1, Nyy=0.1, Nzz=0.1)
    N = DemagTensor(Nxx=0.25, Nyy=0.25, Nzz=0.5)
    np.testing.assert_array_equal(N.as_array(), [0.25, 0.25, 0.5])

@pytest.mark.slow
@pytest.mark.parametrize("seed", range(100))
def test_random_geometry_sum_rule(seed):
    rng = np.random.default_rng(seed)
    a = rng.uniform(10e-9, 60e-9)
    b = a if seed % 2 == 0 else rng.uniform(10e-9, 60e-9)
    t = rng.uniform(1e-9, 30e-9)
    N = demag_factors(MagnetGeometry(semi_axis_a=a, semi_axis_b=b, thickness=t))
    assert N.Nxx + N.Nyy + N.Nzz == pytest.approx(1.0, abs=1e-9)
    assert 0 < N.Nzz < 1
    if a == b:
        assert N.Nxx == pytest.approx(N.Nyy, rel=1e-12)
        assert N.Nzz == pytest.approx(loop_oracle_nzz(a, t), rel=5e-3)
