import math

import numpy as np
import pytest

from multiscat.special_functions import SpecialFunctionError, bessel_jy, hankel1

import oracles


def test_h0_at_one_matches_series_oracle():
    # Frozen from the independent power-series oracle (j0/y0 with the
    # Euler-Mascheroni log term), evaluated before the implementation.
    v = hankel1(0, 1.0)
    assert v.real == pytest.approx(0.765197686557967, abs=1e-13)
    assert v.imag == pytest.approx(0.088256964215677, abs=1e-13)
    assert v.real == pytest.approx(oracles.j0_series(1.0), abs=1e-13)
    assert v.imag == pytest.approx(oracles.y0_series(1.0), abs=1e-13)


def test_j1_at_one_matches_series_oracle():
    J, _ = bessel_jy(1, 1.0)
    assert J == pytest.approx(0.440050585744934, abs=1e-13)
    assert J == pytest.approx(oracles.j1_series(1.0), abs=1e-13)


def test_small_z_limit():
    assert hankel1(0, 1e-6).real == pytest.approx(1.0, abs=1e-9)


def test_derivative_identity():
    # d/dz H0 = -H1, central difference at z=2
    z, h = 2.0, 1e-5
    fd = (hankel1(0, z + h) - hankel1(0, z - h)) / (2.0 * h)
    assert abs(fd + hankel1(1, z)) < 1e-8


def test_wronskian_identity():
    for n in (0, 1, 5, 20, 50):
        for z in (0.1, 1.0, 3.0, 10.0, 100.0):
            Jn, Yn = bessel_jy(n, z)
            Jn1, Yn1 = bessel_jy(n + 1, z)
            w = Jn1 * Yn - Jn * Yn1
            assert abs(w - 2.0 / (math.pi * z)) < 1e-12, (n, z)


def test_large_argument_asymptotics():
    z = 1e3
    lead = hankel1(0, z) * math.sqrt(math.pi * z / 2.0)
    assert abs(lead - np.exp(1j * (z - math.pi / 4.0))) < 1e-3


def test_domain_guards():
    with pytest.raises(SpecialFunctionError):
        hankel1(0, 0.0)
    with pytest.raises(SpecialFunctionError):
        hankel1(0, -1.0)
    with pytest.raises(SpecialFunctionError):
        bessel_jy(10_000, 1.0)   # order > 3z + 200
