import math

import numpy as np
import pytest
from hypothesis import example, given, settings, strategies as st
from scipy import integrate
from scipy.special import wofz

from screenvp.errors import ValidationError
from screenvp.model import make_maxwellian, make_polynomial_profile
from screenvp.penrose import FLIPPED, default_grids, dispersion, penrose_margin, time_kernel

MU = make_maxwellian(1)


def closed_form(lam, xi):
    # Maxwellian: 1 + 2 (1 - i z I(z)) / (1 + xi^2), z = lam / xi, via the Faddeeva function
    z = lam / xi
    return 1 + 2 * (1 - 1j * z * np.sqrt(np.pi / 2) * wofz(-z / np.sqrt(2))) / (1 + xi**2)


def test_time_kernel_examples():
    assert time_kernel(1.0, 1.0, MU) == pytest.approx(math.exp(-0.5) / 2, abs=1e-12)
    assert np.all(time_kernel(np.linspace(0, 4, 9), 0.0, MU) == 0)
    assert np.all(time_kernel(0.0, np.linspace(0, 4, 9), MU) == 0)


def test_dispersion_examples():
    assert dispersion(0.7 - 0.3j, 0.0, MU) == 1.0
    assert abs(dispersion(0.0, 1.0, MU) - 2.0) < 1e-8
    assert abs(dispersion(0.0, 1e3, MU) - 1.0) < 1e-5
    with pytest.raises(ValidationError):
        dispersion(1j, 1.0, MU)


def test_dispersion_matches_faddeeva():
    rng = np.random.default_rng(0)
    lam = rng.uniform(-30, 30, 200) + 1j * rng.uniform(-5, 0, 200)
    xi = rng.uniform(0.001, 5, 200)
    assert np.max(np.abs(dispersion(lam, xi, MU) - closed_form(lam, xi))) < 1e-8


@settings(max_examples=30, deadline=None)
@given(st.floats(-20, 20), st.floats(-5, 0), st.floats(0.01, 6))
@example(2.2250738585072014e-308, 0.0, 1.0)  # subnormal lambda once gave nan
def test_monotone_tail_bound(re, im, xi):
    for mu in (MU, make_polynomial_profile(1, 8.0)):
        bound, _ = integrate.quad(lambda u: abs(float(time_kernel(u, xi, mu))), 0, np.inf, limit=200)
        assert abs(dispersion(complex(re, im), xi, mu) - 1) <= 2 * bound + 1e-8


def test_penrose_margin_maxwellian_and_flipped():
    rep = penrose_margin(MU)
    assert rep.converged and rep.kappa_estimate > 0
    ks = [lv["kappa"] for lv in rep.levels]
    assert all(b <= a + 1e-15 for a, b in zip(ks, ks[1:]))
    assert rep.boundary_screen_ok
    flip = penrose_margin(MU, sign=FLIPPED, raise_on_failure=False)
    assert flip.kappa_estimate < 1e-3
    # the flipped dispersion vanishes on a curve through (lambda, xi) = (0, 1)
    assert abs(dispersion(0.0, 1.0, MU, FLIPPED)) < 1e-8


def test_penrose_xi_zero_grid():
    assert penrose_margin(MU, np.array([0.0]), default_grids()[1]).kappa_estimate == 1.0


def test_xi_max_checked():
    with pytest.raises(ValidationError):
        penrose_margin(MU, np.array([0.1, 0.5]), default_grids()[1])
