import math

import numpy as np
import pytest

from oracles import volterra_dense
from screenvp.linres import (LinearData, convolution_estimate_check, linear_landau_experiment,
                             resolvent_frequency_crosscheck, resolvent_physical, resolvent_time_kernel,
                             volterra_solve)
from screenvp.model import make_maxwellian, make_zero_profile
from screenvp.penrose import time_kernel

MU = make_maxwellian(1)


def test_volterra_trivial():
    sol = volterra_solve([0.0], lambda t, x: np.sin(t) + 0 * x, 0.01, 2.0, MU)
    assert np.array_equal(sol.rho_hat, sol.source)
    sol = volterra_solve([1.0], lambda t, x: 0 * t * x, 0.01, 2.0, MU)
    assert not np.any(sol.rho_hat)
    sol = volterra_solve([1.0], lambda t, x: np.exp(-t) + 0 * x, 0.01, 2.0, MU)
    assert sol.rho_hat[0, 0] == sol.source[0, 0]


def test_volterra_free_streaming_oracle():
    S = lambda t: np.exp(-t**2 / 2)
    dt = 0.0025
    sol = volterra_solve([1.0], lambda t, x: S(t) + 0 * x, dt, 10.0, MU)
    _, y = volterra_dense(lambda t: time_kernel(t, 1.0, MU), S, dt / 4, 10.0)
    assert np.max(np.abs(sol.rho_hat[0] - y[::4])) < 1e-6


def test_resolvent_trivial_and_cancellation():
    assert not np.any(resolvent_time_kernel([0.0], 0.05, 5.0, MU))
    assert not np.any(resolvent_time_kernel([1.0], 0.05, 5.0, make_zero_profile(1)))


def test_frequency_crosscheck():
    assert resolvent_frequency_crosscheck(1.0, np.linspace(-3, 3, 13), 0.01, 60.0, MU) < 1e-4


def test_resolvent_physical_d1():
    ker = resolvent_physical(1, [2.0, 4.0], MU)
    assert np.all(np.abs(ker.integral) <= 1e-6 * ker.l1)


@pytest.mark.slow
def test_convolution_estimates():
    mu3 = make_maxwellian(3)
    zero = convolution_estimate_check(lambda s, k: 0 * s * k, 3, mu3, t_end=8.0)
    assert all(v == 0 for v in zero.constants.values())
    rep = convolution_estimate_check(lambda s, k: np.exp(-k**2 / 2) / (1 + s) ** 4 + 0 * k, 3, mu3, t_end=16.0)
    for key, c in rep.constants.items():
        assert math.isfinite(c) and c > 0, key
        ratio = rep.lhs[key] / rep.rhs[key]
        # constants settle: late-time ratios do not exceed the early maximum by much
        assert ratio[-3:].max() <= 2 * ratio.max() + 1e-12


def test_linear_zero_and_single_mode():
    zero = linear_landau_experiment(MU, 1, LinearData(amplitude=0.0, kind="mode"), t_end=5.0)
    assert not np.any(zero.rho_linf)
    res = linear_landau_experiment(MU, 1, LinearData(kind="mode", k0=0.5), t_end=60.0)
    assert abs(res.rho_hat[-1]) < 1e-3 * abs(res.rho_hat[0])
