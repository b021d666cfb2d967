import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from screenvp import flow
from screenvp.errors import FieldFrameMissing
from screenvp.field import Grid

X = np.linspace(-2, 2, 5)
V = np.linspace(-1, 1, 5)
EPS = 0.05
SINE = flow.FieldHistory.analytic(lambda t, x: EPS * np.exp(-0.1 * t) * np.sin(x), 1,
                                  lambda t, x: (EPS * np.exp(-0.1 * t) * np.cos(x))[None])


def test_terminal_condition_and_zero_field():
    c = flow.integrate_characteristic(flow.FieldHistory.zero(1), 1, 3.0, X, V, 1e-2)
    assert np.array_equal(c.X[0, 0], X) and np.array_equal(c.V[0, 0], V)
    assert np.max(np.abs(c.X0[0] - (X - 3 * V))) < 1e-12


def test_constant_field_closed_form():
    c = flow.integrate_characteristic(flow.FieldHistory.constant(0.3), 1, 2.0, X, V, 1e-3)
    s = c.s[:, None]
    assert np.max(np.abs(c.V[:, 0] - (V - 0.3 * (2 - s)))) < 1e-10
    assert np.max(np.abs(c.X[:, 0] - (X - V * (2 - s) + 0.3 * (2 - s) ** 2 / 2))) < 1e-10


def test_species_sign_symmetry():
    neg = flow.FieldHistory.analytic(lambda t, x: -SINE(t, x), 1)
    a = flow.integrate_characteristic(SINE, -1, 4.0, X, V, 1e-2)
    b = flow.integrate_characteristic(neg, 1, 4.0, X, V, 1e-2)
    assert np.max(np.abs(a.X - b.X)) < 1e-14 and np.max(np.abs(a.V - b.V)) < 1e-14


def test_group_property():
    full = flow.integrate_characteristic(SINE, 1, 6.0, X, V, 1e-3, s_end=0.0)
    mid = flow.integrate_characteristic(SINE, 1, 6.0, X, V, 1e-3, s_end=3.0)
    two = flow.integrate_characteristic(SINE, 1, 3.0, mid.X0, mid.V0, 1e-3, s_end=0.0)
    assert np.max(np.abs(two.X0 - full.X0)) < 1e-10


def test_missing_frames():
    g = Grid(2 * np.pi, 16, 1)
    hist = flow.FieldHistory(np.array([0.0, 1.0]), np.zeros((2, 1, 16)), g)
    with pytest.raises(FieldFrameMissing):
        flow.integrate_characteristic(hist, 1, 2.0, X, V, 0.1)


def test_correction_fields():
    cf = flow.correction_fields(flow.FieldHistory.zero(1), 1, 0.0, 3.0, X, V)
    assert not np.any(cf.Y) and not np.any(cf.W)
    for sg in (1, -1):
        cf = flow.correction_fields(flow.FieldHistory.constant(0.3), sg, 0.5, 2.0, X - 2 * V, V, dtau=0.01)
        assert np.max(np.abs(cf.Y - sg * 0.3 * 1.5**2 / 2)) < 1e-12
        assert np.max(np.abs(cf.W + sg * 0.3 * 1.5)) < 1e-12
        ch = flow.integrate_characteristic(SINE, sg, 5.0, X, V, 1e-3, s_end=1.0)
        cf = flow.correction_fields(SINE, sg, 1.0, 5.0, X - 5 * V, V, dtau=1e-3)
        Xr, Vr = flow.reconstruct(cf, X, V)
        assert max(np.abs(Xr - ch.X0).max(), np.abs(Vr - ch.V0).max()) < 1e-8


def test_inverse_velocity_map():
    iv = flow.inverse_velocity_map(flow.FieldHistory.zero(1), 1, 0.0, 2.0, X, V)
    assert iv.psi.shape == (1, V.size) and np.array_equal(iv.psi[0], V)
    for sg in (1, -1):
        iv = flow.inverse_velocity_map(SINE, sg, 1.0, 5.0, X, V, dtau=1e-3)
        c = flow.integrate_characteristic(SINE, sg, 5.0, X, iv.psi[0], 1e-3, s_end=1.0)
        assert np.max(np.abs(c.X0 - (X - 4 * V))) < 1e-7


def test_inverse_map_decay_trend():
    # field family eps <t>^{-(d+1)+gamma} at the d=3 rate: <s>^{d-gamma} ||Psi - v|| stays bounded
    fam = flow.FieldHistory.analytic(lambda t, x: 0.05 * (1 + t * t) ** (-3.95 / 2) * np.sin(x), 1)
    for t in (20.0, 40.0):
        ss = np.array([1.0, 2.0, 4.0, 8.0, 16.0])
        gaps = np.array([np.max(np.abs(flow.inverse_velocity_map(fam, 1, s, t, X, V, dtau=0.01).psi - V))
                         for s in ss])
        weighted = gaps * (1 + ss**2) ** (2.95 / 2)
        assert gaps[-1] < 1e-2 * gaps[0]
        assert weighted.max() <= 5 * weighted.min()


def test_jacobian_dispersion():
    jr = flow.jacobian_dispersion(flow.FieldHistory.zero(), 10.0, X, V, dt=1 / 64)
    assert jr.ratio_min == 1.0 == jr.ratio_max
    jr = flow.jacobian_dispersion(SINE, 10.0, X, V, dt=1 / 64)
    assert 0.5 <= jr.ratio_min and jr.ratio_max <= 2.0 and jr.fd_agree


@settings(max_examples=10, deadline=None)
@given(st.floats(-3, 3), st.floats(-2, 2))
def test_volume_preservation(x0, v0):
    _, _, J = flow.tangent_flow(SINE, 1, 5.0, np.array([x0]), np.array([v0]), 0.01, joint=True)
    det = J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0]
    assert np.max(np.abs(det - 1)) < 1e-6


def test_spectral_history_accuracy():
    g = Grid(2 * np.pi, 32, 1)
    ts = np.linspace(0, 2, 41)
    fn = lambda t, x: np.sin(x - t) * np.exp(-t)
    frames = np.stack([fn(t, g.axis)[None] for t in ts])
    h = flow.FieldHistory(ts, frames, g, space="spectral", time_order=3)
    xq = np.array([[0.123, 1.7, -2.2]])
    assert np.max(np.abs(h(0.77, xq) - fn(0.77, xq))) < 1e-5
