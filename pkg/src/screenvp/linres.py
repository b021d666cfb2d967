"""Linear response: per-mode Volterra equation, resolvent kernel, decay checks.

Per Fourier mode the density of the linearised two-species problem obeys

    rho_hat(t) + 2 int_0^t K(t-s, xi) rho_hat(s) ds = S_hat(t),

with ``K`` from :func:`screenvp.penrose.time_kernel`.  The resolvent symbol
``G~`` solves the same equation with right-hand side ``2 K``; it vanishes
identically at ``xi = 0`` because ``K(., 0) = 0``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .model import VelocityProfile
from .penrose import STABLE, _tail_cutoff, dispersion, time_kernel
from .radial import inverse_radial, radial_norms


@dataclass
class VolterraSolution:
    xi_mag: np.ndarray
    times: np.ndarray
    rho_hat: np.ndarray  # (n_xi, n_t)
    source: np.ndarray
    dt: float


@dataclass
class ResolventKernel:
    d: int
    times: np.ndarray
    radii: np.ndarray
    values: np.ndarray  # G(t, r), shape (n_t, n_r)
    g_hat_time: np.ndarray  # G~(t, k), shape (n_t, n_k)
    k: np.ndarray
    linf: np.ndarray = None
    l1: np.ndarray = None
    integral: np.ndarray = None
    grad_linf: np.ndarray = None
    grad_l1: np.ndarray = None


def _time_grid(dt, t_end):
    if not dt > 0:
        raise ValidationError("dt must be positive")
    if not t_end >= 0:
        raise ValidationError("t_end must be non-negative")
    n = int(round(t_end / dt))
    if abs(n * dt - t_end) > 1e-9 * max(1.0, t_end):
        raise ValidationError("t_end must be an integer multiple of dt")
    return dt * np.arange(n + 1)


def volterra_march(K, S, dt: float, coupling: float = 2.0):
    """Trapezoidal product rule for ``y + c int_0^t K(t-s) y(s) ds = S``.

    ``K`` and ``S`` have shape ``(m, n+1)`` (modes by time nodes); the kernel
    is sampled exactly at the nodes.  Vectorised over modes.
    """
    K = np.atleast_2d(np.asarray(K))
    S = np.atleast_2d(np.asarray(S))
    dtype = np.result_type(K, S, float)
    m, n1 = S.shape
    y = np.zeros((m, n1), dtype=dtype)
    diag = 1.0 + coupling * 0.5 * dt * K[:, 0]
    y[:, 0] = S[:, 0]
    for n in range(1, n1):
        # sum_{j=1}^{n-1} K_{n-j} y_j  +  K_n y_0 / 2
        hist = np.einsum("mj,mj->m", K[:, n - 1:0:-1], y[:, 1:n]) if n > 1 else 0.0
        hist = hist + 0.5 * K[:, n] * y[:, 0]
        y[:, n] = (S[:, n] - coupling * dt * hist) / diag
    return y


def volterra_solve(xi_mag, source, dt: float, t_end: float, mu: VelocityProfile,
                   sign: float = STABLE) -> VolterraSolution:
    """Solve the per-mode density equation for each ``|xi|`` in ``xi_mag``.

    ``source`` is a callable ``S(t, xi)`` (broadcasting) or an array shaped
    ``(n_xi, n_t)`` already sampled on the time grid.
    """
    t = _time_grid(dt, t_end)
    xi = np.atleast_1d(np.asarray(xi_mag, dtype=float))
    if callable(source):
        S = np.asarray(source(t[None, :], xi[:, None]), dtype=complex)
        S = np.broadcast_to(S, (xi.size, t.size)).copy()
    else:
        S = np.asarray(source, dtype=complex).reshape(xi.size, t.size)
    K = time_kernel(t[None, :], xi[:, None], mu, sign)
    rho = volterra_march(K, S, dt)
    return VolterraSolution(xi, t, rho, S, dt)


def resolvent_time_kernel(xi_mag, dt: float, t_end: float, mu: VelocityProfile,
                          sign: float = STABLE):
    """G~(t, xi) solving ``G~ + 2 K * G~ = 2 K``; shape ``(n_xi, n_t)``."""
    t = _time_grid(dt, t_end)
    xi = np.atleast_1d(np.asarray(xi_mag, dtype=float))
    K = time_kernel(t[None, :], xi[:, None], mu, sign)
    return volterra_march(K, 2.0 * K, dt)


def resolvent_residual(g, xi_mag, dt, mu, sign=STABLE):
    """Max residual of ``G~ + 2 K*G~ - 2K`` using an independent Simpson history sum."""
    g = np.atleast_2d(g)
    xi = np.atleast_1d(np.asarray(xi_mag, dtype=float))
    n1 = g.shape[1]
    t = dt * np.arange(n1)
    K = time_kernel(t[None, :], xi[:, None], mu, sign)
    out = 0.0
    for n in range(2, n1, 2):
        w = np.ones(n + 1)
        w[1:-1:2] = 4
        w[2:-1:2] = 2
        conv = dt / 3 * np.einsum("mj,j->m", K[:, n::-1] * g[:, :n + 1], w)
        out = max(out, float(np.max(np.abs(g[:, n] + 2 * conv - 2 * K[:, n]))))
    return out


def resolvent_frequency_crosscheck(xi, taus, dt, t_end, mu: VelocityProfile, sign=STABLE):
    """Compare int e^{-i tau t} G~ dt with (D-1)/D; returns the max abs difference."""
    g = resolvent_time_kernel([xi], dt, t_end, mu, sign)[0]
    t = _time_grid(dt, t_end)
    taus = np.atleast_1d(np.asarray(taus, dtype=float))
    w = np.full(t.size, dt)
    w[0] = w[-1] = dt / 2
    # trapezoid with the endpoint Euler-Maclaurin correction for the t=0 edge
    ft = np.exp(-1j * taus[:, None] * t[None, :]) @ (w * g)
    dg0 = (g[1] - g[0]) / dt
    ft = ft + dt**2 / 12 * (dg0 - 1j * taus * g[0])
    D = dispersion(taus, xi, mu, sign)
    return float(np.max(np.abs(ft - (D - 1) / D)))


# --------------------------------------------------------------------------
# physical-space resolvent


def _decay_point(mu: VelocityProfile, tol: float) -> float:
    # smallest w beyond which |w mu_hat(w)| stays below tol (coarse scan then bisection)
    hi = _tail_cutoff(mu, tol=tol)
    w = np.linspace(0.0, hi, 4097)
    above = np.nonzero(np.abs(w * mu.fourier_radial(w)) >= tol)[0]
    return float(w[min(above[-1] + 1, w.size - 1)]) if above.size else 0.0


@dataclass
class RadialGrids:
    k: np.ndarray
    r: np.ndarray
    dt: float


def default_radial_grids(t_min: float, t_max: float, mu: VelocityProfile,
                         v_reach: float = 10.0, k_floor: float = 1.0) -> RadialGrids:
    """k grid, r grid and time step sized for ``G(t, .)`` on ``[t_min, t_max]``.

    Modes die like ``mu_hat(k t)``, so ``k_max ~ w_cut / t_min``; the kernel
    spreads at the thermal scale so ``r`` needs ``~ v_reach * t_max``.
    """
    w_cut = _decay_point(mu, 1e-14)
    k_max = max(k_floor, 1.25 * w_cut / t_min)
    r_max = v_reach * t_max + 10.0
    dk = math.pi / (2.5 * r_max)
    nk = int(math.ceil(k_max / dk)) + 1
    k = dk * np.arange(nk)
    dr = 0.5 * math.pi / k[-1]
    r = dr * np.arange(int(math.ceil(r_max / dr)) + 1)
    # dyadic step so that integer and common decimal sample times are on the grid
    dt = 2.0 ** -math.ceil(math.log2(max(20.0, 10.0 * k[-1])))
    return RadialGrids(k, r, dt)


def _widen(grids: RadialGrids, factor: float) -> RadialGrids:
    dk = grids.k[1] - grids.k[0]
    k = dk * np.arange(int(math.ceil(factor * grids.k[-1] / dk)) + 1)
    dr = 0.5 * math.pi / k[-1]
    r = dr * np.arange(int(math.ceil(grids.r[-1] / dr)) + 1)
    dt = 2.0 ** -math.ceil(math.log2(max(20.0, 10.0 * k[-1])))
    return RadialGrids(k, r, dt)


def resolvent_physical(d: int, times, mu: VelocityProfile, grids: RadialGrids = None,
                       sign: float = STABLE, gradient: bool = True,
                       tail_tol: float = 1e-11) -> ResolventKernel:
    """Radial inverse transform of ``G~`` at the requested times, with norms.

    With automatic grids the wavenumber range is widened until ``G~`` is
    negligible (``tail_tol`` relative) on the last eighth of the k grid.
    """
    if d not in (1, 2, 3):
        raise ValidationError("resolvent_physical supports d in {1, 2, 3}")
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if np.any(times <= 0):
        raise ValidationError("times must be positive")
    auto = grids is None
    if auto:
        grids = default_radial_grids(float(times.min()), float(times.max()), mu)
    while True:
        dt = grids.dt
        t_end = dt * math.ceil(times.max() / dt - 1e-9)
        g_all = resolvent_time_kernel(grids.k, dt, t_end, mu, sign)  # (nk, nt)
        tgrid = _time_grid(dt, t_end)
        idx = np.rint(times / dt).astype(int)
        if np.max(np.abs(tgrid[idx] - times)) > 1e-9:
            raise ValidationError("requested times must lie on the dt grid")
        g_hat = g_all[:, idx].T.real  # (n_t, nk)
        tail = np.max(np.abs(g_hat[:, -max(3, grids.k.size // 8):]))
        if not auto or tail <= tail_tol * np.max(np.abs(g_hat)):
            break
        grids = _widen(grids, 1.5)
    vals = inverse_radial(g_hat, grids.k, grids.r, d)
    linf, l1, integral = radial_norms(vals, grids.r, d)
    out = ResolventKernel(d, times, grids.r, vals, g_hat, grids.k, linf, l1, integral)
    if gradient:
        dv = inverse_radial(g_hat, grids.k, grids.r, d, derivative=True)
        out.grad_linf, out.grad_l1, _ = radial_norms(dv, grids.r, d)
    return out


def fit_slope(t, y):
    """Least-squares slope of log y against log t."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    return float(np.polyfit(np.log(t), np.log(y), 1)[0])


# --------------------------------------------------------------------------
# convolution estimate checks (radial synthetic data)


def _radial_besov(F, k, r, d, a, p):
    """sup_j 2^{ja} ||Delta_j f||_{L^p} for radial f given by samples of its transform."""
    from .besov import lp_multiplier

    kpos = k[1:]
    j_lo = int(math.floor(math.log2(kpos[0])))
    j_hi = int(math.ceil(math.log2(k[-1])))
    best = np.zeros(F.shape[:-1])
    for j in range(j_lo, j_hi + 1):
        blk = inverse_radial(F * lp_multiplier(k / 2.0**j), k, r, d, check=False)
        linf, l1, _ = radial_norms(blk, r, d)
        best = np.maximum(best, 2.0 ** (j * a) * (linf if p == math.inf else l1))
    return best


@dataclass
class ConvolutionReport:
    times: np.ndarray
    constants: dict = field(default_factory=dict)
    lhs: dict = field(default_factory=dict)
    rhs: dict = field(default_factory=dict)


def convolution_estimate_check(hbar_hat, d: int, mu: VelocityProfile, a: float = 0.5,
                               t_end: float = 40.0, t_samples=None, grids: RadialGrids = None,
                               sign: float = STABLE) -> ConvolutionReport:
    """Evaluate ``G *_(t,x) hbar`` for radial synthetic data and fit the six constants.

    ``hbar_hat(s, k)`` returns the radial Fourier transform of ``hbar(s, .)``.
    Each constant is ``max_t LHS(t) / RHS(t)`` over ``t_samples`` (t >= 1).
    """
    if t_samples is None:
        t_samples = np.geomspace(1.0, t_end, 12)
    if grids is None:
        grids = default_radial_grids(0.5, t_end, mu)
    k, r, dt = grids.k, grids.r, grids.dt
    t_end = dt * math.ceil(t_end / dt - 1e-9)
    tg = _time_grid(dt, t_end)
    G = resolvent_time_kernel(k, dt, t_end, mu, sign).real  # (nk, nt)
    H = np.asarray(hbar_hat(tg[None, :], k[:, None]), dtype=float)
    H = np.broadcast_to(H, G.shape)
    idx = np.unique(np.rint(np.asarray(t_samples) / dt).astype(int))
    ts = tg[idx]
    conv = np.zeros((idx.size, k.size))
    for q, n in enumerate(idx):
        w = np.full(n + 1, dt)
        w[0] = w[-1] = dt / 2
        conv[q] = np.einsum("kj,kj,j->k", G[:, n::-1], H[:, :n + 1], w) if n > 0 else 0.0

    def norms(Fs):
        f = inverse_radial(Fs, k, r, d, check=False)
        gf = inverse_radial(Fs, k, r, d, derivative=True, check=False)
        linf, l1, _ = radial_norms(f, r, d)
        glinf, gl1, _ = radial_norms(gf, r, d)
        return dict(linf=linf, l1=l1, glinf=glinf, gl1=gl1,
                    b1=_radial_besov(Fs, k, r, d, a, 1), binf=_radial_besov(Fs, k, r, d, a, math.inf))

    lhs_n = norms(conv)
    h_n = norms(H.T)  # every time node; used for running sups
    s = tg
    br = lambda x: np.sqrt(1 + x**2)

    def run_sup(arr):
        return np.array([np.max(arr[:n + 1]) for n in idx])

    tb = br(ts)
    lg = np.log1p(ts)
    lhs = {
        "L1": lhs_n["l1"],
        "Linf": tb**d * lhs_n["linf"],
        "grad_L1": tb / lg * lhs_n["gl1"],
        "grad_Linf": tb ** (d + 1) / lg * lhs_n["glinf"],
        "B1": tb**a * lhs_n["b1"],
        "Binf": tb ** (d + a) * lhs_n["binf"],
    }
    rhs = {
        "L1": run_sup(br(s) ** a * h_n["b1"]),
        "Linf": run_sup(h_n["l1"] + br(s) ** (d + a) * h_n["binf"]),
        "grad_L1": run_sup(h_n["l1"] + br(s) * h_n["gl1"]),
        "grad_Linf": run_sup(h_n["l1"] + br(s) ** (d + 1) * h_n["glinf"]),
        "B1": run_sup(h_n["l1"] + br(s) ** a * h_n["b1"]),
        "Binf": run_sup(h_n["l1"] + br(s) ** (d + a) * h_n["binf"]),
    }
    consts = {}
    for key in lhs:
        with np.errstate(invalid="ignore", divide="ignore"):
            ratio = np.where(rhs[key] > 0, lhs[key] / rhs[key], 0.0)
        consts[key] = float(np.max(ratio)) if ratio.size else 0.0
    return ConvolutionReport(ts, consts, lhs, rhs)


# --------------------------------------------------------------------------
# linear Landau damping


@dataclass
class LinearData:
    """Separable initial perturbation ``amplitude * g(x) * h(v)``.

    ``kind='gaussian'``: g is a centred Gaussian of width ``width`` (radial);
    ``kind='mode'``: g = cos(k0 x1), a single Fourier mode.
    The velocity factor is ``mu`` itself unless ``velocity`` is given.
    """

    amplitude: float = 1e-3
    kind: str = "gaussian"
    width: float = 1.0
    k0: float = 0.5
    velocity: VelocityProfile = None


@dataclass
class LinearResult:
    times: np.ndarray
    rho_linf: np.ndarray
    E_linf: np.ndarray
    rho_hat: np.ndarray = None
    reports: dict = field(default_factory=dict)


def linear_landau_experiment(mu: VelocityProfile, d: int, data: LinearData = None, *,
                             t_end: float = 50.0, window=(5.0, 50.0), n_samples: int = 24,
                             dt: float = None, grids: RadialGrids = None, sign: float = STABLE):
    """Linearised density response to separable data; norm series and fitted slopes."""
    from .diagnostics import decay_fit

    data = data or LinearData()
    vel = data.velocity or mu
    if data.kind == "mode":
        dt = dt or 0.05
        sol = volterra_solve([data.k0], lambda t, x: data.amplitude * vel.fourier_radial(t * x),
                             dt, dt * math.ceil(t_end / dt - 1e-9), mu, sign)
        rh = sol.rho_hat[0]
        # rho = A Re(rho_hat e^{i k x}) so sup_x |rho| = |rho_hat|
        rho_linf = np.abs(rh)
        E_linf = np.abs(rh) * data.k0 / (1 + data.k0**2)
        res = LinearResult(sol.times, rho_linf, E_linf, rh)
        return res
    if data.kind != "gaussian":
        raise ValidationError(f"unknown data kind {data.kind!r}")
    if d not in (1, 2, 3):
        raise ValidationError("radial reduction supports d in {1, 2, 3}")
    if grids is None:
        grids = default_radial_grids(max(window[0], 0.5), t_end, mu)
    k, r = grids.k, grids.r
    dt = dt or grids.dt
    t_end = dt * math.ceil(t_end / dt - 1e-9)
    sig = data.width
    src = lambda t, x: np.exp(-0.5 * (sig * x) ** 2) * data.amplitude * vel.fourier_radial(t * x)
    sol = volterra_solve(k, src, dt, t_end, mu, sign)
    ts = np.unique(np.concatenate([np.geomspace(window[0], window[1], n_samples), [0.0]]))
    idx = np.unique(np.rint(ts / dt).astype(int))
    idx = idx[idx < sol.times.size]
    R = sol.rho_hat[:, idx].T.real
    rho = inverse_radial(R, k, r, d)
    Er = inverse_radial(R / (1 + k**2), k, r, d, derivative=True)
    rho_linf, _, _ = radial_norms(rho, r, d)
    E_linf, _, _ = radial_norms(Er, r, d)
    res = LinearResult(sol.times[idx], rho_linf, E_linf, R)
    sel = (res.times >= window[0]) & (res.times <= window[1])
    res.reports["rho"] = decay_fit(res.times[sel], rho_linf[sel], window, target=-d, name="rho_linf")
    res.reports["E"] = decay_fit(res.times[sel], E_linf[sel], window, target=-d, name="E_linf")
    return res
