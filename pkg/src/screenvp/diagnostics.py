"""Norm time series, decay fits, bootstrap monitoring and scattering profiles."""
from __future__ import annotations

import math
from dataclasses import dataclass, asdict

import numpy as np

from .errors import ValidationError, WindowTooShort


@dataclass
class DecayReport:
    name: str
    window: tuple
    slope: float
    intercept: float
    log_correction: bool = False
    target: float = math.nan
    margin: float = math.nan
    passed: bool = None
    n_points: int = 0
    residual: float = 0.0

    def as_dict(self):
        d = asdict(self)
        d["window"] = list(self.window)
        return d


def decay_fit(t, values, window=None, *, log_correction: bool = False, target: float = math.nan,
              tolerance: float = math.nan, name: str = "series", min_points: int = 4,
              min_ratio: float = 2.0) -> DecayReport:
    """Least-squares slope of log(value) against log(t) on ``window``.

    With ``log_correction`` the values are divided by ln(1+t) first.  The
    window must hold ``min_points`` samples and span a factor ``min_ratio``.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(values, dtype=float)
    if t.shape != y.shape:
        raise ValidationError("times and values must have the same shape")
    if window is None:
        window = (max(1.0, float(t.min())), float(t.max()))
    lo, hi = window
    sel = (t >= lo) & (t <= hi) & (t > 0)
    ts, ys = t[sel], y[sel]
    if ts.size < min_points or ts.max() / ts.min() < min_ratio:
        raise WindowTooShort(f"fit window {window} holds {ts.size} samples spanning "
                             f"factor {ts.max() / ts.min() if ts.size else 0:.3g}")
    if np.any(ys <= 0) or not np.all(np.isfinite(ys)):
        raise ValidationError("series must be positive and finite on the fit window")
    if log_correction:
        ys = ys / np.log1p(ts)
    A = np.stack([np.log(ts), np.ones_like(ts)], axis=1)
    coef, res, *_ = np.linalg.lstsq(A, np.log(ys), rcond=None)
    slope, icpt = float(coef[0]), float(coef[1])
    resid = float(np.sqrt(res[0] / ts.size)) if res.size else 0.0
    passed = None
    margin = math.nan
    if math.isfinite(target) and math.isfinite(tolerance):
        margin = tolerance - abs(slope - target)
        passed = bool(margin >= 0)
    return DecayReport(name, (float(lo), float(hi)), slope, icpt, log_correction, target, margin,
                       passed, int(ts.size), resid)


# --------------------------------------------------------------------------
# norm time series


@dataclass
class NormSeries:
    times: np.ndarray
    rho: list  # SeminormReport per frame
    E: list  # SeminormReport per frame (component magnitude for d > 1)
    a: float

    def column(self, which: str, key: str):
        reps = self.rho if which == "rho" else self.E
        return np.array([getattr(r, key) for r in reps])


def norm_timeseries(traj, a: float) -> NormSeries:
    """Seminorm bundle of rho and E on every stored frame."""
    from .besov import seminorm_report
    rho_reps, e_reps = [], []
    for i in range(traj.times.size):
        rho_reps.append(seminorm_report(traj.rho[i], a, traj.grid_x))
        # componentwise reports combined by max (isotropic proxy in 2-d)
        comps = [seminorm_report(traj.E[i, c], a, traj.grid_x) for c in range(traj.E.shape[1])]
        if len(comps) == 1:
            e_reps.append(comps[0])
        else:
            merged = comps[0]
            for c in comps[1:]:
                merged = type(merged)(**{k: (max(getattr(merged, k), getattr(c, k))
                                             if isinstance(getattr(c, k), float) else getattr(merged, k))
                                          for k in merged.as_dict()})
            e_reps.append(merged)
    return NormSeries(np.asarray(traj.times, dtype=float), rho_reps, e_reps, a)


# --------------------------------------------------------------------------
# bootstrap family


RATIO_NAMES = ("rho_Linf", "rho_Binf", "rho_B1", "grad_rho_Linf", "grad_rho_L1")


@dataclass
class BootstrapTrace:
    times: np.ndarray
    ratios: np.ndarray  # (n_t, 5) in RATIO_NAMES order
    running_sup: np.ndarray  # (n_t,) max over the five ratios and over past times
    epsilon: float
    breach: bool
    growth: float
    improved: bool = None
    cap: float = math.nan
    reason: str = ""

    def as_dict(self):
        return {"epsilon": self.epsilon, "breach": self.breach, "growth": self.growth,
                "improved": self.improved, "cap": self.cap, "reason": self.reason,
                "ratio_names": list(RATIO_NAMES)}


def bootstrap_monitor(series: NormSeries, d: int, a: float, gamma: float = 0.05,
                      cap: float = None, growth_limit: float = 100.0) -> BootstrapTrace:
    """The five weighted ratios of the bootstrap family and their running sup.

    ``breach`` is raised when the running sup grows by more than
    ``growth_limit`` over its value at the first frame, or a ratio is not
    finite.  ``improved`` reports whether the final sup is at most half of
    ``cap`` (defaults to the largest sup seen, so it only tests decay).
    """
    t = np.asarray(series.times, dtype=float)
    w = np.sqrt(1.0 + t * t)
    cols = [
        series.column("rho", "Linf") * w ** (d - gamma),
        series.column("rho", "Binf") * w ** (d + a - gamma),
        series.column("rho", "B1") * w ** (a - gamma),
        series.column("rho", "grad_Linf") * w ** (d + 1 - gamma),
        series.column("rho", "grad_L1") * w ** (1 - gamma),
    ]
    R = np.stack(cols, axis=1)
    finite = bool(np.all(np.isfinite(R)))
    if not finite:
        R = np.where(np.isfinite(R), R, np.inf)
    inst = np.max(R, axis=1)
    run = np.maximum.accumulate(inst)
    eps = float(run[-1]) if run.size else 0.0
    base = float(run[0]) if run.size else 0.0
    if base > 0:
        growth = eps / base
    else:
        growth = 0.0 if eps == 0 else math.inf
    breach = (not finite) or growth > growth_limit
    reason = "non-finite ratio" if not finite else (f"growth {growth:.3g} > {growth_limit:g}" if breach else "")
    c = eps if cap is None else float(cap)
    improved = bool(inst[-1] <= 0.5 * c) if run.size else True
    return BootstrapTrace(t, R, run, eps, bool(breach), float(growth), improved, c, reason)


# --------------------------------------------------------------------------
# scattering


@dataclass
class ScatteringProfile:
    species: tuple
    Y_inf: dict  # species sign -> (dim, n_x, n_v) displacement
    W_inf: dict
    f_inf: dict  # species sign -> scattering profile on the sampled grid
    times: np.ndarray
    errors: np.ndarray  # (n_t,) max over species of ||f(t, x+tv, v) - f_inf(x, v)||_inf
    tail_estimate: float
    decay_rate: float
    x_index: np.ndarray
    rate_report: DecayReport = None

    def size(self):
        """max over species of ||Y_inf||_inf + ||W_inf||_inf."""
        return max(float(np.max(np.abs(self.Y_inf[s])) + np.max(np.abs(self.W_inf[s]))) for s in self.species)

    def monotone_tail(self, fraction: float = 0.1):
        """True if the error series is non-increasing on [fraction * T, T]."""
        sel = self.times >= fraction * self.times[-1]
        e = self.errors[sel]
        return bool(np.all(np.diff(e) <= 1e-15 + 1e-9 * np.abs(e[:-1])))


def _field_tail(traj, tail_tol, n_fit, floor=1e-10):
    """Bound on the field integrals beyond the final time from an exponential envelope fit.

    Frames below ``floor`` times the peak are roundoff and are left out of the
    fit.  Returns ``(tail, rate)``.
    """
    from .errors import TailNotConverged
    norms = np.max(np.abs(traj.E.reshape(traj.times.size, -1)), axis=1)
    peak = float(np.max(norms)) if norms.size else 0.0
    if peak == 0:
        return 0.0, math.inf
    above = np.nonzero(norms > floor * peak)[0]
    last = above[-1]
    idx = above[above > last - n_fit]
    if idx.size < 3:
        raise TailNotConverged("too few frames above the roundoff floor to fit the field tail")
    tt, nn = traj.times[idx], norms[idx]
    # envelope of an oscillating decaying field: running max from the right
    env = np.maximum.accumulate(nn[::-1])[::-1]
    slope, icpt = np.polyfit(tt, np.log(env), 1)
    lam = -slope
    T = float(traj.times[-1])
    if not lam > 0:
        raise TailNotConverged(f"field norm does not decay over the final frames (rate {lam:.3g})")
    ET = math.exp(icpt - lam * T)
    tail = ET * (T / lam + 1 / lam**2)
    if tail >= tail_tol:
        raise TailNotConverged(f"estimated tail of the field integral {tail:.3g} >= {tail_tol:g}; "
                               "extend the run")
    return tail, lam


def scattering_profile(traj, dt_char: float = None, x_stride: int = 1, v_stride: int = 1,
                       tail_tol: float = 1e-6, n_fit: int = None, fit_window=None) -> ScatteringProfile:
    """Scattering data of a stored 1x1v run.

    For each sampled ``(x, v)`` and stored time ``t_j`` the characteristic
    through ``(t_j, x + t_j v, v)`` is integrated back to 0; its foot is
    ``(x + Y, v + W)``.  ``Y_inf, W_inf`` are the values at the final time
    (the remaining tail is bounded by an exponential fit of ``||E||``), and
    ``f_inf = f_in(x + Y_inf, v + W_inf) + mu(v + W_inf) - mu(v)``.  The
    convergence series compares the stored ``f(t, x + t v, v)`` (exact spectral
    shift of the frame) with ``f_inf``.
    """
    from .errors import HistoryMissing
    from .flow import integrate_characteristic
    from .vlasov import _Stepper, _eval_initial, _mu_on

    if traj.dim != 1:
        raise ValidationError("scattering profile implemented for 1x1v")
    if traj.f_plus is None:
        raise HistoryMissing("scattering profile needs stored phase-space frames")
    gx, gv, mu = traj.grid_x, traj.grid_v, traj.mu
    n_fit = n_fit or max(4, traj.times.size // 10)
    tail, lam = _field_tail(traj, tail_tol, n_fit)
    xi = np.arange(0, gx.n, x_stride)
    vi = np.arange(0, gv.n, v_stride)
    x, v = gx.axis[xi], gv.axis[vi]
    Xg = np.broadcast_to(x[:, None], (x.size, v.size))
    Vg = np.broadcast_to(v[None, :], Xg.shape)
    dt_char = dt_char or float(np.min(np.diff(traj.times))) if traj.times.size > 1 else 0.05
    zero_field = not np.any(traj.E)
    hist = None if zero_field else traj.field_history("spectral", 3)
    stepper = _Stepper(traj.initial if traj.initial is not None else traj.final(), traj.dt)

    def foot(sign, t):
        if zero_field or t == 0:
            return Xg[None].copy(), Vg[None].copy()
        cs = integrate_characteristic(hist, sign, t, (Xg + t * Vg), Vg, dt_char, 0.0, store=False)
        return cs.X0, cs.V0

    T = float(traj.times[-1])
    Y, W, finf = {}, {}, {}
    for s in (1, -1):
        X0, V0 = foot(s, T)
        Y[s] = X0 - Xg[None]
        W[s] = V0 - Vg[None]
    f_in_at = {}
    for s in (1, -1):
        if zero_field:
            # feet are the nodes themselves: the identity, with no re-interpolation
            f0 = (traj.f_plus if s == 1 else traj.f_minus)[0]
            finf[s] = f0[np.ix_(xi, vi)][None]
            f_in_at[s] = finf[s]
            continue
        fp, fm = _eval_initial(traj, Xg[None] + Y[s], Vg[None] + W[s])
        base = fp if s == 1 else fm
        finf[s] = base + _mu_on(mu, Vg[None] + W[s]) - _mu_on(mu, Vg[None])
        f_in_at[s] = base
    errs = np.zeros(traj.times.size)
    for j, t in enumerate(traj.times):
        e = 0.0
        for s, frames in ((1, traj.f_plus), (-1, traj.f_minus)):
            shifted = stepper.x_shift(frames[j], -t)  # f(t, x + t v, v)
            e = max(e, float(np.max(np.abs(shifted[np.ix_(xi, vi)] - finf[s]))))
        errs[j] = e
    rate = None
    if fit_window is not None:
        pos = errs > 0
        try:
            rate = decay_fit(traj.times[pos], errs[pos], fit_window, log_correction=True,
                             name="scattering_error")
        except (WindowTooShort, ValidationError):
            rate = None
    return ScatteringProfile((1, -1), Y, W, finf, np.asarray(traj.times), errs, tail, lam, xi, rate)
