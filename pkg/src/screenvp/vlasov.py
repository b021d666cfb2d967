"""Nonlinear two-species solver on periodic phase-space grids (1x1v and 2x2v).

Unknowns are the perturbations ``f+-`` of ``F+- = mu + f+-``.  Each species is
transported by ``dX/dt = V, dV/dt = +-E`` with ``E = sign * grad (I-Lap)^{-1} rho``
and ``rho = int (f+ - f-) dv``; ``sign = -1`` is the stable (electrostatic)
convention.  Because ``mu`` is transported together with ``f``, the source
``-+E . grad mu`` is applied exactly as ``mu(v -+ E dt) - mu(v)``.

Time stepping is Strang splitting: half step in x, field at the half step,
full step in v, half step in x.  Shifts are Fourier translations by default
(exact for band-limited data, exactly mass conserving).  Free streaming
pushes the v-spectrum outward at speed |k_x|; content beyond the resolvable
band would alias back, so a smooth filamentation filter damps the top of the
v spectrum every step.  The ``'hybrid'`` option uses
cubic B-spline translations in v, and ``'cubic'`` uses splines in both
directions (1x1v only).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy import ndimage

from .besov import d_a_operator
from .errors import HistoryMissing, NotContracting, SupportViolation, TruncationBreach, ValidationError
from .field import Grid, screened_field
from .flow import FieldHistory, cumulative_tail
from .model import RunConfig, VelocityProfile, profile_from_tag
from .penrose import time_kernel


INTERPOLATIONS = ("hybrid", "spectral", "cubic")


def velocity_grid(v_max: float, nv: int, dim: int) -> Grid:
    """Velocity grid on ``[-v_max, v_max)^dim`` (periodic bookkeeping only)."""
    return Grid(2.0 * v_max, nv, dim)


def _mu_on(mu: VelocityProfile, V):
    # V shaped (dim, ...)
    return mu.phi(0.5 * np.sum(V * V, axis=0))


def _mu_grad_on(mu: VelocityProfile, V):
    return mu.dphi(0.5 * np.sum(V * V, axis=0))[None] * V


@dataclass
class PhaseField:
    f_plus: np.ndarray
    f_minus: np.ndarray
    grid_x: Grid
    grid_v: Grid
    mu: VelocityProfile
    t: float = 0.0
    initial_fn: object = None  # optional analytic (X, V) -> (f+, f-) used for exact re-evaluation
    report: dict = dc_field(default_factory=dict)

    @property
    def dim(self):
        return self.grid_x.dim

    def v_mesh(self):
        """Velocity coordinates shaped (dim, 1..., nv...) broadcastable against f."""
        d = self.dim
        axes = np.meshgrid(*([self.grid_v.axis] * d), indexing="ij")
        return np.stack([a.reshape((1,) * d + a.shape) for a in axes])

    def x_mesh(self):
        d = self.dim
        axes = np.meshgrid(*([self.grid_x.axis] * d), indexing="ij")
        return np.stack([a.reshape(a.shape + (1,) * d) for a in axes])

    def species_density(self, f):
        axes = tuple(range(self.dim, 2 * self.dim))
        return np.sum(f, axis=axes) * self.grid_v.cell_volume

    def density(self):
        return self.species_density(self.f_plus - self.f_minus)

    def masses(self):
        w = self.grid_x.cell_volume * self.grid_v.cell_volume
        return float(np.sum(self.f_plus) * w), float(np.sum(self.f_minus) * w)

    def copy(self):
        return PhaseField(self.f_plus.copy(), self.f_minus.copy(), self.grid_x, self.grid_v, self.mu,
                          self.t, self.initial_fn, dict(self.report))


# --------------------------------------------------------------------------
# initial data


@dataclass
class QuasiNeutralSpec:
    """``f+- = A g+-(x) mu(v) m(v)`` with ``g- = g+ + eps0 h``.

    ``envelope``: 'gaussian' (width ``width``, centred), 'mode' ((1 + cos)/2)
    or 'zero'.  ``perturbation`` picks h (unit sup norm): 'mode' is
    ``cos(k x_1)`` with ``k = 2 pi mode / L``; 'gaussian' is a centred bump of
    width ``perturbation_width``.  ``modulation`` is 'none' or 'hermite'
    (m = 1 + c (|v|^2 - d)/2 with c = ``mod_strength``).
    """

    amplitude: float = 1.0
    eps0: float = 1e-3
    envelope: str = "gaussian"
    width: float = 1.0
    mode: int = 1
    perturbation: str = "mode"
    perturbation_width: float = 2.0
    modulation: str = "none"
    mod_strength: float = 0.0
    support_tol: float = 1e-10
    support_margin: float = 0.0


def _qn_functions(spec: QuasiNeutralSpec, mu: VelocityProfile, grid_x: Grid):
    L, d = grid_x.L, grid_x.dim
    kx = 2 * math.pi * spec.mode / L

    def g_plus(X):
        if spec.envelope == "gaussian":
            return np.exp(-0.5 * np.sum(X * X, axis=0) / spec.width**2)
        if spec.envelope == "mode":
            return 0.5 * (1 + np.cos(kx * X[0]))
        if spec.envelope == "zero":
            return np.zeros(X.shape[1:])
        raise ValidationError(f"unknown envelope {spec.envelope!r}")

    def h(X):
        if spec.perturbation == "mode":
            return np.cos(kx * X[0])
        if spec.perturbation == "gaussian":
            return np.exp(-0.5 * np.sum(X * X, axis=0) / spec.perturbation_width**2)
        raise ValidationError(f"unknown perturbation {spec.perturbation!r}")

    def m(V):
        if spec.modulation == "none":
            return np.ones(V.shape[1:])
        if spec.modulation == "hermite":
            return 1 + spec.mod_strength * 0.5 * (np.sum(V * V, axis=0) - d)
        raise ValidationError(f"unknown modulation {spec.modulation!r}")

    def fn(X, V):
        base = spec.amplitude * _mu_on(mu, V) * m(V)
        gp = g_plus(X)
        return base * gp, base * (gp + spec.eps0 * h(X))

    return fn, g_plus, h


def init_quasi_neutral(spec: QuasiNeutralSpec, mu: VelocityProfile, grid_x: Grid, grid_v: Grid,
                       k_weight: float = 4.0, a: float = 0.5) -> PhaseField:
    """Large quasi-neutral data with a measured report of the initial-data norms."""
    if grid_x.dim != grid_v.dim or grid_x.dim not in (1, 2):
        raise ValidationError("phase grids must both be 1-d or both 2-d")
    fn, g_plus, h = _qn_functions(spec, mu, grid_x)
    pf = PhaseField(np.zeros(grid_x.shape + grid_v.shape), np.zeros(grid_x.shape + grid_v.shape),
                    grid_x, grid_v, mu, 0.0, fn)
    X, V = pf.x_mesh(), pf.v_mesh()
    if spec.envelope == "gaussian" and spec.amplitude > 0:
        ax = grid_x.axis
        edge = np.abs(ax) >= 0.5 * grid_x.L - max(spec.support_margin, grid_x.h)
        prof = np.exp(-0.5 * ax**2 / spec.width**2)
        if np.max(prof[edge]) > spec.support_tol:
            raise SupportViolation("initial envelope reaches the x truncation margin "
                                   f"(edge value {np.max(prof[edge]):.3g} > {spec.support_tol:g})")
    fp, fm = fn(X, V)
    pf.f_plus = np.broadcast_to(fp, pf.f_plus.shape).copy()
    pf.f_minus = np.broadcast_to(fm, pf.f_minus.shape).copy()
    if np.min(_mu_on(mu, V) + np.minimum(pf.f_plus, pf.f_minus)) < -1e-12:
        raise ValidationError("initial data violates positivity of mu + f")
    pf.report = initial_data_norms(pf, k_weight, a)
    return pf


def _spectral_derivatives(f, grid_x: Grid, grid_v: Grid, order: int):
    """All partial derivatives of total order ``order`` in (x, v), spectrally."""
    d = grid_x.dim
    ks = []
    for i, kk in enumerate(grid_x.wavenumbers() + grid_v.wavenumbers()):
        k = kk.ravel()
        shape = [1] * (2 * d)
        shape[i] = k.size
        n = k.size
        k = np.where(np.abs(k) >= math.pi * n / (grid_x.L if i < d else grid_v.L) - 1e-12, 0.0, k)
        ks.append(k.reshape(shape))
    fh = np.fft.fftn(f)
    out = []
    import itertools
    for combo in itertools.combinations_with_replacement(range(2 * d), order):
        mult = 1.0
        for i in combo:
            mult = mult * (1j * ks[i])
        out.append(np.fft.ifftn(mult * fh).real)
    return out


def initial_data_norms(pf: PhaseField, k_weight: float = 4.0, a: float = 0.5) -> dict:
    """Grid proxies of the large-data and quasi-neutrality norms of the initial data."""
    d = pf.dim
    gx, gv = pf.grid_x, pf.grid_v
    dx, dvv = gx.cell_volume, gv.cell_volume
    V = pf.v_mesh()
    wv = (1 + np.sum(V * V, axis=0)) ** (k_weight / 2)
    xa = tuple(range(d))
    va = tuple(range(d, 2 * d))

    def l1(u):
        return float(np.sum(np.abs(u)) * dx * dvv)

    def lx1_lvinf(u):
        return float(np.sum(np.max(np.abs(u), axis=va)) * dx)

    def lv1_lxinf(u):
        return float(np.sum(np.max(np.abs(u), axis=xa)) * dvv)

    def triple1(f):
        d1 = _spectral_derivatives(f, gx, gv, 1)
        d2 = _spectral_derivatives(f, gx, gv, 2)
        grad_abs = np.sqrt(sum(g * g for g in d1))
        hess_abs = np.sqrt(sum(g * g for g in d2))
        w21 = max(float(np.max(np.abs(wv * f))), float(np.max(wv * grad_abs)), float(np.max(wv * hess_abs)))
        da = d_a_operator(f, a, gx, gv)[0] if d == 1 else np.zeros_like(f)
        grad_da = np.sqrt(sum(g * g for g in _spectral_derivatives(da, gx, gv, 1)))
        return (l1(f) + sum(l1(g) for g in d1) + w21 + lx1_lvinf(wv * grad_abs)
                + lx1_lvinf(wv * grad_da) + lx1_lvinf(wv * hess_abs))

    def triple2(f):
        d1 = _spectral_derivatives(f, gx, gv, 1)
        grad_abs = np.sqrt(sum(g * g for g in d1))
        da = d_a_operator(f, a, gx, gv)[0] if d == 1 else np.zeros_like(f)
        return (l1(f) + sum(l1(g) for g in d1) + max(lv1_lxinf(f), lx1_lvinf(f))
                + max(lv1_lxinf(grad_abs), lx1_lvinf(grad_abs)) + max(l1(da), lx1_lvinf(da)))

    diff = pf.f_plus - pf.f_minus
    return {
        "triple1_plus": triple1(pf.f_plus),
        "triple1_minus": triple1(pf.f_minus),
        "triple2_difference": triple2(diff),
        "rho_linf": float(np.max(np.abs(pf.density()))),
        "D_a_note": "D^a terms computed for 1x1v only" if d == 2 else "",
    }


# --------------------------------------------------------------------------
# time stepping


@dataclass
class Trajectory:
    times: np.ndarray
    rho: np.ndarray  # (n_frames, *x_shape)
    E: np.ndarray  # (n_frames, dim, *x_shape)
    grid_x: Grid
    grid_v: Grid
    mu: VelocityProfile
    sign: float
    dt: float
    masses: np.ndarray  # (n_frames, 2)
    f_plus: np.ndarray = None  # (n_frames, ...) when stored
    f_minus: np.ndarray = None
    initial: PhaseField = None
    coupling: bool = True
    notes: list = dc_field(default_factory=list)
    half_rho: np.ndarray = None  # density at every half step (Picard bookkeeping)

    @property
    def stopped(self):
        return any(s.startswith("stopped:") for s in self.notes)

    @property
    def dim(self):
        return self.grid_x.dim

    def field_history(self, space: str = "spline", time_order: int = 1) -> FieldHistory:
        return FieldHistory(self.times, self.E, self.grid_x, space, time_order)

    def mass_drift_rate(self):
        span = self.times[-1] - self.times[0]
        if span <= 0:
            return 0.0
        return float(np.max(np.abs(self.masses - self.masses[0])) / span)

    def final(self) -> PhaseField:
        if self.f_plus is None:
            raise HistoryMissing("phase-space frames were not stored")
        return PhaseField(self.f_plus[-1], self.f_minus[-1], self.grid_x, self.grid_v, self.mu,
                          float(self.times[-1]))


_PAD = 8  # zero cells appended on each side of every v axis before spline prefiltering


def _bspline_weights(t):
    """Cubic B-spline weights for nodes i0-1 .. i0+2 at fractional offset t in [0, 1]."""
    t2, t3 = t * t, t * t * t
    return ((1 - t) ** 3 / 6, (3 * t3 - 6 * t2 + 4) / 6, (-3 * t3 + 3 * t2 + 3 * t + 1) / 6, t3 / 6)


def spline_translate(f, cells, axis: int):
    """f(j - cells) along ``axis`` by cubic B-spline interpolation, zero outside the grid.

    ``cells`` broadcasts against ``f`` and must be constant along ``axis``.
    The error of an unresolved feature stays local (spline weights decay
    geometrically), unlike a Fourier translation.
    """
    n = f.shape[axis]
    pad = [(0, 0)] * f.ndim
    pad[axis] = (_PAD, _PAD)
    c = ndimage.spline_filter1d(np.pad(f, pad), order=3, axis=axis, mode="mirror")
    cells = np.asarray(cells, dtype=float)
    m = np.floor(cells)
    t = 1.0 - (cells - m)
    shape = [1] * f.ndim
    shape[axis] = n
    j = np.arange(n).reshape(shape) + _PAD
    base = (j - m - 1).astype(int)
    out = np.zeros(np.broadcast_shapes(f.shape, cells.shape))
    for q, w in zip(range(-1, 3), _bspline_weights(t)):
        idx = np.clip(base + q, 0, n + 2 * _PAD - 1)
        idx = np.broadcast_to(idx, out.shape)
        out += w * np.take_along_axis(c, idx, axis=axis)
    return out


class _Stepper:
    """Split-step operators.  ``interpolation``:

    * ``'hybrid'``: exact Fourier shifts in x, cubic B-spline shifts in v;
    * ``'spectral'``: Fourier shifts in both (exact for band-limited data);
    * ``'cubic'``: cubic splines in both (1x1v only).
    """

    def __init__(self, pf: PhaseField, dt: float, interpolation: str = "spectral",
                 filter_order: int = 36):
        self.gx, self.gv, self.mu, self.dt = pf.grid_x, pf.grid_v, pf.mu, dt
        d = self.d = pf.dim
        if interpolation not in INTERPOLATIONS:
            raise ValidationError(f"interpolation must be one of {INTERPOLATIONS}")
        if interpolation == "cubic" and d != 1:
            raise ValidationError("cubic interpolation is implemented for 1x1v only")
        self.interp = interpolation
        self.V = pf.v_mesh()
        self.kx = [k.reshape(k.shape + (1,) * d) for k in self.gx.wavenumbers()]
        self.kx = [np.where(np.abs(k) >= math.pi / self.gx.h - 1e-12, 0.0, k) for k in self.kx]
        kv = []
        for k in self.gv.wavenumbers():
            k = np.where(np.abs(k) >= math.pi / self.gv.h - 1e-12, 0.0, k)
            kv.append(k.reshape((1,) * d + k.shape))
        self.kv = kv
        self.mu_v = _mu_on(self.mu, self.V)
        # filamentation filtration exp(-36 (|eta|/eta_N)^p): smooth, so its kernel
        # in v is short; content near Nyquist only streams outward under transport
        self.v_filter = None
        if filter_order:
            if int(filter_order) != filter_order or filter_order < 2 or filter_order % 2:
                raise ValidationError("filter_order must be an even integer >= 2")
            eta_n = math.pi / self.gv.h
            r2 = sum((k / eta_n) ** 2 for k in kv)
            self.v_filter = np.exp(-36.0 * r2 ** (filter_order // 2))

    def x_shift(self, f, tau):
        """f(x - v tau, v)."""
        d = self.d
        if self.interp == "cubic":
            xs = (self.gx.axis[:, None] - self.gv.axis[None, :] * tau + 0.5 * self.gx.L) / self.gx.h
            vs = np.broadcast_to(np.arange(self.gv.n)[None, :], xs.shape).astype(float)
            return ndimage.map_coordinates(f, [xs, vs], order=3, mode="grid-wrap")
        axes = tuple(range(d))
        phase = sum(k * self.V[i] for i, k in enumerate(self.kx))
        return np.fft.ifftn(np.fft.fftn(f, axes=axes) * np.exp(-1j * tau * phase), axes=axes).real

    def v_shift(self, f, shift):
        """f(x, v - shift(x)); ``shift`` shaped (dim, *x_shape)."""
        d = self.d
        sh = [s.reshape(s.shape + (1,) * d) for s in shift]
        axes = tuple(range(d, 2 * d))
        if self.interp == "spectral":
            phase = sum(k * sh[i] for i, k in enumerate(self.kv))
            mult = np.exp(-1j * phase)
            if self.v_filter is not None:
                mult = mult * self.v_filter
            return np.fft.ifftn(np.fft.fftn(f, axes=axes) * mult, axes=axes).real
        # translations along different v axes commute
        for i in range(d):
            f = spline_translate(f, sh[i] / self.gv.h, d + i)
        return self.filter(f)

    def filter(self, f):
        if self.v_filter is None:
            return f
        axes = tuple(range(self.d, 2 * self.d))
        return np.fft.ifftn(np.fft.fftn(f, axes=axes) * self.v_filter, axes=axes).real

    def mu_increment(self, shift):
        sh = np.stack([s.reshape(s.shape + (1,) * self.d) for s in shift])
        return _mu_on(self.mu, self.V - sh) - self.mu_v

    def density(self, fp, fm):
        axes = tuple(range(self.d, 2 * self.d))
        return np.sum(fp - fm, axis=axes) * self.gv.cell_volume

    def step(self, fp, fm, field_at_half):
        """One Strang step; ``field_at_half(rho_half) -> E`` returns (E, rho_half)."""
        dt = self.dt
        fp = self.x_shift(fp, 0.5 * dt)
        fm = self.x_shift(fm, 0.5 * dt)
        rho_h = self.density(fp, fm)
        E = field_at_half(rho_h)
        if np.any(E != 0):
            fp = self.v_shift(fp, E * dt) + self.mu_increment(E * dt)
            fm = self.v_shift(fm, -E * dt) + self.mu_increment(-E * dt)
        else:
            fp, fm = self.filter(fp), self.filter(fm)
        fp = self.x_shift(fp, 0.5 * dt)
        fm = self.x_shift(fm, 0.5 * dt)
        return fp, fm, rho_h, E


def _boundary_fraction(f, gx: Grid, gv: Grid, layer: int, check_x: bool, total: float):
    """Share of ``total`` (species mass in grid units) carried by |f| in the edge layers."""
    d = gx.dim
    if total <= 0:
        return 0.0
    mask_v = np.zeros(gv.shape, dtype=bool)
    sl = [slice(None)] * d
    for i in range(d):
        lo = list(sl)
        lo[i] = slice(0, layer)
        hi = list(sl)
        hi[i] = slice(gv.n - layer, None)
        mask_v[tuple(lo)] = True
        mask_v[tuple(hi)] = True
    mask = np.broadcast_to(mask_v.reshape((1,) * d + gv.shape), f.shape)
    if check_x:
        mask_x = np.zeros(gx.shape, dtype=bool)
        for i in range(d):
            lo = list(sl)
            lo[i] = slice(0, layer)
            hi = list(sl)
            hi[i] = slice(gx.n - layer, None)
            mask_x[tuple(lo)] = True
            mask_x[tuple(hi)] = True
        mask = mask | np.broadcast_to(mask_x.reshape(gx.shape + (1,) * d), f.shape)
    return float(np.sum(np.abs(f[mask])) / total)


def semi_lagrangian_run(f_in: PhaseField, dt: float, t_end: float, *, sign: float = -1.0,
                        coupling: bool = True, output_every: int = 1, store_f: bool = False,
                        interpolation: str = "spectral", boundary: str = "periodic",
                        breach_tol: float = 1e-10, layer: int = 4, store_half: bool = False,
                        frozen_field=None, filter_order: int = 36, on_breach: str = "raise") -> Trajectory:
    """Strang-split transport of both species with the self-consistent field.

    ``frozen_field`` (array ``(n_steps, dim, *x_shape)``) replaces the field at
    the half steps; used by the Picard iteration.  ``filter_order`` is the power
    of the filamentation filter on the v spectrum (0 disables it).  With
    ``on_breach='stop'`` a truncation breach ends the run early (recorded in
    ``notes``, with ``stopped`` set) instead of raising.
    """
    if on_breach not in ("raise", "stop"):
        raise ValidationError("on_breach must be 'raise' or 'stop'")
    if not dt > 0 or not t_end >= 0:
        raise ValidationError("dt must be positive and t_end non-negative")
    n = int(round(t_end / dt))
    if abs(n * dt - t_end) > 1e-9 * max(1.0, t_end):
        raise ValidationError("t_end must be an integer multiple of dt")
    gx, gv = f_in.grid_x, f_in.grid_v
    st = _Stepper(f_in, dt, interpolation, filter_order)
    notes = []
    if gv.L / 2 * dt > gx.h:
        notes.append("v_max*dt exceeds one x cell (spectral shifts stay exact; cubic loses accuracy)")
    fp, fm = f_in.f_plus.copy(), f_in.f_minus.copy()

    def full_field(rho):
        if not coupling:
            return np.zeros((gx.dim,) + gx.shape)
        return screened_field(rho, gx, sign).E

    times, rhos, Es, masses, fps, fms, halves = [], [], [], [], [], [], []
    # species mass is that of the full distribution mu + f (grid units)
    mu_mass = float(np.sum(st.mu_v)) * int(np.prod(gx.shape))
    w = gx.cell_volume * gv.cell_volume

    def record(t, fp_, fm_):
        rho = st.density(fp_, fm_)
        times.append(t)
        rhos.append(rho)
        Es.append(full_field(rho))
        masses.append((np.sum(fp_) * w, np.sum(fm_) * w))
        if store_f:
            fps.append(fp_.copy())
            fms.append(fm_.copy())
        for f in (fp_, fm_):
            frac = _boundary_fraction(f, gx, gv, layer, boundary == "whole_space",
                                      float(np.sum(f)) + mu_mass)
            if frac > breach_tol:
                return f"{frac:.3g} of species mass sits in the boundary layer at t={t:g}"
        return None

    def breach(msg):
        if on_breach == "raise":
            raise TruncationBreach(msg)
        notes.append("stopped: " + msg)

    msg = record(f_in.t, fp, fm)
    if msg:
        breach(msg)
        n = 0
    for k in range(n):
        if frozen_field is not None:
            Ek = frozen_field[k]
            fp, fm, rho_h, E = st.step(fp, fm, lambda rho, Ek=Ek: Ek)
        else:
            fp, fm, rho_h, E = st.step(fp, fm, full_field)
        if not np.all(np.isfinite(fp)) or not np.all(np.isfinite(fm)):
            breach(f"non-finite distribution at step {k + 1}")
            break
        if store_half:
            halves.append(rho_h)
        if dt * float(np.max(np.abs(E))) > gv.h and not any("|E|*dt" in s for s in notes):
            notes.append("|E|*dt exceeds one v cell")
        if (k + 1) % output_every == 0 or k == n - 1:
            msg = record(f_in.t + (k + 1) * dt, fp, fm)
            if msg:
                breach(msg)
                break
    return Trajectory(np.array(times), np.array(rhos), np.array(Es), gx, gv, f_in.mu, sign, dt,
                      np.array(masses), np.array(fps) if store_f else None,
                      np.array(fms) if store_f else None, f_in, coupling, notes,
                      np.array(halves) if store_half else None)


def run_from_config(cfg: RunConfig, spec: QuasiNeutralSpec = None, store_f: bool = False) -> Trajectory:
    """Build quasi-neutral data from a RunConfig and run the nonlinear solver."""
    cfg.validate()
    if cfg.d not in (1, 2):
        raise ValidationError("the nonlinear solver supports d in {1, 2} (1x1v, 2x2v)")
    mu = profile_from_tag(cfg.profile, cfg.d)
    gx = Grid(cfg.box_length, cfg.nx, cfg.d)
    gv = velocity_grid(cfg.v_max, cfg.nv, cfg.d)
    spec = spec or QuasiNeutralSpec(amplitude=cfg.amplitude, eps0=cfg.eps0, width=cfg.envelope_width,
                                    mode=cfg.mode, support_margin=cfg.support_margin)
    pf = init_quasi_neutral(spec, mu, gx, gv, cfg.k, cfg.a)
    return semi_lagrangian_run(pf, cfg.dt, cfg.t_end, sign=cfg.field_sign, coupling=cfg.coupling,
                               output_every=cfg.output_every, store_f=store_f,
                               interpolation=cfg.interpolation, boundary=cfg.boundary)


# --------------------------------------------------------------------------
# Picard iteration


@dataclass
class PicardResult:
    trajectory: Trajectory
    gaps: list
    factors: list
    converged: bool
    t1: float


def picard_cap(M0: float, C: float = 1.0, C0: float = 1.0) -> float:
    """Time scale t1 <= 1 / (24 C C0 (M0 + 1)) with unit constants by default."""
    return 1.0 / (24.0 * C * C0 * (M0 + 1.0))


def picard_local_solve(f_in: PhaseField, t1: float, dt: float, n_max: int = 40, *, sign: float = -1.0,
                       tol: float = 1e-9, M0: float = None, interpolation: str = "spectral") -> PicardResult:
    """Frozen-field iteration: E_n from rho_n drives f_{n+1}; starts from f_0 = f_in.

    If ``M0`` is given, ``t1`` is capped at :func:`picard_cap` ``(M0)``.
    """
    if M0 is not None:
        cap = picard_cap(M0)
        if t1 > cap:
            t1 = dt * max(1, math.floor(cap / dt))
    n = int(round(t1 / dt))
    if n < 1 or abs(n * dt - t1) > 1e-9:
        raise ValidationError("t1 must be a positive multiple of dt")
    gx = f_in.grid_x
    rho0 = f_in.density()
    rho_half = np.broadcast_to(rho0, (n,) + rho0.shape).copy()
    gaps, factors = [], []
    traj = None
    converged = False
    for it in range(n_max):
        E_half = np.stack([screened_field(r, gx, sign).E for r in rho_half])
        traj = semi_lagrangian_run(f_in, dt, n * dt, sign=sign, store_half=True, frozen_field=E_half,
                                   interpolation=interpolation)
        new = traj.half_rho
        gap = float(np.max(np.abs(new - rho_half)))
        gaps.append(gap)
        if len(gaps) >= 2 and gaps[-2] > 0:
            factors.append(gap / gaps[-2])
        rho_half = new
        if gap < tol:
            converged = True
            break
        if len(gaps) > 10 and gaps[-1] > gaps[-11] / 3:
            raise NotContracting(f"Picard density gap {gaps[-1]:.3g} did not fall 3x over 10 iterations; "
                                 "t1 too large")
    return PicardResult(traj, gaps, factors, converged, n * dt)


# --------------------------------------------------------------------------
# density decomposition


@dataclass
class Decomposition:
    t: float
    I_diff: np.ndarray
    Q: np.ndarray
    R_plus: np.ndarray
    R_minus: np.ndarray
    rho: np.ndarray
    residual: float

    @property
    def R_sum(self):
        return self.R_plus + self.R_minus


def _eval_initial(traj: Trajectory, X, V):
    """f_in at off-grid points: analytic when available, else trigonometric interpolation."""
    init = traj.initial
    if init is None:
        raise HistoryMissing("trajectory carries no initial data")
    if init.initial_fn is not None:
        return init.initial_fn(X, V)
    out = []
    for f in (init.f_plus, init.f_minus):
        out.append(_trig_interp(f, traj.grid_x, traj.grid_v, X, V))
    return tuple(out)


def _trig_interp(f, gx: Grid, gv: Grid, X, V):
    if gx.dim != 1:
        raise ValidationError("trigonometric re-interpolation implemented for 1x1v")
    fh = np.fft.fft2(f) / f.size
    kx = 2 * math.pi * np.fft.fftfreq(gx.n, gx.h)
    kv = 2 * math.pi * np.fft.fftfreq(gv.n, gv.h)
    xs = (X[0] + 0.5 * gx.L).ravel()
    vs = (V[0] + 0.5 * gv.L).ravel()
    ex = np.exp(1j * np.outer(xs, kx))
    ev = np.exp(1j * np.outer(vs, kv))
    vals = np.einsum("pi,ij,pj->p", ex, fh, ev).real
    return vals.reshape(X.shape[1:])


def density_decomposition(traj: Trajectory, t: float = None, dt_char: float = None,
                          x_index=None) -> Decomposition:
    """rho = (I+ - I-) - 2 Q - (R+ + R-) at time ``t`` (1x1v) from the stored history.

    Characteristics are integrated with RK4 through the stored field frames;
    ``Q`` uses the time kernel against the stored density frames.
    """
    if traj.dim != 1:
        raise ValidationError("density decomposition implemented for 1x1v")
    if traj.times.size < 2:
        raise HistoryMissing("need a stored field history")
    t = float(traj.times[-1]) if t is None else float(t)
    j = int(np.argmin(np.abs(traj.times - t)))
    if abs(traj.times[j] - t) > 1e-9:
        raise HistoryMissing(f"no stored frame at t={t:g}")
    if traj.times[0] != 0.0:
        raise HistoryMissing("history must start at t=0")
    gx, gv, mu = traj.grid_x, traj.grid_v, traj.mu
    hist = traj.field_history("spectral", 3)
    dt_char = dt_char or float(np.min(np.diff(traj.times)))
    xs = gx.axis if x_index is None else gx.axis[np.asarray(x_index)]
    v = gv.axis
    Xb = np.broadcast_to(xs[:, None], (xs.size, v.size))
    Vb = np.broadcast_to(v[None, :], Xb.shape)
    n = max(4, int(math.ceil(t / dt_char - 1e-9))) if t > 0 else 0
    h = t / n if n else 0.0
    svals = t - h * np.arange(n + 1)
    dmu_free = _mu_grad_on(mu, Vb[None])[0]

    def path(sign):
        X, V = Xb[None].copy(), Vb[None].copy()
        integrand = np.zeros((n + 1,) + Xb.shape)
        for k in range(n + 1):
            s = svals[k]
            Efree = hist(s, (Xb - (t - s) * Vb)[None])[0]
            Ek = hist(s, X)[0]
            integrand[k] = Ek * _mu_grad_on(mu, V)[0] - Efree * dmu_free
            if k == n:
                break
            # RK4 step backwards in s
            k1x, k1v = V, sign * hist(s, X)
            k2x, k2v = V - 0.5 * h * k1v, sign * hist(s - 0.5 * h, X - 0.5 * h * k1x)
            k3x, k3v = V - 0.5 * h * k2v, sign * hist(s - 0.5 * h, X - 0.5 * h * k2x)
            k4x, k4v = V - h * k3v, sign * hist(s - h, X - h * k3x)
            X = X - h / 6 * (k1x + 2 * k2x + 2 * k3x + k4x)
            V = V - h / 6 * (k1v + 2 * k2v + 2 * k3v + k4v)
        # integral over s in [0, t] (svals decreasing: integrate reversed array)
        if n:
            R = cumulative_tail(integrand[::-1], h)[0]
        else:
            R = np.zeros(Xb.shape)
        return X, V, np.sum(R, axis=-1) * gv.h

    Xp, Vp, Rp = path(+1)
    Xm, Vm, Rm = path(-1)
    fpi, _ = _eval_initial(traj, Xp, Vp)
    _, fmi = _eval_initial(traj, Xm, Vm)
    I_diff = np.sum(fpi - fmi, axis=-1) * gv.h

    # Q = K * rho in time, per Fourier mode, on the stored frames up to t
    Q = _memory_term(traj, j)
    if x_index is not None:
        Q = Q[np.asarray(x_index)]
    rho = traj.rho[j] if x_index is None else traj.rho[j][np.asarray(x_index)]
    recon = I_diff - 2 * Q - (Rp + Rm)
    scale = float(np.max(np.abs(rho))) or 1.0
    return Decomposition(t, I_diff, Q, Rp, Rm, rho, float(np.max(np.abs(recon - rho)) / scale))


def _memory_term(traj: Trajectory, j: int):
    gx = traj.grid_x
    times = traj.times[: j + 1]
    # the memory term is the field's linear response: no field, no memory
    if j == 0 or not traj.coupling:
        return np.zeros(gx.shape)
    dts = np.diff(times)
    if np.max(np.abs(dts - dts[0])) > 1e-9:
        raise ValidationError("memory term needs uniformly spaced frames")
    h = dts[0]
    k = np.abs(gx.wavenumbers()[0])
    rho_hat = np.fft.fft(traj.rho[: j + 1], axis=-1)  # (j+1, nx)
    lag = times[-1] - times  # t - s
    # the stable kernel corresponds to the electrostatic sign; flip with the field sign
    K = time_kernel(lag[:, None], k[None, :], traj.mu) * (-traj.sign)
    integrand = K * rho_hat
    total = cumulative_tail(integrand, h)[0]
    return np.fft.ifft(total).real


# --------------------------------------------------------------------------
# weighted norms


def weighted_norm_monitor(traj: Trajectory, k_weight: float = 4.0):
    """Per frame and species: ||<v>^k f||_inf + ||<v>^k grad f||_inf + ||<v>^k grad^2 f||_inf."""
    if traj.f_plus is None:
        raise HistoryMissing("weighted norms need stored phase-space frames")
    pf0 = traj.initial if traj.initial is not None else PhaseField(
        traj.f_plus[0], traj.f_minus[0], traj.grid_x, traj.grid_v, traj.mu)
    V = pf0.v_mesh()
    wv = (1 + np.sum(V * V, axis=0)) ** (k_weight / 2)
    out = np.zeros((traj.times.size, 2))
    parts = np.zeros((traj.times.size, 2, 3))
    for i in range(traj.times.size):
        for s, f in enumerate((traj.f_plus[i], traj.f_minus[i])):
            d1 = _spectral_derivatives(f, traj.grid_x, traj.grid_v, 1)
            d2 = _spectral_derivatives(f, traj.grid_x, traj.grid_v, 2)
            a0 = float(np.max(np.abs(wv * f)))
            a1 = float(np.max(wv * np.sqrt(sum(g * g for g in d1))))
            a2 = float(np.max(wv * np.sqrt(sum(g * g for g in d2))))
            parts[i, s] = (a0, a1, a2)
            out[i, s] = a0 + a1 + a2
    return out, parts
