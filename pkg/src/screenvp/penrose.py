"""Two-species dispersion function and the Penrose margin.

With the substitution ``w = u |xi|`` the transformed kernel becomes

    Q_hat(lam, xi) = 1/(1 + |xi|^2) * int_0^inf exp(-i (lam/|xi|) w) w mu_hat(w) dw,

so all oscillation sits in ``zeta = lam/|xi|``.  The integral is done with
Filon-Gauss panels: on each panel the smooth factor is expanded in Legendre
polynomials and integrated exactly against the oscillatory exponential, which
keeps the cost independent of ``Re zeta``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict

import numpy as np
from scipy import special

from .errors import NotConverged, QuadratureFailure, ValidationError
from .model import FOURIER_CONVENTION, VelocityProfile

STABLE = 1.0
FLIPPED = -1.0

_NODES = 16
_X, _W = np.polynomial.legendre.leggauss(_NODES)
# Legendre coefficients from nodal values: a_n = (2n+1)/2 sum_k w_k P_n(x_k) g_k
_P = np.stack([special.eval_legendre(n, _X) for n in range(_NODES)])
_A = (2 * np.arange(_NODES)[:, None] + 1) / 2 * _P * _W[None, :]


def time_kernel(u, xi_mag, mu: VelocityProfile, sign: float = STABLE):
    """K(u, xi) = sign * u |xi|^2 mu_hat(u |xi|) / (1 + |xi|^2)."""
    u = np.asarray(u, dtype=float)
    xi = np.abs(np.asarray(xi_mag, dtype=float))
    return sign * u * xi**2 * mu.fourier_radial(u * xi) / (1 + xi**2)


def _tail_cutoff(mu: VelocityProfile, tol: float = 1e-17, w_max: float = 2.0**12) -> float:
    w = 8.0
    while True:
        probe = np.linspace(w / 2, w, 33)
        if np.max(np.abs(probe * mu.fourier_radial(probe))) < tol:
            return w
        w *= 2
        if w > w_max:
            raise QuadratureFailure("mu_hat tail does not decay; dispersion integral not convergent")


def _filon_moments(omega_half_width):
    """J[..., n] = int_{-1}^{1} P_n(x) exp(-i a x) dx = 2 (-i)^n j_n(a)."""
    a = np.asarray(omega_half_width, dtype=float)[..., None]
    # spherical_jn returns nan for subnormal arguments; the exact values there are j_n(0)
    a = np.where(np.abs(a) < 1e-300, 0.0, a)
    n = np.arange(_NODES)
    return 2.0 * (-1j) ** n * special.spherical_jn(n, np.abs(a)) * np.where(a < 0, (-1.0) ** n, 1.0)


def oscillatory_transform(g, zeta, w_cut: float):
    """``int_0^w_cut exp(-i zeta w) g(w) dw`` for complex zeta with Im zeta <= 0.

    ``g`` is a vectorised callable.  Returns an array shaped like ``zeta``.
    """
    zeta = np.atleast_1d(np.asarray(zeta, dtype=complex))
    out = np.zeros(zeta.shape, dtype=complex)
    flat_z = zeta.ravel()
    flat_o = out.ravel()
    sigma = flat_z.imag
    if np.any(sigma > 1e-14):
        raise ValidationError("dispersion requires Im(lambda) <= 0")
    # bucket by decay scale so the damped samples get narrow panels
    scale = np.maximum(np.abs(sigma), 1e-300)
    bucket = np.where(np.abs(sigma) < 1.0, 0, np.ceil(np.log2(scale)).astype(int))
    for b in np.unique(bucket):
        sel = np.nonzero(bucket == b)[0]
        width = 0.5 if b == 0 else min(0.5, 2.0 ** (-b))
        reach = w_cut if b == 0 else min(w_cut, 45.0 * 2.0 ** (-b + 1))
        npan = max(1, int(math.ceil(reach / width)))
        edges = width * np.arange(npan + 1)
        centres = 0.5 * (edges[:-1] + edges[1:])
        nodes = centres[:, None] + 0.5 * width * _X[None, :]  # (P, 16)
        gv = g(nodes)
        om = flat_z.real[sel]
        sg = sigma[sel]
        for chunk in np.array_split(np.arange(sel.size), max(1, sel.size // 512)):
            damp = np.exp(sg[chunk, None, None] * nodes[None])  # (c, P, 16)
            coef = np.einsum("cpk,nk->cpn", damp * gv[None], _A)
            J = _filon_moments(om[chunk] * 0.5 * width)  # (c, 16)
            panel = np.einsum("cpn,cn->cp", coef, J)
            phase = np.exp(-1j * om[chunk, None] * centres[None, :])
            flat_o[sel[chunk]] = 0.5 * width * np.sum(panel * phase, axis=1)
    return out.reshape(zeta.shape)


def dispersion(lam, xi_mag, mu: VelocityProfile, sign: float = STABLE):
    """1 + 2 Q_hat(lam, xi); broadcasts over ``lam`` and ``xi_mag``."""
    lam = np.asarray(lam, dtype=complex)
    xi = np.abs(np.asarray(xi_mag, dtype=float))
    lam_b, xi_b = np.broadcast_arrays(lam, xi)
    if np.any(lam_b.imag > 1e-14):
        raise ValidationError("dispersion requires Im(lambda) <= 0")
    out = np.ones(lam_b.shape, dtype=complex)
    nz = xi_b > 0
    if np.any(nz):
        w_cut = _tail_cutoff(mu)
        g = lambda w: w * mu.fourier_radial(w)
        zeta = lam_b[nz] / xi_b[nz]
        vals = oscillatory_transform(g, zeta, w_cut)
        out[nz] = 1.0 + 2.0 * sign * vals / (1.0 + xi_b[nz] ** 2)
    if out.ndim == 0:
        return complex(out)
    return out


def kernel_abs_mass(xi_mag, mu: VelocityProfile) -> float:
    """int_0^inf |K(u, xi)| du = (1+|xi|^2)^{-1} int_0^inf w |mu_hat(w)| dw."""
    w_cut = _tail_cutoff(mu)
    x, wt = np.polynomial.legendre.leggauss(64)
    edges = np.linspace(0, w_cut, int(w_cut * 2) + 1)
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        w = 0.5 * (b - a) * x + 0.5 * (a + b)
        total += 0.5 * (b - a) * np.sum(wt * w * np.abs(mu.fourier_radial(w)))
    return total / (1.0 + float(xi_mag) ** 2)


# --------------------------------------------------------------------------


@dataclass
class PenroseReport:
    kappa_estimate: float
    argmin_lambda: complex
    argmin_xi: float
    converged: bool
    levels: list = field(default_factory=list)
    boundary_min: float = math.nan
    boundary_ratio: float = math.nan
    boundary_screen_ok: bool = False
    xi_max_tail_bound: float = math.nan
    sign: float = STABLE
    fourier_convention: str = FOURIER_CONVENTION
    include_real_axis: bool = True

    def as_dict(self):
        d = asdict(self)
        d["argmin_lambda"] = [self.argmin_lambda.real, self.argmin_lambda.imag]
        return d


def default_grids(xi_max: float = 4.0, re_max: float = 8.0, im_max: float = 4.0,
                  n_xi: int = 40, n_re: int = 161, n_im: int = 41, xi_min: float = 1e-2):
    xi = np.geomspace(xi_min, xi_max, n_xi)
    re = np.linspace(-re_max, re_max, n_re)
    im = np.linspace(-im_max, 0.0, n_im)
    lam = re[None, :] + 1j * im[:, None]
    return xi, lam


def dispersion_table(mu, xi_grid, lambda_grid, sign=STABLE):
    """|1 + 2 Q_hat| on the product grid: returns (lam_flat, xi, |D| shaped (n_xi, n_lam))."""
    lam = np.asarray(lambda_grid, dtype=complex).ravel()
    xi = np.asarray(xi_grid, dtype=float).ravel()
    vals = np.abs(dispersion(lam[None, :], xi[:, None], mu, sign))
    return lam, xi, vals


def penrose_margin(mu: VelocityProfile, xi_grid=None, lambda_grid=None, *, sign: float = STABLE,
                   rtol: float = 0.02, atol: float = 1e-4, max_levels: int = 12,
                   n_local: int = 21, raise_on_failure: bool = True) -> PenroseReport:
    """Grid infimum of |1 + 2 Q_hat| with local refinement around the minimiser."""
    if xi_grid is None or lambda_grid is None:
        dx, dl = default_grids()
        xi_grid = dx if xi_grid is None else xi_grid
        lambda_grid = dl if lambda_grid is None else lambda_grid
    xi = np.asarray(xi_grid, dtype=float).ravel()
    lam = np.asarray(lambda_grid, dtype=complex).ravel()
    if np.any(lam.imag > 0):
        raise ValidationError("lambda grid must lie in the closed lower half-plane")
    if np.any(xi < 0):
        raise ValidationError("xi grid must be non-negative")
    xi_max = float(xi.max())
    tail = kernel_abs_mass(xi_max, mu) if xi_max > 0 else math.inf
    if xi_max > 0 and not tail < 0.1:
        raise ValidationError(f"xi_max={xi_max:g} too small: bound on |Q_hat| beyond it is {tail:.3g} >= 0.1")

    lam_all, xi_all, table = dispersion_table(mu, xi, lam, sign)
    i, j = np.unravel_index(np.argmin(table), table.shape)
    kappa = float(table[i, j])
    lam_star, xi_star = complex(lam_all[j]), float(xi_all[i])

    re_lo, re_hi = lam.real.min(), lam.real.max()
    im_lo = lam.imag.min()
    on_edge = (np.isclose(lam.real, re_lo) | np.isclose(lam.real, re_hi)
               | (np.isclose(lam.imag, im_lo) & (im_lo < 0)))
    bmin = float(table[:, on_edge].min()) if np.any(on_edge) else math.nan
    levels = [dict(level=0, kappa=kappa, n_points=int(table.size), lam=[lam_star.real, lam_star.imag],
                   xi=xi_star)]

    if xi_max == 0:
        return PenroseReport(kappa, lam_star, xi_star, True, levels, bmin, bmin / kappa, True, tail, sign)

    def spacing(values):
        u = np.unique(values)
        return float(np.min(np.diff(u))) if u.size > 1 else 1.0

    d_re = spacing(lam.real)
    d_im = spacing(lam.imag) if np.unique(lam.imag).size > 1 else 0.0
    pos = xi[xi > 0]
    d_lx = spacing(np.log(pos)) if pos.size > 1 else 0.0
    converged = False
    prev = kappa
    for level in range(1, max_levels + 1):
        re = np.linspace(lam_star.real - d_re, lam_star.real + d_re, n_local)
        if d_im > 0:
            im = np.linspace(max(lam_star.imag - d_im, im_lo), min(lam_star.imag + d_im, 0.0), n_local)
        else:
            im = np.array([lam_star.imag])
        loc_lam = (re[None, :] + 1j * im[:, None]).ravel()
        if d_lx > 0:
            loc_xi = np.exp(np.linspace(math.log(xi_star) - d_lx, math.log(xi_star) + d_lx, n_local))
            loc_xi = loc_xi[(loc_xi >= pos.min() * (1 - 1e-12)) & (loc_xi <= xi_max * (1 + 1e-12))]
        else:
            loc_xi = np.array([xi_star])
        _, _, loc = dispersion_table(mu, loc_xi, loc_lam, sign)
        a, b = np.unravel_index(np.argmin(loc), loc.shape)
        if loc[a, b] < kappa:
            kappa = float(loc[a, b])
            lam_star, xi_star = complex(loc_lam[b]), float(loc_xi[a])
        levels.append(dict(level=level, kappa=kappa, n_points=int(loc.size),
                           lam=[lam_star.real, lam_star.imag], xi=xi_star))
        if abs(prev - kappa) <= max(rtol * prev, atol) and level >= 2:
            converged = True
            break
        prev = kappa
        d_re *= 0.5
        d_im *= 0.5
        d_lx *= 0.5
    if not converged and raise_on_failure:
        raise NotConverged(f"Penrose margin refinement stalled at kappa={kappa:.4g}")
    ratio = bmin / kappa if kappa > 0 else math.inf
    return PenroseReport(kappa, lam_star, xi_star, converged, levels, bmin, ratio,
                         bool(ratio >= 1.5), tail, sign)
