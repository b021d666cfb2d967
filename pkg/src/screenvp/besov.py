"""Littlewood-Paley blocks and the homogeneous seminorms on periodic grids.

Blocks use the multiplier ``psi(s) = phi(s) - phi(2 s)``, where ``phi`` is a
smooth radial cut-off equal to 1 on ``|s| <= 1`` and 0 on ``|s| >= 2``; hence
``psi`` lives on the annulus ``1/2 < |s| < 2`` and the dyadic sum telescopes.
On a box of side L only ``j`` between ``floor(log2(2 pi/L))`` and
``ceil(log2(k_nyquist))`` carry energy; that truncated range is reported with
every seminorm.  The mean mode is excluded (it sits at ``j = -inf``).

Difference quotients use periodic shifts by whole cells: every magnitude up to
32 cells, then ``round(2^(q/4))`` cells (quarter-octave spacing) up to L/4,
along the axes and, in 2-d, the diagonals, with both orientations.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict

import numpy as np

from .errors import ValidationError
from .field import Grid, spectral_gradient


def _smooth_step(x):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    pos = x > 0
    out[pos] = np.exp(-1.0 / x[pos])
    return out


def lp_cutoff(s):
    """Smooth phi(|s|): 1 for |s| <= 1, 0 for |s| >= 2."""
    s = np.abs(np.asarray(s, dtype=float))
    a = _smooth_step(2.0 - s)
    b = _smooth_step(s - 1.0)
    return a / (a + b)


def lp_multiplier(s):
    """Annular multiplier psi(s) = phi(s) - phi(2 s), supported in 1/2 < |s| < 2."""
    return lp_cutoff(s) - lp_cutoff(2.0 * np.asarray(s, dtype=float))


def _kmag(grid: Grid):
    ks = grid.wavenumbers()
    return np.sqrt(sum(k * k for k in ks))


def j_range(grid: Grid):
    """(j_min, j_max) of blocks that can be non-zero on the grid."""
    k_min = 2 * math.pi / grid.L
    k_max = math.pi / grid.h * math.sqrt(grid.dim)
    return int(math.floor(math.log2(k_min))), int(math.ceil(math.log2(k_max)))


@dataclass
class DyadicDecomposition:
    j_min: int
    j_max: int
    blocks: np.ndarray  # (n_blocks, *grid.shape)
    grid: Grid
    profile: str = "psi(s)=phi(s)-phi(2s), phi smooth, 1 on |s|<=1, 0 on |s|>=2"

    @property
    def js(self):
        return np.arange(self.j_min, self.j_max + 1)

    def reconstruct(self):
        return self.blocks.sum(axis=0)

    @classmethod
    def of(cls, phi, grid: Grid):
        phi = np.asarray(phi, dtype=float)
        if phi.shape != grid.shape:
            raise ValidationError(f"field shape {phi.shape} does not match grid {grid.shape}")
        lo, hi = j_range(grid)
        ph = np.fft.fftn(phi)
        km = _kmag(grid)
        blocks = np.stack([np.fft.ifftn(lp_multiplier(km / 2.0**j) * ph).real
                           for j in range(lo, hi + 1)])
        return cls(lo, hi, blocks, grid)


def lp_norm(u, grid: Grid, p):
    u = np.asarray(u)
    axes = tuple(range(u.ndim - grid.dim, u.ndim))
    if p == math.inf:
        return np.max(np.abs(u), axis=axes)
    if p == 1:
        return np.sum(np.abs(u), axis=axes) * grid.cell_volume
    raise ValidationError("only p in {1, inf} are supported")


def _check(a, p):
    if not 0 < a < 1:
        raise ValidationError(f"Besov index a={a} must lie in (0, 1)")
    if p not in (1, math.inf):
        raise ValidationError("only p in {1, inf} are supported")


def besov_block(phi, a: float, p, grid: Grid, decomposition: DyadicDecomposition = None) -> float:
    """sup_j 2^{ja} ||Delta_j phi||_{L^p} over the resolvable j range."""
    _check(a, p)
    dec = decomposition or DyadicDecomposition.of(phi, grid)
    vals = 2.0 ** (dec.js * a) * lp_norm(dec.blocks, grid, p)
    return float(np.max(vals))


def triebel(phi, a: float, p, grid: Grid, decomposition: DyadicDecomposition = None) -> float:
    """|| sup_j 2^{ja} |Delta_j phi| ||_{L^p} (pointwise sup before the norm)."""
    _check(a, p)
    dec = decomposition or DyadicDecomposition.of(phi, grid)
    w = 2.0 ** (dec.js * a)
    env = np.max(np.abs(dec.blocks) * w.reshape((-1,) + (1,) * grid.dim), axis=0)
    return float(lp_norm(env, grid, p))


_DENSE_CELLS = 32  # every whole-cell magnitude up to this many cells


def shift_set(grid: Grid, max_cells: int = None, diagonals: bool = True, both_signs: bool = True):
    """Integer cell shifts (tuples): all magnitudes up to 32 cells, quarter-octave beyond, up to L/4."""
    top = max_cells if max_cells is not None else max(1, grid.n // 4)
    mags = set(range(1, _DENSE_CELLS + 1))
    mags |= {int(round(2 ** (q / 4))) for q in range(0, int(4 * math.log2(max(top, 1))) + 1)}
    mags = sorted(mags)
    mags = [m for m in mags if 1 <= m <= top]
    dirs = []
    if grid.dim == 1:
        dirs = [(1,)]
    elif grid.dim == 2:
        dirs = [(1, 0), (0, 1)] + ([(1, 1), (1, -1)] if diagonals else [])
    else:
        raise ValidationError("difference quotients implemented for dim 1 or 2")
    out = []
    for m in mags:
        for dvec in dirs:
            s = tuple(m * c for c in dvec)
            out.append(s)
            if both_signs:
                out.append(tuple(-c for c in s))
    return out


def _shifted(phi, s, axes):
    return np.roll(phi, s, axis=axes)


def _shift_length(s, grid: Grid):
    return grid.h * math.sqrt(sum(c * c for c in s))


def besov_dq(phi, a: float, p, grid: Grid, shifts=None) -> float:
    """sup over shifts of ||phi - phi(. - alpha)||_{L^p} / |alpha|^a."""
    _check(a, p)
    phi = np.asarray(phi, dtype=float)
    shifts = shifts if shifts is not None else shift_set(grid, both_signs=False)
    axes = tuple(range(grid.dim))
    best = 0.0
    for s in shifts:
        diff = phi - _shifted(phi, s, axes)
        best = max(best, float(lp_norm(diff, grid, p)) / _shift_length(s, grid) ** a)
    return best


def dq_envelope(phi, a: float, grid: Grid, shifts=None, max_length: float = math.inf, axes=None):
    """Pointwise sup over shifts of |phi(x) - phi(x - alpha)| / |alpha|^a.

    ``axes`` selects which array axes the shift acts on (defaults to the last
    ``grid.dim`` axes); other axes are carried along.
    """
    phi = np.asarray(phi, dtype=float)
    shifts = shifts if shifts is not None else shift_set(grid)
    if axes is None:
        axes = tuple(range(phi.ndim - grid.dim, phi.ndim))
    env = np.zeros_like(phi)
    for s in shifts:
        ell = _shift_length(s, grid)
        if ell > max_length * (1 + 1e-12):
            continue
        np.maximum(env, np.abs(phi - _shifted(phi, s, axes)) / ell**a, out=env)
    return env


def d_a_operator(h, a: float, grid_x: Grid, grid_v: Grid, shifts_x=None, shifts_v=None):
    """D^a h = D_1^a h + D_2^a h on a phase grid shaped ``(*x_shape, *v_shape)``.

    Shifts in v are periodic on the velocity box, which is harmless when h
    decays at the box edge.
    """
    if not 0 < a < 1:
        raise ValidationError(f"a={a} must lie in (0, 1)")
    h = np.asarray(h, dtype=float)
    dx = grid_x.dim
    if h.shape != grid_x.shape + grid_v.shape:
        raise ValidationError("phase field shape does not match the grids")
    d1 = dq_envelope(h, a, grid_x, shifts_x, axes=tuple(range(dx)))
    d2 = dq_envelope(h, a, grid_v, shifts_v, axes=tuple(range(dx, h.ndim)))
    return d1 + d2, d1, d2


def gradient_norm(phi, grid: Grid, p):
    g = spectral_gradient(np.asarray(phi, dtype=float), grid)
    mag = np.sqrt(np.sum(g * g, axis=0))
    return float(lp_norm(mag, grid, p))


def interpolation_check(g, a: float, p, grid: Grid) -> float:
    """besov_dq(g) / (||g||^{1-a} ||grad g||^a); 0 for the zero field."""
    _check(a, p)
    n0 = float(lp_norm(np.asarray(g, dtype=float), grid, p))
    n1 = gradient_norm(g, grid, p)
    if n0 == 0 or n1 == 0:
        return 0.0
    return besov_dq(g, a, p, grid) / (n0 ** (1 - a) * n1**a)


@dataclass
class DqTriebelReport:
    lhs_inf: float
    triebel_inf: float
    const_inf: float
    lhs_one: float
    triebel_one: float
    const_one: float


def dq_vs_triebel_check(psi, a: float, grid: Grid) -> DqTriebelReport:
    """Measured constants in the two difference-quotient versus Triebel bounds.

    The L^1 version only uses shifts with |alpha| <= 1.
    """
    psi = np.asarray(psi, dtype=float)
    dec = DyadicDecomposition.of(psi, grid)
    lhs_inf = float(np.max(dq_envelope(psi, a, grid)))
    lhs_one = float(lp_norm(dq_envelope(psi, a, grid, max_length=1.0), grid, 1))
    f_inf = triebel(psi, a, math.inf, grid, dec)
    f_one = triebel(psi, a, 1, grid, dec)
    c_inf = lhs_inf / f_inf if f_inf > 0 else 0.0
    c_one = lhs_one / f_one if f_one > 0 else 0.0
    return DqTriebelReport(lhs_inf, f_inf, c_inf, lhs_one, f_one, c_one)


@dataclass
class SeminormReport:
    a: float
    B1: float
    Binf: float
    F1: float
    Finf: float
    L1: float
    Linf: float
    grad_L1: float
    grad_Linf: float
    method: str = "block"
    j_min: int = 0
    j_max: int = 0

    def as_dict(self):
        return asdict(self)


def seminorm_report(phi, a: float, grid: Grid, method: str = "block") -> SeminormReport:
    """All seminorms of one field; ``method`` picks block or difference-quotient Besov values."""
    phi = np.asarray(phi, dtype=float)
    dec = DyadicDecomposition.of(phi, grid)
    if method == "block":
        b1, binf = besov_block(phi, a, 1, grid, dec), besov_block(phi, a, math.inf, grid, dec)
    elif method == "dq":
        b1, binf = besov_dq(phi, a, 1, grid), besov_dq(phi, a, math.inf, grid)
    else:
        raise ValidationError("method must be 'block' or 'dq'")
    return SeminormReport(
        a=a, B1=b1, Binf=binf,
        F1=triebel(phi, a, 1, grid, dec), Finf=triebel(phi, a, math.inf, grid, dec),
        L1=float(lp_norm(phi, grid, 1)), Linf=float(lp_norm(phi, grid, math.inf)),
        grad_L1=gradient_norm(phi, grid, 1), grad_Linf=gradient_norm(phi, grid, math.inf),
        method=method, j_min=dec.j_min, j_max=dec.j_max)
