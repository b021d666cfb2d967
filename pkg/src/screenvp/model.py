"""Equilibrium velocity profiles and the shared run configuration.

Profiles are radial, written as ``mu(v) = phi(|v|^2 / 2)`` so that gradient and
Hessian are regular at the origin:

    grad mu = phi'(u) v,      hess mu = phi'(u) I + phi''(u) v v^T.

The Fourier convention used everywhere is ``f_hat(xi) = int exp(-i x.xi) f(x) dx``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
import sympy as sp
from scipy import special

from .errors import NonIntegrable, QuadratureFailure, ValidationError

FOURIER_CONVENTION = "f_hat(xi) = int exp(-i x.xi) f(x) dx"


def sphere_area(d: int) -> float:
    """Surface area of the unit sphere in R^d (2 for d=1)."""
    return 2.0 * math.pi ** (d / 2) / math.gamma(d / 2)


@dataclass(frozen=True)
class VelocityProfile:
    d: int
    tag: str
    phi: Callable[[np.ndarray], np.ndarray]
    dphi: Callable[[np.ndarray], np.ndarray]
    d2phi: Callable[[np.ndarray], np.ndarray]
    fourier_radial: Callable[[np.ndarray], np.ndarray]
    decay_exponent: float = math.inf
    # radial profile m(r) as a sympy expression in the symbol ``r``
    symbolic: Optional[sp.Expr] = field(default=None, compare=False, repr=False)

    def _u(self, v):
        v = np.asarray(v, dtype=float)
        if self.d == 1 and (v.ndim == 0 or v.shape[-1] != 1):
            return 0.5 * v * v, v[..., None]
        return 0.5 * np.sum(v * v, axis=-1), v

    def radial(self, r):
        r = np.asarray(r, dtype=float)
        return self.phi(0.5 * r * r)

    def evaluate(self, v):
        u, _ = self._u(v)
        return self.phi(u)

    def gradient(self, v):
        """grad mu; for d=1 scalar velocities the result has the input shape."""
        v = np.asarray(v, dtype=float)
        u, vv = self._u(v)
        g = self.dphi(u)[..., None] * vv
        if self.d == 1 and (v.ndim == 0 or v.shape[-1] != 1):
            return g[..., 0]
        return g

    def hessian(self, v):
        v = np.asarray(v, dtype=float)
        u, vv = self._u(v)
        h = self.d2phi(u)[..., None, None] * vv[..., :, None] * vv[..., None, :]
        h = h + self.dphi(u)[..., None, None] * np.eye(vv.shape[-1])
        if self.d == 1 and (v.ndim == 0 or v.shape[-1] != 1):
            return h[..., 0, 0]
        return h


def make_maxwellian(d: int) -> VelocityProfile:
    if d < 1:
        raise ValidationError("profile dimension d must be >= 1")
    c = (2 * math.pi) ** (-d / 2)
    r = sp.Symbol("r", nonnegative=True)
    return VelocityProfile(
        d=d,
        tag="maxwellian",
        phi=lambda u: c * np.exp(-u),
        dphi=lambda u: -c * np.exp(-u),
        d2phi=lambda u: c * np.exp(-u),
        fourier_radial=lambda s: np.exp(-0.5 * np.square(s)),
        symbolic=sp.Float(c) * sp.exp(-r**2 / 2),
    )


@lru_cache(maxsize=None)
def _poly_constant(d: int, N: float) -> float:
    # int <v>^{-N} dv = pi^{d/2} Gamma((N-d)/2) / Gamma(N/2)
    return math.exp(math.lgamma(N / 2) - math.lgamma((N - d) / 2)) / math.pi ** (d / 2)


def make_polynomial_profile(d: int, N: float) -> VelocityProfile:
    """Unit-mass profile proportional to <v>^{-N}."""
    if d < 1:
        raise ValidationError("profile dimension d must be >= 1")
    if not N > d:
        raise NonIntegrable(f"<v>^-N is integrable on R^{d} only for N > d (got N={N})")
    c = _poly_constant(d, N)
    nu = 0.5 * (N - d)
    pref = 2.0 ** (1 - nu) / math.gamma(nu)

    def fourier(s):
        s = np.abs(np.asarray(s, dtype=float))
        out = np.ones_like(s)
        # below s_min the value is 1 to double precision and s^nu K_nu(s) is 0 * inf
        nz = s > 2.0 * math.exp(-300.0 / max(nu, 1.0))
        out[nz] = pref * s[nz] ** nu * special.kv(nu, s[nz])
        return out

    r = sp.Symbol("r", nonnegative=True)
    return VelocityProfile(
        d=d,
        tag=f"poly:{N:g}",
        phi=lambda u: c * (1 + 2 * u) ** (-N / 2),
        dphi=lambda u: -N * c * (1 + 2 * u) ** (-N / 2 - 1),
        d2phi=lambda u: N * (N + 2) * c * (1 + 2 * u) ** (-N / 2 - 2),
        fourier_radial=fourier,
        decay_exponent=float(N),
        symbolic=sp.Float(c) * (1 + r**2) ** (-sp.nsimplify(N) / 2),
    )


def make_zero_profile(d: int) -> VelocityProfile:
    """Degenerate mu = 0; only meaningful as a test fixture."""
    zero = lambda u: np.zeros_like(np.asarray(u, dtype=float))
    return VelocityProfile(d=d, tag="zero", phi=zero, dphi=zero, d2phi=zero,
                           fourier_radial=lambda s: np.zeros_like(np.asarray(s, dtype=float)),
                           symbolic=sp.Integer(0))


def profile_from_tag(tag: str, d: int) -> VelocityProfile:
    tag = tag.strip().lower()
    if tag == "maxwellian":
        return make_maxwellian(d)
    if tag.startswith("poly:"):
        return make_polynomial_profile(d, float(tag.split(":", 1)[1]))
    raise ValidationError(f"unknown profile tag {tag!r}; expected 'maxwellian' or 'poly:N'")


# --------------------------------------------------------------------------
# radial quadrature

def radial_integral(func: Callable[[np.ndarray], np.ndarray], d: int, *,
                    tail_tol: float = 1e-12, rtol: float = 1e-10,
                    r_max: float = 2.0**40, n0: int = 16) -> float:
    """``int_{R^d} func(|v|) dv`` by composite Gauss-Legendre on dyadic panels.

    Panels are appended until the last one contributes less than ``tail_tol``;
    the node count per panel is doubled until two passes agree to ``rtol``.
    """
    area = sphere_area(d)

    def panel(a, b, n):
        x, w = np.polynomial.legendre.leggauss(n)
        r = 0.5 * (b - a) * x + 0.5 * (b + a)
        return 0.5 * (b - a) * np.sum(w * func(r) * r ** (d - 1))

    def total(n):
        acc, a, b = 0.0, 0.0, 1.0
        while True:
            part = panel(a, b, n)
            acc += part
            if b >= 8 and abs(part) * area < tail_tol:
                return acc
            if b >= r_max:
                raise QuadratureFailure("radial tail integral does not converge")
            a, b = b, 2 * b

    prev = total(n0)
    n = n0
    for _ in range(6):
        n *= 2
        cur = total(n)
        if abs(cur - prev) <= rtol * max(abs(cur), 1e-300) or abs(cur - prev) < 1e-300:
            return area * cur
        prev = cur
    raise QuadratureFailure("radial quadrature did not settle under node doubling")


def profile_mass(mu: VelocityProfile) -> float:
    return radial_integral(mu.radial, mu.d)


# --------------------------------------------------------------------------
# regularity functionals

@dataclass
class RegularityReport:
    weighted_w2inf: float
    weighted_w1: float
    finite_w2inf: bool
    finite_w1: bool
    weight_first: float
    weight_second: float
    orders: tuple = (2, 0)
    note: str = ""

    def as_dict(self):
        return asdict(self)


def _ladder(values_at: Callable[[float], float], r0: float = 8.0, kmax: int = 14,
            rtol: float = 1e-7) -> tuple[float, bool]:
    """Extend the truncation radius until the value settles or visibly diverges."""
    vals = [values_at(r0 * 2**k) for k in range(3)]
    k = 2
    while True:
        d1, d2 = vals[-2] - vals[-3], vals[-1] - vals[-2]
        scale = max(abs(vals[-1]), 1e-300)
        if abs(d2) <= rtol * scale or vals[-1] == 0.0:
            return vals[-1], True
        if d1 > 0 and d2 >= 0.95 * d1:
            return math.inf, False
        q = d2 / d1 if d1 != 0 else 1.0
        if 0 <= q < 0.95 and abs(d2) * q / (1 - q) <= 1e-6 * scale:
            return vals[-1] + d2 * q / (1 - q), True
        k += 1
        if k > kmax:
            raise QuadratureFailure("regularity functional tail did not settle on refinement")
        vals.append(values_at(r0 * 2**k))


def regularity_functionals(mu: VelocityProfile, N: float) -> RegularityReport:
    """Numerical values of the two weighted norms that qualify an equilibrium.

    Returns ``||<v>^N grad mu||_{W^{2,inf}}`` and
    ``||<v>^{d+5} grad mu||_{W^{2d+7,1}}``.  Derivatives are taken symbolically
    from the radial profile.  For ``d > 1`` radial derivatives with the radial
    measure are used as a proxy for the full multi-index norms.
    """
    if mu.symbolic is None:
        raise ValidationError("profile carries no symbolic radial form")
    d = mu.d
    r = sp.Symbol("r", real=True)
    m = mu.symbolic.subs(sp.Symbol("r", nonnegative=True), r)
    w2 = d + 5
    order_inf, order_one = 2, 2 * d + 7
    note = "exact multi-index norms" if d == 1 else "radial-derivative proxy"

    def derivs(weight, order):
        g = (1 + r**2) ** (sp.nsimplify(weight) / 2) * sp.diff(m, r)
        out = []
        for j in range(order + 1):
            out.append(sp.lambdify(r, g, "numpy"))
            if j < order:
                g = sp.diff(g, r)
        return out

    if mu.symbolic == 0:
        return RegularityReport(0.0, 0.0, True, True, N, w2, (order_inf, order_one), note)

    f_inf = derivs(N, order_inf)
    f_one = derivs(w2, order_one)

    def as_arr(fn, x):
        return np.broadcast_to(np.asarray(fn(x), dtype=float), x.shape)

    def sup_norm(R):
        x = np.linspace(0.0, R, int(400 * max(R, 8) / 8) + 1)
        return float(sum(np.max(np.abs(as_arr(fn, x))) for fn in f_inf))

    area = sphere_area(d)
    xg, wg = np.polynomial.legendre.leggauss(48)

    def l1_norm(R):
        edges = np.concatenate([[0.0], 2.0 ** np.arange(-3, math.log2(R) + 1)])
        total = 0.0
        for a, b in zip(edges[:-1], edges[1:]):
            x = 0.5 * (b - a) * xg + 0.5 * (b + a)
            for fn in f_one:
                total += 0.5 * (b - a) * np.sum(wg * np.abs(as_arr(fn, x)) * x ** (d - 1))
        return float(area * total)

    v_inf, fin_inf = _ladder(sup_norm)
    v_one, fin_one = _ladder(l1_norm)
    return RegularityReport(v_inf, v_one, fin_inf, fin_one, N, w2, (order_inf, order_one), note)


# --------------------------------------------------------------------------
# run configuration

def _is_pow2(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


def admissible_a_interval(d: int, gamma: float) -> tuple[float, float]:
    if d >= 3:
        return (gamma + 1) / (d - gamma - 1), 1.0
    return 0.0, 1.0


@dataclass
class RunConfig:
    d: int = 1
    a: Optional[float] = None
    gamma: float = 0.05
    k: float = 4.0
    box_length: float = 4 * math.pi
    v_max: float = 8.0
    nx: int = 64
    nv: int = 256
    dt: float = 0.05
    t_end: float = 40.0
    M0: float = 1.0
    eps0: float = 1e-3
    support_margin: float = 0.0
    boundary: str = "periodic"
    profile: str = "maxwellian"
    sign_convention: str = "stable"
    seed: int = 0
    amplitude: float = 1.0
    envelope_width: float = 0.75  # keeps the default Gaussian clear of the 4 pi box edge
    mode: int = 1
    output_every: int = 1
    interpolation: str = "spectral"
    coupling: bool = True

    def __post_init__(self):
        if self.a is None:
            lo, hi = admissible_a_interval(self.d, self.gamma)
            self.a = 0.5 * (lo + hi)

    def validate(self) -> "RunConfig":
        if self.d < 1:
            raise ValidationError("RunConfig.d must be >= 1")
        if not 0.0 < self.a < 1.0:
            raise ValidationError(f"RunConfig invariant violated: a must lie in (0,1), got a={self.a}")
        if not self.gamma > 0:
            raise ValidationError("RunConfig invariant violated: gamma > 0")
        if self.d >= 3:
            lo, hi = admissible_a_interval(self.d, self.gamma)
            if not lo < self.a < hi:
                raise ValidationError(
                    f"RunConfig invariant violated: a must lie in ((gamma+1)/(d-gamma-1), 1) = "
                    f"({lo:.4g}, 1) for d={self.d}, got a={self.a}")
        if not self.k > self.d:
            raise ValidationError("RunConfig invariant violated: velocity weight k must exceed d")
        if not (_is_pow2(self.nx) and _is_pow2(self.nv)):
            raise ValidationError("RunConfig invariant violated: nx and nv must be powers of two")
        if not self.dt > 0:
            raise ValidationError("RunConfig invariant violated: dt > 0")
        if not (self.t_end > 0 and self.box_length > 0 and self.v_max > 0):
            raise ValidationError("RunConfig invariant violated: t_end, box_length, v_max > 0")
        if self.boundary not in ("periodic", "whole_space"):
            raise ValidationError("RunConfig.boundary must be 'periodic' or 'whole_space'")
        if self.interpolation not in ("hybrid", "spectral", "cubic"):
            raise ValidationError("RunConfig.interpolation must be hybrid, spectral or cubic")
        if not (isinstance(self.mode, int) and self.mode >= 1 and self.output_every >= 1):
            raise ValidationError("RunConfig invariant violated: mode >= 1 and output_every >= 1")
        if not (self.amplitude >= 0 and self.eps0 >= 0 and self.envelope_width > 0):
            raise ValidationError("RunConfig invariant violated: amplitude, eps0 >= 0, envelope_width > 0")
        if self.sign_convention not in ("stable", "literal"):
            raise ValidationError("RunConfig.sign_convention must be 'stable' or 'literal'")
        if self.boundary == "whole_space":
            reach = self.v_max * self.t_end
            if not reach < self.box_length / 2 - self.support_margin:
                raise ValidationError(
                    "RunConfig invariant violated: v_max*t_end < L/2 - support_margin "
                    f"({reach:.4g} >= {self.box_length / 2 - self.support_margin:.4g})")
        profile_from_tag(self.profile, self.d)
        return self

    @property
    def field_sign(self) -> float:
        return -1.0 if self.sign_convention == "stable" else 1.0

    def as_dict(self):
        return asdict(self)
