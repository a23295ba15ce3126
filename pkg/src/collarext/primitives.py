"""Named maps with analytic derivatives: shear, radial stretch, generalized
inversions, twist maps, stereographic charts, and bump-built test maps."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .geometry import Ball, GeometryError, sphere_points
from .maps import (
    MapError,
    NumericInverse,
    SmoothMap,
    affine,
    compose,
    dilation,
    identity,
    translation,
)

# sup of |d/ds (1 - s^2)^3| on [0, 1], attained at s = 1/sqrt(5)
BUMP_SLOPE = 6 * 16 / (25 * np.sqrt(5.0))


class PrimitiveError(MapError):
    pass


# ---------------------------------------------------------------------------
# radial maps  x -> phi(|x|) x
# ---------------------------------------------------------------------------

RadialProfileFn = Callable[[np.ndarray], tuple]


def radial_map(dim: int, profile: RadialProfileFn, *, inverse=None, singular=None,
               name: str = "radial") -> SmoothMap:
    """Map ``x -> phi(t) x`` with ``t = |x|``.

    ``profile(t)`` returns ``(phi, psi, chi)`` where ``psi = phi'(t) / t`` and
    ``chi = psi'(t) / t``; then::

        DR = phi I + psi x x^T
        D2R[i, j, k] = psi (x_k d_ij + x_j d_ik + x_i d_jk) + chi x_i x_j x_k
    """
    eye = np.eye(dim)

    def impl(X, order):
        t = np.linalg.norm(X, axis=1)
        phi, psi, chi = profile(t)
        V = phi[:, None] * X
        J = H = None
        if order >= 1:
            J = phi[:, None, None] * eye + psi[:, None, None] * np.einsum("pi,pj->pij", X, X)
        if order >= 2:
            sym = (np.einsum("pk,ij->pijk", X, eye) + np.einsum("pj,ik->pijk", X, eye)
                   + np.einsum("pi,jk->pijk", X, eye))
            H = psi[:, None, None, None] * sym + chi[:, None, None, None] * np.einsum(
                "pi,pj,pk->pijk", X, X, X)
        return V, J, H

    return SmoothMap(dim, impl, inverse=inverse, singular=singular, name=name)


def _at_origin(X):
    return ~(np.linalg.norm(X, axis=1) > 0)


# ---------------------------------------------------------------------------
# generalized inversions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class InversionParams:
    exponent: float
    radius: float = 1.0

    def __post_init__(self):
        if not (self.exponent > 0 and self.radius > 0):
            raise PrimitiveError("inversion needs a > 0 and r > 0")

    @property
    def dual(self) -> "InversionParams":
        return InversionParams(1.0 / self.exponent, self.radius)


def make_inversion(p: InversionParams, dim: int) -> SmoothMap:
    """``x -> r^(a+1) |x|^-(a+1) x`` on R^n minus the origin."""
    a, r = p.exponent, p.radius
    c = r ** (a + 1)

    def profile(t):
        phi = c * t ** -(a + 1)
        psi = -(a + 1) * c * t ** -(a + 3)
        chi = (a + 1) * (a + 3) * c * t ** -(a + 5)
        return phi, psi, chi

    return radial_map(dim, profile, inverse=lambda: make_inversion(p.dual, dim),
                      singular=_at_origin, name=f"I[{a:g},{r:g}]")


def derivative_constant(dim: int, a: float, k: int) -> float:
    """Constant in front of ``r^(a+1) |x|^-(a+k)`` bounding |D^k I| (HS norm)."""
    return dim * (a + 1.0) ** k


def inversion_bounds(p: InversionParams, x, k: int, dim: int | None = None) -> dict:
    """Envelopes for the size of the k-th derivative (k = 1, 2) of the inversion.

    Returns ``{"envelope": r^(a+1)|x|^-(a+k), "constant": C, "bound": C*envelope}``
    and for k = 1 also ``"jacobian_bound": n r^(n(a+1)) |x|^(-n(a+1))``.
    """
    x = np.asarray(x, dtype=float)
    n = x.size if dim is None else dim
    t = float(np.linalg.norm(x))
    if t == 0:
        raise PrimitiveError("inversion bounds are undefined at the origin")
    if k not in (1, 2):
        raise PrimitiveError("k must be 1 or 2")
    a, r = p.exponent, p.radius
    env = r ** (a + 1) * t ** -(a + k)
    C = derivative_constant(n, a, k)
    out = {"envelope": env, "constant": C, "bound": C * env}
    if k == 1:
        out["jacobian_bound"] = n * r ** (n * (a + 1)) * t ** (-n * (a + 1))
    return out


# ---------------------------------------------------------------------------
# radial stretch
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RadialProfile:
    """Monotone C^1 profile with rho(0)=0, rho(r1)=r2, rho(t)=t for t >= outer.

    Knots are {0, r1, outer}.  On [0, r1] the cubic is odd (no t^2 term), so the
    radial map is smooth at the origin; on [r1, outer] it is a cubic Hermite
    piece with slope 1 at ``outer``.  The slope at r1 is the harmonic mean of
    the adjacent secants.
    """

    r1: float
    r2: float
    outer: float = 1.0

    def __post_init__(self):
        if not (0 < self.r1 < self.outer and 0 < self.r2 < self.outer):
            raise PrimitiveError("radial profile needs 0 < r1, r2 < outer")

    @property
    def coefficients(self) -> dict:
        r1, r2, R = self.r1, self.r2, self.outer
        d0 = r2 / r1
        d1 = (R - r2) / (R - r1)
        m1 = 2 * d0 * d1 / (d0 + d1)
        m0 = (3 * d0 - m1) / 2
        c3 = (m1 - m0) / (3 * r1**2)
        return {"m0": m0, "c3": c3, "m1": m1, "d1": d1}

    def _hermite(self, t):
        """rho, rho', rho'' on the middle piece."""
        r1, r2, R = self.r1, self.r2, self.outer
        k = self.coefficients
        h = R - r1
        s = (t - r1) / h
        h00, h10, h01, h11 = 2*s**3 - 3*s**2 + 1, s**3 - 2*s**2 + s, -2*s**3 + 3*s**2, s**3 - s**2
        d00, d10, d01, d11 = 6*s**2 - 6*s, 3*s**2 - 4*s + 1, -6*s**2 + 6*s, 3*s**2 - 2*s
        e00, e10, e01, e11 = 12*s - 6, 6*s - 4, -12*s + 6, 6*s - 2
        m1, m2 = k["m1"], 1.0
        rho = h00 * r2 + h10 * h * m1 + h01 * R + h11 * h * m2
        drho = (d00 * r2 + d01 * R) / h + d10 * m1 + d11 * m2
        ddrho = (e00 * r2 + e01 * R) / h**2 + (e10 * m1 + e11 * m2) / h
        return rho, drho, ddrho

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        k = self.coefficients
        out = np.where(t >= self.outer, t, 0.0)
        inner = t < self.r1
        out = np.where(inner, k["m0"] * t + k["c3"] * t**3, out)
        mid = (t >= self.r1) & (t < self.outer)
        out = np.where(mid, self._hermite(t)[0], out)
        return out

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        k = self.coefficients
        out = np.where(t >= self.outer, 1.0, 0.0)
        out = np.where(t < self.r1, k["m0"] + 3 * k["c3"] * t**2, out)
        mid = (t >= self.r1) & (t < self.outer)
        return np.where(mid, self._hermite(t)[1], out)

    def min_slope(self) -> float:
        """Exact minimum of rho' on [0, outer] (rho' is piecewise quadratic)."""
        k = self.coefficients
        cands = [k["m0"], k["m1"], 1.0]
        # interior critical point of the quadratic rho' on the middle piece
        ts = np.linspace(self.r1, self.outer, 3)
        d = self._hermite(ts)[1]
        # fit the quadratic exactly through three points
        A = np.vander(ts, 3)
        qa, qb, _ = np.linalg.solve(A, d)
        if qa != 0:
            tc = -qb / (2 * qa)
            if self.r1 < tc < self.outer:
                cands.append(float(self._hermite(np.array([tc]))[1][0]))
        return float(min(cands))

    def radial_terms(self, t):
        """(phi, psi, chi) for the radial map built on this profile."""
        k = self.coefficients
        phi = np.ones_like(t)
        psi = np.zeros_like(t)
        chi = np.zeros_like(t)
        inner = t < self.r1
        phi[inner] = k["m0"] + k["c3"] * t[inner] ** 2
        psi[inner] = 2 * k["c3"]
        mid = (t >= self.r1) & (t < self.outer)
        if np.any(mid):
            tm = t[mid]
            rho, d1, d2 = self._hermite(tm)
            phi[mid] = rho / tm
            psi[mid] = d1 / tm**2 - rho / tm**3
            chi[mid] = (d2 / tm**2 - 3 * d1 / tm**3 + 3 * rho / tm**4) / tm
        return phi, psi, chi

    def invert(self, s):
        """rho^-1 by safeguarded Newton on each piece."""
        s = np.asarray(s, dtype=float)
        t = np.where(s >= self.outer, s, s * self.r1 / self.r2)
        lo = np.zeros_like(s)
        hi = np.maximum(s, self.outer)
        work = s < self.outer
        for _ in range(100):
            f = self(t) - s
            lo = np.where(work & (f < 0), t, lo)
            hi = np.where(work & (f > 0), t, hi)
            d = self.derivative(t)
            tn = t - f / d
            bad = (tn <= lo) | (tn >= hi)
            tn = np.where(bad, 0.5 * (lo + hi), tn)
            tn = np.where(work, tn, t)
            if np.max(np.abs(tn - t), initial=0.0) <= 1e-16 * max(1.0, float(np.max(s, initial=1.0))):
                t = tn
                break
            t = tn
        return t


def make_radial_stretch(p: RadialProfile, dim: int) -> SmoothMap:
    """``R(x) = rho(|x|) x / |x|``; maps B(0, r1) onto B(0, r2), identity off B(0, outer)."""
    if not p.min_slope() > 0:
        raise PrimitiveError(f"radial profile is not increasing (min slope {p.min_slope():.3g})")
    holder = {}

    def forward_profile(t):
        return p.radial_terms(t)

    def solve(Y):
        s = np.linalg.norm(Y, axis=1)
        t = p.invert(s)
        factor = np.divide(t, s, out=np.ones_like(s), where=s > 0)
        return factor[:, None] * Y

    R = radial_map(dim, forward_profile, inverse=lambda: holder["inv"],
                   name=f"R[{p.r1:g}->{p.r2:g}]")
    holder["inv"] = NumericInverse(R, solver=solve, name=f"R[{p.r1:g}->{p.r2:g}]^-1")
    return R


# ---------------------------------------------------------------------------
# shear
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ShearParams:
    a_level: float
    b_level: float

    def __post_init__(self):
        if not self.a_level < self.b_level:
            raise PrimitiveError(f"shear needs a < b, got a={self.a_level}, b={self.b_level}")

    @property
    def c(self) -> float:
        return (self.b_level - self.a_level) / 2

    @property
    def mid(self) -> float:
        return (self.a_level + self.b_level) / 2

    def s0(self, t):
        """Odd C^{1,1} ramp: 1 - (t - c)^2 / c^2 on [0, c], 1 beyond, odd extension."""
        c = self.c
        u = np.minimum(np.abs(t), c)
        return np.sign(t) * (1 - (u - c) ** 2 / c**2)

    def s(self, t, order: int = 0):
        """s(t) = (3/2)(s0(t - mid) + 1) and its first two derivatives."""
        c = self.c
        u = np.asarray(t, dtype=float) - self.mid
        if order == 0:
            return 1.5 * (self.s0(u) + 1)
        inside = np.abs(u) < c
        if order == 1:
            return np.where(inside, 1.5 * (-2 * (np.abs(u) - c) / c**2), 0.0)
        return np.where(inside, 1.5 * (-2 * np.sign(u) / c**2), 0.0)

    @property
    def max_slope(self) -> float:
        return 3.0 / self.c

    @property
    def lipschitz(self) -> float:
        """Operator norm of DS at the slab midline."""
        q = self.max_slope
        return (q + np.sqrt(q * q + 4)) / 2


def make_shear(p: ShearParams, dim: int) -> SmoothMap:
    """``S(x) = x - s(x_n) e_1``: identity below the slab, translation by -3 e_1 above."""

    def build(sign):
        def impl(X, order):
            t = X[:, -1]
            V = X.copy()
            V[:, 0] -= sign * p.s(t)
            J = H = None
            if order >= 1:
                J = np.broadcast_to(np.eye(dim), (X.shape[0], dim, dim)).copy()
                J[:, 0, -1] -= sign * p.s(t, 1)
            if order >= 2:
                H = np.zeros((X.shape[0], dim, dim, dim))
                H[:, 0, -1, -1] = -sign * p.s(t, 2)
            return V, J, H
        return impl

    holder = {}
    fwd = SmoothMap(dim, build(1.0), inverse=lambda: holder["inv"], name="S")
    holder["inv"] = SmoothMap(dim, build(-1.0), inverse=fwd, name="S^-1")
    fwd.params = p
    return fwd


# ---------------------------------------------------------------------------
# twist maps and stereographic charts
# ---------------------------------------------------------------------------


def norm_power_times(m: SmoothMap, q: float, inner: SmoothMap | None = None) -> SmoothMap:
    """``x -> |x|^q * m(v(x))`` where v = inner (default identity)."""
    dim = m.dim
    eye = np.eye(dim)
    v = compose(m, inner) if inner is not None else m

    def impl(X, order):
        t = np.linalg.norm(X, axis=1)
        w = t**q
        Vv, Jv, Hv = v.eval(X, order)
        V = w[:, None] * Vv
        J = H = None
        if order >= 1:
            gw = (q * t ** (q - 2))[:, None] * X
            J = np.einsum("pi,pj->pij", Vv, gw) + w[:, None, None] * Jv
        if order >= 2:
            hw = (q * t ** (q - 2))[:, None, None] * (
                eye + (q - 2) * np.einsum("pj,pk->pjk", X, X) / (t**2)[:, None, None])
            H = (np.einsum("pi,pjk->pijk", Vv, hw) + np.einsum("pj,pik->pijk", gw, Jv)
                 + np.einsum("pk,pij->pijk", gw, Jv) + w[:, None, None, None] * Hv)
        return V, J, H

    return SmoothMap(dim, impl, out_dim=m.out_dim, singular=_at_origin, name=f"|x|^{q:g}·{v.name}")


def check_sphere_map(phi: SmoothMap, n_samples: int = 1000, seed: int = 0, tol: float = 1e-12) -> float:
    """Largest deviation of |phi(u)| from 1 over sampled unit vectors."""
    rng = np.random.default_rng(seed)
    U = sphere_points(n_samples, phi.dim, rng)
    dev = float(np.max(np.abs(np.linalg.norm(phi(U), axis=1) - 1.0)))
    if dev > tol:
        raise PrimitiveError(f"map does not preserve the unit sphere (deviation {dev:.3g})")
    return dev


def make_twist(phi: SmoothMap, check_samples: int = 1000) -> tuple[SmoothMap, SmoothMap]:
    """Return ``(star, bar)`` with star(x) = phi(x/|x|)/|x| and bar(x) = |x| phi(x/|x|)."""
    check_sphere_map(phi, check_samples)
    normalize = _normalizer(phi.dim)
    star = norm_power_times(phi, -1.0, normalize)
    bar = norm_power_times(phi, 1.0, normalize)
    if phi.has_inverse:
        star_inv = norm_power_times(phi.inverse, -1.0, normalize)
        bar_inv = norm_power_times(phi.inverse, 1.0, normalize)
        star._inverse, star_inv._inverse = star_inv, star
        bar._inverse, bar_inv._inverse = bar_inv, bar
    star.name, bar.name = f"{phi.name}*", f"bar({phi.name})"
    return star, bar


def _normalizer(dim: int) -> SmoothMap:
    """x -> x / |x| (the a = 0, r = 1 radial profile)."""

    def profile(t):
        return 1 / t, -1 / t**3, 3 / t**5

    return radial_map(dim, profile, singular=_at_origin, name="x/|x|")


def make_stereographic(pole: str, dim: int) -> SmoothMap:
    """Chart R^n -> unit sphere in R^(n+1).

    ``"north"`` sends 0 to the south pole (projection from the north pole),
    ``"south"`` sends 0 to the north pole; with these conventions the
    transition ``south^-1 o north`` is the inversion ``x / |x|^2``.
    """
    if pole not in ("north", "south"):
        raise PrimitiveError("pole must be 'north' or 'south'")
    sigma = 1.0 if pole == "north" else -1.0
    n = dim
    eye = np.eye(n)

    def impl(X, order):
        q = np.sum(X**2, axis=1)
        d = 1 + q
        V = np.empty((X.shape[0], n + 1))
        V[:, :n] = 2 * X / d[:, None]
        V[:, n] = sigma * (q - 1) / d
        J = H = None
        if order >= 1:
            J = np.empty((X.shape[0], n + 1, n))
            J[:, :n, :] = 2 * eye / d[:, None, None] - 4 * np.einsum("pi,pj->pij", X, X) / (d**2)[:, None, None]
            J[:, n, :] = sigma * 4 * X / (d**2)[:, None]
        if order >= 2:
            H = np.empty((X.shape[0], n + 1, n, n))
            d2, d3 = (d**2)[:, None, None, None], (d**3)[:, None, None, None]
            H[:, :n] = (-4 * (np.einsum("ij,pk->pijk", eye, X) + np.einsum("ik,pj->pijk", eye, X)
                              + np.einsum("pi,jk->pijk", X, eye)) / d2
                        + 16 * np.einsum("pi,pj,pk->pijk", X, X, X) / d3)
            H[:, n] = sigma * (4 * eye / (d**2)[:, None, None]
                               - 16 * np.einsum("pj,pk->pjk", X, X) / (d**3)[:, None, None])
        return V, J, H

    def inv_impl(P, order):
        last = P[:, n]
        w = 1.0 / (1.0 - sigma * last)
        V = P[:, :n] * w[:, None]
        J = H = None
        dw = sigma * w**2
        if order >= 1:
            J = np.zeros((P.shape[0], n, n + 1))
            J[:, :, :n] = w[:, None, None] * eye
            J[:, :, n] = P[:, :n] * dw[:, None]
        if order >= 2:
            H = np.zeros((P.shape[0], n, n + 1, n + 1))
            for i in range(n):
                H[:, i, i, n] = dw
                H[:, i, n, i] = dw
                H[:, i, n, n] = P[:, i] * 2 * w**3
        return V, J, H

    def at_pole(P):
        return ~(np.abs(1.0 - sigma * P[:, n]) > 0)

    holder = {}
    chart = SmoothMap(n, impl, out_dim=n + 1, inverse=lambda: holder["inv"], name=f"pi_{pole}")
    holder["inv"] = SmoothMap(n + 1, inv_impl, out_dim=n, inverse=chart, singular=at_pole,
                              name=f"pi_{pole}^-1")
    return chart


# ---------------------------------------------------------------------------
# bump-built test maps
# ---------------------------------------------------------------------------


def _bump(u):
    """beta(u) = (1 - u)^3 on [0, 1), 0 beyond; returns beta, beta', beta''."""
    inside = u < 1
    w = np.where(inside, 1 - u, 0.0)
    return w**3, -3 * w**2, 6 * w


def bump_rotation(center, radius: float, angle: float, plane: Sequence[int] = (0, 1)) -> SmoothMap:
    """Rotate by ``angle * beta(|x - c|^2 / radius^2)`` in the given coordinate plane about c.

    Distances to c are preserved, so the inverse is the same map with -angle.
    """
    c = np.asarray(center, dtype=float)
    dim = c.size
    i, j = plane
    if i == j:
        raise PrimitiveError("rotation plane needs two distinct axes")

    def build(theta0):
        def impl(X, order):
            Y = X - c
            u = np.sum(Y**2, axis=1) / radius**2
            b, db, ddb = _bump(u)
            th = theta0 * b
            cs, sn = np.cos(th), np.sin(th)
            V = X.copy()
            V[:, i] = c[i] + cs * Y[:, i] - sn * Y[:, j]
            V[:, j] = c[j] + sn * Y[:, i] + cs * Y[:, j]
            J = H = None
            if order >= 1:
                gu = 2 * Y / radius**2
                gth = (theta0 * db)[:, None] * gu
                # M'(theta) y and M''(theta) y live in the (i, j) plane
                Mp_y = np.zeros_like(Y)
                Mp_y[:, i] = -sn * Y[:, i] - cs * Y[:, j]
                Mp_y[:, j] = cs * Y[:, i] - sn * Y[:, j]
                M = np.broadcast_to(np.eye(dim), (X.shape[0], dim, dim)).copy()
                M[:, i, i], M[:, i, j], M[:, j, i], M[:, j, j] = cs, -sn, sn, cs
                J = M + np.einsum("pa,pb->pab", Mp_y, gth)
            if order >= 2:
                Mp = np.zeros((X.shape[0], dim, dim))
                Mp[:, i, i], Mp[:, i, j], Mp[:, j, i], Mp[:, j, j] = -sn, -cs, cs, -sn
                Mpp_y = np.zeros_like(Y)
                Mpp_y[:, i] = -(cs * Y[:, i] - sn * Y[:, j])
                Mpp_y[:, j] = -(sn * Y[:, i] + cs * Y[:, j])
                hth = theta0 * (ddb[:, None, None] * np.einsum("pa,pb->pab", gu, gu)
                                + db[:, None, None] * 2 * np.eye(dim) / radius**2)
                H = (np.einsum("pab,pc->pabc", Mp, gth) + np.einsum("pac,pb->pabc", Mp, gth)
                     + np.einsum("pa,pb,pc->pabc", Mpp_y, gth, gth)
                     + np.einsum("pa,pbc->pabc", Mp_y, hth))
            return V, J, H
        return impl

    holder = {}
    fwd = SmoothMap(dim, build(angle), inverse=lambda: holder["inv"], name="bump_rot")
    holder["inv"] = SmoothMap(dim, build(-angle), inverse=fwd, name="bump_rot^-1")
    return fwd


def bump_translation(center, radius: float, vector, kappa_max: float = 1.0) -> SmoothMap:
    """``x -> x + beta(|x - c|^2 / radius^2) v``; invertible when the slope bound kappa < 1."""
    c = np.asarray(center, dtype=float)
    v = np.asarray(vector, dtype=float)
    dim = c.size
    kappa = BUMP_SLOPE * np.linalg.norm(v) / radius
    if not kappa < kappa_max:
        raise PrimitiveError(f"bump translation slope bound kappa = {kappa:.3g} must be < 1")

    def impl(X, order):
        Y = X - c
        u = np.sum(Y**2, axis=1) / radius**2
        b, db, ddb = _bump(u)
        V = X + b[:, None] * v
        J = H = None
        if order >= 1:
            gu = 2 * Y / radius**2
            J = np.eye(dim) + np.einsum("i,pj->pij", v, db[:, None] * gu)
        if order >= 2:
            hb = (ddb[:, None, None] * np.einsum("pj,pk->pjk", gu, gu)
                  + db[:, None, None] * 2 * np.eye(dim) / radius**2)
            H = np.einsum("i,pjk->pijk", v, hb)
        return V, J, H

    fwd = SmoothMap(dim, impl, name="bump_shift")

    def guess(Y):
        u = np.sum((Y - c) ** 2, axis=1) / radius**2
        return Y - _bump(u)[0][:, None] * v

    fwd._inverse = NumericInverse(fwd, guess=guess, box=(c - radius, c + radius))
    fwd.kappa = kappa
    return fwd


def make_test_diffeo(recipe: Sequence[dict], dim: int) -> SmoothMap:
    """Compose primitive steps (applied in list order) into a test homeomorphism.

    Step kinds::

        {"kind": "bump_rotation", "center": [...], "radius": r, "angle": t, "plane": [i, j]}
        {"kind": "bump_translation", "center": [...], "radius": r, "vector": [...]}
        {"kind": "translation", "vector": [...]}
        {"kind": "dilation", "factor": f}

    The result carries ``support`` (a Ball outside which it is the identity)
    when the recipe only contains bump steps.
    """
    m = identity(dim)
    support: Ball | None = None
    compact = True
    for step in recipe:
        kind = step["kind"]
        if kind == "bump_rotation":
            s = bump_rotation(step["center"], step["radius"], step["angle"], step.get("plane", (0, 1)))
        elif kind == "bump_translation":
            s = bump_translation(step["center"], step["radius"], step["vector"])
        elif kind == "translation":
            s, compact = translation(step["vector"]), False
        elif kind == "dilation":
            s, compact = dilation(dim, float(step["factor"])), False
        else:
            raise PrimitiveError(f"unknown recipe step {kind!r}")
        if s.dim != dim:
            raise GeometryError(f"step {kind} lives in R^{s.dim}, recipe is in R^{dim}")
        if kind.startswith("bump"):
            ball = Ball(step["center"], step["radius"])
            support = ball if support is None else _enclosing(support, ball)
            if kind == "bump_translation":
                # the moved points stay inside the enlarged ball
                support = Ball(support.center, support.radius + float(np.linalg.norm(step["vector"])))
        m = s if m.name == "id" else compose(s, m)
    m.support = support if compact else None
    return m


def _enclosing(b1: Ball, b2: Ball) -> Ball:
    d = float(np.linalg.norm(b2.center - b1.center))
    if d + b2.radius <= b1.radius:
        return b1
    if d + b1.radius <= b2.radius:
        return b2
    r = (d + b1.radius + b2.radius) / 2
    c = b1.center + (r - b1.radius) * (b2.center - b1.center) / d
    return Ball(c, r)


def linear_map(A) -> SmoothMap:
    return affine(np.asarray(A, dtype=float), name="linear")
