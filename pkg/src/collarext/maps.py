"""Evaluatable maps with first and second derivatives.

A :class:`SmoothMap` wraps a vectorized implementation ``impl(X, order)``
returning ``(values, jacobians, hessians)`` for a batch ``X`` of shape (m, n),
where unrequested orders are ``None``.  Conventions::

    J[p, i, j] = d f_i / d x_j
    H[p, i, j, k] = d^2 f_i / (d x_j d x_k)

Maps built from pieces (compositions, inverses, piecewise gluing) carry
derivatives through the first- and second-order chain rule, so analytic
derivatives survive arbitrarily deep pipelines.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .geometry import TAU_SEAM, Region, Similarity, as_batch

TAU_INV = 1e-10

Impl = Callable[[np.ndarray, int], tuple]


class MapError(ValueError):
    pass


class DomainError(MapError):
    """Evaluation requested outside a map's domain."""


class SingularPointError(MapError):
    """Evaluation at a point where the formula is undefined."""


class InversionError(MapError):
    """Newton inversion did not reach the residual tolerance."""


class SeamError(MapError):
    """Adjacent branches of a piecewise map disagree on a seam."""

    def __init__(self, message: str, point: np.ndarray | None = None, gap: float = np.nan):
        super().__init__(message)
        self.point = point
        self.gap = gap


@dataclass(frozen=True)
class DerivativeBundle:
    value: np.ndarray
    jacobian: np.ndarray
    hessian: np.ndarray

    @property
    def jacobian_norm(self) -> float:
        return float(np.sqrt(np.sum(self.jacobian**2)))

    @property
    def hessian_norm(self) -> float:
        return float(np.sqrt(np.sum(self.hessian**2)))


def hs_norm(T: np.ndarray, batch: bool = True) -> np.ndarray:
    """Hilbert-Schmidt norm over all axes but the leading batch axis."""
    T = np.asarray(T)
    if not batch:
        return np.sqrt(np.sum(T**2))
    return np.sqrt(np.sum(T.reshape(T.shape[0], -1) ** 2, axis=1))


class SmoothMap:
    """An immutable, vectorized map R^dim -> R^out_dim.

    Parameters
    ----------
    dim, impl
        Input dimension and the batch implementation.
    analytic
        When False, ``impl`` only supplies values and derivatives come from
        central differences (steps ``1e-6 * scale`` and ``1e-4 * scale``,
        ``scale = max(1, |x|)``).
    inverse
        Another SmoothMap, or a zero-argument callable producing one (so
        mutually inverse maps can reference each other lazily).
    singular
        Optional predicate ``X -> bool mask`` of points where ``impl`` is
        undefined.
    """

    def __init__(
        self,
        dim: int,
        impl: Impl,
        *,
        out_dim: int | None = None,
        analytic: bool = True,
        domain: Region | None = None,
        inverse: "SmoothMap | Callable[[], SmoothMap] | None" = None,
        singular: Callable[[np.ndarray], np.ndarray] | None = None,
        name: str = "",
    ):
        self.dim = int(dim)
        self.out_dim = int(out_dim if out_dim is not None else dim)
        self._impl = impl
        self.analytic = analytic
        self.domain = domain
        self._inverse = inverse
        self.singular = singular
        self.name = name or "map"

    def __repr__(self):
        return f"SmoothMap({self.name!r}, dim={self.dim})"

    # -- inverse handle -------------------------------------------------
    @property
    def inverse(self) -> "SmoothMap | None":
        inv = self._inverse
        if inv is not None and not isinstance(inv, SmoothMap):
            inv = inv()
            self._inverse = inv
        return inv

    @property
    def has_inverse(self) -> bool:
        return self._inverse is not None

    # -- evaluation -------------------------------------------------------
    def eval(self, X: np.ndarray, order: int = 0) -> tuple:
        """Batch evaluation: returns ``(V, J, H)`` with unrequested entries None."""
        X = np.asarray(X, dtype=float)
        if self.singular is not None:
            bad = self.singular(X)
            if np.any(bad):
                raise SingularPointError(f"{self.name}: singular at {X[np.argmax(bad)]}")
        if self.analytic or order == 0:
            return self._impl(X, order)
        V = self._impl(X, 0)[0]
        J = fd_jacobian(self._value, X)
        H = fd_hessian(self._value, X) if order >= 2 else None
        return V, J, H

    def _value(self, X):
        return self._impl(X, 0)[0]

    def __call__(self, x):
        X, single = as_batch(x)
        V = self.eval(X, 0)[0]
        return V[0] if single else V

    def jacobian(self, x):
        X, single = as_batch(x)
        J = self.eval(X, 1)[1]
        return J[0] if single else J

    def hessian(self, x):
        X, single = as_batch(x)
        H = self.eval(X, 2)[2]
        return H[0] if single else H

    def derivatives(self, x) -> DerivativeBundle:
        X, single = as_batch(x)
        if not single:
            raise ValueError("derivatives() takes a single point; use eval() for batches")
        V, J, H = self.eval(X, 2)
        return DerivativeBundle(V[0], J[0], H[0])


# ---------------------------------------------------------------------------
# finite differences
# ---------------------------------------------------------------------------


def _scale(X):
    return np.maximum(1.0, np.linalg.norm(X, axis=1))


def fd_jacobian(f, X: np.ndarray, rel_step: float = 1e-6) -> np.ndarray:
    m, n = X.shape
    h = rel_step * _scale(X)
    cols = []
    for j in range(n):
        E = np.zeros_like(X)
        E[:, j] = h
        cols.append((f(X + E) - f(X - E)) / (2 * h[:, None]))
    return np.stack(cols, axis=2)


def fd_hessian(f, X: np.ndarray, rel_step: float = 1e-4) -> np.ndarray:
    m, n = X.shape
    h = rel_step * _scale(X)
    f0 = f(X)
    H = np.empty((m, f0.shape[1], n, n))
    for j in range(n):
        Ej = np.zeros_like(X)
        Ej[:, j] = h
        H[:, :, j, j] = (f(X + Ej) - 2 * f0 + f(X - Ej)) / (h**2)[:, None]
        for k in range(j + 1, n):
            Ek = np.zeros_like(X)
            Ek[:, k] = h
            d = f(X + Ej + Ek) - f(X + Ej - Ek) - f(X - Ej + Ek) + f(X - Ej - Ek)
            H[:, :, j, k] = H[:, :, k, j] = d / (4 * (h**2)[:, None])
    return H


def fd_map(m: SmoothMap) -> SmoothMap:
    """The same evaluator with finite-difference derivatives."""
    return SmoothMap(m.dim, m._impl, out_dim=m.out_dim, analytic=False, domain=m.domain,
                     singular=m.singular, name=f"fd({m.name})")


# ---------------------------------------------------------------------------
# elementary maps
# ---------------------------------------------------------------------------


def affine(A: np.ndarray, b: np.ndarray | None = None, name: str = "affine") -> SmoothMap:
    """``x -> A x + b`` with an analytic inverse when A is square and invertible."""
    A = np.asarray(A, dtype=float)
    k, n = A.shape
    b = np.zeros(k) if b is None else np.asarray(b, dtype=float)

    def impl(X, order):
        V = X @ A.T + b
        J = np.broadcast_to(A, (X.shape[0], k, n)) if order >= 1 else None
        H = np.zeros((X.shape[0], k, n, n)) if order >= 2 else None
        return V, J, H

    inverse = None
    if k == n and abs(np.linalg.det(A)) > 0:
        def inverse():
            Ai = np.linalg.inv(A)
            return affine(Ai, -Ai @ b, name=f"{name}^-1")
    return SmoothMap(n, impl, out_dim=k, inverse=inverse, name=name)


def identity(dim: int) -> SmoothMap:
    m = affine(np.eye(dim), name="id")
    m._inverse = m
    return m


def translation(v) -> SmoothMap:
    v = np.asarray(v, dtype=float)
    return affine(np.eye(v.size), v, name=f"translate{tuple(np.round(v, 6))}")


def dilation(dim: int, factor: float) -> SmoothMap:
    return affine(factor * np.eye(dim), name=f"dilate({factor:g})")


def from_similarity(s: Similarity, name: str = "similarity") -> SmoothMap:
    return affine(s.scale * s.rotation, s.shift, name=name)


def tau(dim: int, k: float, period: float = 3.0) -> SmoothMap:
    """Horizontal translation ``x -> x + 3k e_1``."""
    v = np.zeros(dim)
    v[0] = period * k
    return translation(v)


# ---------------------------------------------------------------------------
# composition and inversion
# ---------------------------------------------------------------------------


def chain_rule(J_out, H_out, J_in, H_in, order):
    """Derivatives of ``outer o inner`` from derivatives of the parts."""
    J = np.einsum("pil,plj->pij", J_out, J_in) if order >= 1 else None
    H = None
    if order >= 2:
        H = np.einsum("pil,pljk->pijk", J_out, H_in) + np.einsum(
            "pilm,plj,pmk->pijk", H_out, J_in, J_in, optimize=True
        )
    return J, H


def compose(outer: SmoothMap, inner: SmoothMap, samples: np.ndarray | None = None) -> SmoothMap:
    """``outer o inner``.  With ``samples``, checks that inner maps them into outer's domain."""
    if inner.out_dim != outer.dim:
        raise DomainError(f"cannot compose {outer.name} (R^{outer.dim}) with {inner.name} -> R^{inner.out_dim}")
    if samples is not None and outer.domain is not None:
        Y = inner(np.atleast_2d(samples))
        inside = outer.domain.contains(Y)
        if not np.all(inside):
            bad = np.atleast_2d(samples)[np.argmin(inside)]
            raise DomainError(f"{inner.name} maps {bad} outside the domain of {outer.name}")

    def impl(X, order):
        Vi, Ji, Hi = inner.eval(X, order)
        Vo, Jo, Ho = outer.eval(Vi, order)
        J, H = chain_rule(Jo, Ho, Ji, Hi, order)
        return Vo, J, H

    inverse = None
    if inner.has_inverse and outer.has_inverse:
        def inverse():
            return compose(inner.inverse, outer.inverse)
    return SmoothMap(inner.dim, impl, out_dim=outer.out_dim, domain=inner.domain,
                     inverse=inverse, singular=inner.singular,
                     name=f"{outer.name}∘{inner.name}")


def compose_all(*maps: SmoothMap) -> SmoothMap:
    """``compose_all(f, g, h) = f o g o h``."""
    out = maps[-1]
    for m in reversed(maps[:-1]):
        out = compose(m, out)
    return out


def inverse_derivatives(J, H, order):
    """Derivatives of ``m^-1`` at ``m(x)`` from those of ``m`` at ``x``."""
    A = np.linalg.inv(J)
    Hi = None
    if order >= 2:
        Hi = -np.einsum("pia,pabc,pbj,pck->pijk", A, H, A, A, optimize=True)
    return A, Hi


def newton_solve(
    m: SmoothMap,
    Y: np.ndarray,
    X0: np.ndarray | None = None,
    tol: float = TAU_INV,
    max_iter: int = 64,
    box: tuple[np.ndarray, np.ndarray] | None = None,
) -> np.ndarray:
    """Solve ``m(X) = Y`` row-wise by damped Newton (step halving).

    Rows that fail from ``X0`` are restarted from a 3 x ... x 3 grid over
    ``box``; rows still failing raise :class:`InversionError`.
    """
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    X = Y.copy() if X0 is None else np.array(X0, dtype=float, copy=True)
    X, ok = _newton(m, Y, X, tol, max_iter)
    if not np.all(ok):
        if box is None and m.domain is not None:
            box = m.domain.bounds()
        if box is not None:
            lo, hi = box
            for start in itertools.product(*[np.linspace(l, h, 3) for l, h in zip(lo, hi)]):
                idx = np.flatnonzero(~ok)
                if idx.size == 0:
                    break
                Xs = np.broadcast_to(np.asarray(start), (idx.size, m.dim)).copy()
                Xs, oks = _newton(m, Y[idx], Xs, tol, max_iter)
                X[idx[oks]] = Xs[oks]
                ok[idx[oks]] = True
    if not np.all(ok):
        worst = Y[np.argmin(ok)]
        raise InversionError(f"{m.name}: Newton did not converge for y = {worst}")
    return _polish(m, Y, X)


def _polish(m, Y, X):
    """One extra full Newton step, kept only where it lowers the residual."""
    V, J, _ = m.eval(X, 1)
    R = V - Y
    try:
        Xp = X - np.linalg.solve(J, R[:, :, None])[:, :, 0]
    except np.linalg.LinAlgError:
        return X
    better = np.linalg.norm(m(Xp) - Y, axis=1) < np.linalg.norm(R, axis=1)
    X[better] = Xp[better]
    return X


def _newton(m, Y, X, tol, max_iter):
    scale = np.maximum(1.0, np.linalg.norm(Y, axis=1))
    V, J, _ = m.eval(X, 1)
    V, J = np.array(V), np.array(J)
    R = V - Y
    res = np.linalg.norm(R, axis=1)
    for _ in range(max_iter):
        active = res > tol * scale
        if not np.any(active):
            break
        idx = np.flatnonzero(active)
        try:
            step = np.linalg.solve(J[idx], R[idx][:, :, None])[:, :, 0]
        except np.linalg.LinAlgError:
            step = np.einsum("pij,pj->pi", np.linalg.pinv(J[idx]), R[idx])
        t = np.ones(idx.size)
        pending = np.ones(idx.size, dtype=bool)
        for _ in range(30):
            Xt = X[idx] - t[:, None] * step
            Vt, Jt, _ = m.eval(Xt, 1)
            rt = np.linalg.norm(Vt - Y[idx], axis=1)
            better = pending & (rt < res[idx])
            sel = idx[better]
            X[sel], V[sel], J[sel], res[sel] = Xt[better], Vt[better], Jt[better], rt[better]
            R[sel] = Vt[better] - Y[sel]
            pending &= ~better
            if not np.any(pending):
                break
            t[pending] *= 0.5
        if np.all(pending):
            break
    return X, res <= tol * scale


class NumericInverse(SmoothMap):
    """Inverse of ``m`` by Newton iteration (or a supplied ``solver``);
    derivatives come from the inverse function theorem."""

    def __init__(self, m: SmoothMap, guess: Callable[[np.ndarray], np.ndarray] | None = None,
                 box=None, tol: float = TAU_INV, solver: Callable[[np.ndarray], np.ndarray] | None = None,
                 name: str | None = None):
        self.forward = m

        def impl(Y, order):
            if solver is not None:
                X = solver(Y)
            else:
                X0 = guess(Y) if guess is not None else None
                X = newton_solve(m, Y, X0, tol=tol, box=box)
            if order == 0:
                return X, None, None
            _, J, H = m.eval(X, order)
            A, Hi = inverse_derivatives(J, H, order)
            return X, A, Hi

        super().__init__(m.out_dim, impl, out_dim=m.dim, inverse=m, name=name or f"{m.name}^-1")


def invert(m: SmoothMap, y) -> np.ndarray:
    """Preimage of y: the analytic inverse when present, Newton otherwise."""
    Y, single = as_batch(y)
    X = m.inverse(Y) if m.has_inverse else newton_solve(m, Y)
    return X[0] if single else X


# ---------------------------------------------------------------------------
# piecewise maps
# ---------------------------------------------------------------------------


class PiecewiseMap(SmoothMap):
    """Branch dispatch by region, first match wins."""

    def __init__(self, branches: Sequence[tuple[Region, SmoothMap]], seam_tolerance: float = TAU_SEAM,
                 *, inverse=None, domain: Region | None = None, name: str = "piecewise"):
        self.branches = tuple(branches)
        self.seam_tolerance = seam_tolerance
        dim = self.branches[0][1].dim
        out_dim = self.branches[0][1].out_dim
        super().__init__(dim, self._dispatch, out_dim=out_dim, inverse=inverse, domain=domain, name=name)

    def branch_index(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(X)
        idx = np.full(X.shape[0], -1)
        for b, (region, _) in enumerate(self.branches):
            open_ = idx < 0
            if not np.any(open_):
                break
            hit = np.zeros_like(open_)
            hit[open_] = region.contains(X[open_])
            idx[hit] = b
        return idx

    def _dispatch(self, X, order):
        idx = self.branch_index(X)
        if np.any(idx < 0):
            raise DomainError(f"{self.name}: no branch covers {X[np.argmin(idx)]}")
        m = X.shape[0]
        V = np.empty((m, self.out_dim))
        J = np.empty((m, self.out_dim, self.dim)) if order >= 1 else None
        H = np.empty((m, self.out_dim, self.dim, self.dim)) if order >= 2 else None
        for b, (_, branch) in enumerate(self.branches):
            sel = idx == b
            if not np.any(sel):
                continue
            v, j, h = branch.eval(X[sel], order)
            V[sel] = v
            if order >= 1:
                J[sel] = j
            if order >= 2:
                H[sel] = h
        return V, J, H

    def seam_gaps(self, points: np.ndarray, band: float | None = None) -> tuple[float, np.ndarray | None]:
        """Largest disagreement between branches whose regions reach the given points.

        A branch participates at a point when the point lies inside its region
        or within ``band`` of it.
        """
        band = 10 * self.seam_tolerance if band is None else band
        P = np.atleast_2d(points)
        worst, where = 0.0, None
        values = []
        for region, branch in self.branches:
            near = region.margin(P) > -band
            v = np.full((P.shape[0], self.out_dim), np.nan)
            if np.any(near):
                try:
                    v[near] = branch(P[near])
                except MapError:
                    pass
            values.append(v)
        for a, b in itertools.combinations(range(len(values)), 2):
            gap = np.linalg.norm(values[a] - values[b], axis=1)
            gap = np.where(np.isnan(gap), -1.0, gap)
            i = int(np.argmax(gap))
            if gap[i] > worst:
                worst, where = float(gap[i]), P[i]
        return worst, where


def glue(branches: Sequence[tuple[Region, SmoothMap]], tol: float = TAU_SEAM,
         seam_points: np.ndarray | None = None, *, n_seam: int = 256, seed: int = 0,
         inverse=None, domain: Region | None = None, name: str = "glued") -> PiecewiseMap:
    """Build a piecewise map and verify seam consistency.

    Seam points are the given ``seam_points`` plus boundary samples of every
    branch region that provides a boundary sampler.  Raises
    :class:`SeamError` with the worst offending point when branches
    disagree by more than ``tol``.
    """
    pw = PiecewiseMap(branches, tol, inverse=inverse, domain=domain, name=name)
    rng = np.random.default_rng(seed)
    pts = [] if seam_points is None else [np.atleast_2d(seam_points)]
    for region, _ in pw.branches:
        try:
            pts.append(region.sample_boundary(n_seam, rng))
        except (NotImplementedError, MapError):
            continue
    if pts:
        gap, where = pw.seam_gaps(np.concatenate(pts, axis=0))
        if gap > tol:
            raise SeamError(f"{name}: branches disagree by {gap:.3g} at {where}", where, gap)
    return pw


def evaluate(m: SmoothMap, x) -> np.ndarray:
    """Single-point evaluation with a domain check."""
    x = np.asarray(x, dtype=float)
    if m.domain is not None and not m.domain.contains(x):
        raise DomainError(f"{x} is outside the domain of {m.name}")
    return m(x)


def derivatives(m: SmoothMap, x) -> DerivativeBundle:
    """Value, Jacobian and Hessian at a single interior point."""
    x = np.asarray(x, dtype=float)
    if m.domain is not None:
        margin = float(m.domain.margin(x[None, :])[0])
        need = 0.0 if m.analytic else 2e-4 * max(1.0, float(np.linalg.norm(x)))
        if margin <= need:
            raise DomainError(f"{x} lacks the interior margin {need:g} in the domain of {m.name}")
    return m.derivatives(x)
