"""Balls, regions and the two-ball normalization used by the collar pipeline.

Points are plain numpy arrays: a single point has shape ``(n,)`` and a batch
has shape ``(m, n)``.  Every region predicate is vectorized over batches.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

TAU_SEAM = 1e-9


class GeometryError(ValueError):
    """Invalid geometric input (degenerate collar, bad dimension, ...)."""


class UndecidableMembership(ValueError):
    """A point lies within the seam tolerance of a region boundary."""


def as_point(coords: Sequence[float], dim: int | None = None) -> np.ndarray:
    x = np.asarray(coords, dtype=float)
    if x.ndim != 1:
        raise GeometryError(f"a point must be one-dimensional, got shape {x.shape}")
    if x.size < 2:
        raise GeometryError("points need dimension n >= 2")
    if dim is not None and x.size != dim:
        raise GeometryError(f"expected a point in R^{dim}, got R^{x.size}")
    if not np.all(np.isfinite(x)):
        raise GeometryError("point coordinates must be finite")
    return x


def as_batch(x: np.ndarray) -> tuple[np.ndarray, bool]:
    """Return ``(X, single)`` with ``X`` of shape (m, n)."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        return x[None, :], True
    if x.ndim != 2:
        raise GeometryError(f"expected shape (n,) or (m, n), got {x.shape}")
    return x, False


def unit(dim: int, k: int) -> np.ndarray:
    """Coordinate vector e_k (0-based, so ``unit(n, n - 1)`` is e_n)."""
    e = np.zeros(dim)
    e[k] = 1.0
    return e


def sphere_points(n_points: int, dim: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.standard_normal((n_points, dim))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


# ---------------------------------------------------------------------------
# balls and regions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Ball:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", as_point(self.center))
        if not self.radius > 0 or not np.isfinite(self.radius):
            raise GeometryError(f"ball radius must be positive, got {self.radius}")

    @property
    def dim(self) -> int:
        return self.center.size

    def region(self) -> "BallRegion":
        return BallRegion(self)


def south_pole(b: Ball) -> np.ndarray:
    """The lowest point ``center - radius * e_n`` of the ball."""
    return b.center - b.radius * unit(b.dim, b.dim - 1)


def collar_gap(b1: Ball, b2: Ball) -> float:
    """dist(closure(b1), complement(b2)) for nested balls."""
    d = float(np.linalg.norm(b2.center - b1.center))
    return b2.radius - b1.radius - d


class Region:
    """Base class for membership predicates on R^n.

    ``margin`` is positive inside and negative outside.  For the analytic
    kinds it is the signed Euclidean distance to the boundary; for preimage
    kinds it is the margin of the image point in the target region.
    """

    dim: int

    def margin(self, x: np.ndarray) -> np.ndarray:  # pragma: no cover - abstract
        raise NotImplementedError

    def contains(self, x: np.ndarray) -> np.ndarray | bool:
        X, single = as_batch(x)
        inside = self.margin(X) > 0
        return bool(inside[0]) if single else inside

    def sample_boundary(self, n_points: int, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError(f"{type(self).__name__} has no boundary sampler")

    def bounds(self) -> tuple[np.ndarray, np.ndarray] | None:
        """Axis-aligned bounding box, or None when unknown/unbounded."""
        return None

    # region algebra
    def __and__(self, other: "Region") -> "Region":
        return Intersection((self, other))

    def __or__(self, other: "Region") -> "Region":
        return Union((self, other))

    def __sub__(self, other: "Region") -> "Region":
        return Difference(self, other)

    def __invert__(self) -> "Region":
        return Complement(self)


@dataclass(frozen=True, eq=False)
class BallRegion(Region):
    ball: Ball

    @property
    def dim(self) -> int:
        return self.ball.dim

    def margin(self, x):
        X, _ = as_batch(x)
        return self.ball.radius - np.linalg.norm(X - self.ball.center, axis=1)

    def sample_boundary(self, n_points, rng):
        return self.ball.center + self.ball.radius * sphere_points(n_points, self.dim, rng)

    def bounds(self):
        r = self.ball.radius
        return self.ball.center - r, self.ball.center + r


@dataclass(frozen=True, eq=False)
class HalfSpace(Region):
    """``{x : x[axis] > level}`` (or ``<`` when ``upper`` is False)."""

    dim: int
    level: float
    upper: bool = True
    axis: int = -1

    def margin(self, x):
        X, _ = as_batch(x)
        d = X[:, self.axis] - self.level
        return d if self.upper else -d


@dataclass(frozen=True, eq=False)
class Slab(Region):
    """``{x : lo < x[axis] < hi}``."""

    dim: int
    lo: float
    hi: float
    axis: int = -1

    def __post_init__(self):
        if not self.lo < self.hi:
            raise GeometryError("slab needs lo < hi")

    def margin(self, x):
        X, _ = as_batch(x)
        t = X[:, self.axis]
        return np.minimum(t - self.lo, self.hi - t)


@dataclass(frozen=True, eq=False)
class Box(Region):
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lo", np.asarray(self.lo, float))
        object.__setattr__(self, "hi", np.asarray(self.hi, float))

    @property
    def dim(self) -> int:
        return self.lo.size

    def margin(self, x):
        X, _ = as_batch(x)
        return np.minimum(X - self.lo, self.hi - X).min(axis=1)

    def bounds(self):
        return self.lo.copy(), self.hi.copy()


@dataclass(frozen=True, eq=False)
class Everything(Region):
    dim: int

    def margin(self, x):
        X, _ = as_batch(x)
        return np.full(X.shape[0], np.inf)


@dataclass(frozen=True, eq=False)
class Complement(Region):
    inner: Region

    @property
    def dim(self) -> int:
        return self.inner.dim

    def margin(self, x):
        return -self.inner.margin(x)

    def sample_boundary(self, n_points, rng):
        return self.inner.sample_boundary(n_points, rng)


@dataclass(frozen=True, eq=False)
class Intersection(Region):
    parts: tuple[Region, ...]

    @property
    def dim(self) -> int:
        return self.parts[0].dim

    def margin(self, x):
        X, _ = as_batch(x)
        return np.min([p.margin(X) for p in self.parts], axis=0)

    def sample_boundary(self, n_points, rng):
        return _filtered_boundary(self, self.parts, n_points, rng)

    def bounds(self):
        boxes = [b for b in (p.bounds() for p in self.parts) if b is not None]
        if not boxes:
            return None
        lo = np.max([b[0] for b in boxes], axis=0)
        hi = np.min([b[1] for b in boxes], axis=0)
        return lo, hi


@dataclass(frozen=True, eq=False)
class Union(Region):
    parts: tuple[Region, ...]

    @property
    def dim(self) -> int:
        return self.parts[0].dim

    def margin(self, x):
        X, _ = as_batch(x)
        return np.max([p.margin(X) for p in self.parts], axis=0)

    def sample_boundary(self, n_points, rng):
        return _filtered_boundary(self, self.parts, n_points, rng)

    def bounds(self):
        boxes = [p.bounds() for p in self.parts]
        if any(b is None for b in boxes):
            return None
        return np.min([b[0] for b in boxes], axis=0), np.max([b[1] for b in boxes], axis=0)


@dataclass(frozen=True, eq=False)
class Difference(Region):
    base: Region
    removed: Region

    @property
    def dim(self) -> int:
        return self.base.dim

    def margin(self, x):
        X, _ = as_batch(x)
        return np.minimum(self.base.margin(X), -self.removed.margin(X))

    def sample_boundary(self, n_points, rng):
        return _filtered_boundary(self, (self.base, self.removed), n_points, rng)

    def bounds(self):
        return self.base.bounds()


def _filtered_boundary(region: Region, parts, n_points, rng, band: float = 1e-7):
    chunks = []
    for part in parts:
        try:
            pts = part.sample_boundary(n_points, rng)
        except NotImplementedError:
            continue
        keep = np.abs(region.margin(pts)) <= band * max(1.0, float(np.abs(pts).max()))
        chunks.append(pts[keep])
    if not chunks:
        raise NotImplementedError("no boundary sampler for any part")
    return np.concatenate(chunks, axis=0)


@dataclass(frozen=True, eq=False)
class Preimage(Region):
    """``{x : m(x) in target}`` for a map ``m`` with a ``__call__``.

    Points where the map is singular are classified by ``at_singular``.
    """

    map: object
    target: Region
    at_singular: bool = False

    @property
    def dim(self) -> int:
        return self.map.dim

    def margin(self, x):
        X, _ = as_batch(x)
        out = np.full(X.shape[0], np.inf if self.at_singular else -np.inf)
        ok = ~_singular_mask(self.map, X)
        if np.any(ok):
            out[ok] = self.target.margin(self.map(X[ok]))
        return out

    def sample_boundary(self, n_points, rng):
        inv = getattr(self.map, "inverse", None)
        if inv is None:
            raise NotImplementedError("preimage boundary needs an inverse map")
        return inv(self.target.sample_boundary(n_points, rng))


def _singular_mask(m, X: np.ndarray) -> np.ndarray:
    pred = getattr(m, "singular", None)
    if pred is None:
        return np.zeros(X.shape[0], dtype=bool)
    return pred(X)


@dataclass(frozen=True, eq=False)
class TranslateUnion(Region):
    """Union of ``tau_k(base)`` for ``k >= k_min``, with ``tau_k(x) = x + k * period * e_1``.

    ``base`` must fit inside a ball of radius ``period / 2`` about the origin, so
    at most one translate can contain a given point.
    """

    base: Region
    period: float = 3.0
    k_min: int = 0
    k_max: int | None = None

    @property
    def dim(self) -> int:
        return self.base.dim

    def nearest_index(self, X: np.ndarray) -> np.ndarray:
        k = np.rint(X[:, 0] / self.period)
        k = np.maximum(k, self.k_min)
        if self.k_max is not None:
            k = np.minimum(k, self.k_max)
        return k.astype(int)

    def margin(self, x):
        X, _ = as_batch(x)
        k = self.nearest_index(X)
        Y = X.copy()
        Y[:, 0] -= self.period * k
        return self.base.margin(Y)


def region_contains(
    region: Region, x: np.ndarray, tol: float = TAU_SEAM, on_boundary: str = "raise"
) -> bool:
    """Membership of a single point with an explicit boundary policy.

    ``on_boundary`` is ``"raise"`` (signal :class:`UndecidableMembership`),
    ``"inside"`` or ``"outside"``.
    """
    x = as_point(x, region.dim)
    m = float(region.margin(x[None, :])[0])
    if abs(m) < tol:
        if on_boundary == "raise":
            raise UndecidableMembership(f"point within {tol:g} of region boundary (margin {m:.3g})")
        return on_boundary == "inside"
    return m > 0


# ---------------------------------------------------------------------------
# similarity maps and the two-ball normalization
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Similarity:
    """``x -> scale * Q @ x + shift`` with Q orthogonal."""

    rotation: np.ndarray
    shift: np.ndarray
    scale: float = 1.0

    @property
    def dim(self) -> int:
        return self.shift.size

    def __call__(self, x):
        return self.scale * np.asarray(x) @ self.rotation.T + self.shift

    def inverse(self) -> "Similarity":
        Qt = self.rotation.T
        return Similarity(Qt, -(Qt @ self.shift) / self.scale, 1.0 / self.scale)

    def then(self, other: "Similarity") -> "Similarity":
        """``other`` applied after ``self``."""
        return Similarity(
            other.rotation @ self.rotation,
            other.scale * other.rotation @ self.shift + other.shift,
            other.scale * self.scale,
        )

    @staticmethod
    def identity(dim: int) -> "Similarity":
        return Similarity(np.eye(dim), np.zeros(dim), 1.0)

    @staticmethod
    def dilation(dim: int, factor: float) -> "Similarity":
        return Similarity(np.eye(dim), np.zeros(dim), float(factor))

    @staticmethod
    def translation(v) -> "Similarity":
        v = np.asarray(v, float)
        return Similarity(np.eye(v.size), v.copy(), 1.0)


def rotation_taking(w: np.ndarray, target: np.ndarray) -> np.ndarray:
    """A proper rotation Q with ``Q @ w = target`` for unit vectors w, target."""
    dim = w.size
    if np.allclose(w, target, atol=1e-15):
        return np.eye(dim)
    v = w - target
    H = np.eye(dim) - 2.0 * np.outer(v, v) / (v @ v)
    # H is a reflection; a second reflection fixing ``target`` restores det = +1
    u = unit(dim, int(np.argmin(np.abs(target))))
    u = u - (u @ target) * target
    u /= np.linalg.norm(u)
    return (np.eye(dim) - 2.0 * np.outer(u, u)) @ H


@dataclass(frozen=True)
class NormalizedPair:
    similarity: Similarity
    ball1: Ball
    ball2: Ball
    tangent_radius: float
    south_pole_1: np.ndarray
    south_pole_2: np.ndarray

    @property
    def dim(self) -> int:
        return self.ball1.dim

    def check(self, tol: float = 1e-12) -> list[str]:
        """Return the list of violated invariants (empty when all hold)."""
        t, z = self.ball1.center, self.ball2.center
        r, r1, r2 = self.tangent_radius, self.ball1.radius, self.ball2.radius
        scale = max(1.0, r2)
        bad = []
        if np.abs(t[:-1]).max() > tol * scale or np.abs(z[:-1]).max() > tol * scale:
            bad.append("centers off the x_n axis")
        if not (t[-1] <= z[-1] + tol * scale and z[-1] <= tol * scale):
            bad.append("t_n <= z_n <= 0 violated")
        if abs(np.linalg.norm(t) - (r + r1)) > tol * scale:
            bad.append("|t| != r + r1")
        if abs(np.linalg.norm(z) - (r2 - r)) > tol * scale:
            bad.append("|z| != r2 - r")
        if not r1 < abs(t[-1]):
            bad.append("r1 >= |t_n|")
        tau, zeta = self.south_pole_1, self.south_pole_2
        if not zeta[-1] < tau[-1]:
            bad.append("zeta_n >= tau_n")
        if abs(np.linalg.norm(zeta - tau) - collar_gap(self.ball1, self.ball2)) > tol * scale:
            bad.append("|zeta - tau| != dist(B1, B2^c)")
        return bad


def normalize_balls(b1: Ball, b2: Ball) -> NormalizedPair:
    """Rigidly move nested balls so both centers sit on the negative x_n axis
    and the sphere of radius ``r = (d + r2 - r1) / 2`` about 0 touches both."""
    if b1.dim != b2.dim:
        raise GeometryError("balls live in different dimensions")
    dim = b1.dim
    d = float(np.linalg.norm(b1.center - b2.center))
    r1, r2 = b1.radius, b2.radius
    if not d + r1 < r2:
        raise GeometryError(
            f"closure(B1) must lie strictly inside B2 (d + r1 = {d + r1:g} >= r2 = {r2:g})"
        )
    r = 0.5 * (d + r2 - r1)
    en = unit(dim, dim - 1)
    w = (b1.center - b2.center) / d if d > 0 else -en
    Q = rotation_taking(w, -en)
    z = -(r2 - r) * en
    sim = Similarity(Q, z - Q @ b2.center, 1.0)
    nb1 = Ball(sim(b1.center), r1)
    nb2 = Ball(z, r2)
    # snap the off-axis coordinates, which are zero up to rounding
    nb1 = Ball(np.concatenate([np.zeros(dim - 1), nb1.center[-1:]]), r1)
    return NormalizedPair(sim, nb1, nb2, r, south_pole(nb1), south_pole(nb2))


# ---------------------------------------------------------------------------
# misc
# ---------------------------------------------------------------------------


def radial_extent(points: np.ndarray, center: np.ndarray | None = None) -> tuple[float, float]:
    """(min, max) distance of sample points from ``center`` (default 0)."""
    P = np.asarray(points)
    c = np.zeros(P.shape[1]) if center is None else center
    d = np.linalg.norm(P - c, axis=1)
    return float(d.min()), float(d.max())


__all__ = [
    "TAU_SEAM",
    "Ball",
    "BallRegion",
    "Box",
    "Complement",
    "Difference",
    "Everything",
    "GeometryError",
    "HalfSpace",
    "Intersection",
    "NormalizedPair",
    "Preimage",
    "Region",
    "Similarity",
    "Slab",
    "TranslateUnion",
    "UndecidableMembership",
    "Union",
    "as_batch",
    "as_point",
    "collar_gap",
    "normalize_balls",
    "region_contains",
    "south_pole",
    "sphere_points",
    "unit",
]
