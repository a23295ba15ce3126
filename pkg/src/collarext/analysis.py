"""Numerical verifiers: Lipschitz and Sobolev estimators, slab and psi probes,
agreement meters and regularity certification.

Every randomized estimator draws its samples in fixed-size chunks, each chunk
seeded by ``SeedSequence([seed, stream, chunk])``.  Chunks may be evaluated by
any number of worker threads; maxima are exact and sums are taken with
``math.fsum`` in chunk order, so the results do not depend on the worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from .geometry import (
    TAU_SEAM,
    Ball,
    GeometryError,
    NormalizedPair,
    Region,
    Similarity,
    sphere_points,
    unit,
)
from .maps import MapError, SmoothMap, hs_norm, inverse_derivatives
from .primitives import InversionParams, make_inversion

CHUNK = 4096
NEAR_DIAGONAL = (1e-3, 1e-5)


class AnalysisError(ValueError):
    pass


# ---------------------------------------------------------------------------
# deterministic chunked sampling
# ---------------------------------------------------------------------------


def chunk_rng(seed: int, stream: int, chunk: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(stream), int(chunk)]))


def chunk_sizes(total: int, size: int = CHUNK) -> list[int]:
    full, rest = divmod(int(total), size)
    return [size] * full + ([rest] if rest else [])


def run_chunks(fn: Callable[[int, int], object], total: int, workers: int = 1,
               size: int = CHUNK) -> list:
    """Evaluate ``fn(chunk_index, chunk_size)`` for every chunk, results in chunk order."""
    sizes = chunk_sizes(total, size)
    if workers <= 1 or len(sizes) <= 1:
        return [fn(i, s) for i, s in enumerate(sizes)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(len(sizes)), sizes))


def sample_region(region: Region, n_points: int, rng: np.random.Generator,
                  box: tuple[np.ndarray, np.ndarray] | None = None, max_rounds: int = 200) -> np.ndarray:
    """Uniform samples of a bounded region by rejection from its bounding box."""
    box = region.bounds() if box is None else box
    if box is None:
        raise AnalysisError("region sampling needs a bounded region (no bounding box known)")
    lo, hi = (np.asarray(v, float) for v in box)
    out, have = [], 0
    for _ in range(max_rounds):
        X = rng.uniform(lo, hi, size=(max(n_points, 64), lo.size))
        X = X[region.contains(X)]
        out.append(X)
        have += len(X)
        if have >= n_points:
            return np.concatenate(out)[:n_points]
    raise AnalysisError(f"region sampling failed: {have} of {n_points} points after {max_rounds} rounds "
                        "(region measure too small for its bounding box)")


# ---------------------------------------------------------------------------
# Lipschitz estimation
# ---------------------------------------------------------------------------


def _ratios(m: SmoothMap, X: np.ndarray, Y: np.ndarray, inverse: bool = False) -> np.ndarray:
    d = np.linalg.norm(X - Y, axis=1)
    e = np.linalg.norm(m(X) - m(Y), axis=1)
    keep = d > 0
    if inverse:
        keep &= e > 0
        return d[keep] / e[keep]
    return e[keep] / d[keep]


def lipschitz_estimate(m: SmoothMap, region: Region, n_pairs: int = 20000, seed: int = 0, *,
                       box=None, inverse: bool = False, workers: int = 1,
                       near: Sequence[float] = NEAR_DIAGONAL) -> float:
    """Largest sampled difference quotient ``|m(x) - m(y)| / |x - y|`` over the region.

    Uses ``n_pairs`` random pairs plus, for every first point, a near-diagonal
    partner at each distance in ``near``.  With ``inverse=True`` the reciprocal
    quotient is maximized, which estimates the Lipschitz constant of ``m^-1``
    on ``m(region)``.  The result is a lower bound for the true constant.
    """

    def chunk(i, size):
        rng = chunk_rng(seed, 1, i)
        X = sample_region(region, size, rng, box)
        Y = sample_region(region, size, rng, box)
        best = _ratios(m, X, Y, inverse)
        best = [best.max(initial=0.0)]
        for h in near:
            W = X + h * sphere_points(size, X.shape[1], rng)
            ok = region.contains(W)
            if np.any(ok):
                best.append(_ratios(m, X[ok], W[ok], inverse).max(initial=0.0))
        return max(best)

    return float(max(run_chunks(chunk, n_pairs, workers)))


# ---------------------------------------------------------------------------
# Sobolev quadrature
# ---------------------------------------------------------------------------


def _hessian_density(m: SmoothMap, X: np.ndarray, p: float, inverse: bool = False) -> np.ndarray:
    """|D^2 m|^p at X, or |D^2 m^-1 (m(x))|^p |det Dm(x)| (the change of variables
    that moves the integral of the inverse onto m's domain)."""
    _, J, H = m.eval(X, 2)
    if not inverse:
        return hs_norm(H) ** p
    _, Hi = inverse_derivatives(J, H, 2)
    return hs_norm(Hi) ** p * np.abs(np.linalg.det(J))


def _grid_chunk(lo, hi, cells, start, size):
    """Cell midpoints number start..start+size-1 of a regular grid (C order)."""
    idx = np.arange(start, start + size)
    coords = np.stack(np.unravel_index(idx, cells), axis=1)
    h = (hi - lo) / np.asarray(cells)
    return lo + (coords + 0.5) * h


@dataclass
class QuadratureLevel:
    level: int
    estimate: float
    points: int
    excluded_points: int
    excluded_measure: float


def _cell_density(m, region, X, h, p, band, inverse, sub):
    """Integrand weights for cells with midpoints X and side lengths h.

    Cells whose midpoint is within half a diagonal of the region boundary are
    split into ``sub^dim`` subcells so the curved boundary is resolved to
    second order.  Returns (sum of density * volume fraction, dropped count).
    """
    dim = X.shape[1]
    margin = region.margin(X)
    half_diag = 0.5 * float(np.linalg.norm(h))
    interior = margin > half_diag
    straddle = (margin > -half_diag) & ~interior
    offs = (np.stack(np.meshgrid(*[np.arange(sub)] * dim, indexing="ij"), -1).reshape(-1, dim)
            + 0.5) / sub - 0.5
    Xs = (X[straddle][:, None, :] + offs[None] * h).reshape(-1, dim)
    ms = region.margin(Xs)
    P = np.vstack([X[interior], Xs[ms > band]])
    w = np.concatenate([np.ones(int(interior.sum())), np.full(int((ms > band).sum()), sub**-dim)])
    dropped = int(np.sum(np.abs(ms) <= band))
    if len(P) == 0:
        return 0.0, dropped
    try:
        dens = _hessian_density(m, P, p, inverse)
    except MapError:
        dens = np.empty(len(P))
        for j in range(len(P)):
            try:
                dens[j] = _hessian_density(m, P[j:j + 1], p, inverse)[0]
            except MapError:
                dens[j] = np.nan
    bad = ~np.isfinite(dens)
    return math.fsum((dens[~bad] * w[~bad]).tolist()), dropped + int(bad.sum())


def sobolev_seminorm(m: SmoothMap, region: Region, p: float, levels: int = 4, *, box=None,
                     base_cells: int = 8, band: float = 2 * TAU_SEAM, inverse: bool = False,
                     subcells: int | None = None, workers: int = 1, detail: bool = False) -> list:
    """Midpoint-rule estimates of ``∫_region |D^2 m|^p`` on dyadic grids.

    Level L uses ``base_cells * 2^L`` cells per axis over the region's bounding
    box (or ``box``).  Cells cut by the region boundary are subdivided.  Points
    within ``band`` of the boundary, or at which m is singular or non-finite,
    are dropped and their measure is accounted in the detailed output.
    With ``inverse=True`` the integrand is ``|D^2 m^-1 (m(x))|^p |det Dm(x)|``,
    i.e. the seminorm of the inverse over ``m(region)``.  Returns
    ``[(level, estimate)]`` (or :class:`QuadratureLevel` records with ``detail=True``).
    """
    if p < 1:
        raise AnalysisError("p must be >= 1")
    box = region.bounds() if box is None else box
    if box is None:
        raise AnalysisError("quadrature needs a bounded region or an explicit box")
    lo, hi = (np.asarray(v, float) for v in box)
    dim = lo.size
    sub = subcells or (8 if dim <= 2 else 4)
    out = []
    for L in range(levels):
        k = base_cells * 2**L
        cells = (k,) * dim
        h = (hi - lo) / k
        vol = float(np.prod(h))

        def chunk(i, size, cells=cells, h=h):
            X = _grid_chunk(lo, hi, cells, i * CHUNK, size)
            return _cell_density(m, region, X, h, p, band, inverse, sub)

        parts = run_chunks(chunk, k**dim, workers)
        est = math.fsum(v for v, _ in parts) * vol
        n_drop = sum(d for _, d in parts)
        out.append(QuadratureLevel(L, est, k**dim, n_drop, n_drop * vol * sub**-dim))
    return out if detail else [(q.level, q.estimate) for q in out]


def is_cauchy(seq: Sequence, rel_tol: float = 0.02) -> bool:
    """Whether the last two estimates agree to ``rel_tol`` (relative)."""
    vals = [v for _, v in seq] if seq and isinstance(seq[0], tuple) else list(seq)
    if len(vals) < 2:
        return False
    a, b = vals[-2], vals[-1]
    return abs(b - a) <= rel_tol * max(abs(a), abs(b), 1e-300) or max(abs(a), abs(b)) == 0.0


def growth_ratios(seq: Sequence) -> list[float]:
    vals = [v for _, v in seq] if seq and isinstance(seq[0], tuple) else list(seq)
    return [b / a if a else np.inf for a, b in zip(vals, vals[1:])]


# ---------------------------------------------------------------------------
# agreement and exponent checks
# ---------------------------------------------------------------------------


def agreement_residual(f: SmoothMap, F: SmoothMap, region: Region, n_samples: int = 10000,
                       seed: int = 0, *, box=None, points: np.ndarray | None = None,
                       workers: int = 1) -> float:
    """Sampled ``sup |F(x) - f(x)|`` over ``region`` (or over explicit ``points``)."""
    if points is not None:
        P = np.asarray(points, float)
        if len(P) == 0:
            raise AnalysisError("empty sample set")
        return float(np.max(np.linalg.norm(F(P) - f(P), axis=1)))
    if n_samples <= 0:
        raise AnalysisError("empty sample set")

    def chunk(i, size):
        X = sample_region(region, size, chunk_rng(seed, 3, i), box)
        return float(np.max(np.linalg.norm(F(X) - f(X), axis=1)))

    return float(max(run_chunks(chunk, n_samples, workers)))


def integrability_exponent(n: int, p: float, a: float) -> float:
    """Power of t in the radial integrand ``t^(n-1) * t^(-(n-p)(1/a+1))``."""
    return (n - 1) - (n - p) * (1.0 / a + 1.0)


def exponent_check(n: int, p: float, a: float) -> bool:
    """Whether the radial integrand exponent is below -1 (integrable at 0).

    Exponents within rounding of -1 count as the divergent borderline case.
    """
    if not (1 <= p < n and a > 0):
        raise AnalysisError("exponent_check needs 1 <= p < n and a > 0")
    e = integrability_exponent(n, p, a)
    return e < -1 - 1e-12 * max(1.0, abs(e))


# ---------------------------------------------------------------------------
# slab separation and the psi probe
# ---------------------------------------------------------------------------


def psi(a, alpha, r: float, r2: float):
    """``((2 r2 - r) cos^(1/a) alpha - (r2 - r) cos alpha)^2 + (r2 - r)^2 sin^2 alpha``."""
    a = np.asarray(a, float)
    c, s = np.cos(alpha), np.sin(alpha)
    return ((2 * r2 - r) * c ** (1.0 / a) - (r2 - r) * c) ** 2 + (r2 - r) ** 2 * s**2


def psi_probe(a_grid, alpha_grid, r: float, r2: float) -> list[dict]:
    """Evaluate psi on the grid; each row flags whether psi < r2^2."""
    if not 0 < r < r2:
        raise AnalysisError("psi_probe needs 0 < r < r2")
    rows = []
    for a in a_grid:
        for al in alpha_grid:
            v = float(psi(a, al, r, r2))
            rows.append({"a": float(a), "alpha": float(al), "psi": v, "below": v < r2**2})
    return rows


def standard_pair(r1: float, r2: float, r: float, dim: int) -> NormalizedPair:
    """The normalized pair with ball radii r1, r2 and tangent-sphere radius r.

    Concretely ``B1 = B(-(r + r1) e_n, r1)`` and ``B2 = B(-(r2 - r) e_n, r2)``.
    """
    en = unit(dim, dim - 1)
    b1 = Ball(-(r + r1) * en, r1)
    b2 = Ball(-(r2 - r) * en, r2)
    pair = NormalizedPair(Similarity.identity(dim), b1, b2, r, b1.center - r1 * en,
                          b2.center - r2 * en)
    bad = pair.check()
    if bad:
        raise GeometryError("; ".join(bad))
    return pair


@dataclass
class SlabReport:
    a: float
    c1: float
    c2: float
    separated: bool
    pole_images: tuple
    psi_samples: list = field(default_factory=list)
    c2_closure: float = 0.0
    boundary_separated: bool = False
    closure_separated: bool = False
    poles_ordered: bool = False
    claims_hold: bool = False
    exact: dict | None = None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["pole_images"] = [float(v) for v in self.pole_images]
        d["psi_samples"] = [[float(x), float(y)] for x, y in self.psi_samples]
        return d


def conformal_image_levels(pair: NormalizedPair) -> tuple[float, float]:
    """Exact (sup x_n over I(B1), inf x_n over I(boundary of B2)) for a = 1.

    Uses the image of a sphere under the classical inversion of radius r:
    centre ``c r^2 / (|c|^2 - rho^2)``, radius ``rho r^2 / ||c|^2 - rho^2|``.
    """
    r = pair.tangent_radius

    def image(b):
        c, rho = b.center, b.radius
        q = c @ c - rho**2
        return c * r**2 / q, rho * r**2 / abs(q)

    c1c, c1r = image(pair.ball1)
    c2c, c2r = image(pair.ball2)
    return float(c1c[-1] + c1r), float(c2c[-1] - c2r)


ALPHA_GRID = tuple(np.linspace(0.0, np.pi / 2, 9)[1:-1])


def slab_separation(params: InversionParams, pair: NormalizedPair, n_samples: int = 20000,
                    seed: int = 0, *, workers: int = 1, tol: float = 1e-9,
                    alpha_grid=ALPHA_GRID) -> SlabReport:
    """Sampled slab levels of the inversion images of a normalized pair.

    ``c1`` is the largest x_n over I of boundary and interior samples of B1;
    ``c2`` is the smallest x_n over I of boundary samples of B2.  Far points of
    the complement of B2 map towards the origin, so the closure of I(B2^c)
    also contains 0; ``c2_closure = min(c2, 0)`` is the level for that reading.
    """
    if abs(params.radius - pair.tangent_radius) > 1e-12 * max(1.0, pair.tangent_radius):
        raise AnalysisError("inversion radius must equal the tangent radius of the pair")
    dim = pair.dim
    I = make_inversion(params, dim)
    b1, b2 = pair.ball1, pair.ball2

    def top(i, size):
        rng = chunk_rng(seed, 5, i)
        nb = size // 2
        P = b1.center + b1.radius * sphere_points(nb, dim, rng)
        u = sphere_points(size - nb, dim, rng)
        rad = b1.radius * rng.random(size - nb) ** (1.0 / dim)
        Q = b1.center + rad[:, None] * u
        return float(I(np.vstack([P, Q]))[:, -1].max())

    def bottom(i, size):
        P = b2.center + b2.radius * sphere_points(size, dim, chunk_rng(seed, 6, i))
        return float(I(P)[:, -1].min())

    c1 = float(max(run_chunks(top, n_samples, workers)))
    c2 = float(min(run_chunks(bottom, n_samples, workers)))
    tau_p = I(pair.south_pole_1[None])[0]
    zeta_p = I(pair.south_pole_2[None])[0]
    poles = (float(tau_p[-1]), float(zeta_p[-1]))
    poles_ordered = bool(
        poles[0] < poles[1]
        and abs(poles[0] + np.linalg.norm(tau_p)) <= tol
        and abs(poles[1] + np.linalg.norm(zeta_p)) <= tol
    )
    c2_closure = min(c2, 0.0)
    boundary_sep = c1 < c2
    closure_sep = c1 < c2_closure
    claims = bool(boundary_sep and c1 <= poles[0] + tol and c2 >= poles[1] - tol)
    exact = None
    if params.exponent == 1.0:
        e1, e2 = conformal_image_levels(pair)
        exact = {"c1": e1, "c2": e2, "separated": e1 < e2}
    r, r2 = pair.tangent_radius, b2.radius
    samples = [(float(al), float(psi(params.exponent, al, r, r2))) for al in alpha_grid]
    return SlabReport(
        a=float(params.exponent), c1=c1, c2=c2, separated=bool(boundary_sep),
        pole_images=poles, psi_samples=samples, c2_closure=c2_closure,
        boundary_separated=bool(boundary_sep), closure_separated=bool(closure_sep),
        poles_ordered=poles_ordered, claims_hold=claims, exact=exact,
    )


# ---------------------------------------------------------------------------
# regularity certification
# ---------------------------------------------------------------------------


@dataclass
class Tolerances:
    """Thresholds for :func:`certify_LW`."""

    lipschitz_growth: float = 0.25  # allowed relative growth along the exhaustion
    cauchy: float = 0.02  # relative gap between the last two quadrature levels
    round_trip: float = 1e-8
    n_pairs: int = 4000
    levels: int = 3
    exhaustion: int = 4
    base_cells: int = 8


@dataclass
class RegularityReport:
    map_id: str
    lipschitz_lower: float
    lipschitz_inverse_lower: float
    sobolev_seq: list
    sobolev_inverse_seq: list
    agreement_sup: float
    flags: dict
    seed: int
    lipschitz_seq: list = field(default_factory=list)
    lipschitz_inverse_seq: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(self.flags.values())

    def to_dict(self) -> dict:
        d = asdict(self)
        d["sobolev_seq"] = [[int(a), float(b)] for a, b in self.sobolev_seq]
        d["sobolev_inverse_seq"] = [[int(a), float(b)] for a, b in self.sobolev_inverse_seq]
        d["passed"] = self.passed
        return d


def exhaustion(region: Region, punctures: Sequence, radius: float, steps: int) -> list[Region]:
    """``region`` minus balls of radius ``radius * 4^-j`` about each puncture, j = 0..steps-1.

    Without punctures the same region is returned ``steps`` times; the
    estimators then grow their sample budgets instead.
    """
    from .geometry import BallRegion, Difference, Union

    if not punctures:
        return [region] * steps
    out = []
    for j in range(steps):
        rho = radius * 4.0**-j
        holes = [BallRegion(Ball(np.asarray(c, float), rho)) for c in punctures]
        out.append(Difference(region, holes[0] if len(holes) == 1 else Union(tuple(holes))))
    return out


def _puncture_shells(K: Region, punctures: Sequence, rho: float) -> list[Region]:
    """The parts of K within ``2 rho`` of each puncture, which uniform sampling of
    K would almost never reach."""
    from .geometry import BallRegion, Intersection

    return [Intersection((K, BallRegion(Ball(np.asarray(c, float), 2 * rho)))) for c in punctures]


def _stable(seq: Sequence[float], growth: float) -> bool:
    vals = np.asarray(seq, float)
    if not np.all(np.isfinite(vals)):
        return False
    return bool(vals[-1] <= (1 + growth) * vals[-2]) if len(vals) > 1 else True


def certify_LW(m: SmoothMap, region: Region, p: float, tolerances: Tolerances | None = None, *,
               seed: int = 0, punctures: Sequence = (), puncture_radius: float = 0.1,
               workers: int = 1) -> RegularityReport:
    """Numerical evidence that ``m`` is of class LW^p_2 on ``region``.

    Lipschitz estimates of m and m^-1 are taken along a compact exhaustion of
    the region (shrinking holes around ``punctures``, or growing sample
    budgets); they must stay finite and stop growing.  Quadrature sequences of
    ``|D^2 m|^p`` and ``|D^2 m^-1|^p`` must be Cauchy, and the inverse handle
    must round-trip.  This is evidence, not proof.
    """
    tol = tolerances or Tolerances()
    if not m.has_inverse:
        raise AnalysisError("certify_LW needs a map with an inverse handle")
    regions = exhaustion(region, punctures, puncture_radius, tol.exhaustion)
    lip, lip_inv = [], []
    for j, K in enumerate(regions):
        n = tol.n_pairs * (1 if punctures else 2**j)
        parts = [K] + _puncture_shells(K, punctures, puncture_radius * 4.0**-j)
        lip.append(max(lipschitz_estimate(m, P, n, seed + j, workers=workers) for P in parts))
        lip_inv.append(max(lipschitz_estimate(m, P, n, seed + j, inverse=True, workers=workers)
                           for P in parts))
    inner = regions[0]
    sob = sobolev_seminorm(m, inner, p, tol.levels, base_cells=tol.base_cells, workers=workers)
    sob_inv = sobolev_seminorm(m, inner, p, tol.levels, base_cells=tol.base_cells, inverse=True,
                               workers=workers)
    X = sample_region(inner, 2000, chunk_rng(seed, 7, 0))
    trip = float(np.max(np.linalg.norm(m.inverse(m(X)) - X, axis=1)))
    flags = {
        "lipschitz_finite": _stable(lip, tol.lipschitz_growth),
        "lipschitz_inverse_finite": _stable(lip_inv, tol.lipschitz_growth),
        "sobolev_cauchy": is_cauchy(sob, tol.cauchy),
        "sobolev_inverse_cauchy": is_cauchy(sob_inv, tol.cauchy),
        "round_trip": trip <= tol.round_trip,
    }
    return RegularityReport(
        map_id=m.name, lipschitz_lower=lip[-1], lipschitz_inverse_lower=lip_inv[-1],
        sobolev_seq=sob, sobolev_inverse_seq=sob_inv, agreement_sup=trip, flags=flags,
        seed=int(seed), lipschitz_seq=lip, lipschitz_inverse_seq=lip_inv,
    )


# ---------------------------------------------------------------------------
# behaviour near a point
# ---------------------------------------------------------------------------


NEAR_ORIGIN_RADII = (1e-2, 1e-3, 1e-4, 1e-5, 1e-6)


@dataclass
class NearOriginProfile:
    radii: list
    ratios: list  # per radius, the ratio of largest deviation from the limit
    derivative_sup: list
    value_sup: list
    limit: float


def near_origin_profile(ratio: Callable[[np.ndarray], np.ndarray], F: SmoothMap, dim: int, *,
                        limit: float, radii: Sequence[float] = NEAR_ORIGIN_RADII,
                        n_dirs: int = 64, seed: int = 0, center=None) -> NearOriginProfile:
    """Sample ``ratio`` and ``|DF|`` on spheres of shrinking radius about ``center``.

    ``ratio(X)`` returns one number per point; for every radius the entry with
    the largest deviation from ``limit`` is recorded, together with the largest
    ``|DF|`` (Hilbert-Schmidt) and ``|F(x) - F(center)|`` on that sphere.
    """
    c = np.zeros(dim) if center is None else np.asarray(center, float)
    U = sphere_points(n_dirs, dim, chunk_rng(seed, 8, 0))
    F0 = F(c[None])[0]
    rat, der, val = [], [], []
    for t in radii:
        X = c + t * U
        q = np.asarray(ratio(X), float)
        rat.append(float(q[np.argmax(np.abs(q - limit))]))
        V, J, _ = F.eval(X, 1)
        der.append(float(hs_norm(J).max()))
        val.append(float(np.linalg.norm(V - F0, axis=1).max()))
    return NearOriginProfile(list(map(float, radii)), rat, der, val, float(limit))


# -- far-field chart: neighbourhoods of a puncture seen from infinity --------


def _panels(edges, counts):
    """Midpoints and widths of consecutive panels ``[edges[i], edges[i+1]]``."""
    mids, widths = [], []
    for a, b, k in zip(edges[:-1], edges[1:], counts):
        if b <= a:
            continue
        e = np.linspace(a, b, k + 1)
        mids.append(0.5 * (e[1:] + e[:-1]))
        widths.append(np.diff(e))
    if not mids:
        return np.empty(0), np.empty(0)
    return np.concatenate(mids), np.concatenate(widths)


def _chart_shell_nodes(dim, R_lo, R_hi, slab, period, n_t, n_s, n_phi):
    """Nodes (w, weight) on ``R_lo < |w| < R_hi`` in coordinates
    ``w = (s * omega, t)`` with ``omega`` on the unit sphere of R^(dim-1).

    Panels in t break at the slab levels, its midline and ``t = +-1``; in the
    rows ``|t| < 1`` the s panels break at ``period * (k + 1/2)`` so each
    periodic cell is integrated on its own, and the angle panels in 3D are
    refined where ``|s sin phi| < 1`` (the cells sit on the w_1 axis).
    """
    c1, c2 = slab
    tb = sorted({-R_hi, -1.0, c1, 0.5 * (c1 + c2), c2, 1.0, R_hi})
    tb = [t for t in tb if -R_hi <= t <= R_hi]
    counts = [n_t * (3 if (a < -1 or b > 1) else 1) for a, b in zip(tb[:-1], tb[1:])]
    T, WT = _panels(tb, counts)
    pts, wts = [], []
    for t, wt in zip(T, WT):
        s_lo = math.sqrt(max(R_lo**2 - t**2, 0.0))
        s_hi = math.sqrt(max(R_hi**2 - t**2, 0.0))
        if s_hi <= s_lo:
            continue
        inner = abs(t) < 1.0
        if inner:
            k0, k1 = math.floor(s_lo / period - 0.5), math.ceil(s_hi / period - 0.5)
            sb = [s_lo] + [period * (k + 0.5) for k in range(k0 + 1, k1)] + [s_hi]
            S, WS = _panels(sb, [n_s] * (len(sb) - 1))
        else:
            S, WS = _panels([s_lo, s_hi], [3 * n_s])
        for s, ws in zip(S, WS):
            if dim == 2:
                for sign in (-1.0, 1.0):
                    pts.append((sign * s, t))
                    wts.append(wt * ws)
                continue
            if inner and s > 1.0:
                h = math.asin(min(1.0, 1.05 / max(s - ws, 1.0)))
                pb = [-h, h, math.pi - h, math.pi + h, 2 * math.pi - h]
                P, WP = _panels(pb, [n_phi, 2 * n_phi, n_phi, 2 * n_phi])
            else:
                P, WP = _panels([0.0, 2 * math.pi], [4 * n_phi])
            for ph, wp in zip(P, WP):
                pts.append((s * math.cos(ph), s * math.sin(ph), t))
                wts.append(wt * ws * wp * s)
    return np.asarray(pts, float), np.asarray(wts, float)


def far_field_seminorm(F: SmoothMap, chart_inv: SmoothMap, p: float, levels: int, *,
                       slab: tuple[float, float], period: float = 3.0, r0: float = 2.0,
                       n_t: int = 4, n_s: int = 4, n_phi: int = 4, inverse: bool = False,
                       workers: int = 1) -> list:
    """Partial integrals of ``|D^2 F|^p`` over punctured neighbourhoods of a point.

    ``chart_inv`` maps far-field coordinates w to the domain of F, sending
    ``|w| -> infinity`` to the puncture.  Level L integrates over the preimage
    of ``r0 < |w| < r0 2^(L+1)`` by the change of variables
    ``∫ |D^2 F(x)|^p dx = ∫ |D^2 F(chart_inv(w))|^p |det D chart_inv(w)| dw``,
    with midpoint panels aligned to the horizontal slab ``c1 < w_n < c2`` and
    to the periodic cells of radius 1 centred on the w_1 axis.  The sequence
    is Cauchy when the integral converges at the puncture and keeps growing
    when it diverges.
    """
    dim = chart_inv.dim
    if dim not in (2, 3):
        raise AnalysisError("far-field quadrature is implemented for n = 2 and n = 3")
    out, parts = [], []
    for j in range(levels):
        W, wt = _chart_shell_nodes(dim, r0 * 2.0**j, r0 * 2.0 ** (j + 1), slab, period,
                                   n_t, n_s, n_phi)

        def chunk(i, size, W=W, wt=wt):
            sl = slice(i * CHUNK, i * CHUNK + size)
            X, J, _ = chart_inv.eval(W[sl], 1)
            dens = _hessian_density(F, X, p, inverse) * np.abs(np.linalg.det(J))
            ok = np.isfinite(dens)
            return math.fsum((dens[ok] * wt[sl][ok]).tolist())

        parts.append(math.fsum(run_chunks(chunk, len(W), workers)))
        out.append((j, math.fsum(parts)))
    return out


def collar_chart(bundle) -> tuple[SmoothMap, tuple[float, float]]:
    """Far-field chart of a collar extension around the fixed origin.

    Returns ``(chart_inv, slab)`` with ``chart_inv = I^-1 o g^-1 o U^-1``, so
    that ``w = U(g(I(x)))`` are the coordinates in which the shear slab is
    ``slab[0] < w_n < slab[1]``, for use with :func:`far_field_seminorm`.
    """
    from .maps import compose_all

    M = bundle.maps
    chart_inv = compose_all(M["U"].inverse, M["g"].inverse, M["I_inv"])
    return chart_inv, (float(bundle.info["c1"]), float(bundle.info["c2"]))


__all__ = [
    "CHUNK",
    "AnalysisError",
    "NearOriginProfile",
    "QuadratureLevel",
    "RegularityReport",
    "SlabReport",
    "Tolerances",
    "agreement_residual",
    "certify_LW",
    "chunk_rng",
    "collar_chart",
    "conformal_image_levels",
    "exhaustion",
    "exponent_check",
    "far_field_seminorm",
    "growth_ratios",
    "integrability_exponent",
    "is_cauchy",
    "lipschitz_estimate",
    "near_origin_profile",
    "psi",
    "psi_probe",
    "run_chunks",
    "sample_region",
    "slab_separation",
    "sobolev_seminorm",
    "standard_pair",
]
