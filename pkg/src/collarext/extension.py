"""Extension pipelines: the identity case, the doubly punctured case, and the
collar case obtained by conjugating with a generalized inversion.

All three builders return an :class:`ExtensionBundle` carrying the final map,
its inverse, every intermediate map, the agreement neighbourhood ``N`` and
the seam/agreement measurements taken while assembling.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import (
    TAU_SEAM,
    Ball,
    BallRegion,
    Complement,
    Everything,
    GeometryError,
    HalfSpace,
    Intersection,
    Preimage,
    Region,
    Similarity,
    Slab,
    TranslateUnion,
    UndecidableMembership,
    as_batch,
    normalize_balls,
    rotation_taking,
    sphere_points,
    unit,
)
from .maps import (
    MapError,
    PiecewiseMap,
    SeamError,
    SmoothMap,
    compose,
    compose_all,
    from_similarity,
    identity,
    tau,
)
from .primitives import (
    InversionParams,
    RadialProfile,
    ShearParams,
    make_inversion,
    make_radial_stretch,
    make_shear,
)

PERIOD = 3.0
K_MAX = 8
TAU_AGREE = 1e-8

# normalization constants for the punctured case (unit-ball coordinates)
HOLE_RADIUS = 0.4  # domain and image holes are scaled into B(0, HOLE_RADIUS)
STRETCH_OUTER = 0.75  # the radial stretch is the identity outside this radius
IDENTITY_RADIUS = 0.85  # h is verified to be the identity outside this radius
SAFETY = 0.9


class ExtensionError(MapError):
    """A construction step failed one of its checks."""


class HypothesisError(GeometryError):
    """Input violates a hypothesis of the construction (e.g. p >= n)."""


class SlabSeparationError(ExtensionError):
    def __init__(self, message: str, c1: float, c2: float):
        super().__init__(message)
        self.c1, self.c2 = c1, c2


@dataclass
class ExtensionBundle:
    """The extension, its inverse, and everything used to build it.

    ``maps`` holds the named intermediates (``S``, ``g*``, ``G*``, ``G``, ...),
    ``regions`` the sigma sets and holes, ``N`` the agreement neighbourhood and
    ``checks`` the measurements taken during assembly.
    """

    F: SmoothMap
    F_inv: SmoothMap
    maps: dict
    N: Region
    regions: dict
    checks: dict = field(default_factory=dict)
    info: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# periodicization
# ---------------------------------------------------------------------------


def _translated_copies(g: SmoothMap, period: float = PERIOD, k_min: int = 0) -> SmoothMap:
    """``x -> tau_k(g(tau_-k(x)))`` with k the nearest translate index (k >= k_min)."""

    def impl(X, order):
        k = np.maximum(np.rint(X[:, 0] / period), k_min)
        shift = period * k
        Y = X.copy()
        Y[:, 0] -= shift
        V, J, H = g.eval(Y, order)
        V = np.array(V)
        V[:, 0] += shift
        return V, J, H

    return SmoothMap(g.dim, impl, name=f"copies({g.name})")


def identity_residual(g: SmoothMap, n_samples: int = 2000, seed: int = 0,
                      r_lo: float = 1.0, r_hi: float = 3.0) -> float:
    """sup |g(x) - x| over sampled x with r_lo <= |x| <= r_hi (sphere included)."""
    rng = np.random.default_rng(seed)
    U = sphere_points(n_samples, g.dim, rng)
    t = np.concatenate([[r_lo], rng.uniform(r_lo, r_hi, n_samples - 1)])
    X = U * t[:, None]
    return float(np.max(np.linalg.norm(g(X) - X, axis=1)))


def periodicize(g: SmoothMap, ball: Ball | None = None, k_max: int = K_MAX,
                tol: float = TAU_SEAM, seed: int = 0, n_seam: int = 256,
                check: bool = True) -> PiecewiseMap:
    """Replicate g along ``tau_k(x) = x + 3k e_1`` for k >= 0.

    g must be the identity off the unit ball.  The result equals
    ``tau_k o g o tau_-k`` on each translate ``tau_k(B)`` and the identity
    elsewhere.  Evaluation is exact for every k; ``k_max`` bounds only the
    translates on which seams are sampled.
    """
    dim = g.dim
    if ball is not None and (ball.radius != 1.0 or np.any(ball.center != 0)):
        raise GeometryError("periodicize expects the unit ball at the origin")
    unit_ball = BallRegion(Ball(np.zeros(dim), 1.0))
    copies = TranslateUnion(unit_ball, PERIOD, k_min=0)

    inverse = None
    if g.has_inverse:
        def inverse():
            return periodicize(g.inverse, k_max=k_max, tol=tol, seed=seed, n_seam=n_seam,
                               check=False)

    pw = PiecewiseMap([(copies, _translated_copies(g)), (Everything(dim), identity(dim))],
                      tol, inverse=inverse, name=f"{g.name}*")
    pw.k_max = k_max
    if check:
        rng = np.random.default_rng(seed)
        S = sphere_points(n_seam, dim, rng)
        seam = np.concatenate([S + PERIOD * k * unit(dim, 0) for k in range(k_max + 1)])
        gap = float(np.max(np.linalg.norm(_translated_copies(g)(seam) - seam, axis=1)))
        if gap > tol:
            worst = seam[np.argmax(np.linalg.norm(_translated_copies(g)(seam) - seam, axis=1))]
            raise SeamError(f"periodicize: g is not the identity on the unit sphere "
                            f"(gap {gap:.3g})", worst, gap)
        pw.seam_gap = gap
    return pw


# ---------------------------------------------------------------------------
# sigma sets
# ---------------------------------------------------------------------------

BELOW, SLAB, ABOVE = "below", "slab", "above"


def sigma_labels(g_star: SmoothMap, a: float, b: float, X: np.ndarray) -> np.ndarray:
    """-1 / 0 / +1 for points whose image height lies below a, in [a, b], above b."""
    t = g_star(np.atleast_2d(X))[:, -1]
    return np.where(t < a, -1, np.where(t > b, 1, 0))


def classify_sigma(g_star: SmoothMap, a: float, b: float, x, tol: float = TAU_SEAM) -> str:
    """Which of sigma_a (below), sigma_ab (slab), sigma_b (above) contains x.

    Since g* is a homeomorphism, the preimages of the two open half-spaces are
    connected, so thresholding the image height identifies the components.
    """
    X, _ = as_batch(x)
    t = float(g_star(X)[0, -1])
    if min(abs(t - a), abs(t - b)) < tol:
        raise UndecidableMembership(f"image height {t:.12g} is within {tol:g} of a slab level")
    return BELOW if t < a else ABOVE if t > b else SLAB


# ---------------------------------------------------------------------------
# identity case
# ---------------------------------------------------------------------------


@dataclass
class IdentityCaseInput:
    """Data for the identity case.

    ``g`` maps the complement of the holes E1, E2 onto the complement of
    C1, C2 and is the identity off ``ball``.  In the frame given by
    ``rotation`` the image holes are separated by the slab ``c1 < x_n < c2``
    (C1 below, C2 above).  ``boundaries`` optionally supplies sample points on
    the hole boundaries ``{"E1": ..., "E2": ...}`` for the seam checks; by
    default they come from the regions' own boundary samplers.
    """

    g: SmoothMap
    E1: Region
    E2: Region
    C1: Region
    C2: Region
    c1: float
    c2: float
    ball: Ball | None = None
    rotation: np.ndarray | None = None
    boundaries: dict | None = None


def _max_gap(m1: SmoothMap, m2: SmoothMap, P: np.ndarray) -> tuple[float, np.ndarray | None]:
    if P.size == 0:
        return 0.0, None
    gaps = np.linalg.norm(m1(P) - m2(P), axis=1)
    i = int(np.argmax(gaps))
    return float(gaps[i]), P[i]


def _boundary(region: Region, given, n: int, seed: int) -> np.ndarray:
    if given is not None:
        return np.atleast_2d(given)
    try:
        return region.sample_boundary(n, np.random.default_rng(seed))
    except (NotImplementedError, MapError):
        return np.zeros((0, region.dim))


def _normalizing_similarity(inp: IdentityCaseInput, dim: int) -> Similarity | None:
    Q = np.eye(dim) if inp.rotation is None else np.asarray(inp.rotation, float)
    center = np.zeros(dim) if inp.ball is None else inp.ball.center
    radius = 1.0 if inp.ball is None else inp.ball.radius
    if inp.rotation is None and radius == 1.0 and not np.any(center):
        return None
    return Similarity(Q, -(Q @ center) / radius, 1.0 / radius)


def build_extension_identity(inp: IdentityCaseInput, *, k_max: int = K_MAX, tol: float = TAU_SEAM,
                             seed: int = 0, n_check: int = 2000) -> ExtensionBundle:
    """Extend g across the hole E1 by the shear-and-periodicize construction.

    Returns a bundle whose ``F`` is the extension G : E2^c -> C2^c, equal to g on
    ``N = B ∩ sigma_b`` outside E2.
    """
    dim = inp.g.dim
    T = _normalizing_similarity(inp, dim)
    if T is None:
        return _identity_core(inp, k_max=k_max, tol=tol, seed=seed, n_check=n_check)

    # conjugate into the unit-ball frame, build there, and conjugate back
    Tm = from_similarity(T, "T")
    Ti = Tm.inverse
    lift = lambda R: Preimage(Ti, R)  # noqa: E731
    shift_n = float(T.shift[-1])
    bnd = inp.boundaries or {}
    normalized = IdentityCaseInput(
        compose_all(Tm, inp.g, Ti), lift(inp.E1), lift(inp.E2), lift(inp.C1), lift(inp.C2),
        inp.c1 * T.scale + shift_n,
        inp.c2 * T.scale + shift_n,
        boundaries={k: T(np.atleast_2d(v)) for k, v in bnd.items()} or None,
    )
    core = _identity_core(normalized, k_max=k_max, tol=tol, seed=seed, n_check=n_check)
    G = compose_all(Ti, core.F, Tm)
    G_inv = compose_all(Ti, core.F_inv, Tm)
    G._inverse, G_inv._inverse = G_inv, G
    G.name, G_inv.name = "G", "G^-1"
    maps = dict(core.maps, T=Tm, G=G, G_inv=G_inv)
    regions = {k: Preimage(Tm, v) for k, v in core.regions.items()}
    return ExtensionBundle(G, G_inv, maps, Preimage(Tm, core.N), regions, core.checks,
                           dict(core.info, similarity=T))


def _identity_core(inp: IdentityCaseInput, *, k_max: int, tol: float, seed: int,
                   n_check: int) -> ExtensionBundle:
    g, dim = inp.g, inp.g.dim
    a, b = float(inp.c1), float(inp.c2)
    S = make_shear(ShearParams(a, b), dim)
    gs = periodicize(g, k_max=k_max, tol=tol, seed=seed)
    gs_inv = gs.inverse
    t1, tm1, ident = tau(dim, 1), tau(dim, -1), identity(dim)
    Gs = compose_all(t1, gs_inv, S, gs)
    Gs.name = "G*"
    Gs_inv = Gs.inverse
    Gs_inv.name = "G*^-1"

    E1_all = TranslateUnion(inp.E1, PERIOD, k_min=0)
    E2_rest = TranslateUnion(inp.E2, PERIOD, k_min=1)
    dom, img = Complement(inp.E2), Complement(inp.C2)
    G = PiecewiseMap([(E1_all, t1), (E2_rest, ident), (dom, Gs)], tol, domain=dom, name="G")
    G_inv = PiecewiseMap([(E1_all, tm1), (E2_rest, ident), (img, Gs_inv)], tol, domain=img,
                         name="G^-1")
    G._inverse, G_inv._inverse = G_inv, G

    # seams: G* must equal tau_1 on the E1 translates and the identity on the E2 translates
    bnd = inp.boundaries or {}
    dE1 = _boundary(inp.E1, bnd.get("E1"), 256, seed)
    dE2 = _boundary(inp.E2, bnd.get("E2"), 256, seed + 1)
    shift = lambda P, k: P + PERIOD * k * unit(dim, 0)  # noqa: E731
    seam_E1 = np.concatenate([shift(dE1, k) for k in range(k_max + 1)])
    seam_E2 = np.concatenate([shift(dE2, k) for k in range(1, k_max + 1)])
    gap1, where1 = _max_gap(Gs, t1, seam_E1)
    gap2, where2 = _max_gap(Gs, ident, seam_E2)
    if max(gap1, gap2) > 10 * tol:
        gap, where = (gap1, where1) if gap1 >= gap2 else (gap2, where2)
        raise SeamError(f"G: branches disagree by {gap:.3g} at {where}", where, gap)

    unit_ball = BallRegion(Ball(np.zeros(dim), 1.0))
    sigma_ab = Preimage(gs, Slab(dim, a, b))
    sigma_a = Preimage(gs, HalfSpace(dim, a, upper=False))
    sigma_b = Preimage(gs, HalfSpace(dim, b, upper=True))
    N = Intersection((unit_ball, sigma_b))

    checks = {"seam_E1": gap1, "seam_E2": gap2, "g_star_seam": gs.seam_gap}
    if n_check:
        rng = np.random.default_rng(seed + 7)
        X = sphere_points(n_check, dim, rng) * rng.uniform(0, 1, n_check)[:, None] ** (1 / dim)
        X = X[~inp.E2.contains(X) & ~inp.E1.contains(X)]
        X = X[N.contains(X)]
        checks["agreement_N"] = float(np.max(np.linalg.norm(G(X) - g(X), axis=1))) if len(X) else 0.0
        checks["agreement_samples"] = int(len(X))

    maps = {"S": S, "g*": gs, "g*^-1": gs_inv, "G*": Gs, "G*^-1": Gs_inv, "G": G, "G_inv": G_inv,
            "g": g}
    regions = {"sigma_ab": sigma_ab, "sigma_a": sigma_a, "sigma_b": sigma_b, "E1": inp.E1,
               "E2": inp.E2, "C1": inp.C1, "C2": inp.C2, "ball": unit_ball}
    info = {"a": a, "b": b, "k_max": k_max}
    return ExtensionBundle(G, G_inv, maps, N, regions, checks, info)


# ---------------------------------------------------------------------------
# doubly punctured case
# ---------------------------------------------------------------------------


def _scaled_similarity(Q: np.ndarray, center: np.ndarray, scale: float) -> Similarity:
    """``x -> Q (x - center) / scale``."""
    return Similarity(Q, -(Q @ center) / scale, 1.0 / scale)


def _extend_punctured(g: SmoothMap, E1: Region, E2: Region, C1: Region, C2: Region, *,
                      boundaries: dict, domain_center: np.ndarray, image_center: np.ndarray,
                      rotation: np.ndarray, p: float, k_max: int, tol: float, seed: int,
                      n_check: int, n_sphere: int = 2000) -> ExtensionBundle:
    """Shared core of the punctured and collar pipelines.

    ``boundaries`` holds sample points on the four hole boundaries.  The
    domain is normalized by ``V(x) = (x - domain_center) / s_d`` and the image
    by ``U(y) = Q (y - image_center) / s_i``; the slab is read off the rotated
    image holes.  With ``R`` the radial stretch taking B(0, r1) inside E2
    onto B(0, r2) around both domain holes, ``h = g' R^-1 g'^-1`` is the
    identity near the unit sphere, the identity case extends it to ``H``, and
    ``G = U^-1 H g' R V``.
    """
    dim = g.dim
    Q = np.asarray(rotation, float)
    dE1, dE2 = boundaries["E1"] - domain_center, boundaries["E2"] - domain_center
    dC1 = (boundaries["C1"] - image_center) @ Q.T
    dC2 = (boundaries["C2"] - image_center) @ Q.T

    s_d = max(np.linalg.norm(dE1, axis=1).max(), np.linalg.norm(dE2, axis=1).max()) / HOLE_RADIUS
    s_i = max(np.linalg.norm(dC1, axis=1).max(), np.linalg.norm(dC2, axis=1).max()) / HOLE_RADIUS
    V = _scaled_similarity(np.eye(dim), domain_center, s_d)
    Vm = from_similarity(V, "V")

    # grow the image scale until g' pulls the sphere |y| = IDENTITY_RADIUS outside the stretch
    sphere = sphere_points(n_sphere, dim, np.random.default_rng(seed + 11)) * IDENTITY_RADIUS
    g_inv = g.inverse
    for _ in range(60):
        U = _scaled_similarity(Q, image_center, s_i)
        pulled = V(g_inv(U.inverse()(sphere)))
        if np.linalg.norm(pulled, axis=1).min() >= STRETCH_OUTER:
            break
        s_i *= 2.0
    else:
        raise ExtensionError("could not normalize the image side so that h is the identity near the unit sphere")
    Um = from_similarity(U, "U")

    c1 = float((dC1[:, -1]).max() / s_i)
    c2 = float((dC2[:, -1]).min() / s_i)
    if not c1 < c2:
        raise SlabSeparationError(f"image holes are not separated by a horizontal slab "
                                  f"(c1 = {c1:.6g} >= c2 = {c2:.6g})", c1, c2)

    r1 = SAFETY * float(np.linalg.norm(dE2, axis=1).min()) / s_d
    r2 = float(max(np.linalg.norm(dE1, axis=1).max(), np.linalg.norm(dE2, axis=1).max())) / s_d / SAFETY
    R = make_radial_stretch(RadialProfile(r1, r2, outer=STRETCH_OUTER), dim)
    R_inv = R.inverse

    gp = compose_all(Um, g, Vm.inverse)
    gp.name = "g'"
    gp_inv = gp.inverse
    h = compose_all(gp, R_inv, gp_inv)
    h.name = "h"
    h_inv = compose_all(gp, R, gp_inv)
    h._inverse, h_inv._inverse = h_inv, h

    lift_dom = lambda Rg: Preimage(Vm.inverse, Rg)  # noqa: E731
    lift_img = lambda Rg: Preimage(Um.inverse, Rg)  # noqa: E731
    pull = compose(R_inv, gp_inv)  # y in X_i  iff  R^-1 g'^-1 y in E_i'
    X1 = Preimage(pull, lift_dom(E1))
    X2 = Preimage(pull, lift_dom(E2), at_singular=True)
    Cp1, Cp2 = lift_img(C1), lift_img(C2)
    push = compose(gp, R)
    bX = {"E1": push(dE1 / s_d), "E2": push(dE2 / s_d)}

    id_residual = identity_residual(h, n_samples=n_check or 500, seed=seed + 3,
                                    r_lo=IDENTITY_RADIUS, r_hi=3.0)
    inner = build_extension_identity(IdentityCaseInput(h, X1, X2, Cp1, Cp2, c1, c2, boundaries=bX),
                                     k_max=k_max, tol=tol, seed=seed, n_check=n_check)
    H, H_inv = inner.F, inner.F_inv

    G = compose_all(Um.inverse, H, gp, R, Vm)
    G_inv = compose_all(Vm.inverse, R_inv, gp_inv, H_inv, Um)
    G._inverse, G_inv._inverse = G_inv, G
    G.name, G_inv.name = "G", "G^-1"
    N = Preimage(compose_all(gp, R, Vm), inner.N)

    checks = dict(inner.checks)
    checks["h_identity_outside"] = id_residual
    if n_check:
        rng = np.random.default_rng(seed + 5)
        P = np.concatenate([boundaries["E2"]] * 4)
        P = P + 0.05 * s_d * rng.standard_normal(P.shape)
        P = P[~E2.contains(P) & ~E1.contains(P)]
        P = P[N.contains(P)]
        checks["agreement_N"] = float(np.max(np.linalg.norm(G(P) - g(P), axis=1))) if len(P) else 0.0
        checks["agreement_samples"] = int(len(P))

    maps = dict(inner.maps)
    maps.update({"H": H, "H_inv": H_inv, "h": h, "R": R, "R_inv": R_inv, "g'": gp, "U": Um,
                 "V": Vm, "G": G, "G_inv": G_inv, "g": g})
    regions = dict(inner.regions)
    regions.update({"X1": X1, "X2": X2, "E1": E1, "E2": E2, "C1": C1, "C2": C2, "N_H": inner.N})
    info = dict(inner.info)
    info.update({"p": p, "r1": r1, "r2": r2, "domain_scale": s_d, "image_scale": s_i,
                 "c1": c1, "c2": c2})
    return ExtensionBundle(G, G_inv, maps, N, regions, checks, info)


def _axis_rotation(direction: np.ndarray) -> np.ndarray:
    dim = direction.size
    return rotation_taking(direction / np.linalg.norm(direction), unit(dim, dim - 1))


def build_extension_disjoint(g: SmoothMap, E1: Region, E2: Region, B1: Ball, B2: Ball, p: float,
                             *, k_max: int = K_MAX, tol: float = TAU_SEAM, seed: int = 0,
                             n_boundary: int = 1000, n_check: int = 2000) -> ExtensionBundle:
    """Extend ``g : (E1 ∪ E2)^c -> (B1 ∪ B2)^c`` to ``G : E2^c -> B2^c``.

    g must carry an inverse and send each boundary of E_i onto the sphere of
    B_i.  The hole boundaries are sampled as preimages of the ball spheres.
    """
    if p < 1:
        raise HypothesisError(f"p must be >= 1, got {p}")
    gap = float(np.linalg.norm(B2.center - B1.center)) - B1.radius - B2.radius
    if not gap > 0:
        raise GeometryError("the closures of B1 and B2 must be disjoint")
    rng = np.random.default_rng(seed)
    S1 = BallRegion(B1).sample_boundary(n_boundary, rng)
    S2 = BallRegion(B2).sample_boundary(n_boundary, rng)
    g_inv = g.inverse
    boundaries = {"E1": g_inv(S1), "E2": g_inv(S2), "C1": S1, "C2": S2}
    return _extend_punctured(
        g, E1, E2, B1.region(), B2.region(), boundaries=boundaries,
        domain_center=g_inv(B2.center), image_center=B2.center.copy(),
        rotation=_axis_rotation(B2.center - B1.center), p=p, k_max=k_max, tol=tol, seed=seed,
        n_check=n_check)


# ---------------------------------------------------------------------------
# collar case
# ---------------------------------------------------------------------------


def default_exponent(n: int, p: float) -> float:
    """Inversion exponent a = min(1/2, (n/p - 1)/2), inside every stated range."""
    return min(0.5, 0.5 * (n / p - 1.0))


def check_collar_hypotheses(n: int, p: float) -> None:
    if not 1.0 <= p < n:
        raise HypothesisError(f"the collar extension needs p in [1, n) = [1, {n}); got p = {p}")


def _origin_filled(m: SmoothMap, name: str) -> SmoothMap:
    """m with the value 0 at the origin (derivatives there are left undefined, NaN)."""

    def impl(X, order):
        zero = ~(np.linalg.norm(X, axis=1) > 0)
        if not np.any(zero):
            return m.eval(X, order)
        V = np.zeros((X.shape[0], m.out_dim))
        J = np.full((X.shape[0], m.out_dim, m.dim), np.nan) if order >= 1 else None
        H = np.full((X.shape[0], m.out_dim, m.dim, m.dim), np.nan) if order >= 2 else None
        ok = ~zero
        if np.any(ok):
            v, j, h = m.eval(X[ok], order)
            V[ok] = v
            if order >= 1:
                J[ok] = j
            if order >= 2:
                H[ok] = h
        return V, J, H

    return SmoothMap(m.dim, impl, out_dim=m.out_dim, inverse=m._inverse, name=name)


def build_extension_collar(f: SmoothMap, D1: Region, D2: Region, B1: Ball, B2: Ball, p: float, *,
                           a: float | None = None, k_max: int = K_MAX, tol: float = TAU_SEAM,
                           seed: int = 0, n_boundary: int = 1000,
                           n_check: int = 2000) -> ExtensionBundle:
    """Extend ``f : closure(D2) minus D1 -> closure(B2) minus B1`` across D1.

    f must carry an inverse and send the boundary of D_i onto the sphere of B_i.
    The returned ``F`` lives in the original coordinates.  The normalized
    pieces (image balls in the tangent configuration with tangent radius 1, f
    fixing the origin) are in ``maps["F_normalized"]``/``maps["f_normalized"]``
    with ``F_normalized = H_* o f_normalized o R_*`` and ``F_normalized(0) = 0``.
    """
    n = f.dim
    check_collar_hypotheses(n, p)
    a = default_exponent(n, p) if a is None else float(a)
    if not a > 0:
        raise HypothesisError(f"inversion exponent must be positive, got {a}")

    # image side: tangent configuration, then tangent radius 1
    pair = normalize_balls(B1, B2)
    r = pair.tangent_radius
    U0 = pair.similarity.then(Similarity.dilation(n, 1.0 / r))
    U0m = from_similarity(U0, "U0")
    nb1 = Ball(pair.ball1.center / r, B1.radius / r)
    nb2 = Ball(pair.ball2.center / r, B2.radius / r)
    f1 = compose(U0m, f)
    f1_inv = f1.inverse

    # domain side: move f^-1(0) to 0 and shrink so B(0, 1) sits in the collar
    rng = np.random.default_rng(seed)
    S1 = nb1.region().sample_boundary(n_boundary, rng)
    S2 = nb2.region().sample_boundary(n_boundary, rng)
    dD1, dD2 = f1_inv(S1), f1_inv(S2)
    o = f1_inv(np.zeros(n))
    eps = float(min(np.linalg.norm(dD1 - o, axis=1).min(), np.linalg.norm(dD2 - o, axis=1).min()))
    delta = 0.5 * eps
    T = Similarity(np.eye(n), o, delta)
    Tm = from_similarity(T, "T")
    Tm_inv = Tm.inverse
    ft = compose(f1, Tm)
    ft.name = "f~"

    I = make_inversion(InversionParams(a, 1.0), n)
    I_inv = I.inverse
    g = compose_all(I, ft, I_inv)
    g.name = "g"
    E1 = Preimage(compose(Tm, I_inv), D1)
    E2 = Preimage(compose(Tm, I_inv), Complement(D2), at_singular=True)
    C1 = Preimage(I_inv, nb1.region())
    C2 = Preimage(I_inv, Complement(nb2.region()), at_singular=True)
    boundaries = {"E1": I(Tm_inv(dD1)), "E2": I(Tm_inv(dD2)), "C1": I(S1), "C2": I(S2)}

    inner = _extend_punctured(g, E1, E2, C1, C2, boundaries=boundaries,
                              domain_center=np.zeros(n), image_center=np.zeros(n),
                              rotation=np.eye(n), p=p, k_max=k_max, tol=tol, seed=seed,
                              n_check=n_check)
    G, G_inv = inner.F, inner.F_inv
    Fn = _origin_filled(compose_all(I_inv, G, I), "F~")
    Fn_inv = _origin_filled(compose_all(I_inv, G_inv, I), "F~^-1")
    Fn._inverse, Fn_inv._inverse = Fn_inv, Fn
    F = compose_all(U0m.inverse, Fn, Tm_inv)
    F_inv = compose_all(Tm, Fn_inv, U0m)
    F._inverse, F_inv._inverse = F_inv, F
    F.name, F_inv.name = "F", "F^-1"

    U, V, R, H = inner.maps["U"], inner.maps["V"], inner.maps["R"], inner.maps["H"]
    R_star = compose_all(I_inv, V.inverse, R, V, I)
    H_star = compose_all(I_inv, U.inverse, H, U, I)
    N = Preimage(compose(I, Tm_inv), inner.N)

    checks = dict(inner.checks)
    if n_check:
        P = np.concatenate([dD2] * 4)
        P = Tm(Tm_inv(P) * (1.0 - 0.02 * np.abs(rng.standard_normal((len(P), 1)))))
        inside = D2.contains(P) & ~D1.contains(P)
        P = P[inside]
        P = P[N.contains(P)]
        checks["agreement_N"] = float(np.max(np.linalg.norm(F(P) - f(P), axis=1))) if len(P) else 0.0
        checks["agreement_samples"] = int(len(P))

    maps = dict(inner.maps)
    maps.update({"F": F, "F_inv": F_inv, "F_normalized": Fn, "F_normalized_inv": Fn_inv,
                 "f_normalized": ft, "f": f, "I": I, "I_inv": I_inv, "R_star": R_star,
                 "H_star": H_star, "G": G, "G_inv": G_inv, "g": g, "T": Tm, "U0": U0m})
    regions = dict(inner.regions)
    regions.update({"D1": D1, "D2": D2, "E1": E1, "E2": E2, "C1": C1, "C2": C2,
                    "N_G": inner.N})
    info = dict(inner.info)
    info.update({"a": a, "inversion_exponent": a, "p": p, "tangent_radius": r, "delta": delta,
                 "origin_preimage": o, "pair": pair, "shear_a": inner.info["a"],
                 "shear_b": inner.info["b"]})
    info.pop("b", None)
    return ExtensionBundle(F, F_inv, maps, N, regions, checks, info)
