"""Scenario runner: builds extensions and verifiers from JSON configs and writes
deterministic JSON reports and CSV plot data.

Every scenario is a pure function ``config, seed -> Report``; :func:`main`
only parses arguments, loads the config and writes files.

Exit codes: 0 all checks pass, 1 a check failed, 2 invalid config or violated
hypothesis, 3 numerical breakdown.
"""

from __future__ import annotations

import argparse
import copy
import hashlib
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import __version__
from .analysis import (
    AnalysisError,
    Tolerances,
    certify_LW,
    chunk_rng,
    collar_chart,
    exponent_check,
    far_field_seminorm,
    growth_ratios,
    lipschitz_estimate,
    near_origin_profile,
    psi_probe,
    sample_region,
    slab_separation,
    standard_pair,
)
from .extension import (
    PERIOD,
    ExtensionError,
    HypothesisError,
    IdentityCaseInput,
    SlabSeparationError,
    build_extension_collar,
    build_extension_disjoint,
    build_extension_identity,
    check_collar_hypotheses,
)
from .geometry import (
    Ball,
    BallRegion,
    Box,
    Difference,
    GeometryError,
    Preimage,
    Union,
    sphere_points,
)
from .maps import MapError, SmoothMap, affine, identity, tau
from .primitives import (
    ShearParams,
    bump_rotation,
    linear_map,
    make_shear,
    make_stereographic,
    make_test_diffeo,
    make_twist,
)

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------


def _plain(x):
    """JSON-ready copy with numpy scalars unwrapped and non-finite floats named."""
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    return x


@dataclass
class Check:
    name: str
    anchor: str
    measured: Any
    tolerance: Any
    passed: bool
    warning: bool = False  # counts as a failure only under --strict

    def to_dict(self) -> dict:
        return {"name": self.name, "paper_anchor": self.anchor, "measured": _plain(self.measured),
                "tolerance": _plain(self.tolerance), "pass": bool(self.passed)}


def at_most(name, anchor, measured, tol, warning=False) -> Check:
    m = float(measured)
    return Check(name, anchor, m, tol, bool(math.isfinite(m) and m <= tol), warning)


def holds(name, anchor, value, warning=False) -> Check:
    return Check(name, anchor, bool(value), True, bool(value), warning)


@dataclass
class Report:
    scenario: str
    config: dict
    seed: int
    checks: list = field(default_factory=list)
    data: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)  # csv name -> (header, rows)
    artifacts: list = field(default_factory=list)

    def failed(self, strict: bool = False) -> list[Check]:
        return [c for c in self.checks if not c.passed and (strict or not c.warning)]

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "config_hash": config_hash(self.config),
            "seed": int(self.seed),
            "version": __version__,
            "checks": [c.to_dict() for c in self.checks],
            "artifacts": sorted(self.artifacts),
            "data": _plain(self.data),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"


def config_hash(config: dict) -> str:
    blob = json.dumps(_plain(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def write_csv(path: Path, header: list[str], rows: list) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)
                              for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


# ---------------------------------------------------------------------------
# config helpers
# ---------------------------------------------------------------------------


def _get(cfg: dict, key: str, kind, default=None, required: bool = False):
    if key not in cfg or cfg[key] is None:
        if required:
            raise ConfigError(f"missing required key {key!r}")
        return default
    v = cfg[key]
    if kind is float and isinstance(v, (int, float)) and not isinstance(v, bool):
        return float(v)
    if kind is int and isinstance(v, int) and not isinstance(v, bool):
        return v
    if kind not in (float, int) and isinstance(v, kind):
        return v
    raise ConfigError(f"key {key!r} must be of type {getattr(kind, '__name__', kind)}, got {v!r}")


def _dim(cfg: dict) -> int:
    n = _get(cfg, "dim", int, required=True)
    if not 2 <= n <= 8:
        raise ConfigError(f"dim must lie in [2, 8], got {n}")
    return n


def _vector(v, n: int, key: str) -> np.ndarray:
    a = np.asarray(v, dtype=float)
    if a.shape != (n,) or not np.all(np.isfinite(a)):
        raise ConfigError(f"{key} must be a list of {n} finite numbers")
    return a


def _ball(cfg: dict, key: str, n: int) -> Ball:
    spec = _get(cfg, key, dict, required=True)
    r = _get(spec, "radius", float, required=True)
    if not r > 0:
        raise ConfigError(f"{key}.radius must be positive")
    return Ball(_vector(spec.get("center"), n, f"{key}.center"), r)


_STEP_KEYS = {
    "bump_rotation": ("center", "radius", "angle"),
    "bump_translation": ("center", "radius", "vector"),
    "translation": ("vector",),
    "dilation": ("factor",),
}


def _map(spec, n: int, key: str) -> SmoothMap:
    """A recipe list, ``{"matrix": A, "shift": b}``, or ``"identity"``."""
    if spec == "identity" or spec == []:
        return identity(n)
    if isinstance(spec, dict):
        A = np.asarray(spec.get("matrix"), dtype=float)
        if A.shape != (n, n) or abs(np.linalg.det(A)) < 1e-12:
            raise ConfigError(f"{key}.matrix must be an invertible {n}x{n} matrix")
        b = _vector(spec.get("shift", [0.0] * n), n, f"{key}.shift")
        return affine(A, b, name=key)
    if isinstance(spec, list):
        for i, step in enumerate(spec):
            kind = step.get("kind") if isinstance(step, dict) else None
            if kind not in _STEP_KEYS:
                raise ConfigError(f"{key}[{i}]: unknown step kind {kind!r}")
            missing = [k for k in _STEP_KEYS[kind] if k not in step]
            if missing:
                raise ConfigError(f"{key}[{i}] ({kind}) is missing {missing}")
        return make_test_diffeo(spec, n)
    raise ConfigError(f"{key} must be 'identity', an affine dict or a recipe list")


# ---------------------------------------------------------------------------
# scenarios
# ---------------------------------------------------------------------------


def _check_box(n: int, k_hi: int = 6) -> tuple[np.ndarray, np.ndarray]:
    lo = np.full(n, -2.0)
    hi = np.full(n, 2.0)
    lo[0], hi[0] = -4.0, PERIOD * k_hi + 2.0
    return lo, hi


def run_extend_identity(cfg: dict, seed: int, workers: int = 1) -> Report:
    n = _dim(cfg)
    g = _map(_get(cfg, "g", (list, dict, str), required=True), n, "g")
    C1, C2 = _ball(cfg, "C1", n).region(), _ball(cfg, "C2", n).region()
    c1, c2 = _get(cfg, "c1", float, required=True), _get(cfg, "c2", float, required=True)
    samples = _get(cfg, "samples", int, 10000)
    inp = IdentityCaseInput(g, Preimage(g, C1), Preimage(g, C2), C1, C2, c1, c2)
    b = build_extension_identity(inp, seed=seed, n_check=0)
    G, G_inv, R = b.F, b.F_inv, b.regions
    unit_ball = BallRegion(Ball(np.zeros(n), 1.0))
    rep = Report("extend-identity", cfg, seed)
    rep.checks += [
        at_most("seam_E1", "seam", b.checks["seam_E1"], 1e-9),
        at_most("seam_E2", "seam", b.checks["seam_E2"], 1e-9),
    ]

    # agreement on N minus E2
    rng = chunk_rng(seed, 20, 0)
    X = sample_region(Difference(b.N, R["E2"]), samples, rng, unit_ball.bounds())
    rep.checks.append(at_most("agreement_N", "agreement", np.max(np.linalg.norm(G(X) - g(X), axis=1)), 1e-9))

    # periodicity relative to the first translate
    Y = sample_region(Difference(unit_ball, R["E2"]), samples, rng)
    t1 = tau(n, 1)
    base = G(t1(Y))
    per = max(float(np.max(np.linalg.norm(G(tau(n, k)(Y)) - tau(n, k - 1)(base), axis=1)))
              for k in range(1, 6))
    rep.checks.append(at_most("periodicity_k1_5", "periodicity", per, 1e-9))

    box = _check_box(n)
    Xa = sample_region(R["sigma_a"], samples, rng, box)
    rep.checks.append(at_most("sigma_a_translation", "shear.levels",
                              np.max(np.linalg.norm(G(Xa) - t1(Xa), axis=1)), 1e-10))
    holes = Union(tuple([unit_ball] + [Preimage(tau(n, -k), R["E2"]) for k in range(1, 8)]))
    Xb = sample_region(Difference(R["sigma_b"], holes), samples, rng, box)
    rep.checks.append(at_most("sigma_b_identity_outside_ball", "shear.levels",
                              np.max(np.linalg.norm(G(Xb) - Xb, axis=1)), 1e-10))

    Z = sample_region(Difference(Box(*box), R["E2"]), samples, rng, box)
    W = sample_region(Difference(Box(*box), R["C2"]), samples, rng, box)
    trip = max(float(np.max(np.linalg.norm(G_inv(G(Z)) - Z, axis=1))),
               float(np.max(np.linalg.norm(G(G_inv(W)) - W, axis=1))))
    rep.checks.append(at_most("round_trip", "inverse", trip, 1e-8))

    # |DG| on the translates of the closed ball minus E2
    sups = []
    for k in range(1, 6):
        _, J, _ = G.eval(tau(n, k)(Y), 1)
        sups.append(float(np.max(np.linalg.norm(J, ord=2, axis=(1, 2)))))
    rep.checks.append(at_most("DG_translate_spread", "uniform.derivative", max(sups) - min(sups), 1e-6))

    outside = Difference(Box(*box), unit_ball)
    L = lipschitz_estimate(G, outside, samples, seed, workers=workers)
    Li = lipschitz_estimate(G, outside, samples, seed, inverse=True, workers=workers)
    rep.checks.append(holds("bilipschitz_outside_ball", "bilipschitz.outside",
                            math.isfinite(L) and math.isfinite(Li)))
    rep.data.update({"lipschitz": L, "lipschitz_inverse": Li, "DG_sup_by_translate": sups,
                     "slab": [c1, c2]})
    return rep


def run_extend_punctured(cfg: dict, seed: int, workers: int = 1) -> Report:
    n = _dim(cfg)
    g = _map(_get(cfg, "g", (list, dict, str), required=True), n, "g")
    B1, B2 = _ball(cfg, "B1", n), _ball(cfg, "B2", n)
    p = _get(cfg, "p", float, 1.0)
    if p < 1:
        raise HypothesisError(f"p must be >= 1, got {p}")
    samples = _get(cfg, "samples", int, 4000)
    b = build_extension_disjoint(g, Preimage(g, B1.region()), Preimage(g, B2.region()), B1, B2, p,
                                 seed=seed, n_check=samples)
    rep = Report("extend-punctured", cfg, seed)
    rep.checks += [
        at_most("agreement_N", "agreement", b.checks["agreement_N"], 1e-8),
        at_most("h_identity_outside", "conjugation", b.checks["h_identity_outside"], 1e-9),
        at_most("seam_E1", "seam", b.checks["seam_E1"], 1e-9),
        at_most("seam_E2", "seam", b.checks["seam_E2"], 1e-9),
    ]
    E2 = b.regions.get("E2", Preimage(g, B2.region()))
    lo, hi = B2.center - 3 * B2.radius, B2.center + 3 * B2.radius
    lo = np.minimum(lo, B1.center - 3 * B1.radius)
    hi = np.maximum(hi, B1.center + 3 * B1.radius)
    Z = sample_region(Difference(Box(lo, hi), E2), samples, chunk_rng(seed, 21, 0), (lo, hi))
    Y = b.F(Z)
    rep.checks.append(at_most("round_trip", "inverse",
                              np.max(np.linalg.norm(b.F_inv(Y) - Z, axis=1)), 1e-8))
    rep.data.update({k: v for k, v in b.info.items() if isinstance(v, (int, float, np.floating))})
    return rep


def run_extend_collar(cfg: dict, seed: int, workers: int = 1) -> Report:
    n = _dim(cfg)
    p = _get(cfg, "p", float, required=True)
    check_collar_hypotheses(n, p)
    f = _map(_get(cfg, "f", (list, dict, str), required=True), n, "f")
    B1, B2 = _ball(cfg, "B1", n), _ball(cfg, "B2", n)
    a = _get(cfg, "a", float)
    levels = _get(cfg, "levels", int, 4)
    r0 = _get(cfg, "r0", float, 32.0)
    radii = cfg.get("radii", [1e-2, 1e-3, 1e-4, 1e-5, 1e-6])
    D1, D2 = Preimage(f, B1.region()), Preimage(f, B2.region())
    b = build_extension_collar(f, D1, D2, B1, B2, p, a=a, seed=seed,
                               n_check=_get(cfg, "samples", int, 2000))
    M, a = b.maps, float(b.info["inversion_exponent"])
    Fn, I, G, ft = M["F_normalized"], M["I"], M["G"], M["f_normalized"]
    rep = Report("extend-collar", cfg, seed)
    origin = np.zeros((1, n))
    rep.checks.append(at_most("F_fixes_origin", "fixed.origin", np.linalg.norm(Fn(origin)), 0.0))
    rep.checks.append(at_most("agreement_near_dD2", "agreement", b.checks["agreement_N"], 1e-8))

    X = sample_region(Difference(BallRegion(Ball(np.zeros(n), 1.0)), BallRegion(Ball(np.zeros(n), 1e-3))),
                      2000, chunk_rng(seed, 22, 0))
    trip = float(np.max(np.linalg.norm(M["F_normalized_inv"](Fn(X)) - X, axis=1)))
    rep.checks.append(at_most("round_trip", "inverse", trip, 1e-8))

    # near the origin: |I(x)| / |G(I(x))| tends to |A u|^a with A = Df~(0), u = x/|x|
    A = ft.eval(origin, 1)[1][0]

    def ratio(Xr):
        u = Xr / np.linalg.norm(Xr, axis=1, keepdims=True)
        Y = I(Xr)
        q = np.linalg.norm(Y, axis=1) / np.linalg.norm(G(Y), axis=1)
        return q / np.linalg.norm(u @ A.T, axis=1) ** a

    prof = near_origin_profile(ratio, Fn, n, limit=1.0, radii=radii, seed=seed)
    rep.checks.append(at_most("near_origin_ratio", "near.infinity", abs(prof.ratios[-1] - 1.0), 0.05))
    der = prof.derivative_sup
    bounded = all(map(math.isfinite, der)) and max(der[-2:]) <= 2.0 * max(der[:-2])
    rep.checks.append(holds("DF_bounded_near_origin", "near.infinity", bounded))

    chart_inv, slab = collar_chart(b)
    seq = far_field_seminorm(Fn, chart_inv, p, levels, slab=slab, r0=r0, workers=workers)
    convergent = exponent_check(n, p, a)
    if convergent:
        rel = abs(seq[-1][1] - seq[-2][1]) / abs(seq[-1][1])
        rep.checks.append(at_most("sobolev_cauchy", "integrability", rel, 0.02))
    else:
        g_last = growth_ratios(seq)[-1] - 1.0
        rep.checks.append(Check("sobolev_divergent", "integrability", g_last, 0.10, g_last > 0.10))
    rep.data.update({
        "a": a, "p": p, "exponent_condition": convergent, "sobolev_seq": seq,
        "near_origin": {"radii": prof.radii, "ratio": prof.ratios, "DF_sup": der,
                        "F_sup": prof.value_sup},
        "slab": list(slab), "delta": b.info["delta"],
    })
    return rep


def _verify_target(spec, n: int) -> SmoothMap:
    if isinstance(spec, dict) and "twist" in spec:
        return make_twist(_sphere_map(spec["twist"], n))[0]
    return _map(spec, n, "map")


def run_verify_map(cfg: dict, seed: int, workers: int = 1) -> Report:
    n = _dim(cfg)
    m = _verify_target(_get(cfg, "map", (list, dict, str), "identity"), n)
    region = _ball(cfg, "region", n).region()
    p = _get(cfg, "p", float, 1.0)
    if p < 1:
        raise ConfigError("p must be >= 1")
    punctures = [_vector(c, n, "punctures[]") for c in cfg.get("punctures", [])]
    tol = Tolerances(n_pairs=_get(cfg, "samples", int, 4000), levels=_get(cfg, "levels", int, 3))
    r = certify_LW(m, region, p, tol, seed=seed, punctures=punctures, workers=workers)
    rep = Report("verify-map", cfg, seed)
    for name, ok in sorted(r.flags.items()):
        rep.checks.append(holds(name, "class.LW", ok))
    rep.data.update(r.to_dict())
    return rep


def _alpha_grid(cfg) -> list[float]:
    return [float(v) for v in cfg.get("alpha_grid", np.linspace(0, np.pi / 2, 9)[1:-1])]


def run_sweep_slab(cfg: dict, seed: int, workers: int = 1) -> Report:
    n = _dim(cfg)
    r1, r2, r = (_get(cfg, k, float, required=True) for k in ("r1", "r2", "r"))
    a_grid = [float(v) for v in cfg.get("a_grid", [round(0.1 * k, 1) for k in range(1, 20)])]
    samples = _get(cfg, "samples", int, 20000)
    pair = standard_pair(r1, r2, r, n)
    from .primitives import InversionParams

    rep = Report("sweep-slab", cfg, seed)
    rows = []
    for a in a_grid:
        s = slab_separation(InversionParams(a, r), pair, samples, seed, workers=workers)
        rows.append(s.to_dict())
        rep.checks.append(holds(f"poles_ordered[a={a:g}]", "pole.comparison", s.poles_ordered))
    golden = cfg.get("golden")
    if golden is not None:
        table = {round(row["a"], 6): row["separated"] for row in golden}
        for row in rows:
            want = table.get(round(row["a"], 6))
            if want is not None:
                rep.checks.append(holds(f"separated_matches_golden[a={row['a']:g}]", "slab.separation",
                                        row["boundary_separated"] == want))
    probe = psi_probe(a_grid, _alpha_grid(cfg), r, r2)
    rep.data.update({"rows": rows, "psi": probe})
    rep.tables["slab_sweep.csv"] = (
        ["a", "c1", "c2", "c2_closure", "boundary_separated", "closure_separated", "tau_n", "zeta_n"],
        [[row["a"], row["c1"], row["c2"], row["c2_closure"], int(row["boundary_separated"]),
          int(row["closure_separated"]), row["pole_images"][0], row["pole_images"][1]] for row in rows],
    )
    return rep


def _sphere_map(name: str, n: int) -> SmoothMap:
    if name == "identity":
        return identity(n)
    if name == "rotation":
        A = np.eye(n)
        c, s = math.cos(0.7), math.sin(0.7)
        A[:2, :2] = [[c, -s], [s, c]]
        return linear_map(A)
    if name == "bump_rotation":
        # centred on the rotation axis, so the unit sphere is preserved while the
        # twist angle varies with latitude; in the plane the axis is the origin
        center = np.zeros(n) if n == 2 else np.eye(n)[-1]
        return bump_rotation(center, 1.5, 0.9, (0, 1))
    raise ConfigError(f"unknown sphere map {name!r}")


def run_milnor_glue(cfg: dict, seed: int, workers: int = 1) -> Report:
    n = _dim(cfg)
    samples = _get(cfg, "samples", int, 1000)
    rng = chunk_rng(seed, 23, 0)
    X = sphere_points(samples, n, rng) * np.exp(rng.uniform(-2, 2, samples))[:, None]
    id_star, _ = make_twist(identity(n))
    north, south = make_stereographic("north", n), make_stereographic("south", n)
    rep = Report("milnor-glue", cfg, seed)
    q = np.sum(X**2, axis=1, keepdims=True)
    exact = np.max(np.abs(id_star(X) - X / q) * np.sqrt(q))
    rep.checks.append(at_most("identity_twist_is_inversion", "twist.identity", exact, 1e-15))
    chart = np.max(np.linalg.norm(south.inverse(north(X)) - id_star(X), axis=1) * np.sqrt(q[:, 0]))
    rep.checks.append(at_most("chart_transition", "stereographic", chart, 1e-12))
    for name in cfg.get("phis", ["identity", "rotation", "bump_rotation"]):
        star, bar = make_twist(_sphere_map(name, n))
        lhs = id_star.inverse(star(X))
        err = np.max(np.linalg.norm(lhs - bar(X), axis=1) / np.linalg.norm(X, axis=1))
        rep.checks.append(at_most(f"twist_factorization[{name}]", "twist.identity", err, 1e-12))
    return rep


def run_plot_data(cfg: dict, seed: int, workers: int = 1) -> Report:
    c1, c2 = _get(cfg, "c1", float, -0.25), _get(cfg, "c2", float, 0.15)
    lines = _get(cfg, "lines", int, 9)
    points = _get(cfg, "points", int, 121)
    S = make_shear(ShearParams(c1, c2), 2)
    rep = Report("plot-data", cfg, seed)
    rows = []
    xn = np.linspace(c1 - 1.0, c2 + 1.0, points)
    for x1 in np.linspace(-2.0, 2.0, lines):
        P = np.column_stack([np.full(points, x1), xn])
        Q = S(P)
        branch = np.where(xn < c1, 0, np.where(xn > c2, 2, 1))
        rows += [[float(q[0]), float(q[1]), int(k)] for q, k in zip(Q, branch)]
    rep.tables["shear_levels.csv"] = (["x1", "xn", "branch-id"], rows)

    ident = dict(default_config("extend-identity"), **cfg.get("identity", {}))
    n = 2
    g = _map(ident["g"], n, "g")
    C1, C2 = _ball(ident, "C1", n).region(), _ball(ident, "C2", n).region()
    b = build_extension_identity(IdentityCaseInput(g, Preimage(g, C1), Preimage(g, C2), C1, C2,
                                                   float(ident["c1"]), float(ident["c2"])),
                                 seed=seed, n_check=0)
    G = b.F
    rows = []
    t = np.linspace(0, 2 * np.pi, points, endpoint=False)
    circle = np.column_stack([np.cos(t), np.sin(t)])
    for k in range(0, 3):
        for rad in (0.5, 0.75, 1.0, 1.25):
            P = tau(n, k)(rad * circle)
            keep = ~b.regions["E2"].contains(P)
            P = P[keep]
            Q = G(P)
            idx = G.branch_index(P)
            rows += [[float(q[0]), float(q[1]), int(i)] for q, i in zip(Q, idx)]
    rep.tables["g_images.csv"] = (["x1", "xn", "branch-id"], rows)
    rep.checks.append(holds("rows_written", "plot", len(rows) > 0))
    return rep


SCENARIOS: dict[str, Callable[[dict, int, int], Report]] = {
    "extend-collar": run_extend_collar,
    "extend-punctured": run_extend_punctured,
    "extend-identity": run_extend_identity,
    "verify-map": run_verify_map,
    "sweep-slab": run_sweep_slab,
    "milnor-glue": run_milnor_glue,
    "plot-data": run_plot_data,
}

_DEFAULTS = {
    "extend-identity": {
        "dim": 2,
        "g": [
            {"kind": "bump_rotation", "center": [0.0, 0.0], "radius": 0.85, "angle": 0.6},
            {"kind": "bump_translation", "center": [0.1, 0.0], "radius": 0.8, "vector": [0.05, 0.1]},
        ],
        "C1": {"center": [0.0, -0.5], "radius": 0.2},
        "C2": {"center": [0.0, 0.45], "radius": 0.25},
        "c1": -0.25,
        "c2": 0.15,
        "samples": 10000,
    },
    "extend-punctured": {
        "dim": 2,
        "g": [{"kind": "bump_rotation", "center": [0.0, 0.0], "radius": 4.0, "angle": 0.5}],
        "B1": {"center": [0.0, -1.5], "radius": 0.5},
        "B2": {"center": [0.0, 1.5], "radius": 0.8},
        "p": 1.5,
        "samples": 4000,
    },
    "extend-collar": {
        "dim": 3,
        "p": 1.0,
        "f": {"matrix": [[2.0, 0.3, 0.0], [0.0, 1.8, 0.2], [0.1, 0.0, 2.1]], "shift": [0.3, 0.0, 0.1]},
        "B1": {"center": [0.0, 0.0, 0.0], "radius": 0.2},
        "B2": {"center": [0.0, 0.0, 0.0], "radius": 3.0},
        "levels": 4,
        "r0": 32.0,
        "samples": 2000,
    },
    "verify-map": {
        "dim": 3,
        "map": "identity",
        "region": {"center": [0.0, 0.0, 0.0], "radius": 1.0},
        "p": 1.0,
        "samples": 4000,
        "levels": 3,
    },
    "sweep-slab": {"dim": 3, "r1": 0.5, "r2": 3.0, "r": 1.5, "samples": 20000},
    "milnor-glue": {"dim": 3, "samples": 1000},
    "plot-data": {"c1": -0.25, "c2": 0.15},
}


def default_config(scenario: str) -> dict:
    return copy.deepcopy(_DEFAULTS[scenario])


def run(scenario: str, config: dict | None = None, seed: int = 0, *, samples: int | None = None,
        levels: int | None = None, workers: int = 1) -> Report:
    """Run one scenario; ``samples``/``levels`` override the config's budgets."""
    if scenario not in SCENARIOS:
        raise ConfigError(f"unknown scenario {scenario!r}")
    cfg = default_config(scenario) if config is None else copy.deepcopy(config)
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    if samples is not None:
        cfg["samples"] = int(samples)
    if levels is not None:
        cfg["levels"] = int(levels)
    return SCENARIOS[scenario](cfg, int(seed), int(workers))


# ---------------------------------------------------------------------------
# command line
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="collarext", description=__doc__.split("\n")[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="scenario", required=True)
    for name in SCENARIOS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", type=Path, help="JSON config (defaults to the built-in one)")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", type=Path, default=Path("."), help="output directory")
        sp.add_argument("--samples", type=int, help="override the sample budget")
        sp.add_argument("--levels", type=int, help="override the quadrature levels")
        sp.add_argument("--workers", type=int, default=1, help="sampling threads")
        sp.add_argument("--strict", action="store_true", help="treat warnings as failures")
    return ap


def _load_config(path: Path | None, scenario: str) -> dict:
    if path is None:
        return default_config(scenario)
    try:
        cfg = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    return cfg


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if not 0 <= args.seed < 2**64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = _load_config(args.config, args.scenario)
        report = run(args.scenario, cfg, args.seed, samples=args.samples, levels=args.levels,
                     workers=args.workers)
    except (ConfigError, HypothesisError, GeometryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SlabSeparationError as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except (MapError, ExtensionError, AnalysisError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical breakdown: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC

    args.out.mkdir(parents=True, exist_ok=True)
    for name, (header, rows) in sorted(report.tables.items()):
        write_csv(args.out / name, header, rows)
        report.artifacts.append(name)
    (args.out / f"{args.scenario}.json").write_text(report.to_json(), encoding="utf-8", newline="\n")
    failed = report.failed(args.strict)
    for c in report.checks:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.name}: measured {c.to_dict()['measured']} "
              f"(tolerance {c.to_dict()['tolerance']})")
    return EXIT_FAIL if failed else EXIT_PASS


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
