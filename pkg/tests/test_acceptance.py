"""Acceptance criteria 1-8, one marked group per criterion.

The terminal summary (see conftest.py) prints one PASS/FAIL line per criterion.
"""

from __future__ import annotations

import json
import math
from fractions import Fraction
import time
from pathlib import Path

import numpy as np
import pytest

from collarext import cli
from collarext.analysis import exponent_check, psi
from collarext.geometry import sphere_points
from collarext.maps import fd_hessian, hs_norm, identity, tau
from collarext.primitives import (
    InversionParams,
    ShearParams,
    inversion_bounds,
    make_inversion,
    make_shear,
    make_twist,
)

DATA = Path(__file__).parent / "data"


def _report(rep):
    for c in rep.checks:
        print(f"  {c.name}: measured={c.measured} tol={c.tolerance} pass={c.passed}")


def _check(rep, name):
    return next(c for c in rep.checks if c.name == name)


# ---------------------------------------------------------------------------
# 1. shear
# ---------------------------------------------------------------------------


@pytest.mark.criterion(1)
@pytest.mark.parametrize("dim", [2, 3])
def test_shear_suite(dim):
    t0 = time.perf_counter()
    sp = ShearParams(0.0, 2.0)
    S = make_shear(sp, dim)
    rng = np.random.default_rng(1)

    below = rng.uniform(-5, 5, (10000, dim))
    below[:, -1] = rng.uniform(-5, sp.a_level, 10000)
    above = rng.uniform(-5, 5, (10000, dim))
    above[:, -1] = rng.uniform(sp.b_level, 7, 10000)
    assert np.max(np.abs(S(below) - below)) <= 1e-12
    assert np.max(np.abs(S(above) - tau(dim, -1)(above))) <= 1e-12

    # interior slab points away from the midline kink
    X = rng.uniform(-2, 2, (2000, dim))
    X[:, -1] = rng.uniform(0.01, 0.99, 2000) + rng.integers(0, 2, 2000)
    H_an = S.eval(X, 2)[2]
    H_fd = fd_hessian(S, X)
    expected = 3.0 / sp.c**2
    an, fd = hs_norm(H_an), hs_norm(H_fd)
    assert np.max(np.abs(an - expected)) / expected <= 1e-4
    assert np.max(np.abs(fd - expected)) / expected <= 1e-4
    # the smaller stated constant 2/c^2 is exceeded by the measured one
    print(f"  measured |D2S| c^2 = {np.max(fd) * sp.c**2:.6f} (probe constant 2)")
    assert np.max(fd) * sp.c**2 > 2.0
    assert time.perf_counter() - t0 < 5


# ---------------------------------------------------------------------------
# 2. inversion
# ---------------------------------------------------------------------------


@pytest.mark.criterion(2)
@pytest.mark.parametrize("a", [0.25, 0.5, 1.0, 2.0])
@pytest.mark.parametrize("dim", [2, 3])
def test_inversion_suite(a, dim):
    t0 = time.perf_counter()
    r = 1.5
    p = InversionParams(a, r)
    inv = make_inversion(p, dim)
    rng = np.random.default_rng(2)
    X = sphere_points(10000, dim, rng) * rng.uniform(0.5 * r, 2 * r, 10000)[:, None]
    assert np.max(np.linalg.norm(make_inversion(p.dual, dim)(inv(X)) - X, axis=1)) <= 1e-10

    U = sphere_points(10000, dim, rng) * r
    assert np.max(np.linalg.norm(inv(U) - U, axis=1)) <= 1e-12

    _, J, H = inv.eval(X, 2)
    t = np.linalg.norm(X, axis=1)
    env1 = np.array([inversion_bounds(p, x, 1)["envelope"] for x in X])
    env2 = np.array([inversion_bounds(p, x, 2)["envelope"] for x in X])
    jac = np.array([inversion_bounds(p, x, 1)["jacobian_bound"] for x in X])
    C1 = inversion_bounds(p, X[0], 1)["constant"]
    C2 = inversion_bounds(p, X[0], 2)["constant"]
    fit1 = float(np.max(hs_norm(J) / env1))
    fit2 = float(np.max(hs_norm(H) / env2))
    detJ = np.abs(np.linalg.det(J))
    print(f"  fitted constants: |DI| {fit1:.4f} <= {C1}, |D2I| {fit2:.4f} <= {C2}, "
          f"JI/envelope {np.max(detJ / jac):.4f}")
    assert fit1 <= C1 and fit2 <= C2
    assert np.all(detJ <= jac * (1 + 1e-12))
    assert np.allclose(detJ, a * r ** (dim * (a + 1)) * t ** (-dim * (a + 1)), rtol=1e-10)
    assert time.perf_counter() - t0 < 10


# ---------------------------------------------------------------------------
# 3. slab and poles
# ---------------------------------------------------------------------------


@pytest.mark.criterion(3)
@pytest.mark.parametrize("dim", [2, 3])
def test_slab_pole_suite(dim):
    t0 = time.perf_counter()
    golden = json.loads((DATA / "slab_golden.json").read_text())
    cfg = {"dim": dim, "r1": golden["r1"], "r2": golden["r2"], "r": golden["r"],
           "samples": 20000, "golden": golden["rows"],
           "a_grid": [row["a"] for row in golden["rows"]]}
    rep = cli.run("sweep-slab", cfg)
    _report(rep)
    assert not rep.failed()
    assert sum(c.name.startswith("separated_matches_golden") for c in rep.checks) == len(golden["rows"])

    row = next(r for r in rep.data["rows"] if r["a"] == 0.5)
    tau_n, zeta_n = row["pole_images"]
    assert tau_n == pytest.approx(-1.16190, abs=1e-5)
    assert zeta_n == pytest.approx(-0.86603, abs=1e-5)

    assert psi(1.0, math.pi / 4, 1.5, 3.0) == pytest.approx(5.625, abs=1e-12)
    assert psi(1e-3, math.pi / 4, 1.5, 3.0) == pytest.approx(2.25, abs=1e-12)
    assert psi(1.0, math.pi / 4, 1.5, 3.0) < 9 and psi(1e-3, math.pi / 4, 1.5, 3.0) < 9
    assert time.perf_counter() - t0 < 30


# ---------------------------------------------------------------------------
# 4. identity-case extension
# ---------------------------------------------------------------------------

IDENTITY_3D = {
    "dim": 3,
    "g": [
        {"kind": "bump_rotation", "center": [0.0, 0.0, 0.0], "radius": 0.85, "angle": 0.6},
        {"kind": "bump_translation", "center": [0.1, 0.0, 0.0], "radius": 0.8, "vector": [0.05, 0.0, 0.1]},
    ],
    "C1": {"center": [0.0, 0.0, -0.5], "radius": 0.2},
    "C2": {"center": [0.0, 0.0, 0.45], "radius": 0.25},
    "c1": -0.25,
    "c2": 0.15,
    "samples": 10000,
}


@pytest.mark.criterion(4)
@pytest.mark.parametrize("dim", [2, 3])
def test_identity_case_extension(dim):
    t0 = time.perf_counter()
    cfg = cli.default_config("extend-identity") if dim == 2 else IDENTITY_3D
    rep = cli.run("extend-identity", cfg)
    _report(rep)
    print(f"  empirical L = {rep.data['lipschitz']:.4f}, L(inverse) = {rep.data['lipschitz_inverse']:.4f}")
    assert {c.name for c in rep.checks} >= {
        "agreement_N", "periodicity_k1_5", "sigma_a_translation", "sigma_b_identity_outside_ball",
        "round_trip", "DG_translate_spread", "bilipschitz_outside_ball"}
    assert not rep.failed()
    assert time.perf_counter() - t0 < 120


# ---------------------------------------------------------------------------
# 5. collar pipeline
# ---------------------------------------------------------------------------

_COLLAR_CACHE: dict = {}


def _collar(p, a=None):
    key = (p, a)
    if key not in _COLLAR_CACHE:
        cfg = cli.default_config("extend-collar")
        cfg["p"] = p
        if a is not None:
            cfg["a"] = a
        t0 = time.perf_counter()
        rep = cli.run("extend-collar", cfg)
        _COLLAR_CACHE[key] = (rep, time.perf_counter() - t0)
    return _COLLAR_CACHE[key]


@pytest.mark.criterion(5)
@pytest.mark.parametrize("p", [1.0, 1.5, 2.0])
def test_collar_construction(p):
    rep, elapsed = _collar(p)
    _report(rep)
    for name in ("F_fixes_origin", "agreement_near_dD2", "round_trip", "DF_bounded_near_origin",
                 "sobolev_cauchy"):
        assert _check(rep, name).passed, name
    assert rep.data["exponent_condition"]
    assert elapsed < 100


@pytest.mark.criterion(5)
@pytest.mark.parametrize("p", [
    1.0,
    1.5,
    pytest.param(2.0, marks=pytest.mark.xfail(
        strict=True, reason="with a = 0.25 the ratio converges like |x|^a; at |x| = 1e-6 "
                            "it is still about 23% from its limit")),
])
def test_collar_near_origin_ratio(p):
    rep, _ = _collar(p)
    c = _check(rep, "near_origin_ratio")
    print(f"  ratio profile {rep.data['near_origin']['ratio']}")
    assert c.passed, f"deviation {c.measured:.4f} > {c.tolerance}"


@pytest.mark.criterion(5)
def test_collar_divergence_probe():
    rep, elapsed = _collar(2.0, a=2.0)
    assert not rep.data["exponent_condition"]
    c = _check(rep, "sobolev_divergent")
    print(f"  sequence {rep.data['sobolev_seq']}; last growth {c.measured:.3f}")
    assert c.passed
    assert elapsed < 100


# ---------------------------------------------------------------------------
# 6. exponent identity
# ---------------------------------------------------------------------------


@pytest.mark.criterion(6)
def test_exponent_identity_grid():
    t0 = time.perf_counter()
    mismatches, total = 0, 0
    for n in range(2, 9):
        for p in np.arange(1.0, n - 0.125, 0.25):
            for a in np.round(np.arange(0.05, 3.0 + 1e-9, 0.05), 10):
                total += 1
                # exact rational oracle on the decimal grid values
                truth = Fraction(str(a)) < Fraction(n) / Fraction(str(p)) - 1
                mismatches += exponent_check(n, float(p), float(a)) != truth
    print(f"  {total} grid points, {mismatches} mismatches")
    assert mismatches == 0
    assert time.perf_counter() - t0 < 1


# ---------------------------------------------------------------------------
# 7. twist and charts
# ---------------------------------------------------------------------------


@pytest.mark.criterion(7)
@pytest.mark.parametrize("dim", [2, 3])
def test_milnor_suite(dim):
    t0 = time.perf_counter()
    rep = cli.run("milnor-glue", {"dim": dim, "samples": 1000})
    _report(rep)
    names = {c.name for c in rep.checks}
    assert {"twist_factorization[identity]", "twist_factorization[rotation]",
            "twist_factorization[bump_rotation]", "chart_transition",
            "identity_twist_is_inversion"} <= names
    assert not rep.failed()
    # phi = id gives x / |x|^2
    star, _ = make_twist(identity(dim))
    X = np.random.default_rng(7).normal(size=(1000, dim))
    q = np.sum(X**2, axis=1, keepdims=True)
    assert np.max(np.abs(star(X) - X / q) * np.sqrt(q)) <= 1e-15
    assert time.perf_counter() - t0 < 5


# ---------------------------------------------------------------------------
# 8. determinism
# ---------------------------------------------------------------------------

_DETERMINISM = [
    ("milnor-glue", None),
    ("sweep-slab", {"dim": 3, "r1": 0.5, "r2": 3.0, "r": 1.5, "samples": 20000, "a_grid": [0.3, 0.5, 1.0]}),
    ("extend-identity", None),
    ("verify-map", {"dim": 2, "map": {"matrix": [[1.0, 0.2], [0.0, 1.0]]},
                    "region": {"center": [0.0, 0.0], "radius": 1.0}, "samples": 5000, "levels": 2}),
    ("plot-data", None),
]


@pytest.mark.criterion(8)
@pytest.mark.parametrize("scenario,cfg", _DETERMINISM, ids=[s for s, _ in _DETERMINISM])
def test_determinism(scenario, cfg):
    a = cli.run(scenario, cfg, seed=3).to_json()
    b = cli.run(scenario, cfg, seed=3).to_json()
    assert a == b
    c = cli.run(scenario, cfg, seed=3, workers=4).to_json()
    assert json.loads(a) == json.loads(c)
    assert a == c


@pytest.mark.criterion(8)
def test_determinism_collar_workers():
    cfg = cli.default_config("extend-collar")
    cfg["levels"] = 2
    a = cli.run("extend-collar", cfg, seed=5, workers=1).to_json()
    b = cli.run("extend-collar", cfg, seed=5, workers=3).to_json()
    assert a == b
