import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from collarext.geometry import (
    Ball,
    BallRegion,
    Box,
    Complement,
    Difference,
    GeometryError,
    HalfSpace,
    Intersection,
    Preimage,
    Similarity,
    Slab,
    TranslateUnion,
    Union,
    UndecidableMembership,
    as_point,
    collar_gap,
    normalize_balls,
    region_contains,
    rotation_taking,
    south_pole,
    sphere_points,
)
from collarext.maps import identity, translation


def test_point_validation():
    assert as_point([1.0, 2.0]).shape == (2,)
    with pytest.raises(GeometryError):
        as_point([1.0])
    with pytest.raises(GeometryError):
        as_point([1.0, np.nan])
    with pytest.raises(GeometryError):
        as_point([1.0, 2.0], dim=3)


def test_ball_radius_must_be_positive():
    with pytest.raises(GeometryError):
        Ball([0.0, 0.0], 0.0)
    with pytest.raises(GeometryError):
        Ball([0.0, 0.0], -1.0)


@pytest.mark.parametrize("ball,expected", [
    (Ball([0.0, -2.0], 0.5), [0.0, -2.5]),
    (Ball([0.0, 0.0, 0.0], 1.0), [0.0, 0.0, -1.0]),
    (Ball([0.0, 1.0], 1.0), [0.0, 0.0]),
])
def test_south_pole(ball, expected):
    assert np.allclose(south_pole(ball), expected, atol=0)


def test_normalize_hand_solved_example():
    # tangency |t| = r + r1, |z| = r2 - r, z_n - t_n = d solved by hand
    pair = normalize_balls(Ball([0.0, 0.0, 0.3], 0.5), Ball([0.0, 0.5, 0.3], 3.0))
    assert pair.tangent_radius == pytest.approx(1.5, abs=1e-12)
    assert np.allclose(pair.ball1.center, [0, 0, -2.0], atol=1e-12)
    assert np.allclose(pair.ball2.center, [0, 0, -1.5], atol=1e-12)
    assert np.allclose(pair.south_pole_1, [0, 0, -2.5], atol=1e-12)
    assert np.allclose(pair.south_pole_2, [0, 0, -4.5], atol=1e-12)
    assert pair.check() == []


def test_normalize_concentric():
    pair = normalize_balls(Ball([1.0, 1.0], 1.0), Ball([1.0, 1.0], 3.0))
    assert pair.tangent_radius == 1.0
    assert np.allclose(pair.ball1.center, [0, -2.0], atol=1e-12)
    # concentric: z = t, and tangency |z| = r2 - r = 2 fixes z = -2 e_n
    assert np.allclose(pair.ball2.center, [0, -2.0], atol=1e-12)
    assert pair.check() == []


@pytest.mark.parametrize("b1,b2", [
    (Ball([0.0, 0.0], 1.0), Ball([2.0, 0.0], 3.0)),  # internally tangent
    (Ball([0.0, 0.0], 1.0), Ball([5.0, 0.0], 1.0)),  # disjoint
    (Ball([0.0, 0.0], 3.0), Ball([0.0, 0.0], 1.0)),  # reversed nesting
])
def test_normalize_rejects_degenerate(b1, b2):
    with pytest.raises(GeometryError):
        normalize_balls(b1, b2)


def test_normalize_maps_balls_rigidly():
    b1, b2 = Ball([0.4, -0.2, 1.0], 0.7), Ball([0.1, 0.3, 0.5], 2.5)
    pair = normalize_balls(b1, b2)
    sim = pair.similarity
    assert np.allclose(sim(b1.center), pair.ball1.center, atol=1e-12)
    assert np.allclose(sim(b2.center), pair.ball2.center, atol=1e-12)
    assert np.allclose(sim.rotation @ sim.rotation.T, np.eye(3), atol=1e-14)
    assert np.linalg.det(sim.rotation) == pytest.approx(1.0)


@st.composite
def nested_balls(draw):
    dim = draw(st.integers(2, 5))
    c2 = np.array(draw(st.lists(st.floats(-5, 5), min_size=dim, max_size=dim)))
    r2 = draw(st.floats(0.5, 10))
    r1 = draw(st.floats(0.05, 0.9)) * r2
    room = r2 - r1
    direction = np.array(draw(st.lists(st.floats(-1, 1), min_size=dim, max_size=dim)))
    nrm = np.linalg.norm(direction)
    frac = draw(st.floats(0.0, 0.95))
    offset = direction / nrm * frac * room if nrm > 1e-3 else np.zeros(dim)
    return Ball(c2 + offset, r1), Ball(c2, r2)


@settings(max_examples=150, deadline=None)
@given(nested_balls())
def test_normalize_invariants(balls):
    b1, b2 = balls
    pair = normalize_balls(b1, b2)
    assert pair.check(tol=1e-10) == []
    d = np.linalg.norm(b1.center - b2.center)
    assert collar_gap(b1, b2) == pytest.approx(b2.radius - b1.radius - d)
    gap = np.linalg.norm(pair.south_pole_2 - pair.south_pole_1)
    assert gap == pytest.approx(collar_gap(b1, b2), abs=1e-10 * max(1, b2.radius))


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 6), st.integers(0, 2**31 - 1))
def test_rotation_taking(dim, seed):
    rng = np.random.default_rng(seed)
    w, t = sphere_points(2, dim, rng)
    Q = rotation_taking(w, t)
    assert np.allclose(Q @ w, t, atol=1e-12)
    assert np.allclose(Q.T @ Q, np.eye(dim), atol=1e-12)
    assert np.linalg.det(Q) == pytest.approx(1.0)


def test_region_contains_examples():
    assert region_contains(Slab(2, 0.0, 2.0), [5.0, 1.0])
    assert not region_contains(Complement(BallRegion(Ball([0.0, 0.0], 1.0))), [0.5, 0.0])
    assert region_contains(Preimage(identity(2), HalfSpace(2, 2.0)), [0.0, 3.0])


def test_region_contains_boundary_policy():
    half = HalfSpace(2, 0.0)
    with pytest.raises(UndecidableMembership):
        region_contains(half, [1.0, 1e-12])
    assert region_contains(half, [1.0, 1e-12], on_boundary="inside")
    assert not region_contains(half, [1.0, 1e-12], on_boundary="outside")


def test_preimage_uses_the_map():
    R = Preimage(translation([0.0, 5.0]), BallRegion(Ball([0.0, 0.0], 1.0)))
    assert R.contains([0.0, -5.0])
    assert not R.contains([0.0, 0.0])


def test_translate_union():
    T = TranslateUnion(BallRegion(Ball([0.0, 0.0], 1.0)), period=3.0, k_min=1, k_max=4)
    assert T.contains([3.0, 0.0]) and T.contains([12.5, 0.0])
    assert not T.contains([0.0, 0.0]) and not T.contains([15.0, 0.0])
    assert not T.contains([4.5, 0.0])


def test_box_bounds_and_margin():
    B = Box([0.0, 0.0], [1.0, 2.0])
    assert B.margin(np.array([[0.5, 1.0]]))[0] == pytest.approx(0.5)
    lo, hi = B.bounds()
    assert np.array_equal(lo, [0, 0]) and np.array_equal(hi, [1, 2])


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_region_algebra_consistent(seed):
    rng = np.random.default_rng(seed)
    A = BallRegion(Ball(rng.uniform(-1, 1, 2), rng.uniform(0.5, 2)))
    B = HalfSpace(2, rng.uniform(-1, 1), upper=bool(rng.integers(2)))
    X = rng.uniform(-3, 3, (500, 2))
    a, b = A.contains(X), B.contains(X)
    assert np.array_equal(Difference(A, B).contains(X), a & ~b)
    assert np.array_equal(Intersection((A, B)).contains(X), a & b)
    assert np.array_equal(Union((A, B)).contains(X), a | b)
    assert np.array_equal((~A).contains(X), ~a)
    assert np.array_equal((A - B).contains(X), a & ~b)


def test_similarity_inverse_and_then():
    rng = np.random.default_rng(0)
    Q = rotation_taking(*sphere_points(2, 3, rng))
    s = Similarity(Q, np.array([1.0, -2.0, 0.5]), 2.5)
    X = rng.normal(size=(20, 3))
    assert np.allclose(s.inverse()(s(X)), X, atol=1e-12)
    t = Similarity.translation([1.0, 0.0, 0.0])
    assert np.allclose(s.then(t)(X), t(s(X)), atol=1e-12)


def test_ball_boundary_samples_on_sphere():
    B = BallRegion(Ball([1.0, 2.0, 3.0], 0.5))
    P = B.sample_boundary(200, np.random.default_rng(0))
    assert np.allclose(np.linalg.norm(P - [1, 2, 3], axis=1), 0.5)
