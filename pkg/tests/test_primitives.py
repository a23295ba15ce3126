import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from collarext.geometry import sphere_points
from collarext.maps import SingularPointError, affine, compose, identity, tau
from collarext.primitives import (
    BUMP_SLOPE,
    InversionParams,
    PrimitiveError,
    RadialProfile,
    ShearParams,
    bump_rotation,
    bump_translation,
    inversion_bounds,
    linear_map,
    make_inversion,
    make_radial_stretch,
    make_shear,
    make_stereographic,
    make_test_diffeo,
    make_twist,
)


# -- shear -------------------------------------------------------------------


def test_shear_examples():
    S = make_shear(ShearParams(0.0, 2.0), 2)
    assert np.array_equal(S([0.4, -1.0]), [0.4, -1.0])
    assert np.allclose(S([0.0, 3.0]), [-3.0, 3.0], atol=1e-15)
    assert np.allclose(S([0.0, 1.0]), [-1.5, 1.0], atol=1e-15)


def test_shear_rejects_empty_slab():
    with pytest.raises(PrimitiveError):
        ShearParams(1.0, 1.0)


@pytest.mark.parametrize("a,b", [(0.0, 2.0), (-0.3, 0.1), (1.0, 5.0)])
def test_shear_second_derivative_constant(a, b):
    sp = ShearParams(a, b)
    S = make_shear(sp, 3)
    rng = np.random.default_rng(0)
    X = rng.uniform(-2, 2, (500, 3))
    X[:, -1] = rng.uniform(a, b, 500)
    X = X[np.abs(X[:, -1] - sp.mid) > 1e-9]
    H = S.eval(X, 2)[2]
    assert np.allclose(np.sqrt(np.sum(H**2, axis=(1, 2, 3))), 3 / sp.c**2, rtol=1e-12)
    X[:, -1] = np.concatenate([rng.uniform(b, b + 3, len(X) // 2), rng.uniform(a - 3, a, len(X) - len(X) // 2)])
    assert np.all(S.eval(X, 2)[2] == 0)


def test_shear_lipschitz_at_midline():
    sp = ShearParams(0.0, 2.0)
    assert sp.lipschitz == pytest.approx((3 + np.sqrt(13)) / 2)
    assert sp.lipschitz == pytest.approx(3.30278, abs=1e-5)
    S = make_shear(sp, 2)
    # difference quotients along the top singular direction at the midline
    J = S.jacobian([0.0, 1.0])
    v = np.linalg.svd(J)[2][0]
    x = np.array([0.0, 1.0])
    h = 1e-4
    q = np.linalg.norm(S(x + h * v) - S(x - h * v)) / (2 * h)
    assert q == pytest.approx(sp.lipschitz, rel=0.01)


def test_shear_inverse_growth():
    S = make_shear(ShearParams(-0.5, 0.5), 3)
    Y = np.random.default_rng(1).uniform(-5, 5, (2000, 3))
    Y[:, 0] = np.abs(Y[:, 0])  # S^-1 pushes e_1 forward; growth holds on the x_1 >= 0 side
    assert np.all(np.linalg.norm(S.inverse(Y), axis=1) >= np.linalg.norm(Y, axis=1))


def test_shear_identity_and_translation_regions():
    S = make_shear(ShearParams(0.0, 2.0), 3)
    X = np.random.default_rng(2).uniform(-3, 3, (1000, 3))
    lo = X[:, -1] < 0
    hi = X[:, -1] > 2
    assert np.array_equal(S(X[lo]), X[lo])
    assert np.allclose(S(X[hi]), tau(3, -1)(X[hi]), atol=1e-14)


# -- inversion ---------------------------------------------------------------


def test_inversion_examples():
    I = make_inversion(InversionParams(1.0, 1.0), 3)
    assert np.allclose(I([2.0, 0, 0]), [0.5, 0, 0], atol=1e-16)
    I = make_inversion(InversionParams(0.5, 1.5), 3)
    assert np.linalg.norm(I([0, 0, -2.5])) == pytest.approx(1.5**1.5 * 2.5**-0.5)
    assert np.linalg.norm(I([0, 0, -2.5])) == pytest.approx(1.16190, abs=1e-5)


def test_inversion_params_validated():
    with pytest.raises(PrimitiveError):
        InversionParams(0.0, 1.0)
    with pytest.raises(PrimitiveError):
        InversionParams(1.0, -1.0)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.1, 3.0), st.floats(0.2, 5.0), st.integers(2, 5))
def test_inversion_properties(a, r, dim):
    p = InversionParams(a, r)
    I = make_inversion(p, dim)
    rng = np.random.default_rng(0)
    U = sphere_points(200, dim, rng)
    assert np.allclose(I(r * U), r * U, atol=1e-12 * r)
    X = U * rng.uniform(0.3 * r, 3 * r, 200)[:, None]
    Y = I(X)
    assert np.allclose(make_inversion(p.dual, dim)(Y), X, rtol=1e-10, atol=1e-10 * r)
    # rays are preserved and |I(x)| = r^(a+1) |x|^-a
    assert np.allclose(Y / np.linalg.norm(Y, axis=1, keepdims=True), U, atol=1e-12)
    t = np.linalg.norm(X, axis=1)
    assert np.allclose(np.linalg.norm(Y, axis=1), r ** (a + 1) * t**-a, rtol=1e-12)
    # the inverse relation between |x| and |I(x)|
    assert np.allclose(t ** (a + 1) * np.linalg.norm(Y, axis=1) ** (1 / a + 1),
                       r ** ((a + 1) * (1 / a + 1)), rtol=1e-10)


def test_inversion_bounds_examples():
    p = InversionParams(1.0, 1.0)
    b = inversion_bounds(p, [1.0, 0.0, 0.0], 1)
    assert b["envelope"] == 1.0
    I = make_inversion(p, 3)
    measured = np.linalg.norm(I.jacobian([1.0, 0.0, 0.0]))
    assert np.isfinite(measured) and measured <= 3 * b["envelope"]
    assert inversion_bounds(p, [2.0, 0.0, 0.0], 2)["envelope"] == pytest.approx(2.0**-3)
    for dim in (2, 3, 4):
        x = np.zeros(dim)
        x[0] = 2.0
        det = abs(np.linalg.det(make_inversion(p, dim).jacobian(x)))
        assert det == pytest.approx(2.0 ** (-2 * dim), rel=1e-14)
        assert det <= inversion_bounds(p, x, 1)["jacobian_bound"]
    with pytest.raises(PrimitiveError):
        inversion_bounds(p, [0.0, 0.0], 1)


# -- radial stretch --------------------------------------------------------------


def test_radial_stretch_examples():
    R = make_radial_stretch(RadialProfile(0.3, 0.7), 3)
    assert np.array_equal(R(np.zeros(3)), np.zeros(3))
    U = sphere_points(100, 3, np.random.default_rng(0))
    assert np.allclose(R(0.3 * U), 0.7 * U, atol=1e-14)
    X = U * np.random.default_rng(1).uniform(1.0, 4.0, 100)[:, None]
    assert np.array_equal(R(X), X)


def test_radial_profile_properties():
    p = RadialProfile(0.3, 0.7)
    t = np.linspace(0, 1.5, 3001)
    rho = p(t)
    assert rho[0] == 0 and p(0.3) == pytest.approx(0.7) and p(1.0) == pytest.approx(1.0)
    assert np.all(np.diff(rho) > 0)
    assert p.min_slope() > 0
    assert np.allclose(p(t[t >= 1]), t[t >= 1])
    # C^1 at the knots
    for k in (0.3, 1.0):
        assert p.derivative(k - 1e-9) == pytest.approx(p.derivative(k + 1e-9), abs=1e-6)


def test_radial_stretch_round_trip():
    R = make_radial_stretch(RadialProfile(0.2, 0.6), 2)
    X = np.random.default_rng(2).uniform(-1.2, 1.2, (500, 2))
    assert np.max(np.abs(R.inverse(R(X)) - X)) <= 1e-10


# -- twists and charts -----------------------------------------------------------


def test_twist_of_identity():
    star, bar = make_twist(identity(3))
    X = np.random.default_rng(3).normal(size=(300, 3))
    q = np.sum(X**2, axis=1, keepdims=True)
    assert np.allclose(star(X), X / q, rtol=1e-15, atol=0)
    assert np.allclose(bar(X), X, rtol=1e-15, atol=0)


def test_twist_of_rotation_is_factorized():
    th = 0.8
    A = np.eye(3)
    A[:2, :2] = [[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]]
    star, bar = make_twist(linear_map(A))
    id_star, _ = make_twist(identity(3))
    X = np.random.default_rng(4).normal(size=(1000, 3))
    assert np.allclose(id_star.inverse(star(X)), X @ A.T, atol=1e-12)
    assert np.allclose(bar(X), X @ A.T, atol=1e-12)


def test_twist_rejects_non_sphere_map():
    with pytest.raises(PrimitiveError):
        make_twist(affine(2 * np.eye(3)))


def test_stereographic_examples():
    north, south = make_stereographic("north", 3), make_stereographic("south", 3)
    assert np.allclose(north(np.zeros(3)), [0, 0, 0, -1])
    X = np.random.default_rng(5).normal(size=(1000, 3)) * 3
    assert np.allclose(np.linalg.norm(north(X), axis=1), 1.0, atol=1e-12)
    q = np.sum(X**2, axis=1, keepdims=True)
    assert np.allclose(south.inverse(north(X)), X / q, atol=1e-12)
    with pytest.raises(SingularPointError):
        north.inverse(np.array([[0.0, 0.0, 0.0, 1.0]]))
    with pytest.raises(PrimitiveError):
        make_stereographic("east", 3)


# -- test diffeomorphisms --------------------------------------------------------


def test_empty_recipe_is_identity():
    m = make_test_diffeo([], 2)
    X = np.random.default_rng(6).normal(size=(50, 2))
    assert np.array_equal(m(X), X)


def test_bump_rotation_is_identity_outside_support():
    m = make_test_diffeo([{"kind": "bump_rotation", "center": [0.5, 0.0], "radius": 1.0, "angle": 1.0}], 2)
    X = np.random.default_rng(7).uniform(-5, 5, (2000, 2))
    out = np.linalg.norm(X - m.support.center, axis=1) >= m.support.radius
    assert np.max(np.abs(m(X[out]) - X[out])) <= 1e-14
    assert not np.allclose(m(X[~out]), X[~out])


def test_bump_translation_kappa_half_round_trip():
    v = np.array([0.5 / BUMP_SLOPE, 0.0, 0.0])
    m = bump_translation([0.0, 0.0, 0.0], 1.0, v)
    assert m.kappa == pytest.approx(0.5)
    X = np.random.default_rng(8).uniform(-1.2, 1.2, (1000, 3))
    assert np.max(np.linalg.norm(m.inverse(m(X)) - X, axis=1)) <= 1e-9


def test_bump_translation_rejects_large_slope():
    with pytest.raises(PrimitiveError):
        bump_translation([0.0, 0.0], 1.0, [1.0 / BUMP_SLOPE, 0.0])


def test_bump_translation_slope_bound_is_sharp_enough():
    # sup |DB - Id| over the support never exceeds the declared kappa
    v = np.array([0.3, 0.2])
    m = bump_translation([0.0, 0.0], 1.0, v)
    X = np.random.default_rng(9).uniform(-1, 1, (20000, 2))
    dev = np.linalg.norm(m.jacobian(X) - np.eye(2), ord=2, axis=(1, 2))
    assert np.max(dev) <= m.kappa + 1e-12


def test_recipe_rejects_unknown_step():
    with pytest.raises(PrimitiveError):
        make_test_diffeo([{"kind": "spin"}], 2)


def test_recipe_with_translation_has_no_support():
    m = make_test_diffeo([{"kind": "bump_rotation", "center": [0.0, 0.0], "radius": 1.0, "angle": 0.3},
                          {"kind": "translation", "vector": [1.0, 0.0]}], 2)
    assert m.support is None
    x = np.array([0.2, 0.1])
    assert np.allclose(m(x), compose(affine(np.eye(2), np.array([1.0, 0.0])),
                                     bump_rotation([0.0, 0.0], 1.0, 0.3))(x))
