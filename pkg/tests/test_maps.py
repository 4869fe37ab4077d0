import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from weakdet import maps as m

VARIANTS = ("raw", "normalized", "scaled", "reflected")


def family(variant, d, n):
    if variant == "raw":
        return m.raw(d, n)
    if variant == "normalized":
        return m.normalize(d, n)
    if variant == "scaled":
        return m.scaled(d, n, 1.0)
    return m.reflect(m.raw(d, n), d)


def ball_points(d, count, seed, radius=1.0):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(count, d))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    return x * radius * rng.random((count, 1)) ** (1.0 / d)


def sphere_points(d, count, seed):
    x = np.random.default_rng(seed).normal(size=(count, d))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


# ------------------------------------------------------------------ examples

def test_eval_examples():
    f = m.raw(2, 1)
    assert np.array_equal(m.evaluate(f, [1.0, 0.0]), [-2.0, 0.0])
    np.testing.assert_allclose(m.evaluate(f, [-1.0, 0.0]), [-2.0 / 3.0, 0.0], rtol=0, atol=1e-16)
    np.testing.assert_allclose(m.evaluate(f, [0.0, 0.0]), [-1.0, 0.0], rtol=0, atol=1e-16)


@pytest.mark.parametrize("n", [1, 2, 7, 64, 1000])
@pytest.mark.parametrize("d", [2, 3, 5])
def test_boundary_values(d, n):
    e1 = np.eye(d)[0]
    assert np.allclose(m.evaluate(m.raw(d, n), e1), -2 * e1, rtol=0, atol=4 * np.finfo(float).eps)
    assert np.allclose(m.evaluate(m.raw(d, n), -e1), -2 / (2 * n + 1) * e1,
                       rtol=0, atol=4 * np.finfo(float).eps)


def test_jacobian_example_against_fd():
    f = m.raw(2, 1)
    fd = m.finite_difference_jacobian(f, [0.0, 0.0])
    np.testing.assert_allclose(fd, np.diag([-0.5, 0.5]), atol=1e-9)
    np.testing.assert_allclose(m.jacobian(f, [0.0, 0.0]), fd, atol=1e-9)
    assert math.isclose(np.linalg.det(fd), -0.25, rel_tol=1e-8)
    assert math.isclose(m.det_jacobian(f, [0.0, 0.0]), -0.25, rel_tol=1e-14)


def test_identity_fixture():
    f = m.identity(3)
    x = ball_points(3, 20, 0)
    assert np.array_equal(m.jacobian(f, x), np.broadcast_to(np.eye(3), (20, 3, 3)))
    assert np.all(m.det_jacobian(f, x) == 1.0)
    np.testing.assert_allclose(m.finite_difference_jacobian(f, x[0]), np.eye(3), atol=1e-9)
    assert m.conformality_defect(np.eye(3)) == 0.0
    assert np.all(m.det_jacobian(m.reflect(f, 2), x) == -1.0)


def tartar_det_symbolic():
    x, y, n = sp.symbols("x y n", positive=True)
    u = n ** sp.Rational(-1, 2) * (1 - y) ** n * sp.sin(n * x)
    v = n ** sp.Rational(-1, 2) * (1 - y) ** n * sp.cos(n * x)
    jac = sp.Matrix([[sp.diff(u, x), sp.diff(u, y)], [sp.diff(v, x), sp.diff(v, y)]])
    return sp.lambdify((x, y, n), sp.simplify(jac.det()))


def test_tartar_det_example():
    sym = tartar_det_symbolic()
    val = m.det_jacobian(m.tartar(5, 0.5), [0.1, 0.5])
    assert math.isclose(val, -5 * 0.5 ** 9, rel_tol=1e-13)
    assert math.isclose(val, sym(0.1, 0.5, 5), rel_tol=1e-12)


def test_tartar_det_matches_closed_form_sampled():
    rng = np.random.default_rng(3)
    for n in (1, 3, 10, 20):
        pts = rng.random((200, 2)) * 0.5
        got = m.det_jacobian(m.tartar(n, 0.5), pts)
        want = -n * (1 - pts[:, 1]) ** (2 * n - 1)
        np.testing.assert_allclose(got, want, rtol=1e-12)


def test_fd_step_example():
    f = m.raw(2, 4)
    x = ball_points(2, 100, 11, radius=1 - 1e-5)
    an = m.jacobian(f, x)
    for k in range(100):
        fd = m.finite_difference_jacobian(f, x[k], h=1e-6)
        assert np.linalg.norm(fd - an[k]) <= 1e-6 * np.linalg.norm(an[k])


def test_normalize_examples():
    for d in (2, 3):
        e1 = np.eye(d)[0]
        for n in (1, 2, 5, 64, 10 ** 4):
            g = m.normalize(d, n)
            np.testing.assert_allclose(m.evaluate(g, e1), -e1, atol=1e-14)
            np.testing.assert_allclose(m.evaluate(g, -e1), e1, atol=1e-14)
        np.testing.assert_allclose(m.evaluate(m.normalize(d, 10 ** 8), np.zeros(d)), e1, atol=1e-7)


def test_reflect_examples():
    f = m.raw(3, 4)
    x = ball_points(3, 500, 5)
    for axis in (1, 2, 3):
        r = m.reflect(f, axis)
        np.testing.assert_array_equal(m.det_jacobian(r, x), -m.det_jacobian(f, x))
        np.testing.assert_allclose(m.frobenius(m.jacobian(r, x)), m.frobenius(m.jacobian(f, x)),
                                   rtol=1e-15)
    assert m.reflect(m.reflect(f, 2), 2).orientation == f.orientation


def test_conformality_defect_examples():
    J = m.jacobian(m.raw(2, 3), ball_points(2, 50, 1))
    assert np.max(m.conformality_defect(J)) <= 1e-12
    # diag(2,1): J^T J = diag(4,1), |det|^{2/d} = 2, ||diag(2,-1)|| / 2
    assert math.isclose(m.conformality_defect(np.diag([2.0, 1.0])), math.sqrt(5) / 2, rel_tol=1e-15)
    with pytest.raises(ValueError):
        m.conformality_defect(np.diag([1.0, 0.0]))


def test_input_errors():
    with pytest.raises(ValueError):
        m.evaluate(m.raw(2, 1), [0.0, 0.0, 0.0])
    with pytest.raises(ValueError):
        m.jacobian(m.raw(3, 1), [0.0, 0.0])
    with pytest.raises(ValueError):
        m.reflect(m.raw(2, 1), 3)
    with pytest.raises(ValueError):
        m.reflect(m.raw(2, 1), 0)
    with pytest.raises(ValueError):
        m.raw(1, 1)
    with pytest.raises(ValueError):
        m.raw(2, 0)
    with pytest.raises(ValueError):
        m.scaled(2, 1, 0.0)
    with pytest.raises(ValueError):
        m.MapFamily(3, base="tartar", variant="tartar")
    with pytest.raises(ValueError):
        m.finite_difference_jacobian(m.raw(2, 1), [1.0, 0.0])


def test_pole_outside_ball():
    for n in (1, 2, 50):
        p = m.raw(3, n).pole
        assert math.isclose(np.linalg.norm(p), 1 + 1 / n, rel_tol=1e-15)
        assert np.linalg.norm(p) > 1


@pytest.mark.parametrize("d", [4, 6])
def test_lu_branch_matches_numpy(d):
    mats = np.random.default_rng(d).normal(size=(10, d, d))
    np.testing.assert_allclose(m.det(mats), np.linalg.det(mats), rtol=1e-12)


# ---------------------------------------------------------------- invariants

@pytest.mark.parametrize("n", [1, 4, 16, 64])
@pytest.mark.parametrize("d", [2, 3])
@pytest.mark.parametrize("variant", VARIANTS)
def test_fd_oracle_all_variants(variant, d, n):
    f = family(variant, d, n)
    x = ball_points(d, 100, 1000 * d + n, radius=1 - 1e-5)
    an = m.jacobian(f, x)
    dets = m.det_jacobian(f, x)
    for k in range(100):
        fd = m.finite_difference_jacobian(f, x[k])
        assert np.linalg.norm(fd - an[k]) <= 1e-6 * np.linalg.norm(an[k])
        assert math.isclose(dets[k], m.lu_det(an[k]), rel_tol=1e-12)


@pytest.mark.parametrize("d", [2, 3])
@pytest.mark.parametrize("variant", VARIANTS)
def test_conformal_and_equality_case(variant, d):
    for n in (1, 4, 16, 64):
        f = family(variant, d, n)
        x = ball_points(d, 400, n)
        J = m.jacobian(f, x)
        lam = m.conformal_factor(f, x)
        JtJ = np.einsum("kji,kjl->kil", J, J)
        err = np.abs(JtJ - lam[:, None, None] ** 2 * np.eye(d)).max(axis=(1, 2))
        assert np.all(err <= 1e-12 * lam ** 2)
        np.testing.assert_allclose(m.frobenius(J) ** d, d ** (d / 2) * np.abs(m.det_jacobian(f, x)),
                                   rtol=1e-10)


@pytest.mark.parametrize("d", [2, 3])
def test_sign_constancy(d):
    for n in (1, 8, 64):
        s = np.sign(m.det_jacobian(m.raw(d, n), ball_points(d, 10 ** 4, n)))
        assert np.all(s == s[0])


@pytest.mark.parametrize("d", [2, 3])
def test_pointwise_monotone_decay(d):
    x = np.concatenate([ball_points(d, 2000, 9), sphere_points(d, 500, 10)])
    prev = np.linalg.norm(m.evaluate(m.raw(d, 1), x), axis=1)
    for n in range(2, 80):
        cur = np.linalg.norm(m.evaluate(m.raw(d, n), x), axis=1)
        assert np.all(cur <= prev * (1 + 1e-15))
        prev = cur


@pytest.mark.parametrize("d", [2, 3])
def test_ball_to_ball(d):
    for n in (1, 3, 32, 500):
        g = m.normalize(d, n)
        inner = np.linalg.norm(m.evaluate(g, ball_points(d, 3000, n)), axis=1)
        assert np.all(inner <= 1 + 1e-12)
        bnd = np.linalg.norm(m.evaluate(g, sphere_points(d, 1000, n)), axis=1)
        np.testing.assert_allclose(bnd, 1.0, atol=1e-10)


@settings(max_examples=60, deadline=None)
@given(d=st.integers(2, 3), n=st.integers(1, 200), axis=st.integers(1, 3),
       seed=st.integers(0, 2 ** 31))
def test_reflection_properties(d, n, axis, seed):
    axis = min(axis, d)
    f = m.raw(d, n)
    r = m.reflect(f, axis)
    x = ball_points(d, 20, seed)
    np.testing.assert_array_equal(m.det_jacobian(r, x), -m.det_jacobian(f, x))
    fx, rx = m.evaluate(f, x), m.evaluate(r, x)
    rx[:, axis - 1] *= -1
    np.testing.assert_array_equal(rx, fx)


@settings(max_examples=60, deadline=None)
@given(d=st.integers(2, 3), n=st.integers(1, 500), seed=st.integers(0, 2 ** 31))
def test_det_is_minus_lambda_power(d, n, seed):
    f = m.raw(d, n)
    x = ball_points(d, 30, seed)
    lam = (2.0 / n) / np.sum((x - f.pole) ** 2, axis=1)
    np.testing.assert_allclose(m.det_jacobian(f, x), -lam ** d, rtol=1e-13)


@settings(max_examples=40, deadline=None)
@given(n=st.integers(1, 100), s=st.floats(0.1, 10.0))
def test_rescale_scales_det(n, s):
    f = m.raw(2, n)
    x = ball_points(2, 10, n)
    np.testing.assert_allclose(m.det_jacobian(m.rescale(f, s), x), s ** 2 * m.det_jacobian(f, x),
                               rtol=1e-13)


def test_at_reindexes_variants():
    assert m.normalize(3, 1).at(7) == m.normalize(3, 7)
    assert m.scaled(2, 1, 2.0).at(5) == m.scaled(2, 5, 2.0)
    assert m.reflect(m.raw(2, 1), 2).at(9) == m.reflect(m.raw(2, 9), 2)
    assert m.tartar(1, 0.3).at(4) == m.tartar(4, 0.3)
