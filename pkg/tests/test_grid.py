import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from kgdamp.grid import FieldPair, build_grid, laplacian_apply, sphere_measure


@pytest.mark.parametrize(
    "d, expected",
    [(1, 2.0), (2, 2 * np.pi), (3, 4 * np.pi), (4, 2 * np.pi**2)],
)
def test_sphere_measure(d, expected):
    assert sphere_measure(d) == pytest.approx(expected, rel=1e-14)


@pytest.mark.parametrize("d", [1, 2, 3, 4, 5, 6])
def test_weights_integrate_ball_volume(d):
    g = build_grid(d, 3.0, 600)
    exact = sphere_measure(d) * 3.0**d / d
    assert g.volume == pytest.approx(exact, rel=1e-5 if d == 1 else 1e-12)


@pytest.mark.parametrize(
    "kwargs, match",
    [
        ({"d": 0, "R": 1.0, "N": 32}, "dimension"),
        ({"d": 7, "R": 1.0, "N": 32}, "dimension"),
        ({"d": 1, "R": -1.0, "N": 32}, "radius"),
        ({"d": 1, "R": 1.0, "N": 8}, "node count"),
        ({"d": 3, "R": 1.0, "N": 32, "order": 4}, "fourth-order"),
    ],
)
def test_build_grid_rejects(kwargs, match):
    with pytest.raises(ValueError, match=match):
        build_grid(**kwargs)


@pytest.mark.parametrize("d", [1, 2, 3, 5])
def test_laplacian_of_gaussian_converges(d):
    # Lap exp(-r^2) = (4 r^2 - 2 d) exp(-r^2)
    errs = []
    for N in (200, 400):
        g = build_grid(d, 8.0, N)
        u = np.exp(-g.r**2)
        exact = (4 * g.r**2 - 2 * d) * u
        errs.append(np.sqrt(g.l2_sq(laplacian_apply(g, u) - exact)))
    order = np.log2(errs[0] / errs[1])
    assert order > (3.5 if d == 1 else 1.8)


field_arrays = arrays(np.float64, 32, elements=st.floats(-10, 10, allow_nan=False))


@settings(max_examples=40, deadline=None)
@given(u=field_arrays, v=field_arrays, d=st.integers(1, 6))
def test_stiffness_is_weighted_symmetric_and_positive(u, v, d):
    g = build_grid(d, 5.0, 32)
    K = g.stiffness
    lhs, rhs = g.inner(u, K @ v), g.inner(K @ u, v)
    assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-8)
    assert g.inner(u, K @ u) >= -1e-9
    assert g.dirichlet_sq(u) == pytest.approx(g.inner(u, K @ u), rel=1e-10, abs=1e-8)


@settings(max_examples=30, deadline=None)
@given(u=field_arrays, v=field_arrays, a=st.floats(-3, 3), b=st.floats(-3, 3), d=st.integers(1, 6))
def test_laplacian_is_linear(u, v, a, b, d):
    g = build_grid(d, 5.0, 32)
    lhs = laplacian_apply(g, a * u + b * v)
    rhs = a * laplacian_apply(g, u) + b * laplacian_apply(g, v)
    op_norm = float(np.max(np.abs(g.stiffness).sum(axis=1)))
    size = np.max(np.abs(a * u)) + np.max(np.abs(b * v)) + 1.0
    assert np.max(np.abs(lhs - rhs)) <= 16 * np.finfo(float).eps * op_norm * size


def test_symmetric_stiffness_is_similar_to_stiffness():
    g = build_grid(3, 5.0, 40)
    S = g.symmetric_stiffness
    sw = np.sqrt(g.w)
    K = g.stiffness.toarray()
    assert np.allclose(S, (sw[:, None] * K) / sw[None, :], atol=1e-9)
    assert np.allclose(S, S.T)


def test_fieldpair_is_immutable_copy_and_finite():
    g = build_grid(1, 5.0, 32)
    u = np.ones(32)
    s = FieldPair(u, np.zeros(32), g)
    u[0] = 5.0
    assert s.u[0] == 1.0
    with pytest.raises(ValueError):
        s.u[0] = 2.0
    with pytest.raises(ValueError, match="finite"):
        FieldPair(np.full(32, np.nan), np.zeros(32), g)
    with pytest.raises(ValueError, match="shape"):
        FieldPair(np.zeros(31), np.zeros(32), g)


def test_fieldpair_norms():
    g = build_grid(2, 5.0, 64)
    u = np.exp(-g.r**2)
    s = FieldPair(u, 2 * u, g)
    assert s.norm_sq() == pytest.approx(g.h1_sq(u) + 4 * g.l2_sq(u))
    assert s.distance(s) == 0.0
    assert s.scaled(2.0).norm() == pytest.approx(2 * s.norm())
    assert FieldPair.zero(g).norm() == 0.0
