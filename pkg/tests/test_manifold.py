import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from kgdamp.manifold import (
    foliation_completeness,
    gamma_roots,
    gap_condition,
    center_pair_compound,
    lambda_gamma,
    lipg_bound,
    manifold_dimensions,
)
from kgdamp.spectral import spectral_report


def _dense_min(fn, lo, hi, n=2_000_001):
    g = np.linspace(lo, hi, n)[1:-1]
    return float(np.min(fn(g)))


def test_lambda_gamma_value_and_domain():
    assert lambda_gamma(1, 1, 2, 0.5, 1.0) == pytest.approx(1.0 + 2.0)
    with pytest.raises(ValueError):
        lambda_gamma(1, 1, 2, 0.5, 2.0)
    with pytest.raises(ValueError):
        lambda_gamma(0, 1, 2, 0.5, 1.0)


def test_gamma_roots_example_matches_quadratic_oracle():
    g1, g2 = gamma_roots(1, 1, 2, 0.5, 0.1)
    # 0.1 (g - 0.5 + 2 - g) = (2 - g)(g - 0.5)  ->  g^2 - 2.5 g + 1.15 = 0
    ref = np.sort(np.roots([1.0, -2.5, 1.15]))
    assert (g2, g1) == pytest.approx(tuple(ref), abs=1e-14)
    assert (g1, g2) == pytest.approx((1.8922616289332566, 0.6077383710667434), abs=1e-14)


def test_lipg_and_foliation_examples_match_dense_oracle():
    C1, C2, b1, b2, L = 1, 1, 2, 0.5, 0.1
    g1, g2 = gamma_roots(C1, C2, b1, b2, L)

    def lam(g):
        return C1 / (b1 - g) + C2 / (g - b2)

    lip = _dense_min(lambda g: C1 * C2 * L * g / (b1 * (g - b2) * (1 - lam(g) * L)), g2, g1)
    assert lipg_bound(C1, C2, b1, b2, L) == pytest.approx(lip, rel=1e-8)
    assert lipg_bound(C1, C2, b1, b2, L) == pytest.approx(0.10698976928156995, rel=1e-9)
    leaf = _dense_min(lambda g: C1 * C2 * L / ((b1 - g) * (1 - lam(g) * L)), g2, g1)
    rep = foliation_completeness(C1, C2, b1, b2, L)
    assert rep.first == pytest.approx(leaf, rel=1e-8)
    assert rep.product == pytest.approx(0.014749, abs=1e-6)
    assert rep.holds


def test_gap_condition_failure_and_zero_lipschitz():
    bad = gap_condition(1, 1, 2, 0.5, 0.5)
    assert bad.condition_value == pytest.approx(4 / 1.5 * 0.5)
    assert not bad.holds and bad.gamma1 is None and bad.lipg_bound is None
    with pytest.raises(ValueError, match="gap condition fails"):
        gamma_roots(1, 1, 2, 0.5, 0.5)
    zero = gap_condition(1, 1, 2, 0.5, 0.0)
    assert zero.holds and (zero.gamma1, zero.gamma2) == (2.0, 0.5) and zero.lipg_bound == 0.0


def test_validation_reports_every_problem():
    with pytest.raises(ValueError) as info:
        gap_condition(0, -1, 0.5, 1.0, -1)
    msg = str(info.value)
    for key in ("C1", "C2", "beta2 < beta1", "lipR"):
        assert key in msg


params = dict(
    C1=st.floats(0.1, 10), C2=st.floats(0.1, 10), beta2=st.floats(0, 5), width=st.floats(0.1, 10), frac=st.floats(0.01, 0.99)
)


@settings(max_examples=200, deadline=None)
@given(
    C1=st.floats(1, 5), C2=st.floats(1, 5), beta2=st.floats(0, 2), width=st.floats(0.5, 5), frac=st.floats(0.05, 0.95)
)
def test_roots_solve_the_window_equation(C1, C2, beta2, width, frac):
    beta1 = beta2 + width
    L = frac * width / (np.sqrt(C1) + np.sqrt(C2)) ** 2
    g1, g2 = gamma_roots(C1, C2, beta1, beta2, L)
    assert beta2 < g2 <= g1 < beta1
    for g in (g1, g2):
        assert abs(lambda_gamma(C1, C2, beta1, beta2, g) * L - 1.0) <= 1e-12
    mid = 0.5 * (g1 + g2)
    if g1 - g2 > 1e-9 * width:
        assert lambda_gamma(C1, C2, beta1, beta2, mid) * L < 1.0


@settings(max_examples=200, deadline=None)
@given(**params)
def test_root_residual_at_representation_floor(C1, C2, beta2, width, frac):
    # near a pole no double lands closer than |phi'| ulp(g) / 2 to the root
    beta1 = beta2 + width
    L = frac * width / (np.sqrt(C1) + np.sqrt(C2)) ** 2
    for g in gamma_roots(C1, C2, beta1, beta2, L):
        res = abs(lambda_gamma(C1, C2, beta1, beta2, g) * L - 1.0)
        dphi = L * (C1 / (beta1 - g) ** 2 + C2 / (g - beta2) ** 2)
        assert res <= max(1e-12, dphi * np.spacing(g) + 4 * np.finfo(float).eps)


@settings(max_examples=40, deadline=None)
@given(**params)
def test_window_shrinks_as_lipschitz_constant_grows(C1, C2, beta2, width, frac):
    beta1 = beta2 + width
    Lmax = width / (np.sqrt(C1) + np.sqrt(C2)) ** 2
    assume(frac < 0.95)
    a1, a2 = gamma_roots(C1, C2, beta1, beta2, frac * Lmax)
    b1, b2 = gamma_roots(C1, C2, beta1, beta2, (frac + 0.04) * Lmax)
    assert b1 <= a1 + 1e-12 and b2 >= a2 - 1e-12
    assert lipg_bound(C1, C2, beta1, beta2, frac * Lmax) <= lipg_bound(C1, C2, beta1, beta2, (frac + 0.04) * Lmax) + 1e-10


def test_center_pair_compound_example():
    rep = center_pair_compound(1, 1, 0.1, 0.4, 0.01, 0.01)
    assert rep.first == pytest.approx(lipg_bound(1, 1, 0.9, 0.6, 0.01))
    assert rep.second > 0 and rep.product == pytest.approx(rep.first * rep.second)
    assert rep.holds
    with pytest.raises(ValueError):
        center_pair_compound(1, 1, 0.5, 0.4, 0.01, 0.01)
    assert center_pair_compound(1, 1, 0.1, 0.4, 0.01, 0.0).second == 0.0


@pytest.mark.parametrize("alpha", [0.1, 0.5, 1.0, 3.0])
def test_unstable_dimension_independent_of_damping(soliton, cubic, alpha):
    dims = manifold_dimensions(spectral_report(soliton, cubic, alpha))
    assert dims.dim_u == 1 and dims.dim_c == 0
    assert not dims.stable_codim_finite
