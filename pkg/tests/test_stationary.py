import numpy as np
import pytest
from scipy.integrate import solve_ivp

from kgdamp.functionals import k0
from kgdamp.grid import build_grid
from kgdamp.nonlinearity import NonlinearitySpec, pure_power
from kgdamp.stationary import (
    BracketNotFound,
    count_sign_changes,
    find_stationary,
    nehari_residual,
    positive_fixed_point,
    shoot,
)

from conftest import sech

D3_GROUND_S0 = 4.337387680048842
D3_NODAL_S0 = {1: 14.10358440485037, 2: 29.131211575810838}


def _ivp_oracle_s0(d, lo, hi, iters=60):
    """Bisection on the radial ODE with event detection, independent of the shooter."""

    def rhs(r, y):
        return [y[1], -(d - 1) / r * y[1] + y[0] - y[0] ** 3]

    def overshoot(s):
        r0 = 1e-6
        c = (s - s**3) / d
        y0 = [s + 0.5 * c * r0**2, c * r0]
        cross = lambda r, y: y[0]  # noqa: E731
        cross.terminal = True
        turn = lambda r, y: y[1]  # noqa: E731
        turn.terminal = True
        turn.direction = 1
        sol = solve_ivp(rhs, (r0, 40), y0, method="DOP853", rtol=1e-13, atol=1e-15, events=(cross, turn))
        return sol.t_events[0].size > 0

    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if overshoot(mid):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def test_positive_fixed_point():
    assert positive_fixed_point(pure_power(3.0)) == pytest.approx(1.0, rel=1e-14)
    spec = NonlinearitySpec(attract=((1.0, 3.0),), repel=((0.5, 2.0),), gamma=0.5)
    # 1 + 0.5 s = s^2
    assert positive_fixed_point(spec) == pytest.approx((0.5 + np.sqrt(4.25)) / 2, rel=1e-13)


def test_shoot_outcomes_d1():
    spec = pure_power(3.0)
    assert shoot(spec, 1, np.sqrt(2)).outcome == "decays"
    assert shoot(spec, 1, 1.3).outcome == "diverges"
    # above sqrt(2) the 1D orbit oscillates across zero indefinitely
    assert shoot(spec, 1, 1.5, max_zeros=0).outcome == "crosses"
    assert shoot(spec, 1, 1.5, Rmax=20.0).outcome == "unresolved"
    assert shoot(spec, 1, 0.5).outcome == "diverges"  # s0 below the fixed point
    low = shoot(spec, 1, 0.1)
    assert low.outcome == "diverges" and low.zeros == 0


@pytest.mark.parametrize("d", [2, 3])
def test_shoot_large_s0_crosses(d):
    res = shoot(pure_power(3.0), d, 10.0)
    assert res.outcome == "crosses" and res.zeros >= 1


def test_shoot_rejects_nonpositive_start():
    with pytest.raises(ValueError):
        shoot(pure_power(3.0), 1, 0.0)


def test_shot_evaluate_matches_sech():
    shot = shoot(pure_power(3.0), 1, np.sqrt(2))
    r = np.linspace(0.0, 8.0, 17)
    assert np.allclose(shot.evaluate(r)[0], np.sqrt(2) * sech(r), atol=1e-6)


def test_count_sign_changes():
    r = np.linspace(0, 10, 1000)
    assert count_sign_changes(np.cos(r)) == 3
    assert count_sign_changes(np.exp(-r)) == 0
    noisy = np.exp(-r) * (1 + 0 * r)
    noisy[-5:] = [1e-20, -1e-20, 1e-20, -1e-20, 1e-20]
    assert count_sign_changes(noisy) == 0


def test_d1_ground_state_is_soliton(soliton):
    g = soliton.grid
    exact = np.sqrt(2) * sech(g.r)
    assert np.max(np.abs(soliton.Q - exact)) < 1e-6
    assert soliton.energy == pytest.approx(4.0 / 3.0, abs=1e-6)
    assert abs(soliton.k0) < 1e-8
    assert soliton.s0 == pytest.approx(np.sqrt(2), abs=1e-10)
    assert soliton.nodes == 0 and count_sign_changes(soliton.Q) == 0
    assert soliton.residual <= 1e-10


def test_d3_ground_state_shooting_value_matches_oracle(ground3):
    oracle = _ivp_oracle_s0(3, 1.5, 8.0)
    assert oracle == pytest.approx(D3_GROUND_S0, abs=1e-8)
    assert ground3.s0 == pytest.approx(D3_GROUND_S0, abs=1e-10)
    assert ground3.energy > 0
    assert abs(ground3.k0) < 1e-7
    assert np.all(ground3.Q > 0)


def test_d3_center_value_converges_second_order(cubic):
    vals = [find_stationary(cubic, 3, 0, R=20.0, N=n).center_value for n in (256, 512, 1024)]
    ratio = (vals[0] - vals[1]) / (vals[1] - vals[2])
    assert ratio == pytest.approx(4.0, rel=0.15)
    assert vals[2] + (vals[2] - vals[1]) / 3 == pytest.approx(D3_GROUND_S0, abs=1e-4)


@pytest.fixture(scope="module")
def nodal3(cubic):
    # nodal cores are narrow; they need far finer grids than the ground state
    return {nodes: find_stationary(cubic, 3, nodes, R=12.0, N=N) for nodes, N in ((1, 4096), (2, 8192))}


@pytest.mark.parametrize("nodes", [1, 2])
def test_d3_nodal_states(nodal3, nodes):
    p = nodal3[nodes]
    assert p.nodes == nodes
    assert count_sign_changes(p.Q) == nodes
    assert p.s0 == pytest.approx(D3_NODAL_S0[nodes], rel=1e-12)
    assert abs(p.k0) < 1e-6 * max(1.0, p.energy)
    assert p.residual <= 1e-8


def test_energy_increases_with_node_count(ground3, nodal3):
    energies = [ground3.energy, nodal3[1].energy, nodal3[2].energy]
    assert energies[0] < energies[1] < energies[2]


def test_d1_excited_state_does_not_exist(cubic):
    with pytest.raises(BracketNotFound):
        find_stationary(cubic, 1, 1, R=30.0, N=256)


def test_supercritical_power_rejected():
    with pytest.raises(ValueError):
        find_stationary(pure_power(7.0), 3, 0, R=20.0, N=128)


def test_nehari_residual_scaling(soliton, cubic):
    g = soliton.grid
    h1 = g.h1_sq(soliton.Q)
    assert nehari_residual(soliton) == pytest.approx(0.0, abs=1e-8)
    for c in (0.5, 1.1, 2.0):
        assert nehari_residual(c * soliton.Q, cubic, g) == pytest.approx(abs(c**2 - c**4) * h1, rel=1e-8)
    assert k0(1.1 * soliton.Q, cubic, g) < 0
    with pytest.raises(ValueError):
        nehari_residual(soliton.Q)


@pytest.mark.parametrize("name", ["soliton", "ground3"])
def test_profile_tail_invariants(request, name):
    p = request.getfixturevalue(name)
    Q = p.Q
    tail = np.abs(Q[np.argmax(Q):])
    assert np.all(np.diff(tail) <= 0)
    assert tail[-1] <= 1e-6


def test_nehari_residual_of_zero_field():
    g = build_grid(1, 10.0, 64)
    assert nehari_residual(np.zeros(64), pure_power(3.0), g) == 0.0


def test_profile_state_is_equilibrium(soliton):
    s = soliton.state()
    assert np.all(s.v == 0)
    assert np.array_equal(s.u, soliton.Q)
