import numpy as np
import pytest

from helpers import feedthrough_only, first_order, residual_free, resonant_peak, resonant_plant, small_uncertain
from stealthgain.metrics import EPS, gamma_u_model, solve_oog, solve_proxy
from stealthgain.oracle import (
    FrequencyGrid,
    default_grid,
    hinf_sweep,
    oog_feasible_freq,
    oog_oracle,
    proxy_feasible_freq,
    proxy_oracle,
)
from stealthgain.sysmodel import AttackBudget, CertainSubsystem, StateSpace, UncertainSubsystem, aggregate, random_pair


def test_grid_validation():
    with pytest.raises(ValueError):
        FrequencyGrid(np.array([0.0, 1.0]))
    with pytest.raises(ValueError):
        FrequencyGrid(np.array([0.0, 2.0, 1.0, np.inf]))
    g = default_grid(resonant_plant().A)
    assert g.points[0] == 0.0 and np.isinf(g.points[-1])
    assert np.any(np.isclose(g.finite, np.sqrt(0.99)))


@pytest.mark.parametrize("gamma,psi", [(0.5, 0.5), (0.3, 0.7), (0.2, 0.5), (0.9, 0.05), (0.6, 0.6)])
def test_feedthrough_condition(gamma, psi):
    agg = aggregate(feedthrough_only(), small_uncertain())
    grid = default_grid(agg.A_bar)
    assert oog_feasible_freq(agg, gamma, psi, grid) == (1 - gamma - psi <= 0)


def test_dominance_extremes(rng):
    sc, su = random_pair(rng, n_c=2, n_u=2)
    agg = aggregate(sc, su)
    grid = default_grid(agg.A_bar)
    assert oog_feasible_freq(agg, 1e6, 1e6, grid)
    assert not oog_feasible_freq(agg, EPS, EPS, grid)


def test_oog_oracle_closed_forms():
    assert oog_oracle(feedthrough_only(), small_uncertain(), AttackBudget(1.0, 2.0)) == pytest.approx(1.0, rel=0.02)
    assert oog_oracle(residual_free(), small_uncertain(), AttackBudget(1.0, 2.0)) == pytest.approx(2.0, rel=0.02)


@pytest.mark.parametrize("seed", range(4))
def test_kyp_both_directions(seed):
    sc, su = random_pair(np.random.default_rng(100 + seed), n_c=2, n_u=1)
    agg = aggregate(sc, su)
    grid = default_grid(agg.A_bar)
    res = solve_oog(sc, su, AttackBudget(1.0, 1.0))
    assert res.optimal
    assert oog_feasible_freq(agg, res.gamma, res.psi, grid)
    assert not oog_feasible_freq(agg, 0.5 * res.gamma, 0.5 * res.psi, grid)


@pytest.mark.parametrize("seed", range(3))
def test_oracle_dominance(seed):
    sc, su = random_pair(np.random.default_rng(200 + seed), n_c=2, n_u=1)
    b = AttackBudget(1.0, 2.0)
    q = solve_oog(sc, su, b).value
    assert oog_oracle(sc, su, b) >= q * (1 - 0.03)


def test_proxy_kyp_direction(rng):
    sc, su = random_pair(rng, n_c=2, n_u=1)
    g = gamma_u_model(su).value
    res = solve_proxy(sc, g, AttackBudget(1.0, 1.0))
    assert res.optimal
    assert proxy_feasible_freq(sc, g, res.gamma, res.psi, res.theta, default_grid(sc.A_c))


def test_proxy_oracle_decoupled():
    assert proxy_oracle(feedthrough_only(), 1.0, AttackBudget(1.0, 2.0)) == pytest.approx(1.0, rel=0.05)


def test_proxy_oracle_gamma_zero(rng):
    sc, _ = random_pair(rng, n_c=2, n_u=1)
    b = AttackBudget(1.0, 1.0)
    q = solve_proxy(sc, 0.0, b).value
    assert proxy_oracle(sc, 0.0, b) == pytest.approx(q, rel=0.05)


def test_proxy_oracle_infeasible():
    # a huge u_u -> y_p feedthrough that the residual never sees, with a generous gain bound
    sc = CertainSubsystem.from_partial([[-1.0]], m_u=1, m_a=1, p_p=1, p_r=1, p_c=1,
                                       D_p=[[1e3]], F_r=[[1.0]], F_c=[[1.0]], F_x=[[1.0]])
    assert proxy_oracle(sc, 100.0, AttackBudget(1.0, 1.0)) == np.inf


class TestHinfSweep:
    def test_first_order(self):
        assert hinf_sweep(first_order()) == pytest.approx(1.0, rel=0.005)

    def test_static(self):
        assert hinf_sweep(StateSpace.static([[3.0]])) == 9.0

    def test_resonant(self):
        assert hinf_sweep(resonant_plant(0.1)) == pytest.approx(resonant_peak(0.1), rel=0.005)

    def test_matches_model(self, rng):
        for _ in range(5):
            n = int(rng.integers(1, 6))
            A = rng.standard_normal((n, n))
            A -= (np.linalg.norm(A, 2) + 0.5) * np.eye(n)
            su = UncertainSubsystem(StateSpace(A, rng.standard_normal((n, 2)), rng.standard_normal((2, n)),
                                               rng.standard_normal((2, 2)) / 2))
            assert hinf_sweep(su) == pytest.approx(gamma_u_model(su).value, rel=0.01)
