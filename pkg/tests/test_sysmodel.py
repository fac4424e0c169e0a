import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import first_order, simulate_coupled
from stealthgain.esc import simulate_lti
from stealthgain.sysmodel import (
    AttackBudget,
    CertainSubsystem,
    DimensionError,
    StateSpace,
    UncertainSubsystem,
    WellPosednessError,
    aggregate,
    dump_system,
    freq_response,
    freq_response_batch,
    is_hurwitz,
    load_system,
    loop_matrix,
    random_pair,
    system_from_dict,
    system_to_dict,
    well_posed,
)


def scalar_pair(D_c=0.0, D_u=0.0):
    sc = CertainSubsystem.from_partial([[-1.0]], m_u=1, m_a=1, p_p=1, p_r=1, p_c=1,
                                       B_c=[[1.0]], C_c=[[1.0]], D_c=[[D_c]], F_x=[[1.0]], C_p=[[1.0]])
    su = UncertainSubsystem(StateSpace([[-2.0]], [[1.0]], [[1.0]], [[D_u]]))
    return sc, su


class TestWellPosed:
    def test_zero_feedthrough(self):
        assert well_posed(*scalar_pair(0.0, 0.0))

    def test_singular_loop(self):
        sc, su = scalar_pair(1.0, 1.0)
        assert not well_posed(sc, su)
        with pytest.raises(WellPosednessError):
            aggregate(sc, su)

    def test_half_feedthrough_dbar(self):
        sc, su = scalar_pair(0.5, 0.5)
        assert well_posed(sc, su)
        np.testing.assert_allclose(aggregate(sc, su).D_bar, [[4 / 3, 2 / 3], [2 / 3, 4 / 3]], atol=1e-12)

    def test_dimension_mismatch(self):
        sc, _ = scalar_pair()
        su = UncertainSubsystem(StateSpace([[-1.0]], [[1.0, 1.0]], [[1.0]], [[0.0, 0.0]]))
        with pytest.raises(DimensionError):
            well_posed(sc, su)


class TestAggregate:
    def test_scalar_a_bar(self):
        agg = aggregate(*scalar_pair())
        np.testing.assert_allclose(agg.A_bar, [[-1.0, 1.0], [1.0, -2.0]], atol=1e-14)
        assert is_hurwitz(agg.A_bar)

    def test_zero_feedthrough_blocks(self, rng):
        sc, su = random_pair(rng, n_c=3, n_u=2, m_u=2, p_c=2, p_p=2, feedthrough=False)
        agg = aggregate(sc, su)
        np.testing.assert_allclose(agg.F_bar, np.vstack([sc.F_x, np.zeros((2, sc.m_a))]), atol=1e-14)
        np.testing.assert_allclose(agg.Cp_bar, np.hstack([sc.C_p, sc.D_p @ su.C_u]), atol=1e-14)
        np.testing.assert_allclose(agg.D_bar, np.eye(4), atol=1e-14)

    def test_loop_closure_in_frequency(self, rng):
        sc, su = random_pair(rng, n_c=3, n_u=2, m_u=1, m_a=1, p_c=1, feedthrough=True)
        agg = aggregate(sc, su)
        omegas = np.logspace(-2, 2, 20)
        T = freq_response_batch(sc.transfer_system(), omegas)
        Gu = freq_response_batch(su.plant, omegas)
        Gp = freq_response_batch(agg.performance_system(), omegas)
        pp, pr, mu = sc.p_p, sc.p_r, sc.m_u
        for k in range(len(omegas)):
            Tp_u, Tp_a = T[k, :pp, :mu], T[k, :pp, mu:]
            Tc_u, Tc_a = T[k, pp + pr:, :mu], T[k, pp + pr:, mu:]
            uc = np.linalg.solve(np.eye(sc.p_c) - Tc_u @ Gu[k], Tc_a)
            closed = Tp_u @ Gu[k] @ uc + Tp_a
            np.testing.assert_allclose(Gp[k], closed, rtol=1e-9, atol=1e-12)

    @pytest.mark.parametrize("seed", range(3))
    def test_time_domain_equivalence(self, seed):
        sc, su = random_pair(np.random.default_rng(seed), n_c=3, n_u=2, feedthrough=False)
        dt = 1e-3
        t = np.arange(0.0, 10.0 + dt / 2, dt)
        a = np.sin(t) * np.exp(-0.1 * t)
        ref = simulate_coupled(sc, su, a, dt)
        got = simulate_lti(aggregate(sc, su).performance_system(), a[:, None], dt)
        assert np.linalg.norm(got - ref) <= 1e-6 * np.linalg.norm(ref)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 3), st.integers(1, 3))
def test_dbar_identity(seed, m_u, p_c):
    sc, su = random_pair(np.random.default_rng(seed), n_c=2, n_u=2, m_u=m_u, p_c=p_c,
                         require_stable_loop=False)
    agg = aggregate(sc, su)
    assert np.max(np.abs(agg.D_bar @ loop_matrix(sc, su) - np.eye(m_u + p_c))) <= 1e-10


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.integers(0, 4))
def test_frequency_response_at_infinity_is_feedthrough(seed, n):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, n)) - 3 * n * np.eye(n)
    sys = StateSpace(A, rng.standard_normal((n, 2)), rng.standard_normal((3, n)), rng.standard_normal((3, 2)))
    assert np.array_equal(freq_response(sys, np.inf), sys.D.astype(complex))


class TestHurwitz:
    def test_examples(self):
        assert is_hurwitz([[-1.0]])
        assert not is_hurwitz([[0.0, 1.0], [-1.0, 0.0]])
        assert is_hurwitz([[-1.0, 1.0], [1.0, -2.0]])

    def test_margin(self):
        assert not is_hurwitz([[-1e-12]])
        assert is_hurwitz(np.zeros((0, 0)))


class TestFreqResponse:
    def test_first_order(self):
        assert freq_response(first_order(), 0.0)[0, 0] == pytest.approx(1.0)
        assert freq_response(first_order(), 1.0)[0, 0] == pytest.approx(0.5 - 0.5j)

    def test_static(self):
        D = [[1.0, -2.0], [0.5, 3.0]]
        sys = StateSpace.static(D)
        for w in (0.0, 1.0, 1e3, np.inf):
            np.testing.assert_array_equal(freq_response(sys, w), np.array(D, dtype=complex))


class TestSerialization:
    def test_round_trip(self, tmp_path, rng):
        sc, su = random_pair(rng, n_c=2, n_u=1)
        path = tmp_path / "sys.json"
        dump_system(path, sc, su, AttackBudget(1.5, 2.5))
        sc2, su2, b2 = load_system(path)
        for k in ("A_c", "B_c", "F_x", "C_p", "D_p", "F_p", "C_r", "D_r", "F_r", "C_c", "D_c", "F_c"):
            np.testing.assert_array_equal(getattr(sc, k), getattr(sc2, k))
        np.testing.assert_array_equal(su.A_u, su2.A_u)
        assert (b2.delta, b2.energy) == (1.5, 2.5)

    def test_ragged(self, rng):
        sc, su = random_pair(rng, n_c=2, n_u=1)
        doc = json.loads(json.dumps(system_to_dict(sc, su)))
        doc["certain"]["A_c"] = [[1.0, 2.0], [3.0]]
        with pytest.raises(DimensionError, match="certain.A_c"):
            system_from_dict(doc)

    def test_shape_mismatch_names_field(self, rng):
        sc, su = random_pair(rng, n_c=2, n_u=1)
        doc = system_to_dict(sc, su)
        doc["certain"]["B_c"] = [[1.0], [2.0], [3.0]]
        with pytest.raises(DimensionError, match="B_c"):
            system_from_dict(doc)

    def test_bad_budget(self):
        with pytest.raises(ValueError, match="budget.delta"):
            AttackBudget(0.0, 1.0)
        with pytest.raises(ValueError, match="budget.energy"):
            system_from_dict({"budget": {"delta": 1.0}})
