import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import first_order, resonant_peak, resonant_plant
from stealthgain.esc import CSV_COLUMNS, EscParams, PlantProbe, es_run, simulate_lti
from stealthgain.metrics import gamma_u_model
from stealthgain.sysmodel import StabilityError, StateSpace, UncertainSubsystem


def check_trace(trace, plant, params):
    """Invariants every run must satisfy: the finite-horizon gain bound and monotone energies."""
    g_model = gamma_u_model(UncertainSubsystem(plant)).value
    after = trace.t > params.warmup
    slack = g_model * params.denom_guard / max(trace.E_uc[after].min(), params.denom_guard)
    assert np.all(trace.gamma_tilde[after] <= g_model * 1.001 + slack)
    assert np.all(trace.gamma_tilde >= 0)
    if params.window is None:
        assert np.all(np.diff(trace.E_uc) >= 0)
        assert np.all(np.diff(trace.E_uu) >= 0)
    n = len(trace.t)
    assert all(len(getattr(trace, c)) == n for c in CSV_COLUMNS)


class TestSimulate:
    def test_step_response(self):
        dt = 1e-3
        y = simulate_lti(first_order(), np.ones(1001), dt)
        assert abs(y[-1] - (1 - math.exp(-1))) <= 1e-6

    def test_zero_input(self):
        assert not simulate_lti(resonant_plant(), np.zeros(500), 0.01).any()

    def test_static_plant_exact(self):
        t = np.arange(0, 10, 0.1)
        np.testing.assert_array_equal(simulate_lti(StateSpace.static([[2.0]]), np.sin(t), 0.1), 2 * np.sin(t))

    def test_channel_check(self):
        with pytest.raises(ValueError):
            simulate_lti(first_order(), np.zeros((10, 2)), 0.1)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.floats(-3, 3), st.floats(-3, 3))
def test_superposition(seed, a, b):
    rng = np.random.default_rng(seed)
    u1, u2 = rng.standard_normal(200), rng.standard_normal(200)
    G = resonant_plant(0.3)
    lhs = simulate_lti(G, a * u1 + b * u2, 0.05)
    rhs = a * simulate_lti(G, u1, 0.05) + b * simulate_lti(G, u2, 0.05)
    np.testing.assert_allclose(lhs, rhs, atol=1e-9)


class TestParams:
    @pytest.mark.parametrize("field,value", [("dt", 0.2), ("warmup", 10.0), ("alpha_p", 0.0), ("omega_l", -1.0),
                                             ("phase", "other"), ("window", 0.0), ("k_gain", -1.0)])
    def test_invalid(self, field, value):
        p = EscParams(**{field: value})
        with pytest.raises(ValueError, match=field):
            p.validate()

    def test_defaults_valid_and_round_trip(self):
        p = EscParams()
        p.validate()
        assert EscParams.from_dict(p.to_dict()) == p

    def test_unknown_key(self):
        with pytest.raises(ValueError, match="bogus"):
            EscParams.from_dict({"bogus": 1})

    def test_time_scales(self):
        p = EscParams()
        assert p.omega_p < p.omega_base / 10
        assert p.omega_l < p.omega_p and p.omega_h < 10 * p.omega_p


def test_probe_rejects_mimo():
    with pytest.raises(ValueError):
        PlantProbe(StateSpace.static(np.eye(2)), 0.01)


def test_unstable_plant():
    with pytest.raises(StabilityError):
        es_run(StateSpace([[0.5]], [[1.0]], [[1.0]], [[0.0]]), EscParams(horizon=100.0, warmup=50.0))


def test_static_gain_ratio():
    plant = StateSpace.static([[2.0]])
    params = EscParams(horizon=200.0, warmup=50.0)
    trace = es_run(plant, params)
    check_trace(trace, plant, params)
    assert trace.final_estimate == pytest.approx(4.0, rel=0.01)


def test_pure_tone_at_resonance():
    """With adaptation off the ratio settles near the squared gain at the probe tone."""
    plant = resonant_plant(0.1)
    params = EscParams(omega_base=0.99, alpha_p=0.05, omega_p=0.1, omega_h=0.05, omega_l=0.05, k_gain=0.0,
                       dt=0.005, horizon=2000.0, warmup=50.0)
    trace = es_run(plant, params)
    check_trace(trace, plant, params)
    assert trace.final_estimate == pytest.approx(resonant_peak(0.1), rel=0.10)
    np.testing.assert_allclose(trace.zeta, 0.0)


@pytest.fixture(scope="module")
def default_run():
    plant, params = resonant_plant(0.1), EscParams()
    return plant, params, es_run(plant, params)


def test_shipped_defaults_converge(default_run):
    plant, params, trace = default_run
    check_trace(trace, plant, params)
    assert trace.final_estimate == pytest.approx(resonant_peak(0.1), rel=0.10)
    assert trace.final_frequency == pytest.approx(0.99, rel=0.10)


def test_seeking_moves_toward_peak(default_run):
    _, params, trace = default_run
    # frozen during warmup, then climbs from the base frequency
    assert np.all(trace.zeta[trace.t <= params.warmup] == 0.0)
    assert trace.zeta[-1] > 0.2


@pytest.mark.xfail(strict=True, reason="this faster dither sits inside the resonance envelope lag and the "
                                       "averaged gradient changes sign, so the frequency drifts away")
def test_fast_dither_parameter_set():
    plant = resonant_plant(0.1)
    params = EscParams(omega_base=0.7, alpha_p=0.05, omega_p=0.1, omega_h=0.05, omega_l=0.05, k_gain=2.0,
                       dt=0.005, horizon=2000.0, warmup=50.0)
    trace = es_run(plant, params)
    assert trace.final_estimate == pytest.approx(resonant_peak(0.1), rel=0.10)
    assert trace.final_frequency == pytest.approx(0.99, rel=0.10)


def test_literal_phase_runs():
    plant = first_order()
    params = EscParams(phase="literal", horizon=300.0, warmup=50.0, k_gain=0.0)
    trace = es_run(plant, params)
    check_trace(trace, plant, params)
    # chirp-like literal phase: the first sample is exactly sin(0)
    assert trace.u_c[0] == 0.0


def test_windowed_ratio_forgets():
    plant = first_order()
    params = EscParams(window=50.0, horizon=400.0, warmup=50.0, k_gain=0.0)
    trace = es_run(plant, params)
    # discounted energies level off instead of growing without bound
    assert trace.E_uc[-1] < 60.0
    assert 0 < trace.final_estimate <= 1.0 + 1e-3


def test_csv_export(tmp_path):
    plant = StateSpace.static([[2.0]])
    trace = es_run(plant, EscParams(horizon=100.0, warmup=50.0))
    path = tmp_path / "trace.csv"
    trace.to_csv(path, every=10)
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == CSV_COLUMNS
    assert len(rows) - 1 == len(trace.t[::10])
    assert float(rows[1][0]) == 0.0
