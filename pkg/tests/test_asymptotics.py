import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from noma_aoi.asymptotics import (aoi_ratio_asymptotic, asymptotic_aoi, eta_equation, grid_optimize_ptx,
                                  numeric_optimal_ptx, oma_special_case_aoi, optimal_policy, optimal_ptx,
                                  ptx_grid, solve_eta, special_case_aoi_noma, special_case_optimal_ptx,
                                  special_case_p_fail, special_case_success,
                                  special_case_success_derivative)
from noma_aoi.config import NOMA, OMA, SystemConfig, TxPolicy
from noma_aoi.errors import NoAbsorptionError
from noma_aoi.markov import analytical_aoi, failure_probability, noma_transitions
from noma_aoi.oracle import enumerate_noma_slot


def test_eta_value_and_residual():
    sol = solve_eta()
    assert sol.eta == pytest.approx(1.6646, abs=5e-4)
    assert abs(sol.residual) < 1e-10
    assert 1.0 <= sol.eta <= 2.0
    assert solve_eta() == sol


def test_eta_bracket_signs():
    assert eta_equation(1.0) == pytest.approx(0.5 * math.exp(-0.5) + 0.5 * math.exp(-1.0))
    assert eta_equation(1.0) > 0
    assert eta_equation(2.0) == pytest.approx(-math.exp(-2.0))


def test_special_case_p_fail_examples():
    assert special_case_p_fail(0.0, 7) == 1.0
    # 0**0 == 1 at the boundary; matches the four equally likely level splits
    assert special_case_p_fail(1.0, 2) == pytest.approx(0.5)
    assert 1 - enumerate_noma_slot(2, 2, 1.0).tagged_success == pytest.approx(0.5)


@pytest.mark.parametrize("M", [4, 8, 16])
@pytest.mark.parametrize("p", [0.1, 0.3])
def test_special_case_p_fail_matches_chain(M, p):
    model = noma_transitions(SystemConfig(num_users=M, num_levels=2, scheme=NOMA, tx_policy=TxPolicy.fixed(p)))
    assert special_case_p_fail(p, M) == pytest.approx(failure_probability(model, 1), abs=1e-9)


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 60), st.floats(0.01, 0.99))
def test_derivative_is_the_derivative(M, p):
    h = 1e-6
    numeric = (special_case_success(p + h, M) - special_case_success(p - h, M)) / (2 * h)
    assert special_case_success_derivative(p, M) == pytest.approx(numeric, rel=1e-5, abs=1e-8)


def test_special_case_aoi():
    assert special_case_aoi_noma(1.0, 2, 6.0) == pytest.approx(6.0 * (1 + 1.5 / 1.0))
    with pytest.raises(NoAbsorptionError):
        special_case_aoi_noma(0.0, 10, 6.0)
    M = 100
    p = solve_eta().eta / M
    cfg = SystemConfig(num_users=M, num_levels=2, scheme=NOMA, tx_policy=TxPolicy.fixed(p))
    assert special_case_aoi_noma(p, M, 6.0) == pytest.approx(analytical_aoi(cfg), rel=1e-9)


def test_special_case_aoi_unimodal():
    grid = np.linspace(0.01, 0.99, 400)
    values = np.array([special_case_aoi_noma(p, 12, 6.0) for p in grid])
    i = int(values.argmin())
    assert 0 < i < len(grid) - 1
    assert np.all(np.diff(values[: i + 1]) < 0)
    assert np.all(np.diff(values[i:]) > 0)


def test_perfect_delivery_floor():
    assert special_case_aoi_noma(1.0, 2, 6.0) > 1.5 * 6.0
    assert oma_special_case_aoi(1.0, 1, 1, 6.0) == pytest.approx(9.0)


def test_optimal_ptx_examples():
    assert optimal_ptx(OMA, 50) == pytest.approx(0.02)
    assert optimal_ptx(NOMA, 100) == pytest.approx(0.016646, abs=5e-6)
    for M in (2, 5, 50, 1000):
        assert math.sqrt(2) / M <= optimal_ptx(NOMA, M) <= 2 / M


def test_finite_m_optimum_approaches_eta():
    eta = solve_eta().eta
    gaps = [abs(special_case_optimal_ptx(M) * M - eta) for M in (10, 100, 1000)]
    assert gaps[0] > gaps[1] > gaps[2]
    assert gaps[2] < 1e-2


def test_asymptote_examples():
    assert asymptotic_aoi(OMA, 100, 1, 6.0) == pytest.approx(600 * math.e)
    assert asymptotic_aoi(OMA, 100, 1, 6.0) == pytest.approx(1630.97, abs=0.01)
    ratio = asymptotic_aoi(NOMA, 100, 1, 6.0) / asymptotic_aoi(OMA, 100, 1, 6.0)
    assert ratio == pytest.approx(aoi_ratio_asymptotic(), abs=1e-12)
    assert ratio == pytest.approx(0.5653, abs=1e-3)
    for scheme in (OMA, NOMA):
        assert asymptotic_aoi(scheme, 200, 3, 6.0) == pytest.approx(2 * asymptotic_aoi(scheme, 100, 3, 6.0), rel=1e-14)


def test_ratio_constant():
    r = aoi_ratio_asymptotic()
    assert r == pytest.approx(0.5653, abs=1e-3)
    assert r < 0.6


def test_full_chain_ratio_converges():
    eta = solve_eta().eta
    target = aoi_ratio_asymptotic()
    gaps = []
    for M in (50, 100, 200, 400):
        n = analytical_aoi(SystemConfig(num_users=M, num_levels=2, scheme=NOMA, tx_policy=TxPolicy.fixed(eta / M)))
        o = analytical_aoi(SystemConfig(num_users=M, tx_policy=TxPolicy.fixed(1 / M)))
        gaps.append(abs(n / o - target))
    assert all(b < a for a, b in zip(gaps, gaps[1:]))
    assert gaps[2] / target < 0.03


@pytest.mark.parametrize("M", [8, 20, 50, 200])
def test_oma_asymptote_close_to_exact(M):
    exact = analytical_aoi(SystemConfig(num_users=M, tx_policy=TxPolicy.fixed(1 / M)))
    closed = 6.0 + 3.0 * (2 * M / (1 - 1 / M) ** (M - 1) - 1)
    assert exact == pytest.approx(closed, rel=1e-12)
    assert oma_special_case_aoi(1 / M, M, 1, 6.0) == pytest.approx(exact, rel=1e-12)
    assert asymptotic_aoi(OMA, M, 1, 6.0) == pytest.approx(exact, rel=0.05)


def test_grid_recovers_optima():
    grid = ptx_grid(0.005)
    assert len(grid) == 200 and grid[-1] == pytest.approx(1.0)
    oma = grid_optimize_ptx(SystemConfig(num_users=8), grid)
    assert abs(oma.ptx - 1 / 8) <= 0.005 + 1e-12
    noma = grid_optimize_ptx(SystemConfig(num_users=8, num_levels=2, scheme=NOMA), grid)
    assert abs(noma.ptx - solve_eta().eta / 8) <= 0.005 + 1e-12
    assert len(noma.curve) == 200


def test_grid_edge_cases():
    one = grid_optimize_ptx(SystemConfig(num_users=4), [0.3])
    assert one.ptx == 0.3 and len(one.curve) == 1
    res = grid_optimize_ptx(SystemConfig(num_users=4), [0.25, 1.0])
    assert math.isinf(dict(res.curve)[1.0]) and res.ptx == 0.25
    # identical values on both points: the smaller probability wins
    tie = grid_optimize_ptx(SystemConfig(num_users=1), [0.5, 0.5])
    assert tie.ptx == 0.5
    with pytest.raises(ValueError):
        grid_optimize_ptx(SystemConfig(num_users=4), [])
    with pytest.raises(ValueError):
        grid_optimize_ptx(SystemConfig(num_users=4), [0.0, 0.5])
    sim = grid_optimize_ptx(SystemConfig(num_users=4), [0.2, 0.9], evaluator="simulated", frames=20_000, seed=3)
    assert sim.ptx == 0.2


def test_grid_scheme_override():
    base = SystemConfig(num_users=6, num_levels=3, scheme=NOMA)
    res = grid_optimize_ptx(base, [0.1, 0.2], scheme=OMA)
    assert res.aoi == pytest.approx(min(analytical_aoi(SystemConfig(num_users=6, tx_policy=TxPolicy.fixed(p))) for p in (0.1, 0.2)))


def test_numeric_optimum_matches_closed_form():
    cfg = SystemConfig(num_users=30, num_levels=2, scheme=NOMA)
    p = numeric_optimal_ptx(cfg)
    assert p == pytest.approx(special_case_optimal_ptx(30), rel=1e-4)
    assert optimal_policy(SystemConfig(num_users=30)).value == pytest.approx(1 / 30)
    k4 = optimal_policy(SystemConfig(num_users=16, num_levels=4, scheme=NOMA))
    best = analytical_aoi(SystemConfig(num_users=16, num_levels=4, scheme=NOMA, tx_policy=k4))
    for q in np.linspace(0.05, 1.0, 60):
        cfg = SystemConfig(num_users=16, num_levels=4, scheme=NOMA, tx_policy=TxPolicy.fixed(q))
        assert analytical_aoi(cfg) >= best - 1e-9
