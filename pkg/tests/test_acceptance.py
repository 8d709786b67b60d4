"""Acceptance criteria, one test each; every test records a pass/fail line
that is echoed in the pytest terminal summary."""

import math
import statistics
import time

import pytest

from noma_aoi.asymptotics import (aoi_ratio_asymptotic, asymptotic_aoi, grid_optimize_ptx, optimal_policy,
                                  ptx_grid, solve_eta)
from noma_aoi.config import GAW, NOMA, OMA, SystemConfig, TxPolicy, default_policy
from noma_aoi.experiments import max_row_deviation, oma_comparison, oracle_comparison
from noma_aoi.markov import analytical_aoi
from noma_aoi.simulation import empirical_aoi, simulate

# fixed before any acceptance run
SEED = 20240917
FRAMES = 1_000_000


def fig_config(scheme, **kw):
    base = dict(num_users=8, slots_per_frame=8, slot_duration=6.0, tx_power=100.0, target_rate=0.5,
                scheme=scheme, num_levels=1 if scheme == OMA else 2)
    base.update(kw)
    cfg = SystemConfig(**base)
    return cfg.replace(tx_policy=default_policy(scheme))


def test_criterion_01_eta(report):
    sol = solve_eta()
    times = []
    for _ in range(50):
        t = time.perf_counter()
        solve_eta()
        times.append(time.perf_counter() - t)
    runtime = statistics.median(times)
    ok = abs(sol.eta - 1.6646) <= 5e-4 and abs(sol.residual) <= 1e-10 and runtime < 1e-3
    report("1 eta", f"eta={sol.eta:.10f} residual={sol.residual:.2e} runtime={runtime * 1e3:.3f}ms",
           "|eta-1.6646|<=5e-4, |g|<=1e-10, <1ms", ok)
    assert ok


def test_criterion_02_ratio(report):
    r = aoi_ratio_asymptotic()
    ok = abs(r - 0.5653) <= 1e-3 and r < 0.6
    report("2 asymptotic ratio", f"{r:.7f}", "0.5653+-1e-3 and <0.6", ok)
    assert ok


def test_criterion_03_noma_closed_form_vs_enumeration(report):
    t = time.perf_counter()
    worst = max(row[-1] for row in oracle_comparison())
    runtime = time.perf_counter() - t
    ok = worst <= 1e-9 and runtime < 30
    report("3 noma closed form vs enumeration", f"max|diff|={worst:.2e} runtime={runtime:.2f}s", "<=1e-9, <30s", ok)
    assert ok


def test_criterion_04_oma_exact(report):
    worst = oma_comparison()
    ok = worst <= 1e-12
    report("4 oma formulas vs enumeration", f"max|diff|={worst:.2e}", "<=1e-12", ok)
    assert ok


def test_criterion_05_row_sums(report):
    noma, oma = max_row_deviation(200)
    ok = noma <= 1e-9 and oma <= 1e-12
    report("5 row sums", f"noma={noma:.2e} oma={oma:.2e}", "noma<=1e-9, oma<=1e-12", ok)
    assert ok


def test_criterion_06_full_chain_ratio(report):
    t = time.perf_counter()
    M = 200
    eta = solve_eta().eta
    noma = analytical_aoi(SystemConfig(num_users=M, num_levels=2, scheme=NOMA, tx_policy=TxPolicy.fixed(eta / M)))
    oma = analytical_aoi(SystemConfig(num_users=M, tx_policy=TxPolicy.fixed(1 / M)))
    runtime = time.perf_counter() - t
    ratio = noma / oma
    rel = abs(ratio - 0.5653) / 0.5653
    ok = rel <= 0.03 and runtime < 10
    report("6 full-chain ratio M=200", f"{ratio:.5f} (rel err {rel:.3%}, {runtime:.2f}s)", "within 3% of 0.5653, <10s", ok)
    assert ok


def _sim_point(scheme, P):
    cfg = SystemConfig(num_users=8, num_levels=1 if scheme == OMA else 2, scheme=scheme, slots_per_frame=1,
                       slot_duration=6.0, target_rate=0.5, tx_power=P)
    cfg = cfg.replace(tx_policy=optimal_policy(cfg))
    mean, se = empirical_aoi(simulate(cfg, FRAMES, SEED))
    return cfg, mean, se


@pytest.mark.slow
def test_criterion_07_simulation_vs_analysis(report):
    results = {}
    passed = True
    for scheme in (OMA, NOMA):
        for P in (100.0, 1.0):
            cfg, mean, se = _sim_point(scheme, P)
            results[scheme, P] = (mean, analytical_aoi(cfg))
        mean, exact = results[scheme, 100.0]
        rel = abs(mean - exact) / exact
        ok = rel <= 0.03
        passed &= ok
        report(f"7 {scheme} sim vs analysis at 20 dB", f"sim={mean:.3f} analytical={exact:.3f} rel={rel:.3%}",
               "within 3%", ok)
    rise = {s: results[s, 1.0][0] - results[s, 100.0][0] for s in (OMA, NOMA)}
    ok = rise[OMA] > rise[NOMA]
    passed &= ok
    report("7 low-SNR sensitivity", f"OMA rise={rise[OMA]:.2f}s NOMA rise={rise[NOMA]:.2f}s",
           "OMA rise > NOMA rise", ok)
    assert passed


def test_criterion_08_grid_optimum(report):
    grid = ptx_grid(0.005)
    oma = grid_optimize_ptx(SystemConfig(num_users=8), grid)
    noma = grid_optimize_ptx(SystemConfig(num_users=8, num_levels=2, scheme=NOMA), grid)
    target = solve_eta().eta / 8
    ok_o = abs(oma.ptx - 0.125) <= 0.005 + 1e-12
    ok_n = abs(noma.ptx - target) <= 0.005 + 1e-12
    report("8 OMA grid argmin", f"{oma.ptx:.3f}", "0.125 +- 0.005", ok_o)
    report("8 NOMA grid argmin", f"{noma.ptx:.3f}", f"{target:.5f} +- 0.005", ok_n)
    assert ok_o and ok_n


def test_criterion_09a_users_sweep(report):
    passed = True
    for K in (2, 4):
        gaps = []
        below = True
        for M in range(4, 33, 4):
            o = analytical_aoi(fig_config(OMA, num_users=M))
            n = analytical_aoi(fig_config(NOMA, num_users=M, num_levels=K))
            below &= n < o
            gaps.append(o - n)
        growing = all(b > a for a, b in zip(gaps, gaps[1:]))
        ok = below and growing
        passed &= ok
        report(f"9a users sweep K={K}", f"gaps={[round(g, 1) for g in gaps]}",
               "NOMA<OMA everywhere, gap increasing", ok)
    assert passed


def test_criterion_09b_slots_sweep(report):
    passed = True
    for scheme in (OMA, NOMA):
        aoi = {N: analytical_aoi(fig_config(scheme, num_levels=1 if scheme == OMA else 4, slots_per_frame=N))
               for N in (1, 5, 10, 30)}
        ok = aoi[5] < aoi[1] and aoi[30] > aoi[10]
        passed &= ok
        report(f"9b slots sweep {scheme}", " ".join(f"N={n}:{v:.2f}" for n, v in aoi.items()),
               "AoI(5)<AoI(1), AoI(30)>AoI(10)", ok)
    assert passed


def test_criterion_09c_more_levels_lower_ratio(report):
    passed = True
    for M in (10, 50, 100, 200):
        oma_cfg = SystemConfig(num_users=M)
        oma = analytical_aoi(oma_cfg.replace(tx_policy=optimal_policy(oma_cfg)))
        ratios = {}
        for K in (2, 4):
            cfg = SystemConfig(num_users=M, num_levels=K, scheme=NOMA)
            ratios[K] = analytical_aoi(cfg.replace(tx_policy=optimal_policy(cfg))) / oma
        ok = ratios[4] < ratios[2]
        passed &= ok
        report(f"9c ratio K=4 vs K=2 at M={M}", f"{ratios[4]:.4f} vs {ratios[2]:.4f}", "K=4 below K=2", ok)
    assert passed


def test_criterion_09d_generation_models(report):
    worst = -math.inf
    equal_gap = 0.0
    for scheme in (OMA, NOMA):
        for M in range(4, 33, 4):
            for N in (1, 8):
                gar_cfg = fig_config(scheme, num_users=M, slots_per_frame=N)
                gar = analytical_aoi(gar_cfg)
                gaw = analytical_aoi(gar_cfg.replace(generation_model=GAW))
                worst = max(worst, (gaw - gar) / gar)
                if N == 1:
                    equal_gap = max(equal_gap, abs(gaw - gar) / gar)
    ok = worst <= 1e-12 and equal_gap <= 1e-12
    report("9d GAW vs GAR", f"max (GAW-GAR)/GAR={worst:.2e}, N=1 max gap={equal_gap:.2e}",
           "GAW<=GAR, equal at N=1", ok)
    assert ok


def test_criterion_10_oma_asymptote(report):
    M = 200
    exact = analytical_aoi(SystemConfig(num_users=M, tx_policy=TxPolicy.fixed(1 / M)))
    approx = asymptotic_aoi(OMA, M, 1, 6.0)
    rel = abs(exact - approx) / exact
    ok = rel <= 0.05
    report("10 OMA asymptote M=200", f"exact={exact:.2f} NTMe={approx:.2f} rel={rel:.3%}", "within 5%", ok)
    assert ok
