"""Closed forms for the two-level, one-slot-per-frame case, large-M asymptotes
and a grid search over the transmission probability."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .config import NOMA, OMA, SystemConfig, TxPolicy
from .errors import NoAbsorptionError
from .markov import analytical_aoi

ETA_BRACKET = (1.0, 2.0)


@dataclass(frozen=True)
class EtaSolution:
    eta: float
    residual: float
    iterations: int


def eta_equation(eta: float) -> float:
    """Large-M stationarity condition of the two-level success probability."""
    return (1.0 - eta / 2.0) * math.exp(-eta / 2.0) + (1.0 - eta * eta / 2.0) * math.exp(-eta)


def solve_eta(tol: float = 1e-12, max_iter: int = 200) -> EtaSolution:
    """Bisection on [1, 2]; the function is positive at 1 and negative at 2."""
    lo, hi = ETA_BRACKET
    g_lo = eta_equation(lo)
    mid, g_mid = lo, g_lo
    for it in range(1, max_iter + 1):
        mid = 0.5 * (lo + hi)
        g_mid = eta_equation(mid)
        if abs(g_mid) <= tol or hi - lo <= 2 * math.ulp(mid):
            break
        if (g_mid > 0) == (g_lo > 0):
            lo, g_lo = mid, g_mid
        else:
            hi = mid
    return EtaSolution(mid, g_mid, it)


def _check_special_case(ptx: float, num_users: int) -> None:
    if not 0.0 <= ptx <= 1.0:
        raise ValueError("ptx must lie in [0, 1]")
    if num_users < 2:
        raise ValueError("the two-level closed forms need M >= 2")


def special_case_success(ptx: float, num_users: int) -> float:
    """Per-slot delivery probability of the tagged user, K=2, high SNR.

    Level 1 wins if nobody else picks level 1; level 2 wins if nobody else
    picks level 2 and level 1 is not collided.  ``0**0`` is taken as 1.
    """
    _check_special_case(ptx, num_users)
    M = num_users
    x = ptx / 2.0
    return (1.0 - x) ** (M - 1) * x + (1.0 - ptx + (M - 1) * x) * (1.0 - ptx) ** (M - 2) * x


def special_case_p_fail(ptx: float, num_users: int) -> float:
    return 1.0 - special_case_success(ptx, num_users)


def special_case_success_derivative(ptx: float, num_users: int) -> float:
    """d/dptx of :func:`special_case_success`."""
    _check_special_case(ptx, num_users)
    M = num_users
    first = (1.0 - M * ptx / 2.0) * (1.0 - ptx / 2.0) ** (M - 2)
    if M == 2:
        second = 1.0 - ptx
    else:
        second = (1.0 - 2.0 * ptx - M * (M - 3) * ptx * ptx / 2.0) * (1.0 - ptx) ** (M - 3)
    return 0.5 * (first + second)


def special_case_aoi_noma(ptx: float, num_users: int, slot_duration: float) -> float:
    """GAR AoI for K=2, N=1 at high SNR."""
    f = special_case_success(ptx, num_users)
    if f <= 1e-15:
        raise NoAbsorptionError(f"delivery probability {f:.3e} is too small")
    return slot_duration * (1.0 + (2.0 - f) / (2.0 * f))


def special_case_optimal_ptx(num_users: int) -> float:
    """Finite-M maximiser of the two-level delivery probability (root of its derivative)."""
    M = num_users
    if M < 2:
        raise ValueError("need M >= 2")
    d = lambda p: special_case_success_derivative(p, M)  # noqa: E731
    if d(1.0) >= 0.0:
        return 1.0
    lo, hi = 0.0, 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if d(mid) > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15:
            break
    return 0.5 * (lo + hi)


def oma_special_case_aoi(ptx: float, num_users: int, slots_per_frame: int, slot_duration: float) -> float:
    """Exact OMA GAR AoI when the chain only ever runs one slot from s_0."""
    f = ptx * (1.0 - ptx) ** (num_users - 1)
    if f <= 1e-15:
        raise NoAbsorptionError(f"delivery probability {f:.3e} is too small")
    frame = slots_per_frame * slot_duration
    return slot_duration + frame * (2.0 - f) / (2.0 * f)


def optimal_ptx(scheme: str, num_users: int) -> float:
    """1/M for OMA, eta/M for two-level NOMA."""
    if num_users < 2:
        raise ValueError("need M >= 2")
    if scheme.upper() == OMA:
        return 1.0 / num_users
    return solve_eta().eta / num_users


def asymptotic_aoi(scheme: str, num_users: int, slots_per_frame: int, slot_duration: float) -> float:
    frame = slots_per_frame * slot_duration
    if scheme.upper() == OMA:
        return frame * num_users * math.e
    eta = solve_eta().eta
    return frame * 2.0 * num_users * math.exp(eta) / (eta * (math.exp(eta / 2.0) + 1.0 + eta / 2.0))


def aoi_ratio_asymptotic() -> float:
    """Large-M NOMA/OMA AoI ratio at the respective optimal probabilities."""
    eta = solve_eta().eta
    return 2.0 * math.exp(eta - 1.0) / (eta * (math.exp(eta / 2.0) + 1.0 + eta / 2.0))


@dataclass(frozen=True)
class GridResult:
    ptx: float
    aoi: float
    curve: list

    @property
    def values(self) -> np.ndarray:
        return np.array([p for p, _ in self.curve])


def ptx_grid(step: float = 0.005, upper: float = 1.0) -> np.ndarray:
    count = int(round(upper / step))
    return step * np.arange(1, count + 1)


def grid_optimize_ptx(config: SystemConfig, grid: Sequence[float], evaluator: str = "analytical",
                      frames: int = 100_000, seed: int = 0, scheme: str | None = None) -> GridResult:
    """Evaluate the AoI for a fixed probability at every grid point.

    Points where the AoI diverges are recorded as ``inf``; ties go to the
    smaller probability.
    """
    grid = sorted(float(p) for p in grid)
    if not grid:
        raise ValueError("grid must not be empty")
    if grid[0] <= 0.0 or grid[-1] > 1.0:
        raise ValueError("grid must lie in (0, 1]")
    if scheme is not None:
        config = config.replace(scheme=scheme, num_levels=1 if scheme.upper() == OMA else config.num_levels)
    curve = []
    for p in grid:
        point = config.replace(tx_policy=TxPolicy.fixed(p))
        try:
            if evaluator == "analytical":
                aoi = analytical_aoi(point)
            elif evaluator == "simulated":
                from .simulation import empirical_aoi, simulate

                aoi = empirical_aoi(simulate(point, frames, seed))[0]
            else:
                raise ValueError(f"unknown evaluator {evaluator!r}")
        except NoAbsorptionError:
            aoi = math.inf
        curve.append((p, aoi))
    best = min(range(len(curve)), key=lambda i: (curve[i][1], i))
    return GridResult(curve[best][0], curve[best][1], curve)


def numeric_optimal_ptx(config: SystemConfig, coarse: int = 64) -> float:
    """Analytical minimiser of the AoI over a fixed probability: a coarse
    log-spaced scan followed by bounded Brent refinement."""
    M = config.num_users
    grid = np.unique(np.clip(np.geomspace(0.05 / M, 1.0, coarse), 1e-9, 1.0))

    def aoi(p: float) -> float:
        try:
            return analytical_aoi(config.replace(tx_policy=TxPolicy.fixed(float(p))))
        except NoAbsorptionError:
            return math.inf

    values = [aoi(p) for p in grid]
    i = int(np.argmin(values))
    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, len(grid) - 1)]
    if hi <= lo:
        return float(grid[i])
    res = minimize_scalar(aoi, bounds=(lo, hi), method="bounded", options={"xatol": 1e-10})
    return float(res.x) if res.fun <= values[i] else float(grid[i])


def optimal_policy(config: SystemConfig) -> TxPolicy:
    """Fixed probability used by the "optimal" sweeps: 1/M for OMA, eta/M for
    two-level NOMA and a numeric optimum for more levels."""
    M = config.num_users
    if config.scheme == OMA:
        return TxPolicy.fixed(1.0 / M)
    if config.scheme == NOMA and config.num_levels == 2 and M >= 2:
        return TxPolicy.fixed(min(1.0, optimal_ptx(NOMA, M)))
    return TxPolicy.fixed(numeric_optimal_ptx(config))
