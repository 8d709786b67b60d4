"""Absorbing Markov chain of one frame and the renewal-reward AoI.

State ``s_j`` (``0 <= j < M``) means ``j`` users other than the tagged one
have delivered in the current frame; absorption means the tagged user has.
A slot can move the chain forward by at most ``K`` states, so the transient
matrix is stored as a band: ``band[j, d] = P_{j, j+d}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import comb, gammaln, xlog1py, xlogy
from scipy.stats import binom

from .config import GAW, NOMA, OMA, SystemConfig
from .errors import NoAbsorptionError

CLAMP_TOLERANCE = 1e-9
NO_ABSORPTION_THRESHOLD = 1e-12


@dataclass(frozen=True, eq=False)
class TransitionModel:
    band: np.ndarray
    absorb: np.ndarray
    scheme: str
    config: SystemConfig

    @property
    def num_states(self) -> int:
        return self.band.shape[0]

    @property
    def bandwidth(self) -> int:
        return self.band.shape[1] - 1

    @property
    def transient(self) -> np.ndarray:
        """Dense ``M x M`` transient matrix (row ``j``, column ``i`` holds ``P_{j,i}``)."""
        M = self.num_states
        dense = np.zeros((M, M))
        for d in range(min(self.band.shape[1], M)):
            rows = np.arange(M - d)
            dense[rows, rows + d] = self.band[: M - d, d]
        return dense

    def entry(self, j: int, i: int) -> float:
        if i == self.num_states:
            return float(self.absorb[j])
        d = i - j
        if 0 <= d < self.band.shape[1] and i < self.num_states:
            return float(self.band[j, d])
        return 0.0

    def row_sums(self) -> np.ndarray:
        return self.band.sum(axis=1) + self.absorb

    def step(self, v: np.ndarray) -> np.ndarray:
        """Row vector times the transient matrix, using the band only."""
        M = self.num_states
        out = np.zeros(M)
        for d in range(self.band.shape[1]):
            if d >= M:
                break
            out[d:] += v[: M - d] * self.band[: M - d, d]
        return out


def _freeze(model_band: np.ndarray, absorb: np.ndarray, config: SystemConfig) -> TransitionModel:
    model_band.setflags(write=False)
    absorb.setflags(write=False)
    return TransitionModel(model_band, absorb, config.scheme, config)


def _clamp_row(row: np.ndarray, j: int) -> np.ndarray:
    worst = row.min()
    if worst < -CLAMP_TOLERANCE:
        raise ValueError(f"transition probability {worst:.3e} in row {j} is negative beyond tolerance")
    return np.maximum(row, 0.0)


def oma_transitions(config: SystemConfig) -> TransitionModel:
    """Slotted-ALOHA transitions, exact for any transmit power."""
    if config.scheme != OMA:
        raise ValueError("oma_transitions needs an OMA config")
    M = config.num_users
    no_outage = math.exp(-config.epsilon / config.tx_power)
    band = np.zeros((M, 2))
    absorb = np.zeros(M)
    for j in range(M):
        n = M - j
        p = config.tx_probability(j)
        single = p * no_outage * (1.0 - p) ** (n - 1)
        band[j, 0] = 1.0 - n * single
        if n > 1:
            band[j, 1] = (n - 1) * single
        absorb[j] = single
    return _freeze(band, absorb, config)


@lru_cache(maxsize=64)
def _level_tables(K: int, M: int):
    """Level-combinatorics terms of the NOMA transitions that depend only on
    ``K`` and the active-user count, tabulated once per ``(K, M)``."""
    q = 1.0 / K
    m = np.arange(M + 1, dtype=float)

    # probability some active user is first and alone at any level, times m
    first_alone = np.zeros(M + 1)
    for k in range(1, K + 1):
        first_alone += m * q * (1.0 - k * q) ** np.maximum(m - 1, 0)
    first_alone[0] = 0.0

    # h[k, r]: r further users all sit below level k and none of them is alone
    # at the first level they occupy
    h = np.zeros((K + 1, M + 1))
    for k in range(1, K + 1):
        tail = np.zeros(M + 1)
        for kappa in range(k + 1, K + 1):
            tail += (1.0 - kappa * q) ** np.maximum(m - 1, 0)
        h[k] = (1.0 - k * q) ** m - m * q * tail

    # single non-tagged success with m >= 2 active users
    single = np.zeros(M + 1)
    for k in range(1, K):
        single[1:] += m[1:] * q * h[k, :-1]

    # i >= 2 successes: all-active-succeed constant and the m > i table
    all_succeed = np.zeros(K + 1)
    more_active = np.zeros((K + 1, M + 1))
    for i in range(2, K + 1):
        count = 0.0
        for k1 in range(1, K - i + 2):
            for k2 in range(k1 + i - 1, K + 1):
                count += comb(k2 - k1 - 1, i - 2, exact=True)
        all_succeed[i] = q**i * math.factorial(i) * count
        for k1 in range(1, K - i + 1):
            for k2 in range(k1 + i - 1, K):
                more_active[i] += comb(k2 - k1 - 1, i - 2, exact=True) * h[k2]
        more_active[i] *= q**i
    return first_alone, single, all_succeed, more_active


# below this attempt probability scipy's binomial pmf can overflow internally
_TINY_PTX = 1e-100


def _binomial_pmf(n: int, p: float) -> np.ndarray:
    """``P(Bin(n, p) = m)`` for ``m = 0..n``.

    scipy's pmf is accurate to a few ulps up to very large ``n``; for
    vanishing ``p`` the log-space form is exact enough and cannot overflow.
    """
    m = np.arange(n + 1, dtype=float)
    if p >= _TINY_PTX:
        return binom.pmf(m, n, p)
    log_comb = gammaln(n + 1.0) - gammaln(m + 1.0) - gammaln(n - m + 1.0)
    with np.errstate(divide="ignore"):
        return np.exp(log_comb + xlogy(m, p) + xlog1py(n - m, -p))


def _falling(m: np.ndarray, i: int) -> np.ndarray:
    out = np.ones_like(m, dtype=float)
    for t in range(i):
        out *= m - t
    return out


def noma_transitions(config: SystemConfig) -> TransitionModel:
    """High-SNR (collision-only) NOMA transitions.

    Every active user picks one of ``K`` levels uniformly; SIC decodes levels in
    order and stops at the first collided level.  Absorption is the complement
    of the transient row sum.
    """
    if config.scheme != NOMA:
        raise ValueError("noma_transitions needs a NOMA config")
    if not config.high_snr:
        raise ValueError("NOMA transitions are only available in the high-SNR model (tx_power=inf)")
    K = config.num_levels
    if K < 2:
        raise ValueError("NOMA needs at least two SNR levels")
    M = config.num_users
    q = 1.0 / K
    first_alone, single, all_succeed, more_active = _level_tables(K, M)

    band = np.zeros((M, K + 1))
    absorb = np.zeros(M)
    for j in range(M):
        n = M - j
        p = config.tx_probability(j)
        m = np.arange(n + 1)
        pmf = _binomial_pmf(n, p)
        row = np.zeros(K + 1)
        row[0] = 1.0 - pmf[1:] @ first_alone[1 : n + 1]
        if n >= 2:
            keep = (n - 1) / n
            row[1] = pmf[1] * keep * K * q + keep * (pmf[2:] @ single[2 : n + 1])
        for i in range(2, min(n - 1, K) + 1):
            keep = (n - i) / n
            mm = m[i + 1 :]
            tail = pmf[i + 1 :] * _falling(mm.astype(float), i) @ more_active[i, mm - i]
            row[i] = keep * (pmf[i] * all_succeed[i] + tail)
        row = _clamp_row(row, j)
        rest = 1.0 - row.sum()
        if rest < -CLAMP_TOLERANCE:
            raise ValueError(f"row {j} sums to {1 - rest:.12f} > 1")
        band[j] = row
        absorb[j] = min(max(rest, 0.0), 1.0)
    return _freeze(band, absorb, config)


def transitions(config: SystemConfig) -> TransitionModel:
    """Transition model for the config's scheme.  NOMA always uses the
    high-SNR model, whatever ``tx_power`` says."""
    if config.scheme == OMA:
        return oma_transitions(config)
    if not config.high_snr:
        config = config.replace(tx_power=math.inf)
    return noma_transitions(config)


def update_delay_pmf(model: TransitionModel, max_slots: int) -> tuple[np.ndarray, float]:
    """``P(Z = n)`` for ``n = 1..max_slots`` and the leftover ``P(Z > max_slots)``."""
    if max_slots < 1:
        raise ValueError("max_slots must be >= 1")
    v = np.zeros(model.num_states)
    v[0] = 1.0
    pmf = np.empty(max_slots)
    for n in range(max_slots):
        pmf[n] = v @ model.absorb
        v = model.step(v)
    return pmf, float(v.sum())


def pmf_update_delay(model: TransitionModel, n: int) -> float:
    if n < 1:
        raise ValueError("slot index starts at 1")
    return float(update_delay_pmf(model, n)[0][-1])


def failure_probability(model: TransitionModel, slots_per_frame: int) -> float:
    """Probability that the tagged user is still pending after a whole frame."""
    return update_delay_pmf(model, slots_per_frame)[1]


@dataclass(frozen=True)
class RenewalMoments:
    p_fail: float
    e_s: float
    e_s2: float
    e_x: float
    e_x2: float
    e_y: float
    e_y2: float
    e_s_prev_y: float


def renewal_moments(model: TransitionModel, slots_per_frame: int, slot_duration: float) -> RenewalMoments:
    """Moments of service delay ``S``, frames-between-deliveries ``X`` and
    inter-departure time ``Y``, plus the cross term ``E{S_{j-1} Y_j}``."""
    N, T = slots_per_frame, slot_duration
    pmf, p_fail = update_delay_pmf(model, N)
    if p_fail >= 1.0 - NO_ABSORPTION_THRESHOLD:
        raise NoAbsorptionError(f"tagged user delivers with probability {1 - p_fail:.3e} per frame")
    success = 1.0 - p_fail
    n = np.arange(1, N + 1)
    # pmf.sum() equals 1 - p_fail; normalising by it keeps S exactly in [T, NT]
    delay = pmf / math.fsum(pmf)
    e_s = T * float(n @ delay)
    e_s2 = T * T * float((n * n) @ delay)
    e_x = 1.0 / success
    e_x2 = (1.0 + p_fail) / success**2
    e_y = N * T * e_x
    e_y2 = N * N * T * T * e_x2 + 2.0 * e_s2 - 2.0 * e_s**2
    e_s_prev_y = e_s * e_y - e_s2 + e_s**2
    return RenewalMoments(p_fail, e_s, e_s2, e_x, e_x2, e_y, e_y2, e_s_prev_y)


def aoi_gar(moments: RenewalMoments) -> float:
    return moments.e_s_prev_y / moments.e_y + moments.e_y2 / (2.0 * moments.e_y)


def aoi_gaw(moments: RenewalMoments, slot_duration: float) -> float:
    return slot_duration + moments.e_y2 / (2.0 * moments.e_y)


@dataclass(frozen=True)
class AnalyticalResult:
    aoi: float
    moments: RenewalMoments
    model: TransitionModel


def evaluate(config: SystemConfig) -> AnalyticalResult:
    """Chain, moments and AoI (GAR or GAW per the config) in one call."""
    model = transitions(config)
    moments = renewal_moments(model, config.slots_per_frame, config.slot_duration)
    if config.generation_model == GAW:
        aoi = aoi_gaw(moments, config.slot_duration)
    else:
        aoi = aoi_gar(moments)
    return AnalyticalResult(aoi, moments, model)


def analytical_aoi(config: SystemConfig) -> float:
    return evaluate(config).aoi
