"""Frame/slot Monte Carlo simulator of grant-free access and the tagged user's AoI.

User 0 is the tagged user.  Frames are simulated in fixed-size blocks, each
with its own Philox stream keyed by ``(seed, block)``, so a run is fully
determined by ``(config, frames, seed)`` regardless of how blocks are
scheduled.  The AoI sawtooth is integrated exactly, frame by frame.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .config import GAW, NOMA, SystemConfig
from .errors import InsufficientCyclesError
from .oracle import resolve_sic

BLOCK_FRAMES = 8192

SILENT = "silent"
INFEASIBLE_ABSTAIN = "infeasible-abstain"
COLLIDED = "collided"
SIC_BLOCKED = "sic-blocked"
OUTAGE = "outage"
SUCCESS = "success"


@dataclass(frozen=True)
class SlotOutcome:
    status: tuple
    occupancy: tuple
    termination: int | None

    @property
    def winners(self) -> set:
        return {u for u, s in enumerate(self.status) if s == SUCCESS}


def classify_noma_slot(levels: Sequence[int], transmit: Sequence[bool], feasible: Sequence[bool],
                       num_levels: int, infeasible: str = "abstain") -> SlotOutcome:
    """Label every user's fate in one NOMA slot (scalar replay of the simulator rules)."""
    n = len(levels)
    present = [
        levels[u] if transmit[u] and (feasible[u] or infeasible == "jam") else None
        for u in range(n)
    ]
    winners, stop = resolve_sic(present, num_levels, decodable=feasible)
    occupancy = [0] * num_levels
    for lv in present:
        if lv is not None:
            occupancy[lv] += 1
    status = []
    for u in range(n):
        lv = present[u]
        if not transmit[u]:
            status.append(SILENT)
        elif lv is None:
            status.append(INFEASIBLE_ABSTAIN)
        elif u in winners:
            status.append(SUCCESS)
        elif stop is not None and lv > stop:
            status.append(SIC_BLOCKED)
        elif occupancy[lv] > 1:
            status.append(COLLIDED)
        else:
            status.append(OUTAGE)
    return SlotOutcome(tuple(status), tuple(occupancy), stop)


def classify_oma_slot(transmit: Sequence[bool], no_outage: Sequence[bool]) -> SlotOutcome:
    count = sum(bool(t) for t in transmit)
    status = []
    for t, ok in zip(transmit, no_outage):
        if not t:
            status.append(SILENT)
        elif count > 1:
            status.append(COLLIDED)
        else:
            status.append(SUCCESS if ok else OUTAGE)
    return SlotOutcome(tuple(status), (count,), None)


def resolve_noma(levels: np.ndarray, present: np.ndarray, decodable: np.ndarray, num_levels: int):
    """Vectorised SIC over a batch of slots.

    ``levels``, ``present`` and ``decodable`` are ``(frames, users)`` arrays.
    Returns the success mask and the 0-based stopping level (``K`` if SIC ran
    through).
    """
    K = num_levels
    frames = levels.shape[0]
    cell = np.arange(frames)[:, None] * K + levels
    occupancy = np.bincount(cell[present], minlength=frames * K).reshape(frames, K)
    undecodable = np.bincount(cell[present & ~decodable], minlength=frames * K).reshape(frames, K) > 0
    stop = (occupancy >= 2) | ((occupancy == 1) & undecodable)
    first_stop = np.where(stop.any(axis=1), stop.argmax(axis=1), K)
    good_level = (occupancy == 1) & (np.arange(K) < first_stop[:, None])
    success = present & decodable & np.take_along_axis(good_level, levels, axis=1)
    return success, first_stop


def _block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(block,))))


def _ptx_table(config: SystemConfig) -> np.ndarray:
    M = config.num_users
    table = np.zeros(M + 1)
    for j in range(M):
        table[j] = config.tx_probability(j)
    return table


def _simulate_block(config: SystemConfig, frames: int, seed: int, block: int):
    M, N, K = config.num_users, config.slots_per_frame, config.num_levels
    rng = _block_rng(seed, block)
    ptx_table = _ptx_table(config)
    pending = np.ones((frames, M), dtype=bool)
    delivery_slot = np.zeros(frames, dtype=np.int32)
    if config.scheme == NOMA:
        thresholds = np.asarray(config.ladder().levels) / config.tx_power
    else:
        outage_threshold = config.epsilon / config.tx_power

    for n in range(1, N + 1):
        u = rng.random((frames, M))
        gain = rng.standard_exponential((frames, M))
        done = M - pending.sum(axis=1)
        transmit = pending & (u < ptx_table[done][:, None])
        if config.scheme == NOMA:
            levels = rng.integers(0, K, size=(frames, M))
            feasible = gain >= thresholds[levels]
            present = transmit & feasible if config.infeasible == "abstain" else transmit
            success, _ = resolve_noma(levels, present, feasible, K)
        else:
            single = transmit.sum(axis=1) == 1
            success = transmit & single[:, None]
            if not config.high_snr:
                success &= gain > outage_threshold
        newly = success[:, 0] & (delivery_slot == 0)
        delivery_slot[newly] = n
        pending &= ~success
    success_counts = (M - pending.sum(axis=1)).astype(np.int32)
    return delivery_slot, success_counts


def _frame_areas(delivery_slot: np.ndarray, config: SystemConfig) -> np.ndarray:
    """Exact integral of the tagged user's age over each frame (age 0 at t=0)."""
    T = config.slot_duration
    L = config.frame_duration
    frames = delivery_slot.shape[0]
    f = np.arange(frames, dtype=float)
    delivered = delivery_slot > 0
    offset = delivery_slot * T
    age_at_delivery = np.full(frames, T) if config.generation_model == GAW else offset
    end_age = age_at_delivery + L - offset
    idx = np.where(delivered, np.arange(frames), -1)
    last = np.maximum.accumulate(idx)
    prev = np.concatenate(([-1], last[:-1]))
    start_age = np.where(prev >= 0, end_age[prev] + (f - prev - 1) * L, f * L)
    rest = L - offset
    with_delivery = start_age * offset + 0.5 * offset**2 + age_at_delivery * rest + 0.5 * rest**2
    without = start_age * L + 0.5 * L * L
    return np.where(delivered, with_delivery, without)


@dataclass(frozen=True, eq=False)
class TraceStats:
    config: SystemConfig
    frames_run: int
    seed: int
    delivery_slot: np.ndarray
    success_counts: np.ndarray
    frame_areas: np.ndarray
    aoi_time_integral: float
    elapsed: float

    @property
    def delivered_frames(self) -> np.ndarray:
        return np.flatnonzero(self.delivery_slot > 0)

    @property
    def s_samples(self) -> np.ndarray:
        """Generation-to-delivery time of every delivered update."""
        if self.config.generation_model == GAW:
            return np.full(self.delivered_frames.size, self.config.slot_duration)
        return self.delivery_slot[self.delivered_frames] * self.config.slot_duration

    @property
    def delivery_times(self) -> np.ndarray:
        frames = self.delivered_frames
        return frames * self.config.frame_duration + self.delivery_slot[frames] * self.config.slot_duration

    @property
    def y_samples(self) -> np.ndarray:
        return np.diff(self.delivery_times)

    @property
    def x_samples(self) -> np.ndarray:
        return np.diff(self.delivered_frames)


def simulate(config: SystemConfig, frames: int, seed: int = 0, workers: int = 1) -> TraceStats:
    """Run ``frames`` frames and integrate the tagged user's AoI."""
    if frames < 1:
        raise ValueError("frames must be >= 1")
    if config.scheme == NOMA and config.num_levels < 2:
        raise ValueError("NOMA needs at least two SNR levels")
    blocks = [(b, min(BLOCK_FRAMES, frames - b * BLOCK_FRAMES))
              for b in range(math.ceil(frames / BLOCK_FRAMES))]
    run = lambda item: _simulate_block(config, item[1], seed, item[0])  # noqa: E731
    if workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, blocks))
    else:
        results = [run(item) for item in blocks]
    delivery_slot = np.concatenate([r[0] for r in results])
    success_counts = np.concatenate([r[1] for r in results])
    areas = _frame_areas(delivery_slot, config)
    for arr in (delivery_slot, success_counts, areas):
        arr.setflags(write=False)
    return TraceStats(
        config=config,
        frames_run=frames,
        seed=seed,
        delivery_slot=delivery_slot,
        success_counts=success_counts,
        frame_areas=areas,
        aoi_time_integral=math.fsum(areas),
        elapsed=frames * config.frame_duration,
    )


def empirical_aoi(stats: TraceStats, batches: int = 50) -> tuple[float, float]:
    """Time-average AoI and its batch-means standard error."""
    if stats.elapsed <= 0:
        raise ValueError("empty trace")
    mean = stats.aoi_time_integral / stats.elapsed
    if stats.frames_run < batches:
        return mean, math.nan
    chunks = np.array_split(stats.frame_areas, batches)
    batch_means = np.array([c.sum() / (c.size * stats.config.frame_duration) for c in chunks])
    return mean, float(batch_means.std(ddof=1) / math.sqrt(batches))


@dataclass(frozen=True)
class EmpiricalRenewal:
    p_fail: float
    e_s: float
    e_s2: float
    e_x: float
    e_x2: float
    e_y: float
    e_y2: float
    e_s_prev_y: float
    cycles: int
    se_p_fail: float
    se_s: float
    se_x: float
    se_y: float


def _se(x: np.ndarray) -> float:
    return float(x.std(ddof=1) / math.sqrt(x.size)) if x.size > 1 else math.nan


def empirical_renewal(stats: TraceStats, min_cycles: int = 100) -> EmpiricalRenewal:
    """Sample moments of S, X and Y from a trace."""
    y = stats.y_samples
    if y.size < min_cycles:
        raise InsufficientCyclesError(f"only {y.size} completed cycles, need {min_cycles}")
    s = stats.s_samples
    x = stats.x_samples.astype(float)
    delivered = stats.delivery_slot > 0
    p_fail = 1.0 - delivered.mean()
    return EmpiricalRenewal(
        p_fail=float(p_fail),
        e_s=float(s.mean()),
        e_s2=float((s * s).mean()),
        e_x=float(x.mean()),
        e_x2=float((x * x).mean()),
        e_y=float(y.mean()),
        e_y2=float((y * y).mean()),
        e_s_prev_y=float((s[:-1] * y).mean()),
        cycles=int(y.size),
        se_p_fail=_se(delivered.astype(float)),
        se_s=_se(s),
        se_x=_se(x),
        se_y=_se(y),
    )
