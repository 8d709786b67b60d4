"""Brute-force single-slot outcome distributions.

These enumerations never touch the closed-form transition formulas; they
exist to check them.  Outcomes are keyed by ``(non_tagged_successes,
tagged_success)``.

NOMA semantics: levels are scanned from the strongest down.  An empty level
is skipped, a lone user is decoded (with the level's success probability),
and two or more users collide.  A collision, or a lone signal that cannot be
decoded, ends SIC; nobody at a later level succeeds.
"""

from __future__ import annotations

import itertools
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Sequence

from scipy.special import comb

MAX_REMAINING = 12
MAX_LEVELS = 6
# (K+1)**n above this switches the literal enumeration to the occupancy one
LITERAL_LIMIT = 1 << 18


@dataclass(frozen=True)
class SlotOutcomeDistribution:
    mass: dict
    remaining: int
    num_levels: int
    ptx: float
    level_success: tuple = field(default=())

    def total(self) -> float:
        return math.fsum(self.mass.values())

    def probability(self, non_tagged: int, tagged: bool) -> float:
        return self.mass.get((non_tagged, tagged), 0.0)

    @property
    def tagged_success(self) -> float:
        return math.fsum(v for (_, t), v in self.mass.items() if t)

    def transition_row(self) -> tuple[list[float], float]:
        """``([P(j -> j+i) for i = 0..K], P(absorb))`` for this remaining count."""
        row = [self.probability(i, False) for i in range(self.num_levels + 1)]
        return row, self.tagged_success


def resolve_sic(levels: Sequence[int | None], num_levels: int,
                decodable: Sequence[bool] | None = None) -> tuple[set[int], int | None]:
    """Replay one NOMA slot.

    ``levels[u]`` is user ``u``'s level (0-based) or ``None`` when silent;
    ``decodable[u]`` is whether its signal could be decoded if alone.
    Returns the set of successful users and the 0-based level where SIC
    stopped (``None`` if it ran through every level).
    """
    occupants: list[list[int]] = [[] for _ in range(num_levels)]
    for user, level in enumerate(levels):
        if level is not None:
            occupants[level].append(user)
    winners: set[int] = set()
    for k, users in enumerate(occupants):
        if not users:
            continue
        if len(users) > 1:
            return winners, k
        user = users[0]
        if decodable is not None and not decodable[user]:
            return winners, k
        winners.add(user)
    return winners, None


def _level_weights(ptx: float, num_levels: int, level_success: Sequence[float], infeasible: str):
    """Per-level occupancy weight of one user and the lone-decode probability."""
    K = num_levels
    if infeasible == "abstain":
        occupy = [ptx * s / K for s in level_success]
        decode = [1.0] * K
    elif infeasible in ("terminate", "jam"):
        occupy = [ptx / K] * K
        decode = list(level_success)
    else:
        raise ValueError(f"unknown infeasible mode {infeasible!r}")
    silent = max(0.0, 1.0 - math.fsum(occupy))
    return silent, occupy, decode


def _scan(counts: Sequence[int], decode: Sequence[float]):
    """Yield ``(probability, successful_levels)`` for fixed level occupancies."""
    branches = [(1.0, ())]
    done = []
    for k, c in enumerate(counts):
        if c == 0:
            continue
        nxt = []
        for prob, wins in branches:
            if c > 1:
                done.append((prob, wins))
                continue
            if decode[k] > 0.0:
                nxt.append((prob * decode[k], wins + (k,)))
            if decode[k] < 1.0:
                done.append((prob * (1.0 - decode[k]), wins))
        branches = nxt
        if not branches:
            break
    return done + branches


def _enumerate_literal(n, K, silent, occupy, decode, tagged_index):
    mass = defaultdict(float)
    choices = [None] + list(range(K))
    weight_of = {None: silent, **{k: occupy[k] for k in range(K)}}
    for assignment in itertools.product(choices, repeat=n):
        w = 1.0
        for c in assignment:
            w *= weight_of[c]
        if w == 0.0:
            continue
        counts = [0] * K
        for c in assignment:
            if c is not None:
                counts[c] += 1
        tagged_level = assignment[tagged_index]
        for prob, wins in _scan(counts, decode):
            tagged = tagged_level is not None and tagged_level in wins
            mass[(len(wins) - int(tagged), tagged)] += w * prob
    return mass


def _enumerate_occupancy(n, K, silent, occupy, decode):
    """Enumerate the tagged user's choice and the level counts of the other
    ``n - 1`` users, scanning levels in order and stopping at termination."""
    mass = defaultdict(float)
    others = n - 1

    def descend(k, left, prob, wins, tagged_level, tagged_won):
        # `left` other users sit at levels >= k or are silent
        if k == K or left == 0 and (tagged_level is None or tagged_level < k):
            _record(prob, wins, tagged_won)
            return
        below = silent + math.fsum(occupy[k:])
        share = occupy[k] / below if below > 0 else 0.0
        tagged_here = int(tagged_level == k)
        for c in range(left + 1):
            pc = comb(left, c, exact=True) * share**c * (1.0 - share) ** (left - c)
            if pc == 0.0:
                continue
            total = c + tagged_here
            if total == 0:
                descend(k + 1, left, prob * pc, wins, tagged_level, tagged_won)
            elif total > 1:
                _record(prob * pc, wins, tagged_won)
            else:
                if decode[k] < 1.0:
                    _record(prob * pc * (1.0 - decode[k]), wins, tagged_won)
                if decode[k] > 0.0:
                    descend(k + 1, left - c, prob * pc * decode[k], wins + 1,
                            tagged_level, tagged_won or bool(tagged_here))

    def _record(prob, wins, tagged_won):
        mass[(wins - int(tagged_won), tagged_won)] += prob

    descend(0, others, silent, 0, None, False)
    for t in range(K):
        descend(0, others, occupy[t], 0, t, False)
    return mass


def enumerate_noma_slot(remaining: int, num_levels: int, ptx: float,
                        level_success: Sequence[float] | None = None,
                        infeasible: str = "terminate", method: str = "auto",
                        tagged_index: int = 0) -> SlotOutcomeDistribution:
    """Exact outcome distribution of one NOMA slot with ``remaining`` pending
    users, the tagged one among them.

    ``level_success`` defaults to all ones (collision-only model).  With
    ``infeasible="terminate"`` a lone undecodable signal ends SIC; with
    ``"abstain"`` an infeasible user simply stays silent.
    """
    if not 1 <= remaining <= MAX_REMAINING:
        raise ValueError(f"remaining must be in 1..{MAX_REMAINING}, got {remaining}")
    if not 1 <= num_levels <= MAX_LEVELS:
        raise ValueError(f"num_levels must be in 1..{MAX_LEVELS}, got {num_levels}")
    if not 0.0 <= ptx <= 1.0:
        raise ValueError("ptx must lie in [0, 1]")
    if not 0 <= tagged_index < remaining:
        raise ValueError("tagged_index out of range")
    success = tuple(level_success) if level_success is not None else (1.0,) * num_levels
    if len(success) != num_levels:
        raise ValueError("level_success needs one entry per level")
    silent, occupy, decode = _level_weights(ptx, num_levels, success, infeasible)
    if method == "auto":
        method = "literal" if (num_levels + 1) ** remaining <= LITERAL_LIMIT else "occupancy"
    if method == "literal":
        mass = _enumerate_literal(remaining, num_levels, silent, occupy, decode, tagged_index)
    elif method == "occupancy":
        mass = _enumerate_occupancy(remaining, num_levels, silent, occupy, decode)
    else:
        raise ValueError(f"unknown method {method!r}")
    return SlotOutcomeDistribution(dict(mass), remaining, num_levels, ptx, success)


def enumerate_oma_slot(remaining: int, ptx: float, success_prob: float = 1.0) -> SlotOutcomeDistribution:
    """Single-channel slot: success only for a lone transmitter without outage.

    Enumerates the tagged user's decision and the number of other
    transmitters; all outage-free lone transmissions succeed.
    """
    if remaining < 1:
        raise ValueError("remaining must be >= 1")
    mass = defaultdict(float)
    others = remaining - 1
    for tagged_tx in (False, True):
        w_tagged = ptx if tagged_tx else 1.0 - ptx
        for c in range(others + 1):
            w = w_tagged * comb(others, c, exact=True) * ptx**c * (1.0 - ptx) ** (others - c)
            if w == 0.0:
                continue
            if tagged_tx + c == 1:
                mass[(int(not tagged_tx), tagged_tx)] += w * success_prob
                mass[(0, False)] += w * (1.0 - success_prob)
            else:
                mass[(0, False)] += w
    return SlotOutcomeDistribution(dict(mass), remaining, 1, ptx, (success_prob,))
