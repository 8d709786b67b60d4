"""Scenario parameters, the receive-SNR ladder and transmission policies.

Everything here is an immutable value; the analysis, oracle and simulator
modules all consume a :class:`SystemConfig`.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Any, Mapping

INFINITE_POWER = math.inf

OMA = "OMA"
NOMA = "NOMA"
GAR = "GAR"
GAW = "GAW"

SCHEMES = (OMA, NOMA)
GENERATION_MODELS = (GAR, GAW)
INFEASIBLE_MODES = ("abstain", "jam")


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


@dataclass(frozen=True)
class SnrLadder:
    """Receive-SNR levels ``P_1 > ... > P_K`` chosen so that every SIC stage
    decodes at exactly the target rate when all lower levels are interference."""

    levels: tuple[float, ...]
    epsilon: float

    @property
    def num_levels(self) -> int:
        return len(self.levels)

    def __getitem__(self, k: int) -> float:
        return self.levels[k]


def build_snr_ladder(rate: float, num_levels: int) -> SnrLadder:
    """Build the SIC-compatible ladder bottom-up.

    The lowest level is ``2**rate - 1``; each higher level is that value times
    one plus the sum of every level below it.
    """
    if not math.isfinite(rate) or rate <= 0:
        raise ValueError(f"rate must be finite and positive, got {rate!r}")
    if int(num_levels) != num_levels or num_levels < 1:
        raise ValueError(f"num_levels must be a positive integer, got {num_levels!r}")
    eps = 2.0**rate - 1.0
    levels = []
    below = 0.0
    for _ in range(int(num_levels)):
        level = eps * (1.0 + below)
        levels.append(level)
        below += level
    return SnrLadder(levels=tuple(reversed(levels)), epsilon=eps)


@dataclass(frozen=True)
class TxPolicy:
    """Transmission-attempt probability rule.

    ``kind`` is one of ``"fixed"``, ``"adaptive-oma"`` (``1/(M-j)``) or
    ``"adaptive-noma"`` (``min(1, K/M)``).
    """

    kind: str
    value: float | None = None

    def __post_init__(self):
        if self.kind == "fixed":
            if self.value is None or not 0.0 <= self.value <= 1.0:
                raise ValueError(f"fixed probability must lie in [0, 1], got {self.value!r}")
        elif self.kind in ("adaptive-oma", "adaptive-noma"):
            if self.value is not None:
                raise ValueError(f"{self.kind} policy carries no value")
        else:
            raise ValueError(f"unknown policy kind {self.kind!r}")

    @classmethod
    def fixed(cls, value: float) -> "TxPolicy":
        return cls("fixed", float(value))

    @classmethod
    def adaptive_oma(cls) -> "TxPolicy":
        return cls("adaptive-oma")

    @classmethod
    def adaptive_noma(cls) -> "TxPolicy":
        return cls("adaptive-noma")

    @classmethod
    def parse(cls, text: str | float) -> "TxPolicy":
        """Accept ``0.05``, ``"fixed:0.05"``, ``"adaptive-oma"`` or ``"adaptive-noma"``."""
        if isinstance(text, (int, float)):
            return cls.fixed(text)
        text = text.strip().lower()
        if text.startswith("fixed:"):
            return cls.fixed(float(text.split(":", 1)[1]))
        if text in ("adaptive-oma", "adaptive-noma"):
            return cls(text)
        return cls.fixed(float(text))

    def __str__(self) -> str:
        return f"fixed:{self.value:g}" if self.kind == "fixed" else self.kind


def tx_probability(policy: TxPolicy, j: int, num_users: int, num_levels: int) -> float:
    """Attempt probability of every still-pending user when ``j`` others have delivered."""
    if j < 0 or j >= num_users:
        raise ValueError(f"need 0 <= j < M, got j={j}, M={num_users}")
    if policy.kind == "fixed":
        return policy.value
    if policy.kind == "adaptive-oma":
        return 1.0 / (num_users - j)
    return min(1.0, num_levels / num_users)


def feasibility_probability(level: float, power: float) -> float:
    """Probability that a unit-mean Rayleigh-power channel can reach ``level``
    at receive side with transmit budget ``power``."""
    if level <= 0:
        raise ValueError("receive level must be positive")
    if power <= 0:
        raise ValueError("power budget must be positive")
    if math.isinf(power):
        return 1.0
    return math.exp(-level / power)


@dataclass(frozen=True)
class SystemConfig:
    """All parameters of one grant-free access scenario.

    ``tx_power`` is the linear transmit SNR (noise normalised to one);
    ``math.inf`` selects the collision-only high-SNR model.
    ``infeasible`` only matters to the simulator: whether a NOMA user whose
    chosen level is out of reach stays silent (``"abstain"``) or transmits
    anyway and blocks SIC at that level (``"jam"``).
    """

    num_users: int
    slots_per_frame: int = 1
    slot_duration: float = 6.0
    num_levels: int = 1
    tx_power: float = INFINITE_POWER
    target_rate: float = 0.5
    scheme: str = OMA
    generation_model: str = GAR
    tx_policy: TxPolicy = TxPolicy.adaptive_oma()
    infeasible: str = "abstain"

    def __post_init__(self):
        for name in ("num_users", "slots_per_frame", "num_levels"):
            value = getattr(self, name)
            if isinstance(value, bool) or int(value) != value or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value!r}")
            object.__setattr__(self, name, int(value))
        if not (self.slot_duration > 0 and math.isfinite(self.slot_duration)):
            raise ValueError("slot_duration must be finite and positive")
        if not self.tx_power > 0 or math.isnan(self.tx_power):
            raise ValueError("tx_power must be positive (or math.inf)")
        if not (self.target_rate > 0 and math.isfinite(self.target_rate)):
            raise ValueError("target_rate must be finite and positive")
        scheme = str(self.scheme).upper()
        if scheme not in SCHEMES:
            raise ValueError(f"scheme must be OMA or NOMA, got {self.scheme!r}")
        object.__setattr__(self, "scheme", scheme)
        gen = str(self.generation_model).upper()
        if gen not in GENERATION_MODELS:
            raise ValueError(f"generation_model must be GAR or GAW, got {self.generation_model!r}")
        object.__setattr__(self, "generation_model", gen)
        if scheme == OMA and self.num_levels != 1:
            raise ValueError("OMA uses a single level (num_levels=1)")
        if not isinstance(self.tx_policy, TxPolicy):
            object.__setattr__(self, "tx_policy", TxPolicy.parse(self.tx_policy))
        if self.infeasible not in INFEASIBLE_MODES:
            raise ValueError(f"infeasible must be one of {INFEASIBLE_MODES}")

    @property
    def high_snr(self) -> bool:
        return math.isinf(self.tx_power)

    @property
    def frame_duration(self) -> float:
        return self.slots_per_frame * self.slot_duration

    @property
    def level_probability(self) -> float:
        return 1.0 / self.num_levels

    @property
    def epsilon(self) -> float:
        return 2.0**self.target_rate - 1.0

    def ladder(self) -> SnrLadder:
        return build_snr_ladder(self.target_rate, self.num_levels)

    def level_feasibility(self) -> tuple[float, ...]:
        """Per-level probability that a user can reach the level (NOMA), or the
        no-outage probability ``exp(-eps/P)`` for OMA."""
        if self.scheme == OMA:
            return (feasibility_probability(self.epsilon, self.tx_power),)
        return tuple(feasibility_probability(level, self.tx_power) for level in self.ladder().levels)

    def tx_probability(self, j: int) -> float:
        return tx_probability(self.tx_policy, j, self.num_users, self.num_levels)

    def replace(self, **changes: Any) -> "SystemConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        out = dataclasses.asdict(self)
        out["tx_policy"] = str(self.tx_policy)
        out["tx_power"] = "inf" if self.high_snr else self.tx_power
        return out

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "SystemConfig":
        data = dict(data)
        if "tx_power_db" in data:
            if "tx_power" in data:
                raise ValueError("give tx_power or tx_power_db, not both")
            data["tx_power"] = db_to_linear(float(data.pop("tx_power_db")))
        power = data.get("tx_power")
        if isinstance(power, str):
            data["tx_power"] = float(power)  # "inf" parses to math.inf
        if "tx_policy" in data:
            data["tx_policy"] = TxPolicy.parse(data["tx_policy"])
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)


def default_policy(scheme: str) -> TxPolicy:
    return TxPolicy.adaptive_oma() if scheme.upper() == OMA else TxPolicy.adaptive_noma()
