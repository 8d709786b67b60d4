"""Figure-style sweeps, CSV/SVG output and the validation suites behind the CLI."""

from __future__ import annotations

import csv
import dataclasses
import json
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .asymptotics import aoi_ratio_asymptotic, optimal_policy, solve_eta
from .config import GAR, NOMA, OMA, SystemConfig, TxPolicy, default_policy
from .errors import NoAbsorptionError
from .markov import evaluate, noma_transitions, oma_transitions
from .oracle import enumerate_noma_slot, enumerate_oma_slot
from .simulation import empirical_aoi, simulate

OUTPUT_DIR_ENV = "NOMA_AOI_OUTPUT_DIR"

CSV_COLUMNS = ("sweep_value", "scheme", "evaluator", "aoi_mean_seconds", "aoi_stderr",
               "p_fail", "ptx_used", "seed", "frames")
FIXTURE_COLUMNS = ("remaining", "num_levels", "ptx", "target", "closed_form", "enumeration", "abs_diff")

SWEEP_VARIABLES = ("num_users", "slots_per_frame", "ptx", "num_levels", "tx_power", "none")
EVALUATORS = ("analytical", "simulated", "both")


class ExperimentError(ValueError):
    """Invalid experiment description or an experiment that produced nothing usable."""


@dataclass(frozen=True)
class ExperimentSpec:
    preset: str
    base: SystemConfig
    sweep_variable: str = "num_users"
    sweep_values: tuple = ()
    evaluator: str = "analytical"
    frames: int = 100_000
    seed: int = 0
    out: str = ""
    policy: str = "adaptive"
    schemes: tuple = (OMA, NOMA)
    generation_models: tuple = (GAR,)
    svg: bool = False

    def __post_init__(self):
        if self.preset not in PRESETS:
            raise ExperimentError(f"unknown preset {self.preset!r}; choose from {sorted(PRESETS)}")
        if self.sweep_variable not in SWEEP_VARIABLES:
            raise ExperimentError(f"unknown sweep variable {self.sweep_variable!r}")
        if self.evaluator not in EVALUATORS:
            raise ExperimentError(f"evaluator must be one of {EVALUATORS}")
        if self.preset != "validate-oracle" and not self.sweep_values:
            raise ExperimentError("sweep range is empty")
        if self.frames < 1:
            raise ExperimentError("frames must be >= 1")
        if self.seed < 0 or self.seed >= 2**64:
            raise ExperimentError("seed must be an unsigned 64-bit integer")
        for v in self.sweep_values:
            _check_sweep_value(self.sweep_variable, v)
        for s in self.schemes:
            if s not in (OMA, NOMA):
                raise ExperimentError(f"unknown scheme {s!r}")
        if self.sweep_variable == "ptx" and not self.policy.startswith("fixed"):
            raise ExperimentError("a ptx sweep needs the fixed policy")


def _check_sweep_value(variable: str, value: Any) -> None:
    if variable in ("num_users", "slots_per_frame", "num_levels"):
        if int(value) != value or value < 1:
            raise ExperimentError(f"{variable} values must be positive integers, got {value!r}")
    elif variable == "ptx":
        if not 0.0 < value <= 1.0:
            raise ExperimentError(f"ptx values must lie in (0, 1], got {value!r}")
    elif variable == "tx_power":
        if not value > 0:
            raise ExperimentError(f"tx_power values must be positive, got {value!r}")


def _base(**kw) -> SystemConfig:
    defaults = dict(num_users=8, slots_per_frame=8, slot_duration=6.0, num_levels=2,
                    tx_power=100.0, target_rate=0.5, scheme=NOMA)
    defaults.update(kw)
    return SystemConfig(**defaults)


def _arange(start, stop, step) -> tuple:
    return tuple(range(start, stop + 1, step))


PRESETS: dict[str, dict[str, Any]] = {
    # users vs AoI, T=6, 20 dB, R=0.5, N=8
    "sweep-users": dict(base=_base(), sweep_variable="num_users", sweep_values=_arange(4, 32, 4)),
    # slots per frame vs AoI, K=4, M=8
    "sweep-slots": dict(base=_base(num_levels=4), sweep_variable="slots_per_frame",
                        sweep_values=_arange(1, 30, 1)),
    # K=2, N=1 at the optimal probabilities
    "special-case": dict(base=_base(slots_per_frame=1), sweep_variable="num_users",
                         sweep_values=_arange(4, 40, 4), policy="optimal"),
    # AoI vs a fixed attempt probability, M=8, K=2, N=1
    "sweep-ptx": dict(base=_base(slots_per_frame=1), sweep_variable="ptx",
                      sweep_values=tuple(round(0.005 * i, 3) for i in range(1, 201)), policy="fixed"),
    # NOMA/OMA ratio vs users at the optimal probabilities
    "ratio-vs-users": dict(base=_base(slots_per_frame=1, tx_power=math.inf), sweep_variable="num_users",
                           sweep_values=_arange(10, 200, 10), policy="optimal"),
    # GAR vs GAW, N=8, adaptive probabilities
    "generation-models": dict(base=_base(), sweep_variable="num_users",
                              sweep_values=_arange(4, 32, 4), generation_models=(GAR, "GAW")),
    "validate-oracle": dict(base=_base(slots_per_frame=1), sweep_variable="none", sweep_values=()),
    "custom": dict(base=_base()),
}


def build_spec(preset: str, overrides: Mapping[str, Any] | None = None) -> ExperimentSpec:
    """Preset defaults, then a JSON-style mapping of overrides."""
    if preset not in PRESETS:
        raise ExperimentError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
    fields: dict[str, Any] = dict(PRESETS[preset])
    overrides = dict(overrides or {})
    overrides.pop("preset", None)
    if "base" in overrides:
        merged = fields["base"].to_dict()
        merged.update(overrides.pop("base"))
        if "tx_power_db" in merged:
            merged.pop("tx_power", None)
        try:
            fields["base"] = SystemConfig.from_dict(merged)
        except (TypeError, ValueError) as exc:
            raise ExperimentError(f"invalid base config: {exc}") from exc
    if "sweep" in overrides:
        sweep = overrides.pop("sweep")
        if "variable" in sweep:
            fields["sweep_variable"] = sweep["variable"]
        if "values" in sweep:
            fields["sweep_values"] = tuple(sweep["values"])
        elif {"start", "stop", "step"} <= set(sweep):
            start, stop, step = sweep["start"], sweep["stop"], sweep["step"]
            count = int(math.floor((stop - start) / step + 1e-9)) + 1
            fields["sweep_values"] = tuple(round(start + i * step, 12) for i in range(max(count, 0)))
    for key in ("schemes", "generation_models", "sweep_values"):
        if key in overrides:
            overrides[key] = tuple(overrides[key])
    known = {f.name for f in dataclasses.fields(ExperimentSpec)}
    unknown = set(overrides) - known
    if unknown:
        raise ExperimentError(f"unknown experiment keys: {sorted(unknown)}")
    fields.update(overrides)
    fields.setdefault("sweep_values", ())
    if not fields.get("out"):
        fields["out"] = str(Path(os.environ.get(OUTPUT_DIR_ENV, ".")) / preset)
    try:
        return ExperimentSpec(preset=preset, **fields)
    except (TypeError, ValueError) as exc:
        raise ExperimentError(str(exc)) from exc


def load_spec(path: str | os.PathLike, preset: str | None = None,
              overrides: Mapping[str, Any] | None = None) -> ExperimentSpec:
    """Read a JSON experiment file; ``preset`` and ``overrides`` win over its contents."""
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ExperimentError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ExperimentError("config file must hold a JSON object")
    preset = preset or data.get("preset", "custom")
    data.update(overrides or {})
    return build_spec(preset, data)


@dataclass
class PointResult:
    sweep_value: Any
    scheme: str
    evaluator: str
    aoi: float
    stderr: float | None
    p_fail: float
    ptx: float
    seed: int | None
    frames: int | None


def point_config(spec: ExperimentSpec, scheme: str, generation_model: str, value: Any) -> SystemConfig:
    cfg = spec.base.replace(scheme=scheme, generation_model=generation_model,
                            num_levels=1 if scheme == OMA else spec.base.num_levels)
    var = spec.sweep_variable
    if var in ("num_users", "slots_per_frame"):
        cfg = cfg.replace(**{var: int(value)})
    elif var == "num_levels" and scheme == NOMA:
        cfg = cfg.replace(num_levels=int(value))
    elif var == "tx_power":
        cfg = cfg.replace(tx_power=float(value))
    if var == "ptx":
        policy = TxPolicy.fixed(float(value))
    elif spec.policy == "adaptive":
        policy = default_policy(scheme)
    elif spec.policy == "optimal":
        policy = optimal_policy(cfg)
    else:
        policy = TxPolicy.parse(spec.policy)
    return cfg.replace(tx_policy=policy)


def evaluate_point(cfg: SystemConfig, evaluator: str, frames: int, seed: int) -> tuple[float, float | None, float]:
    """``(aoi, stderr, p_fail)`` for one config; divergence gives ``inf``."""
    if evaluator == "analytical":
        try:
            res = evaluate(cfg)
        except NoAbsorptionError:
            return math.inf, None, 1.0
        return res.aoi, None, res.moments.p_fail
    stats = simulate(cfg, frames, seed)
    mean, se = empirical_aoi(stats)
    return mean, se, float(1.0 - (stats.delivery_slot > 0).mean())


def _fmt(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        if math.isinf(value):
            return "inf"
        return format(value, ".12g")
    return str(value)


def write_csv(path: Path, rows: Iterable[PointResult]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in rows:
            w.writerow([_fmt(r.sweep_value), r.scheme, r.evaluator, _fmt(r.aoi), _fmt(r.stderr),
                        _fmt(r.p_fail), _fmt(r.ptx), _fmt(r.seed), _fmt(r.frames)])


def read_csv(path: str | os.PathLike) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _evaluators(spec: ExperimentSpec) -> tuple[str, ...]:
    return ("analytical", "simulated") if spec.evaluator == "both" else (spec.evaluator,)


def run_experiment(spec: ExperimentSpec) -> list[Path]:
    """Run every (scheme, evaluator, generation model) sweep and write its CSV."""
    if spec.preset == "validate-oracle":
        return [write_oracle_fixture(Path(f"{spec.out}_oracle_fixture.csv"))]
    out = Path(spec.out)
    try:
        out.parent.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ExperimentError(f"cannot create output directory {out.parent}: {exc}") from exc

    written: list[Path] = []
    curves: dict[tuple, list[PointResult]] = {}
    finite = False
    tag_gen = len(spec.generation_models) > 1
    for evaluator in _evaluators(spec):
        for gen in spec.generation_models:
            for scheme in spec.schemes:
                rows = []
                for value in spec.sweep_values:
                    cfg = point_config(spec, scheme, gen, value)
                    aoi, se, p_fail = evaluate_point(cfg, evaluator, spec.frames, spec.seed)
                    finite |= math.isfinite(aoi)
                    simulated = evaluator == "simulated"
                    rows.append(PointResult(value, scheme, evaluator, aoi, se, p_fail,
                                            cfg.tx_probability(0),
                                            spec.seed if simulated else None,
                                            spec.frames if simulated else None))
                curves[(scheme, evaluator, gen)] = rows
                suffix = f"_{gen.lower()}" if tag_gen else ""
                path = Path(f"{spec.out}_{scheme.lower()}_{evaluator}{suffix}.csv")
                try:
                    write_csv(path, rows)
                except OSError as exc:
                    raise ExperimentError(f"cannot write {path}: {exc}") from exc
                written.append(path)
    if not finite:
        raise ExperimentError("the AoI diverges at every sweep point")

    if spec.preset == "ratio-vs-users" and {OMA, NOMA} <= set(spec.schemes):
        for evaluator in _evaluators(spec):
            path = Path(f"{spec.out}_ratio_{evaluator}.csv")
            noma = curves[(NOMA, evaluator, spec.generation_models[0])]
            oma = curves[(OMA, evaluator, spec.generation_models[0])]
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(("sweep_value", "evaluator", "aoi_noma", "aoi_oma", "ratio"))
                for a, b in zip(noma, oma):
                    ratio = a.aoi / b.aoi if math.isfinite(a.aoi) and math.isfinite(b.aoi) else math.nan
                    w.writerow([_fmt(a.sweep_value), evaluator, _fmt(a.aoi), _fmt(b.aoi), _fmt(ratio)])
            written.append(path)

    if spec.svg:
        series = {}
        for (scheme, evaluator, gen), rows in curves.items():
            label = f"{scheme} {evaluator}" + (f" {gen}" if tag_gen else "")
            series[label] = ([float(r.sweep_value) for r in rows], [r.aoi for r in rows])
        path = Path(f"{spec.out}.svg")
        write_svg(path, series, title=spec.preset, xlabel=spec.sweep_variable, ylabel="average AoI (s)")
        written.append(path)
    return written


_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f")


def write_svg(path: Path, series: Mapping[str, tuple[Sequence[float], Sequence[float]]],
              title: str = "", xlabel: str = "", ylabel: str = "",
              width: int = 640, height: int = 420) -> None:
    """Static line chart; simulated series are drawn as markers."""
    pts = [(x, y) for xs, ys in series.values() for x, y in zip(xs, ys) if math.isfinite(y)]
    if not pts:
        raise ExperimentError("nothing finite to plot")
    x0, x1 = min(p[0] for p in pts), max(p[0] for p in pts)
    y0, y1 = min(p[1] for p in pts), max(p[1] for p in pts)
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0
    left, right, top, bottom = 70, 20, 40, 50
    pw, ph = width - left - right, height - top - bottom

    def sx(x):
        return left + (x - x0) / (x1 - x0) * pw

    def sy(y):
        return top + ph - (y - y0) / (y1 - y0) * ph

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="12">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" font-size="14">{title}</text>',
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
        f'<text x="{left + pw / 2:.1f}" y="{height - 10}" text-anchor="middle">{xlabel}</text>',
        f'<text x="15" y="{top + ph / 2:.1f}" text-anchor="middle" transform="rotate(-90 15 {top + ph / 2:.1f})">{ylabel}</text>',
    ]
    for t in np.linspace(0, 1, 6):
        xv, yv = x0 + t * (x1 - x0), y0 + t * (y1 - y0)
        parts.append(f'<text x="{sx(xv):.1f}" y="{top + ph + 16}" text-anchor="middle">{xv:.4g}</text>')
        parts.append(f'<text x="{left - 6}" y="{sy(yv) + 4:.1f}" text-anchor="end">{yv:.4g}</text>')
    for idx, (label, (xs, ys)) in enumerate(series.items()):
        color = _COLORS[idx % len(_COLORS)]
        good = [(sx(x), sy(y)) for x, y in zip(xs, ys) if math.isfinite(y)]
        if "simulated" in label:
            parts += [f'<circle cx="{x:.1f}" cy="{y:.1f}" r="3" fill="none" stroke="{color}"/>' for x, y in good]
        else:
            d = " ".join(f"{x:.1f},{y:.1f}" for x, y in good)
            parts.append(f'<polyline points="{d}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        ly = top + 14 + 16 * idx
        parts.append(f'<rect x="{left + 10}" y="{ly - 9}" width="10" height="10" fill="{color}"/>')
        parts.append(f'<text x="{left + 26}" y="{ly}">{label}</text>')
    parts.append("</svg>")
    path.write_text("\n".join(parts) + "\n")


# ---------------------------------------------------------------- validation

@dataclass(frozen=True)
class Check:
    name: str
    measured: float
    bound: float
    passed: bool

    def line(self) -> str:
        return f"{self.name}\t{self.measured:.6g}\t{self.bound:.6g}\t{'PASS' if self.passed else 'FAIL'}"


ORACLE_GRID = dict(remaining=range(1, 7), num_levels=(2, 3, 4), ptx=(0.3, 0.7, 1.0))
OMA_GRID = dict(num_users=range(2, 9), ptx=(0.1, 0.5, 1.0), tx_power=(1.0, 100.0, math.inf))


def oracle_comparison() -> list[tuple]:
    """Closed-form NOMA transition entries against exhaustive enumeration, one tuple per entry."""
    rows = []
    for n in ORACLE_GRID["remaining"]:
        for K in ORACLE_GRID["num_levels"]:
            for p in ORACLE_GRID["ptx"]:
                cfg = SystemConfig(num_users=n, num_levels=K, scheme=NOMA, tx_policy=TxPolicy.fixed(p))
                model = noma_transitions(cfg)
                dist = enumerate_noma_slot(n, K, p)
                row, absorb = dist.transition_row()
                for i in range(min(K, n - 1) + 1):
                    closed = model.entry(0, i)
                    rows.append((n, K, p, str(i), closed, row[i], abs(closed - row[i])))
                rows.append((n, K, p, "absorb", float(model.absorb[0]), absorb,
                             abs(float(model.absorb[0]) - absorb)))
    return rows


def oma_comparison() -> float:
    worst = 0.0
    for M in OMA_GRID["num_users"]:
        for p in OMA_GRID["ptx"]:
            for P in OMA_GRID["tx_power"]:
                cfg = SystemConfig(num_users=M, tx_power=P, tx_policy=TxPolicy.fixed(p))
                model = oma_transitions(cfg)
                success = cfg.level_feasibility()[0]
                for j in range(M):
                    dist = enumerate_oma_slot(M - j, p, success)
                    row, absorb = dist.transition_row()
                    worst = max(worst, abs(model.entry(j, j) - row[0]), abs(model.absorb[j] - absorb))
                    if j + 1 < M:
                        worst = max(worst, abs(model.entry(j, j + 1) - row[1]))
    return worst


def write_oracle_fixture(path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FIXTURE_COLUMNS)
        for row in oracle_comparison():
            w.writerow([_fmt(v) if isinstance(v, float) else v for v in row])
    return path


def max_row_deviation(max_users: int = 200) -> tuple[float, float]:
    """Largest ``|P 1 + p - 1|`` over NOMA and OMA chains up to ``max_users``."""
    noma_worst = oma_worst = 0.0
    users = sorted({2, 3, 8, 50, max_users})
    for M in users:
        for p in (0.05, 0.3, 1.0):
            policy = TxPolicy.fixed(p)
            oma = oma_transitions(SystemConfig(num_users=M, tx_policy=policy))
            oma_worst = max(oma_worst, float(np.abs(oma.row_sums() - 1).max()))
            for K in (2, 3, 4):
                noma = noma_transitions(SystemConfig(num_users=M, num_levels=K, scheme=NOMA, tx_policy=policy))
                noma_worst = max(noma_worst, float(np.abs(noma.row_sums() - 1).max()))
        adaptive = oma_transitions(SystemConfig(num_users=M, tx_power=100.0))
        oma_worst = max(oma_worst, float(np.abs(adaptive.row_sums() - 1).max()))
    return noma_worst, oma_worst


SIM_GRID = dict(cells=((4, 2), (8, 2), (8, 4)), slots=(1, 8), ptx=(0.1, 0.2))


def sim_vs_analytical(frames: int = 1_000_000, seed: int = 2024, proxy_power: float = 1e4) -> list[Check]:
    checks = []
    for M, K in SIM_GRID["cells"]:
        for N in SIM_GRID["slots"]:
            for p in SIM_GRID["ptx"]:
                cfg = SystemConfig(num_users=M, num_levels=K, slots_per_frame=N, scheme=NOMA,
                                   tx_power=proxy_power, tx_policy=TxPolicy.fixed(p))
                exact = evaluate(cfg).aoi
                mean, se = empirical_aoi(simulate(cfg, frames, seed))
                z = abs(mean - exact) / se
                checks.append(Check(f"sim-vs-analytical M={M} K={K} N={N} ptx={p}", z, 3.0, z <= 3.0))
    return checks


VALIDATION_SUITES = ("constants", "oracle", "row-sums", "sim-vs-analytical", "all")


def validate(suite: str, frames: int = 1_000_000, seed: int = 2024) -> list[Check]:
    if suite not in VALIDATION_SUITES:
        raise ExperimentError(f"unknown suite {suite!r}; choose from {VALIDATION_SUITES}")
    if suite == "all":
        return [c for s in VALIDATION_SUITES[:-1] for c in validate(s, frames, seed)]
    if suite == "constants":
        sol = solve_eta()
        ratio = aoi_ratio_asymptotic()
        return [
            Check("eta", sol.eta, 5e-4, abs(sol.eta - 1.6646) <= 5e-4),
            Check("eta residual", abs(sol.residual), 1e-10, abs(sol.residual) <= 1e-10),
            Check("asymptotic ratio", ratio, 1e-3, abs(ratio - 0.5653) <= 1e-3),
        ]
    if suite == "oracle":
        worst = max(r[-1] for r in oracle_comparison())
        oma = oma_comparison()
        return [
            Check("noma closed form vs enumeration", worst, 1e-9, worst <= 1e-9),
            Check("oma formulas vs enumeration", oma, 1e-12, oma <= 1e-12),
        ]
    if suite == "row-sums":
        noma, oma = max_row_deviation()
        return [
            Check("noma row sums", noma, 1e-9, noma <= 1e-9),
            Check("oma row sums", oma, 1e-12, oma <= 1e-12),
        ]
    return sim_vs_analytical(frames, seed)
