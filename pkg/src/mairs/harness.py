"""Experiment engine: oracle validation, scheme sweeps, budget sweeps, result files."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from . import __version__
from .channel import ScenarioChannels
from .optimizer import OptimizerConfig, optimize, solution_feasible
from .scenario import (
    DESK_AREA_CORNERS,
    STOCK_IRS_REFS,
    Scheme,
    ScenarioSpec,
    desk_scenario,
    load_document,
    full_scenario,
    resize_panel,
    sample_area,
    scenario_from_dict,
    scenario_hash,
    uniform_panel,
    validate,
)
from .snr import expected_snr, monte_carlo_expected_snr

logger = logging.getLogger(__name__)

SWEEP_VARS = ("J", "M", "N_e", "L", "L_fixed_total_N", "budget_M")
CSV_HEADER = ("scheme", "sweep_var", "sweep_value", "seed", "worst_snr_db", "iters",
              "wall_ms", "worst_point")
PRESETS = {"desk": desk_scenario, "full": full_scenario}
ALL_SCHEMES = tuple(s.value for s in Scheme)


# -- validation ----------------------------------------------------------------

@dataclass(frozen=True)
class ValidationRow:
    area: int
    point: int
    closed_form: float
    mc_mean: float
    mc_stderr: float

    @property
    def z_score(self) -> float:
        diff = self.mc_mean - self.closed_form
        if diff == 0.0:
            return 0.0
        return diff / self.mc_stderr if self.mc_stderr > 0 else math.inf


@dataclass
class ValidationReport:
    rows: list[ValidationRow]
    n_draws: int
    layout: np.ndarray
    reflections: np.ndarray

    @property
    def max_abs_z(self) -> float:
        return max((abs(r.z_score) for r in self.rows), default=0.0)

    @property
    def max_rel_error(self) -> float:
        errs = [abs(r.mc_mean - r.closed_form) / abs(r.closed_form)
                for r in self.rows if r.closed_form != 0]
        return max(errs, default=0.0)

    def passed(self, z_limit: float = 4.0) -> bool:
        return self.max_abs_z <= z_limit


def random_layout(spec: ScenarioSpec, rng: np.random.Generator, max_tries: int = 10_000) -> np.ndarray:
    """Uniform positions in the region, redrawn until the spacing holds."""
    half = spec.region.half_side
    out: list[np.ndarray] = []
    for _ in range(max_tries):
        if len(out) == spec.m_antennas:
            return np.array(out)
        cand = rng.uniform(-half, half, size=2)
        if all(np.linalg.norm(cand - p) >= spec.rf.min_spacing for p in out):
            out.append(cand)
    raise ValueError("could not draw a feasible random layout")


def random_reflections(n: int, rng: np.random.Generator, unit: bool = False) -> np.ndarray:
    mag = np.ones(n) if unit else np.sqrt(rng.uniform(0, 1, n))
    return mag * np.exp(1j * rng.uniform(0, 2 * np.pi, n))


def run_validation(spec: ScenarioSpec, n_draws: int = 10_000, seed: int = 0, layout=None,
                   reflections=None) -> ValidationReport:
    """Closed-form versus Monte Carlo expected SNR at every candidate point.

    A random feasible configuration is drawn from ``seed`` unless one is given.
    """
    if n_draws < 1:
        raise ValueError("n_draws must be >= 1")
    rng = np.random.default_rng(seed)
    if layout is None:
        layout = random_layout(spec, rng)
    if reflections is None:
        reflections = random_reflections(spec.n_elements, rng)
    layout = np.asarray(layout, dtype=float).reshape(-1, 2)
    v = np.asarray(reflections, dtype=complex)
    channels = ScenarioChannels(spec)
    rows = []
    for j, area in enumerate(spec.areas):
        closed = expected_snr(channels, layout, v, channels.areas[j]).total
        for i, point in enumerate(sample_area(area)):
            mc = monte_carlo_expected_snr(spec, layout, v, point, area, n_draws, rng)
            rows.append(ValidationRow(area.id, i, float(closed[i]), mc.mean, mc.stderr))
    return ValidationReport(rows, n_draws, layout, v)


# -- experiments ---------------------------------------------------------------

@dataclass(frozen=True)
class CostModel:
    """Element cost ``c_e``, MA-to-element cost ratio ``rho`` and total budget."""

    c_e: float = 1.0
    rho: float = 20.0
    total: float = 120.0

    def __post_init__(self):
        if not (self.rho > 0 and self.total > 0 and self.c_e > 0):
            raise ValueError("cost model entries must be positive")

    def elements_for(self, m: int) -> int:
        return int(math.floor(self.total / self.c_e - self.rho * m + 1e-9))

    def candidates(self, n_panels: int = 1) -> list[tuple[int, int]]:
        """Every ``(M, N)`` with at least one element per panel."""
        out = []
        m = 1
        while self.elements_for(m) >= n_panels:
            out.append((m, self.elements_for(m)))
            m += 1
        return out

    @property
    def predicted_m_star(self) -> float:
        return self.total / (3.0 * self.rho * self.c_e)


@dataclass(frozen=True)
class ExperimentSpec:
    base: ScenarioSpec
    sweep_var: str
    values: tuple
    schemes: tuple[str, ...] = ALL_SCHEMES
    seeds: tuple[int, ...] = (0,)
    out: str | None = None
    total_elements: int | None = None
    cost: CostModel | None = None

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(self.values))
        object.__setattr__(self, "schemes", tuple(Scheme(s).value for s in self.schemes))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if self.sweep_var not in SWEEP_VARS:
            raise ValueError(f"unknown sweep variable {self.sweep_var!r}")
        if not self.schemes:
            raise ValueError("at least one scheme required")
        if any(b <= a for a, b in zip(self.values, self.values[1:])):
            raise ValueError("sweep values must be strictly increasing")
        if self.sweep_var == "budget_M" and self.cost is None:
            raise ValueError("budget_M sweeps need a cost model")


def _split(total: int, parts: int) -> list[int]:
    base, extra = divmod(int(total), parts)
    return [base + (1 if i < extra else 0) for i in range(parts)]


def with_elements(spec: ScenarioSpec, total: int) -> ScenarioSpec:
    """Spread ``total`` elements evenly (remainder to the first panels)."""
    counts = _split(total, len(spec.panels))
    if min(counts) < 1:
        raise ValueError("fewer elements than panels")
    panels = tuple(resize_panel(p, n, spec.rf.wavelength) for p, n in zip(spec.panels, counts))
    return spec.with_(panels=panels)


def with_panels(spec: ScenarioSpec, count: int, per_panel: int) -> ScenarioSpec:
    """First ``count`` panels at the stock reference points, ``per_panel`` elements each."""
    if count > len(STOCK_IRS_REFS) and count > len(spec.panels):
        raise ValueError(f"at most {len(STOCK_IRS_REFS)} panels available")
    template = spec.panels[0]
    panels = []
    for ell in range(count):
        if ell < len(spec.panels):
            p = spec.panels[ell]
        else:
            p = uniform_panel(ell, STOCK_IRS_REFS[ell], 1, 1, spec.rf.wavelength / 2,
                              template.plane, pathloss_exp_bs=template.pathloss_exp_bs,
                              rician_bs=template.rician_bs)
        panels.append(resize_panel(p, per_panel, spec.rf.wavelength))
    return spec.with_(panels=tuple(panels))


def with_areas(spec: ScenarioSpec, count: int) -> ScenarioSpec:
    """First ``count`` areas, topped up from the stock corners if needed."""
    areas = list(spec.areas[:count])
    template = spec.areas[0]
    used = {tuple(a.corner) for a in areas}
    for corner in DESK_AREA_CORNERS:
        if len(areas) >= count:
            break
        if corner not in used:
            areas.append(replace(template, id=max(a.id for a in areas) + 1, corner=corner))
    if len(areas) < count:
        raise ValueError(f"cannot provide {count} target areas")
    return spec.with_(areas=tuple(areas))


def apply_sweep(experiment: ExperimentSpec, value) -> ScenarioSpec:
    spec = experiment.base
    var = experiment.sweep_var
    if var == "J":
        return with_areas(spec, int(value))
    if var == "M":
        return spec.with_(m_antennas=int(value))
    if var == "N_e":
        return spec.with_(panels=tuple(resize_panel(p, int(value), spec.rf.wavelength)
                                       for p in spec.panels))
    if var == "L":
        return with_panels(spec, int(value), spec.panels[0].n_elements)
    if var == "L_fixed_total_N":
        total = experiment.total_elements or spec.n_elements
        if total % int(value):
            raise ValueError(f"{total} elements do not split evenly over {value} panels")
        return with_panels(spec, int(value), total // int(value))
    # budget_M
    m = int(value)
    spec = with_elements(spec, experiment.cost.elements_for(m))
    return spec.with_(m_antennas=m)


def cell_seed(master: int, scheme_idx: int, value_idx: int) -> int:
    """Per-cell seed: the first word of ``SeedSequence([master, scheme, value])``."""
    return int(np.random.SeedSequence([master, scheme_idx, value_idx]).generate_state(1)[0])


@dataclass
class ResultRecord:
    """One (scheme, sweep value, seed) cell. Only the CSV columns take part in equality."""

    scheme: str
    sweep_var: str
    sweep_value: float
    seed: int
    worst_snr_db: float
    iters: int
    wall_ms: float
    worst_point: str
    worst_snr: float = field(default=math.nan, compare=False)
    status: str = field(default="ok", compare=False)
    monotone: bool = field(default=True, compare=False)
    feasible: bool = field(default=True, compare=False)


def run_cell(spec: ScenarioSpec, scheme: str, sweep_var: str, value, seed: int,
             config: OptimizerConfig) -> ResultRecord:
    t0 = time.perf_counter()
    try:
        spec = spec.with_(scheme=Scheme(scheme), rng_seed=seed)
        problems = validate(spec)
        if problems:
            raise ValueError("; ".join(problems))
        sol = optimize(spec, scheme, config)
        feasible = solution_feasible(sol, spec)
        return ResultRecord(scheme, sweep_var, float(value), seed,
                            round(sol.worst_case_snr_db, 3), sol.iterations,
                            round((time.perf_counter() - t0) * 1e3, 3),
                            f"{sol.worst_point[0]}:{sol.worst_point[1]}",
                            sol.worst_case_snr, "ok",
                            all(t.is_monotone() for t in sol.traces), feasible)
    except Exception as exc:  # per-cell failures are recorded, the sweep goes on
        logger.warning("cell %s %s=%s seed=%s failed: %s", scheme, sweep_var, value, seed, exc)
        return ResultRecord(scheme, sweep_var, float(value), seed, math.nan, 0,
                            round((time.perf_counter() - t0) * 1e3, 3), "", math.nan,
                            f"error: {exc}", False, False)


def _run_cell_args(args):
    return run_cell(*args)


def sweep_cells(experiment: ExperimentSpec) -> list[tuple]:
    cells = []
    for v_idx, value in enumerate(experiment.values):
        spec = apply_sweep(experiment, value)
        for s_idx, scheme in enumerate(experiment.schemes):
            for seed in experiment.seeds:
                cells.append((spec, scheme, experiment.sweep_var, value,
                              cell_seed(seed, s_idx, v_idx)))
    return cells


def run_sweep(experiment: ExperimentSpec, config: OptimizerConfig | None = None,
              workers: int = 1) -> list[ResultRecord]:
    """Run every cell; output order is (value, scheme, seed) regardless of ``workers``."""
    config = config or OptimizerConfig()
    args = [c + (config,) for c in sweep_cells(experiment)]
    if workers > 1 and len(args) > 1:
        with ProcessPoolExecutor(workers) as pool:
            return list(pool.map(_run_cell_args, args))
    return [_run_cell_args(a) for a in args]


@dataclass
class TrendCheck:
    scheme: str
    direction: str
    values: list[float]
    etas_db: list[float]
    holds: bool


def check_trend(records: Sequence[ResultRecord], direction: str, slack_db: float = 1e-6) -> list[TrendCheck]:
    """Soft monotonicity check per scheme (seed-averaged linear SNR)."""
    out = []
    for scheme in dict.fromkeys(r.scheme for r in records):
        by_value: dict[float, list[float]] = {}
        for r in records:
            if r.scheme == scheme:
                by_value.setdefault(r.sweep_value, []).append(r.worst_snr)
        values = sorted(by_value)
        etas = [10 * math.log10(np.mean(by_value[v])) for v in values]
        diffs = np.diff(etas)
        if direction == "nonincreasing":
            holds = bool(np.all(diffs <= slack_db))
        elif direction == "nondecreasing":
            holds = bool(np.all(diffs >= -slack_db))
        else:
            raise ValueError(f"unknown direction {direction!r}")
        out.append(TrendCheck(scheme, direction, values, etas, holds))
    return out


def ordering_inversions(records: Sequence[ResultRecord], slack_db: float = 1e-6) -> list[tuple]:
    """Cells where an independently run scheme beats one whose feasible set contains it."""
    nested = [(Scheme.ADAPTIVE_MA_IRS, Scheme.ADAPTIVE_MA_STA_IRS),
              (Scheme.ADAPTIVE_MA_STA_IRS, Scheme.SHARED_MA_STA_IRS),
              (Scheme.FPA_ADAPTIVE_IRS, Scheme.FPA_STA_IRS)]
    index = {(r.scheme, r.sweep_var, r.sweep_value, r.seed): r for r in records}
    flags = []
    for (big, small) in nested:
        for (scheme, var, value, _), r in index.items():
            if scheme != small.value:
                continue
            other = [x for (s, w, v, _), x in index.items()
                     if s == big.value and w == var and v == value]
            for o in other:
                if r.worst_snr_db > o.worst_snr_db + slack_db:
                    flags.append((big.value, small.value, value))
    return flags


@dataclass
class CostSweepResult:
    records: list[ResultRecord]
    candidates: list[tuple[int, int]]
    etas: dict[int, float]
    m_star: int
    n_star: int
    predicted_m_star: float

    @property
    def ratio(self) -> float:
        return self.m_star / self.n_star

    @property
    def interior_max(self) -> bool:
        ms = sorted(self.etas)
        return ms[0] < self.m_star < ms[-1]

    @property
    def monotone(self) -> bool:
        vals = [self.etas[m] for m in sorted(self.etas)]
        d = np.diff(vals)
        return bool(np.all(d >= 0) or np.all(d <= 0))


def run_cost_sweep(cost: CostModel, template: ScenarioSpec, config: OptimizerConfig | None = None,
                   seeds: Sequence[int] = (0,), workers: int = 1,
                   scheme: str = Scheme.ADAPTIVE_MA_IRS.value) -> CostSweepResult:
    """Area-adaptive MA-IRS over every affordable ``(M, N)`` split of the budget."""
    cands = cost.candidates(len(template.panels))
    if not cands:
        raise ValueError("no affordable (M, N) pair with one element per panel")
    experiment = ExperimentSpec(template, "budget_M", tuple(m for m, _ in cands), (scheme,),
                                tuple(seeds), cost=cost)
    records = run_sweep(experiment, config, workers)
    etas = {}
    for m, _ in cands:
        vals = [r.worst_snr for r in records if r.sweep_value == m and np.isfinite(r.worst_snr)]
        etas[m] = float(np.mean(vals)) if vals else -math.inf
    m_star = max(etas, key=lambda m: (etas[m], -m))
    return CostSweepResult(records, cands, etas, m_star, cost.elements_for(m_star),
                           cost.predicted_m_star)


# -- documents -----------------------------------------------------------------

def scenario_from_source(source, overrides: Mapping[str, Any] | None = None) -> ScenarioSpec:
    """Preset name, mapping, or path to a YAML/JSON scenario document."""
    overrides = dict(overrides or {})
    if isinstance(source, ScenarioSpec):
        return source
    if isinstance(source, Mapping):
        return scenario_from_dict(source)
    if isinstance(source, str) and source in PRESETS:
        return PRESETS[source](**overrides)
    return scenario_from_dict(load_document(source))


def experiment_from_dict(doc: Mapping[str, Any], base_dir: Path | None = None) -> ExperimentSpec:
    source = doc.get("scenario", "desk")
    if isinstance(source, str) and source not in PRESETS and base_dir is not None:
        source = str(base_dir / source)
    base = scenario_from_source(source, doc.get("scenario_args"))
    sweep = doc.get("sweep", {})
    cost = CostModel(**doc["cost"]) if "cost" in doc else None
    return ExperimentSpec(
        base=base,
        sweep_var=sweep.get("var", "J"),
        values=tuple(sweep.get("values", ())),
        schemes=tuple(doc.get("schemes", ALL_SCHEMES)),
        seeds=tuple(doc.get("seeds", (0,))),
        out=doc.get("out"),
        total_elements=sweep.get("total_elements"),
        cost=cost,
    )


def load_experiment(path) -> ExperimentSpec:
    path = Path(path)
    return experiment_from_dict(load_document(path), path.parent)


# -- result files --------------------------------------------------------------

def _fmt_value(v: float) -> str:
    v = float(v)
    return str(int(v)) if v.is_integer() else repr(v)


def _fmt_db(v: float) -> str:
    return "nan" if not np.isfinite(v) else f"{v:.3f}"


def records_to_csv(records: Sequence[ResultRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in records:
        writer.writerow([r.scheme, r.sweep_var, _fmt_value(r.sweep_value), r.seed,
                         _fmt_db(r.worst_snr_db), r.iters, f"{r.wall_ms:.3f}", r.worst_point])
    return buf.getvalue()


def manifest_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".manifest.json")


def emit_results(records: Sequence[ResultRecord], path, spec: ScenarioSpec | None = None,
                 config: OptimizerConfig | None = None, extra: Mapping[str, Any] | None = None) -> Path:
    """Write the CSV table and a JSON manifest next to it."""
    path = Path(path)
    config = config or OptimizerConfig()
    manifest = {
        "code_version": __version__,
        "scenario_hash": scenario_hash(spec) if spec is not None else None,
        "seeds": sorted({r.seed for r in records}),
        "tolerances": {"tol_obj": config.tol_obj, "tol_feas": config.tol_feas,
                       "eps_ao": config.eps, "max_iter": config.max_iter,
                       "max_outer": config.max_outer},
        "records": [{"scheme": r.scheme, "sweep_value": r.sweep_value, "seed": r.seed,
                     "worst_snr": r.worst_snr, "status": r.status, "monotone": r.monotone,
                     "feasible": r.feasible} for r in records],
    }
    if extra:
        manifest.update(extra)
    try:
        if path.parent and not path.parent.exists():
            path.parent.mkdir(parents=True)
        path.write_text(records_to_csv(records), encoding="utf-8")
        manifest_path(path).write_text(
            json.dumps(manifest, indent=2, sort_keys=True, default=_json_default) + "\n",
            encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write results to {path}: {exc}") from exc
    return path


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not serializable: {type(obj).__name__}")


def parse_results(path) -> list[ResultRecord]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot read results from {path}: {exc}") from exc
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != CSV_HEADER:
        raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
    return [ResultRecord(row["scheme"], row["sweep_var"], float(row["sweep_value"]),
                         int(row["seed"]), float(row["worst_snr_db"]), int(row["iters"]),
                         float(row["wall_ms"]), row["worst_point"]) for row in reader]
