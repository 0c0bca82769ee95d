"""Alternating optimization of MA positions and IRS reflections.

Every scheme reduces to one driver, :func:`run_ao`, that maximizes the
worst expected SNR over a set of areas. The areas of a run share one
reflection vector; the ``layout_groups`` argument says which areas share
an antenna layout. Per outer iteration the reflection block is updated
first, then the layout block. A block update is kept only if the exact
worst-case SNR does not drop, so traces are monotone by construction.
"""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .channel import PointChannels, ScenarioChannels
from .sca import build_position_constraints, reflection_constraints, reflection_lb, spacing_constraints
from .scenario import Scheme, ScenarioSpec
from .snr import FLOOR_AMPLITUDE, FLOOR_UNIT, QuadraticForm, cosine_expansion, expected_snr, q_form, snr_db
from .solver import (
    DEFAULT_MAX_ITER,
    DEFAULT_TOL_FEAS,
    DEFAULT_TOL_OBJ,
    MaxMinProgram,
    solve_maxmin,
    solve_reflection_program,
)

logger = logging.getLogger(__name__)

REFLECTION = "reflection"
POSITION = "position"
INIT = "init"

# interior shrink applied to unit-modulus warm starts of the reflection program
_DISK_SHRINK = 1.0 - 1e-4


@dataclass(frozen=True)
class OptimizerConfig:
    eps: float = 1e-3
    max_outer: int = 100
    tol_obj: float = DEFAULT_TOL_OBJ
    tol_feas: float = DEFAULT_TOL_FEAS
    max_iter: int = DEFAULT_MAX_ITER
    block_order: tuple[str, ...] = (REFLECTION, POSITION)
    workers: int = 1


@dataclass(frozen=True)
class AoStep:
    eta: float
    block: str
    status: str
    wall_s: float
    accepted: bool = True
    # (layouts of the run's areas, reflections) after the step
    state: tuple | None = field(default=None, compare=False, repr=False)


@dataclass
class AoTrace:
    steps: list[AoStep] = field(default_factory=list)
    outer_iterations: int = 0

    @property
    def etas(self) -> np.ndarray:
        return np.array([s.eta for s in self.steps])

    def is_monotone(self, slack: float = DEFAULT_TOL_FEAS) -> bool:
        e = self.etas
        return bool(np.all(np.diff(e) >= -slack * np.maximum(1.0, np.abs(e[:-1])))) if len(e) > 1 else True


@dataclass
class SchemeSolution:
    """Optimized configuration; ``layouts[j]`` and ``reflections[j]`` serve area ``j``."""

    scheme: Scheme
    layouts: np.ndarray
    reflections: np.ndarray
    worst_case_snr: float
    worst_point: tuple[int, int]
    area_snr: np.ndarray
    traces: list[AoTrace]

    @property
    def worst_case_snr_db(self) -> float:
        return float(snr_db(self.worst_case_snr))

    @property
    def iterations(self) -> int:
        return sum(t.outer_iterations for t in self.traces)

    @property
    def trace(self) -> AoTrace:
        """Worst-case objective trace; independent runs are aligned step by step.

        A finished run holds its final value, so the min over runs is the
        objective of the combined configuration after each step.
        """
        if len(self.traces) == 1:
            return self.traces[0]
        out = AoTrace(outer_iterations=max(t.outer_iterations for t in self.traces))
        length = max(len(t.steps) for t in self.traces)
        for i in range(length):
            cur = [t.steps[min(i, len(t.steps) - 1)] for t in self.traces]
            live = [t.steps[i] for t in self.traces if i < len(t.steps)]
            out.steps.append(AoStep(min(s.eta for s in cur), live[0].block,
                                    ",".join(sorted({s.status for s in live})),
                                    sum(s.wall_s for s in live),
                                    any(s.accepted for s in live)))
        return out


# -- initialization ------------------------------------------------------------

def grid_layout(m: int, side: float, spacing: float) -> np.ndarray:
    """Centered row-major grid of ``m`` antennas, pitch ``max(spacing, side/ceil(sqrt(m)))``."""
    per_row = math.ceil(math.sqrt(m))
    pitch = max(spacing, side / per_row)
    if (per_row - 1) * pitch > side + 1e-12:
        # pitch pinned at the spacing; use as many columns as fit
        pitch = spacing
        per_row = max(1, int(math.floor(side / spacing + 1e-9)) + 1)
    n_rows = math.ceil(m / per_row)
    idx = np.arange(m)
    cols = np.minimum(per_row, m)
    y = (idx % per_row - (cols - 1) / 2.0) * pitch
    z = (idx // per_row - (n_rows - 1) / 2.0) * pitch
    out = np.column_stack([y, z])
    half = side / 2.0
    return np.clip(out, -half, half)


def fpa_layout(m: int, wavelength: float) -> np.ndarray:
    """Half-wavelength uniform linear array along ``y`` centered at the origin."""
    y = (np.arange(m) - (m - 1) / 2.0) * wavelength / 2.0
    return np.column_stack([y, np.zeros(m)])


def aligned_reflection(channels: ScenarioChannels, point, area) -> np.ndarray:
    """Unit-modulus phases of the dominant eigenvector of the coherent form at ``point``."""
    layout = np.zeros((channels.spec.m_antennas, 2))
    pc = channels.at_points(np.atleast_2d(point), area)
    q = q_form(channels, layout, pc, floor=FLOOR_UNIT).q_matrix[0]
    _, vecs = np.linalg.eigh(q)
    u = vecs[:, -1]
    ref = u[np.argmax(np.abs(u))]
    phase = np.angle(u * np.exp(-1j * np.angle(ref)))
    return np.exp(1j * phase)


def initialize(spec: ScenarioSpec, rng: np.random.Generator | None = None,
               channels: ScenarioChannels | None = None, scheme: Scheme | None = None):
    """Deterministic starting point ``(layouts (J, M, 2), reflections (J, N))``.

    ``rng`` is accepted for interface symmetry; the start does not use it.
    """
    channels = channels or ScenarioChannels(spec)
    scheme = Scheme(scheme or spec.scheme)
    j = len(spec.areas)
    if scheme.movable:
        base = grid_layout(spec.m_antennas, spec.region.side, spec.rf.min_spacing)
    else:
        base = fpa_layout(spec.m_antennas, spec.rf.wavelength)
    layouts = np.repeat(base[None], j, axis=0)
    if scheme.adaptive_irs:
        refl = np.stack([aligned_reflection(channels, a.center, a) for a in spec.areas])
    else:
        centroid = np.mean([a.center for a in spec.areas], axis=0)
        v = aligned_reflection(channels, centroid, spec.areas[0])
        refl = np.repeat(v[None], j, axis=0)
    return layouts, refl


# -- evaluation ----------------------------------------------------------------

def area_snr(channels: ScenarioChannels, layout, v, area_idx: int) -> np.ndarray:
    return expected_snr(channels, layout, v, channels.areas[area_idx], FLOOR_AMPLITUDE).total


def layout_feasible(layout, spec: ScenarioSpec, tol: float = 1e-8) -> bool:
    layout = np.asarray(layout, dtype=float).reshape(-1, 2)
    if not spec.region.contains(layout, tol):
        return False
    if len(layout) < 2:
        return True
    diff = layout[:, None, :] - layout[None, :, :]
    dist = np.sqrt(np.sum(diff ** 2, axis=-1))
    iu = np.triu_indices(len(layout), 1)
    return bool(np.all(dist[iu] >= spec.rf.min_spacing - tol))


def reflections_feasible(v, tol: float = 1e-9) -> bool:
    return bool(np.all(np.abs(np.asarray(v)) <= 1.0 + tol))


def solution_feasible(solution: "SchemeSolution", spec: ScenarioSpec) -> bool:
    """Final configuration and every accepted AO iterate satisfy the constraints."""
    ok = all(layout_feasible(l, spec) for l in solution.layouts)
    ok = ok and reflections_feasible(solution.reflections)
    for tr in solution.traces:
        for step in tr.steps:
            if step.accepted and step.state is not None:
                lays, v = step.state
                ok = ok and all(layout_feasible(l, spec) for l in lays) and reflections_feasible(v)
    return bool(ok)


# -- block updates ---------------------------------------------------------------

def _stack_forms(forms: list[QuadraticForm]) -> QuadraticForm:
    return QuadraticForm(np.concatenate([f.q_matrix for f in forms]),
                         np.concatenate([f.offset for f in forms]))


def _reflection_step(channels, areas, layouts, v, cfg):
    form = _stack_forms([q_form(channels, layouts[a], channels.areas[a]) for a in areas])
    lin = reflection_lb(form, v)
    rep = solve_reflection_program(reflection_constraints(lin), channels.n_elements,
                                   v * _DISK_SHRINK, cfg.tol_obj, cfg.tol_feas, cfg.max_iter)
    v_new = rep.x
    # project tiny barrier overshoot back onto the disks
    mag = np.abs(v_new)
    over = mag > 1.0
    v_new[over] /= mag[over]
    return v_new, rep.status


def _position_step(channels, spec, areas, layout, v, cfg):
    m = len(layout)
    blocks = []
    for a in areas:
        pc: PointChannels = channels.areas[a]
        exp = cosine_expansion(channels, v, pc)
        floor = expected_snr(channels, layout, v, pc).floor
        blocks.append(build_position_constraints(exp, layout, floor))
    obj = blocks[0]
    for b in blocks[1:]:
        obj = obj.stack(b)
    a_rows, b_rhs = spacing_constraints(layout, spec.rf.min_spacing)
    half = spec.region.half_side
    program = MaxMinProgram(obj, lower=-half * np.ones(2 * m), upper=half * np.ones(2 * m),
                            affine_a=a_rows if len(b_rhs) else None,
                            affine_b=b_rhs if len(b_rhs) else None)
    rep = solve_maxmin(program, np.asarray(layout, dtype=float).ravel(), cfg.tol_obj,
                       cfg.tol_feas, cfg.max_iter)
    new = np.clip(rep.x.reshape(m, 2), -half, half)
    return new, rep.status


def run_ao(spec: ScenarioSpec, channels: ScenarioChannels, areas: list[int],
           layout_groups: list[list[int]], layouts: dict, v: np.ndarray,
           cfg: OptimizerConfig, optimize_layout: bool = True):
    """Alternate the two blocks over ``areas`` sharing ``v``.

    ``layouts`` maps each area index to its current layout; areas in the same
    entry of ``layout_groups`` always carry the same layout.
    """
    layouts = {a: np.array(layouts[a], dtype=float) for a in areas}
    v = np.array(v, dtype=complex)

    def worst(lay, vv, group=None):
        return min(float(area_snr(channels, lay[a], vv, a).min()) for a in (group or areas))

    trace = AoTrace()
    eta = worst(layouts, v)
    def snapshot():
        return np.stack([layouts[a] for a in areas]), v.copy()

    trace.steps.append(AoStep(eta, INIT, "ok", 0.0, state=snapshot()))
    blocks = [b for b in cfg.block_order if optimize_layout or b != POSITION]
    for it in range(cfg.max_outer):
        eta_start = eta
        for block in blocks:
            t0 = time.perf_counter()
            if block == REFLECTION:
                v_new, status = _reflection_step(channels, areas, layouts, v, cfg)
                cand = worst(layouts, v_new)
                accepted = reflections_feasible(v_new) and cand >= eta
                if accepted:
                    v, eta = v_new, cand
            else:
                statuses, accepted = [], False
                for group in layout_groups:
                    lay = layouts[group[0]]
                    new, status = _position_step(channels, spec, group, lay, v, cfg)
                    statuses.append(status)
                    trial = {a: new for a in group}
                    if layout_feasible(new, spec) and worst(trial, v, group) >= worst(layouts, v, group):
                        layouts.update(trial)
                        accepted = True
                status = ",".join(sorted(set(statuses)))
                eta = worst(layouts, v)
            trace.steps.append(AoStep(eta, block, status, time.perf_counter() - t0, accepted,
                                      snapshot()))
        trace.outer_iterations = it + 1
        gain = eta - eta_start
        if eta_start > 0:
            if gain / eta_start < cfg.eps:
                break
        elif gain <= 0:
            break
    return layouts, v, eta, trace


# -- scheme drivers ------------------------------------------------------------------

def _warm(spec, channels, scheme, init):
    if init is None:
        return initialize(spec, channels=channels, scheme=scheme)
    if isinstance(init, SchemeSolution):
        return np.array(init.layouts, dtype=float), np.array(init.reflections, dtype=complex)
    layouts, refl = init
    j = len(spec.areas)
    layouts = np.asarray(layouts, dtype=float)
    refl = np.asarray(refl, dtype=complex)
    if layouts.ndim == 2:
        layouts = np.repeat(layouts[None], j, axis=0)
    if refl.ndim == 1:
        refl = np.repeat(refl[None], j, axis=0)
    return layouts, refl


def _finish(spec, channels, scheme, layouts, refl, traces) -> SchemeSolution:
    per_area = [area_snr(channels, layouts[a], refl[a], a) for a in range(len(spec.areas))]
    mins = np.array([p.min() for p in per_area])
    a_star = int(np.argmin(mins))
    point = int(np.argmin(per_area[a_star]))
    return SchemeSolution(scheme, layouts, refl, float(mins[a_star]),
                          (spec.areas[a_star].id, point), mins, traces)


def _per_area(spec, scheme, cfg, init, optimize_layout, channels=None):
    channels = channels or ScenarioChannels(spec)
    layouts, refl = _warm(spec, channels, scheme, init)
    j = len(spec.areas)

    def one(a):
        return run_ao(spec, channels, [a], [[a]], {a: layouts[a]}, refl[a], cfg, optimize_layout)

    if cfg.workers > 1 and j > 1:
        with ThreadPoolExecutor(cfg.workers) as pool:
            results = list(pool.map(one, range(j)))
    else:
        results = [one(a) for a in range(j)]
    out_l = np.stack([r[0][a] for a, r in enumerate(results)])
    out_v = np.stack([r[1] for r in results])
    return _finish(spec, channels, scheme, out_l, out_v, [r[3] for r in results])


def _shared_v(spec, scheme, cfg, init, layout_groups, optimize_layout, channels=None):
    channels = channels or ScenarioChannels(spec)
    layouts, refl = _warm(spec, channels, scheme, init)
    j = len(spec.areas)
    areas = list(range(j))
    start = {}
    for group in layout_groups:
        for a in group:
            start[a] = layouts[group[0]]
    lay, v, _, trace = run_ao(spec, channels, areas, layout_groups, start, refl[0], cfg,
                              optimize_layout)
    out_l = np.stack([lay[a] for a in areas])
    out_v = np.repeat(v[None], j, axis=0)
    return _finish(spec, channels, scheme, out_l, out_v, [trace])


def optimize_p1(spec: ScenarioSpec, config: OptimizerConfig | None = None, init=None,
                channels: ScenarioChannels | None = None) -> SchemeSolution:
    """Area-adaptive layouts and reflections; areas are solved independently."""
    return _per_area(spec, Scheme.ADAPTIVE_MA_IRS, config or OptimizerConfig(), init, True, channels)


def optimize_p2(spec: ScenarioSpec, config: OptimizerConfig | None = None, init=None,
                channels: ScenarioChannels | None = None) -> SchemeSolution:
    """Area-adaptive layouts, one static reflection vector."""
    groups = [[a] for a in range(len(spec.areas))]
    return _shared_v(spec, Scheme.ADAPTIVE_MA_STA_IRS, config or OptimizerConfig(), init, groups,
                     True, channels)


def optimize_p3(spec: ScenarioSpec, config: OptimizerConfig | None = None, init=None,
                channels: ScenarioChannels | None = None) -> SchemeSolution:
    """One layout and one reflection vector for every area."""
    groups = [list(range(len(spec.areas)))]
    return _shared_v(spec, Scheme.SHARED_MA_STA_IRS, config or OptimizerConfig(), init, groups,
                     True, channels)


def optimize_fpa_baselines(spec: ScenarioSpec, config: OptimizerConfig | None = None,
                           init=None, channels: ScenarioChannels | None = None,
                           scheme: Scheme | str | None = None) -> SchemeSolution:
    """Fixed half-wavelength array; only the reflections are optimized."""
    scheme = Scheme(scheme or spec.scheme)
    if scheme.movable:
        raise ValueError(f"{scheme.value} is not an FPA scheme")
    cfg = config or OptimizerConfig()
    if scheme.adaptive_irs:
        return _per_area(spec, scheme, cfg, init, False, channels)
    groups = [list(range(len(spec.areas)))]
    return _shared_v(spec, scheme, cfg, init, groups, False, channels)


def optimize(spec: ScenarioSpec, scheme: Scheme | str | None = None,
             config: OptimizerConfig | None = None, init=None,
             channels: ScenarioChannels | None = None) -> SchemeSolution:
    scheme = Scheme(scheme or spec.scheme)
    if scheme is Scheme.ADAPTIVE_MA_IRS:
        return optimize_p1(spec, config, init, channels)
    if scheme is Scheme.ADAPTIVE_MA_STA_IRS:
        return optimize_p2(spec, config, init, channels)
    if scheme is Scheme.SHARED_MA_STA_IRS:
        return optimize_p3(spec, config, init, channels)
    return optimize_fpa_baselines(spec, config, init, channels, scheme)
