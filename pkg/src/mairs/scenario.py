"""Physical scenario: base station, IRS panels, target areas and RF constants.

All positions are in meters in a global Cartesian frame whose origin is the
BS reference point. Movable antennas live in the y-z plane through the
origin, so an antenna position is stored as a ``(y, z)`` pair.
"""

from __future__ import annotations

import enum
import hashlib
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

SPEED_OF_LIGHT = 3e8

__all__ = [
    "Scheme",
    "RfParams",
    "MovingRegion",
    "TargetArea",
    "IrsPanel",
    "ScenarioSpec",
    "LinkGeometry",
    "db_to_linear",
    "dbm_to_watt",
    "sample_area",
    "link_geometry",
    "uniform_panel",
    "resize_panel",
    "validate",
    "scenario_from_dict",
    "scenario_to_dict",
    "load_scenario",
    "scenario_hash",
    "full_scenario",
    "desk_scenario",
    "random_areas",
    "STOCK_IRS_REFS",
]

# Reference points of the five IRSs of the evaluation setup (meters).
STOCK_IRS_REFS = (
    (5.0, 0.0, 12.0),
    (0.0, 12.0, 5.0),
    (0.0, -12.0, 5.0),
    (10.0, 25.0, 5.0),
    (10.0, -25.0, 5.0),
)


class Scheme(str, enum.Enum):
    ADAPTIVE_MA_IRS = "adaptive_ma_irs"
    ADAPTIVE_MA_STA_IRS = "adaptive_ma_sta_irs"
    SHARED_MA_STA_IRS = "shared_ma_sta_irs"
    FPA_ADAPTIVE_IRS = "fpa_adaptive_irs"
    FPA_STA_IRS = "fpa_sta_irs"

    @property
    def movable(self) -> bool:
        return self in (Scheme.ADAPTIVE_MA_IRS, Scheme.ADAPTIVE_MA_STA_IRS,
                        Scheme.SHARED_MA_STA_IRS)

    @property
    def adaptive_irs(self) -> bool:
        return self in (Scheme.ADAPTIVE_MA_IRS, Scheme.FPA_ADAPTIVE_IRS)


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def dbm_to_watt(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


@dataclass(frozen=True)
class RfParams:
    """RF constants. Powers in watts, lengths in meters, gains linear."""

    wavelength: float = 0.1
    ref_gain: float = (0.1 / (4 * math.pi)) ** 2
    tx_power: float = 10.0
    noise_power: float = 1e-12
    min_spacing: float = 0.05

    @property
    def p_bar(self) -> float:
        return self.tx_power / self.noise_power

    @property
    def wavenumber(self) -> float:
        return 2 * math.pi / self.wavelength

    @classmethod
    def from_physical(cls, carrier_hz: float = 3e9, tx_power_dbm: float = 40.0,
                      noise_dbm: float = -90.0, min_spacing_over_lambda: float = 0.5,
                      ref_gain: float | None = None) -> "RfParams":
        lam = SPEED_OF_LIGHT / carrier_hz
        if ref_gain is None:
            ref_gain = (lam / (4 * math.pi)) ** 2
        return cls(wavelength=lam, ref_gain=ref_gain,
                   tx_power=dbm_to_watt(tx_power_dbm),
                   noise_power=dbm_to_watt(noise_dbm),
                   min_spacing=min_spacing_over_lambda * lam)


@dataclass(frozen=True)
class MovingRegion:
    """Square ``[-half_side, half_side]^2`` in the y-z plane."""

    half_side: float

    @property
    def side(self) -> float:
        return 2 * self.half_side

    def contains(self, positions: np.ndarray, tol: float = 0.0) -> bool:
        positions = np.asarray(positions, dtype=float)
        return bool(np.all(np.abs(positions) <= self.half_side + tol))


@dataclass(frozen=True)
class TargetArea:
    """Axis-aligned square of candidate receiver locations at fixed height.

    ``pathloss_exp`` and ``rician`` (linear) are the defaults for every
    IRS-to-location link into this area; an :class:`IrsPanel` may override
    them per area.
    """

    id: int
    corner: tuple[float, float, float]
    side: float
    sample_step: float = 1.0
    pathloss_exp: float = 2.2
    rician: float = 10 ** 0.3

    @property
    def plane(self) -> float:
        return self.corner[2]

    @property
    def center(self) -> np.ndarray:
        c = np.asarray(self.corner, dtype=float)
        return c + np.array([self.side / 2, self.side / 2, 0.0])


@dataclass(frozen=True)
class IrsPanel:
    """IRS with explicitly listed element coordinates.

    ``element_positions[0]`` is the panel reference point. ``plane`` and
    ``spacing`` only record how a uniform panel was generated so that it can
    be regrown with a different element count.
    """

    id: int
    element_positions: np.ndarray
    pathloss_exp_bs: float = 2.2
    rician_bs: float = 10 ** 0.3
    area_links: Mapping[int, tuple[float, float]] = field(default_factory=dict)
    plane: str = "yz"
    spacing: float | None = None
    shape: tuple[int, int] | None = None

    def __post_init__(self):
        pos = np.atleast_2d(np.asarray(self.element_positions, dtype=float))
        pos.setflags(write=False)
        object.__setattr__(self, "element_positions", pos)

    @property
    def n_elements(self) -> int:
        return self.element_positions.shape[0]

    @property
    def ref_point(self) -> np.ndarray:
        return self.element_positions[0]

    def link_params(self, area: TargetArea) -> tuple[float, float]:
        """(path-loss exponent, linear Rician factor) towards ``area``."""
        return self.area_links.get(area.id, (area.pathloss_exp, area.rician))


@dataclass(frozen=True)
class ScenarioSpec:
    rf: RfParams
    region: MovingRegion
    panels: tuple[IrsPanel, ...]
    areas: tuple[TargetArea, ...]
    m_antennas: int = 4
    scheme: Scheme = Scheme.ADAPTIVE_MA_IRS
    rng_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "panels", tuple(self.panels))
        object.__setattr__(self, "areas", tuple(self.areas))
        object.__setattr__(self, "scheme", Scheme(self.scheme))

    @property
    def n_elements(self) -> int:
        return sum(p.n_elements for p in self.panels)

    @property
    def panel_slices(self) -> list[slice]:
        out, start = [], 0
        for p in self.panels:
            out.append(slice(start, start + p.n_elements))
            start += p.n_elements
        return out

    def with_(self, **changes) -> "ScenarioSpec":
        return replace(self, **changes)


@dataclass(frozen=True)
class LinkGeometry:
    distance: float
    elevation: float
    azimuth: float
    direction: np.ndarray


def sample_area(area: TargetArea) -> np.ndarray:
    """Inclusive grid of candidate points, row-major over (x, y).

    Returns an array of shape ``(G, 3)``. A side shorter than one step
    degenerates to the corner alone.
    """
    n = int(math.floor(area.side / area.sample_step + 1e-9)) + 1 if area.side > 0 else 1
    offsets = np.arange(n) * area.sample_step
    ii, kk = np.meshgrid(offsets, offsets, indexing="ij")
    corner = np.asarray(area.corner, dtype=float)
    pts = np.empty((n * n, 3))
    pts[:, 0] = corner[0] + ii.ravel()
    pts[:, 1] = corner[1] + kk.ravel()
    pts[:, 2] = corner[2]
    return pts


def link_geometry(origin: Sequence[float], endpoint: Sequence[float]) -> LinkGeometry:
    """Distance and LoS direction angles from ``origin`` towards ``endpoint``."""
    delta = np.asarray(endpoint, dtype=float) - np.asarray(origin, dtype=float)
    d = float(np.linalg.norm(delta))
    if not np.isfinite(d) or d == 0.0:
        raise ValueError("degenerate link")
    unit = delta / d
    elevation = math.asin(max(-1.0, min(1.0, unit[2])))
    azimuth = math.atan2(unit[1], unit[0])
    direction = np.array([
        math.cos(elevation) * math.cos(azimuth),
        math.cos(elevation) * math.sin(azimuth),
        math.sin(elevation),
    ])
    return LinkGeometry(d, elevation, azimuth, direction)


_PLANE_AXES = {"yz": (1, 2), "xz": (0, 2), "xy": (0, 1)}


def _grid_shape(n: int) -> tuple[int, int]:
    rows = max(r for r in range(1, int(math.isqrt(n)) + 1) if n % r == 0)
    return rows, n // rows


def uniform_panel(panel_id: int, ref_point: Sequence[float], rows: int, cols: int,
                  spacing: float, plane: str = "yz", **kwargs) -> IrsPanel:
    """Rectangular panel growing from ``ref_point`` along the two plane axes."""
    if plane not in _PLANE_AXES:
        raise ValueError(f"unknown panel plane {plane!r}")
    ax0, ax1 = _PLANE_AXES[plane]
    ref = np.asarray(ref_point, dtype=float)
    pos = np.tile(ref, (rows * cols, 1))
    r, c = np.divmod(np.arange(rows * cols), cols)
    pos[:, ax0] += r * spacing
    pos[:, ax1] += c * spacing
    return IrsPanel(panel_id, pos, plane=plane, spacing=spacing,
                    shape=(rows, cols), **kwargs)


def resize_panel(panel: IrsPanel, n_elements: int, wavelength: float) -> IrsPanel:
    """Regrow a uniform panel around the same reference point."""
    rows, cols = _grid_shape(n_elements)
    spacing = panel.spacing if panel.spacing is not None else wavelength / 2
    return uniform_panel(panel.id, panel.ref_point, rows, cols, spacing, panel.plane,
                         pathloss_exp_bs=panel.pathloss_exp_bs,
                         rician_bs=panel.rician_bs, area_links=dict(panel.area_links))


def _packing_capacity(side: float, spacing: float) -> int:
    per_axis = int(math.floor(side / spacing + 1e-9)) + 1
    return per_axis * per_axis


def validate(spec: ScenarioSpec) -> list[str]:
    """Return every violated invariant of ``spec``; empty means valid."""
    problems: list[str] = []
    rf = spec.rf
    for name in ("wavelength", "ref_gain", "tx_power", "noise_power", "min_spacing"):
        value = getattr(rf, name)
        if not (np.isfinite(value) and value > 0):
            problems.append(f"rf.{name} must be positive and finite")
    if rf.min_spacing < rf.wavelength / 2 - 1e-12:
        problems.append("min spacing below half wavelength")
    if not spec.region.half_side > 0:
        problems.append("moving region half side must be positive")
    if spec.m_antennas < 1:
        problems.append("at least one antenna required")
    if not spec.panels:
        problems.append("at least one IRS panel required")
    if not spec.areas:
        problems.append("at least one target area required")
    if spec.region.half_side > 0 and rf.min_spacing > 0 and spec.m_antennas >= 1:
        if _packing_capacity(spec.region.side, rf.min_spacing) < spec.m_antennas:
            problems.append("region cannot pack M antennas")

    origin = np.zeros(3)
    for p in spec.panels:
        pos = p.element_positions
        if p.n_elements < 1:
            problems.append(f"panel {p.id}: no elements")
            continue
        if not np.all(np.isfinite(pos)):
            problems.append(f"panel {p.id}: non-finite element coordinates")
            continue
        if p.n_elements > 1:
            diff = pos[:, None, :] - pos[None, :, :]
            dist = np.linalg.norm(diff, axis=-1)
            np.fill_diagonal(dist, np.inf)
            if dist.min() < rf.wavelength / 2 - 1e-9:
                problems.append(f"panel {p.id}: element spacing below half wavelength")
        if np.allclose(p.ref_point, origin):
            problems.append(f"panel {p.id}: reference point coincides with the BS")
        if not (p.pathloss_exp_bs > 0 and p.rician_bs > 0):
            problems.append(f"panel {p.id}: BS link parameters must be positive")
        for area_id, (alpha, kappa) in p.area_links.items():
            if not (alpha > 0 and kappa > 0):
                problems.append(f"panel {p.id}: link to area {area_id} must be positive")

    for a in spec.areas:
        if not np.all(np.isfinite(a.corner)):
            problems.append(f"area {a.id}: non-finite corner")
        if a.side < 0:
            problems.append(f"area {a.id}: side must be non-negative")
        if not a.sample_step > 0:
            problems.append(f"area {a.id}: sample step must be positive")
        if not (a.pathloss_exp > 0 and a.rician > 0):
            problems.append(f"area {a.id}: link parameters must be positive")
        if a.side >= 0 and a.sample_step > 0:
            pts = sample_area(a)
            for p in spec.panels:
                if np.any(np.linalg.norm(pts - p.ref_point, axis=1) == 0):
                    problems.append(f"area {a.id}: point coincides with panel {p.id}")
    ids = [a.id for a in spec.areas]
    if len(set(ids)) != len(ids):
        problems.append("area ids must be unique")
    return problems


# -- configuration documents ------------------------------------------------

def _rician_linear(entry: Mapping[str, Any], default_db: float = 3.0) -> float:
    if "rician" in entry:
        return float(entry["rician"])
    return db_to_linear(float(entry.get("rician_db", default_db)))


def scenario_from_dict(doc: Mapping[str, Any]) -> ScenarioSpec:
    """Build a scenario from a parsed configuration document.

    dB-valued fields (``*_dbm``, ``rician_db``) are converted to linear here.
    """
    rf_doc = doc.get("rf", {})
    rf = RfParams.from_physical(
        carrier_hz=float(rf_doc.get("carrier_hz", 3e9)),
        tx_power_dbm=float(rf_doc.get("tx_power_dbm", 40.0)),
        noise_dbm=float(rf_doc.get("noise_dbm", -90.0)),
        min_spacing_over_lambda=float(rf_doc.get("min_spacing_over_lambda", 0.5)),
        ref_gain=rf_doc.get("ref_gain"),
    )
    lam = rf.wavelength
    region = MovingRegion(float(doc.get("region", {}).get("half_side_over_lambda", 2.5)) * lam)

    areas = []
    for j, a in enumerate(doc.get("areas", [])):
        areas.append(TargetArea(
            id=int(a.get("id", j)),
            corner=tuple(float(c) for c in a["corner"]),
            side=float(a.get("side_m", 5.0)),
            sample_step=float(a.get("step_m", 1.0)),
            pathloss_exp=float(a.get("pathloss_exp", 2.2)),
            rician=_rician_linear(a),
        ))

    panels = []
    for ell, p in enumerate(doc.get("panels", [])):
        links = {}
        for area_id, link in (p.get("area_links") or {}).items():
            links[int(area_id)] = (float(link.get("pathloss_exp", 2.2)), _rician_linear(link))
        common = dict(pathloss_exp_bs=float(p.get("pathloss_exp", 2.2)),
                      rician_bs=_rician_linear(p), area_links=links)
        pid = int(p.get("id", ell))
        if "elements" in p:
            panels.append(IrsPanel(pid, np.asarray(p["elements"], dtype=float),
                                   plane=p.get("plane", "yz"), **common))
        else:
            if "n_elements" in p:
                rows, cols = _grid_shape(int(p["n_elements"]))
            else:
                rows, cols = int(p.get("rows", 1)), int(p.get("cols", 1))
            spacing = float(p.get("spacing_over_lambda", 0.5)) * lam
            panels.append(uniform_panel(pid, p["ref_point"], rows, cols, spacing,
                                        p.get("plane", "yz"), **common))

    return ScenarioSpec(
        rf=rf, region=region, panels=tuple(panels), areas=tuple(areas),
        m_antennas=int(doc.get("m_antennas", 4)),
        scheme=Scheme(doc.get("scheme", Scheme.ADAPTIVE_MA_IRS.value)),
        rng_seed=int(doc.get("seed", 0)),
    )


def _linear_to_db(x: float) -> float:
    return 10.0 * math.log10(x)


def scenario_to_dict(spec: ScenarioSpec) -> dict[str, Any]:
    """Inverse of :func:`scenario_from_dict` (panels written element-wise)."""
    rf = spec.rf
    return {
        "rf": {
            "carrier_hz": SPEED_OF_LIGHT / rf.wavelength,
            "tx_power_dbm": _linear_to_db(rf.tx_power) + 30.0,
            "noise_dbm": _linear_to_db(rf.noise_power) + 30.0,
            "min_spacing_over_lambda": rf.min_spacing / rf.wavelength,
            "ref_gain": rf.ref_gain,
        },
        "region": {"half_side_over_lambda": spec.region.half_side / rf.wavelength},
        "panels": [
            {
                "id": p.id,
                "elements": p.element_positions.tolist(),
                "plane": p.plane,
                "pathloss_exp": p.pathloss_exp_bs,
                "rician": p.rician_bs,
                "area_links": {str(k): {"pathloss_exp": v[0], "rician": v[1]}
                               for k, v in sorted(p.area_links.items())},
            }
            for p in spec.panels
        ],
        "areas": [
            {"id": a.id, "corner": list(a.corner), "side_m": a.side, "step_m": a.sample_step,
             "pathloss_exp": a.pathloss_exp, "rician": a.rician}
            for a in spec.areas
        ],
        "m_antennas": spec.m_antennas,
        "scheme": spec.scheme.value,
        "seed": spec.rng_seed,
    }


def scenario_hash(spec: ScenarioSpec) -> str:
    blob = json.dumps(scenario_to_dict(spec), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def load_document(path: str | Path) -> dict[str, Any]:
    """Read a YAML or JSON document."""
    import yaml

    with open(path, encoding="utf-8") as fh:
        doc = yaml.safe_load(fh)
    if not isinstance(doc, dict):
        raise ValueError(f"{path}: expected a mapping at top level")
    return doc


def load_scenario(path: str | Path) -> ScenarioSpec:
    return scenario_from_dict(load_document(path))


# -- stock scenarios -----------------------------------------------------------

def random_areas(rng: np.random.Generator, count: int, side: float = 5.0,
                 x_range=(50.0, 70.0), y_range=(-40.0, 40.0), z: float = 0.0,
                 step: float = 1.0, max_tries: int = 10_000) -> tuple[TargetArea, ...]:
    """Non-overlapping square areas drawn uniformly inside a rectangle."""
    corners: list[tuple[float, float]] = []
    for _ in range(max_tries):
        if len(corners) == count:
            break
        x = rng.uniform(x_range[0], x_range[1] - side)
        y = rng.uniform(y_range[0], y_range[1] - side)
        if all(abs(x - cx) >= side or abs(y - cy) >= side for cx, cy in corners):
            corners.append((x, y))
    if len(corners) < count:
        raise ValueError("could not place non-overlapping areas")
    return tuple(TargetArea(j, (round(x, 6), round(y, 6), z), side, step)
                 for j, (x, y) in enumerate(corners))


def full_scenario(n_irs: int = 3, n_elements: int = 20, m_antennas: int = 4,
                   region_over_lambda: float = 5.0, n_areas: int = 3, seed: int = 0,
                   scheme: Scheme | str = Scheme.ADAPTIVE_MA_IRS,
                   areas: Sequence[TargetArea] | None = None) -> ScenarioSpec:
    """Full-scale evaluation geometry (40 dBm, -90 dBm, 3 GHz, 3 dB Rician)."""
    rf = RfParams.from_physical()
    rows, cols = _grid_shape(n_elements)
    kappa = db_to_linear(3.0)
    panels = tuple(uniform_panel(ell, STOCK_IRS_REFS[ell], rows, cols, rf.wavelength / 2,
                                 pathloss_exp_bs=2.2, rician_bs=kappa)
                   for ell in range(n_irs))
    if areas is None:
        areas = random_areas(np.random.default_rng(seed), n_areas)
    return ScenarioSpec(rf, MovingRegion(region_over_lambda * rf.wavelength / 2),
                        panels, tuple(areas), m_antennas, Scheme(scheme), seed)


DESK_AREA_CORNERS = ((55.0, -10.0, 0.0), (60.0, 12.0, 0.0), (52.0, 25.0, 0.0),
                     (64.0, -30.0, 0.0))


def desk_scenario(n_irs: int = 2, n_elements: int = 8, m_antennas: int = 2,
                  n_areas: int = 2, area_side: float = 3.0,
                  region_over_lambda: float = 5.0,
                  scheme: Scheme | str = Scheme.ADAPTIVE_MA_IRS, seed: int = 0) -> ScenarioSpec:
    """Reduced-size default: IRS 1 and 2, 3 m areas sampled every meter."""
    areas = tuple(TargetArea(j, DESK_AREA_CORNERS[j], area_side, 1.0)
                  for j in range(n_areas))
    return full_scenario(n_irs, n_elements, m_antennas, region_over_lambda,
                          seed=seed, scheme=scheme, areas=areas)
