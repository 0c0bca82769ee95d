"""Rician channel components for the BS->IRS and IRS->location links.

Phase conventions (``k = 2*pi/lambda``):

* BS->IRS receive phases ``e[n] = exp(-j k (p_n - p_1) . a_r)``
* MA transmit phases ``g[m] = exp(-j k t_m . a_t)`` with ``t_m = (0, y_m, z_m)``
* LoS BS->IRS matrix ``G_los = e g^H`` (shape ``N x M``)
* IRS->location LoS row ``h[n] = exp(+j k (p_n - p_1) . a_t)``

A layout is an ``(M, 2)`` array of ``(y, z)`` antenna coordinates and a
reflection vector is a complex array of length ``N`` ordered panel by panel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .scenario import IrsPanel, RfParams, ScenarioSpec, TargetArea, link_geometry, sample_area


@dataclass(frozen=True)
class LinkStats:
    """Statistical description of one IRS link."""

    amp: float
    rician: float
    phases: np.ndarray
    direction: np.ndarray
    distance: float

    @property
    def los_scale(self) -> float:
        return float(np.sqrt(self.rician / (self.rician + 1.0)))

    @property
    def nlos_scale(self) -> float:
        return float(np.sqrt(1.0 / (self.rician + 1.0)))


def path_amplitude(ref_gain: float, distance, exponent: float):
    return np.sqrt(ref_gain * np.asarray(distance, dtype=float) ** (-exponent))


def layout_3d(layout: np.ndarray) -> np.ndarray:
    layout = np.asarray(layout, dtype=float).reshape(-1, 2)
    return np.column_stack([np.zeros(len(layout)), layout])


def bs_link(panel: IrsPanel, rf: RfParams) -> LinkStats:
    geo = link_geometry(np.zeros(3), panel.ref_point)
    offsets = panel.element_positions - panel.ref_point
    phases = np.exp(-1j * rf.wavenumber * (offsets @ geo.direction))
    return LinkStats(float(path_amplitude(rf.ref_gain, geo.distance, panel.pathloss_exp_bs)),
                     panel.rician_bs, phases, geo.direction, geo.distance)


def point_link(panel: IrsPanel, point, exponent: float, rician: float, rf: RfParams) -> LinkStats:
    geo = link_geometry(panel.ref_point, point)
    return LinkStats(float(path_amplitude(rf.ref_gain, geo.distance, exponent)), rician,
                     los_irs_to_point(panel, point, rf), geo.direction, geo.distance)


def tx_steering(layout: np.ndarray, direction: np.ndarray, wavelength: float) -> np.ndarray:
    """``g[m] = exp(-j k t_m . a)`` for every antenna of ``layout``."""
    k = 2 * np.pi / wavelength
    return np.exp(-1j * k * (layout_3d(layout) @ np.asarray(direction, dtype=float)))


def los_bs_to_irs(panel: IrsPanel, layout: np.ndarray, rf: RfParams):
    """Rank-one factors ``(e, g)`` of the LoS BS->IRS matrix ``e g^H``."""
    link = bs_link(panel, rf)
    return link.phases, tx_steering(layout, link.direction, rf.wavelength)


def los_irs_to_point(panel: IrsPanel, point, rf: RfParams) -> np.ndarray:
    direction = link_geometry(panel.ref_point, point).direction
    offsets = panel.element_positions - panel.ref_point
    return np.exp(1j * rf.wavenumber * (offsets @ direction))


def sample_nlos(rng: np.random.Generator, rows: int, cols: int | None = None,
                size: int | None = None) -> np.ndarray:
    """I.i.d. CN(0, 1) entries (variance 1/2 per real component).

    ``cols=None`` draws a vector; ``size`` prepends a batch axis.
    """
    shape = (rows,) if cols is None else (rows, cols)
    if size is not None:
        shape = (size,) + shape
    scale = np.sqrt(0.5)
    return scale * rng.standard_normal(shape) + 1j * scale * rng.standard_normal(shape)


def compose_channel(stats: LinkStats, los: np.ndarray, nlos: np.ndarray) -> np.ndarray:
    los = np.asarray(los)
    nlos = np.asarray(nlos)
    # nlos may carry leading batch axes
    if nlos.ndim < los.ndim or nlos.shape[nlos.ndim - los.ndim:] != los.shape:
        raise ValueError(f"shape mismatch: LoS {los.shape} vs NLoS {nlos.shape}")
    return stats.amp * (stats.los_scale * los + stats.nlos_scale * nlos)


@dataclass(frozen=True)
class PointChannels:
    """Deterministic cascade data for a batch of receiver locations.

    ``h_hat[g, n]`` is the scaled LoS IRS->location coefficient of element
    ``n`` and ``floor_w[g, n]`` the per-element NLoS power weight (without
    ``p_bar`` and the antenna count).
    """

    points: np.ndarray
    h_hat: np.ndarray
    floor_w: np.ndarray

    def __len__(self) -> int:
        return self.points.shape[0]


class ScenarioChannels:
    """Precomputed statistics shared by the closed-form SNR and the optimizer."""

    def __init__(self, spec: ScenarioSpec):
        self.spec = spec
        self.rf = spec.rf
        self.p_bar = spec.rf.p_bar
        self.wavelength = spec.rf.wavelength
        self.slices = spec.panel_slices
        self.n_elements = spec.n_elements
        self.bs_links = [bs_link(p, spec.rf) for p in spec.panels]
        self.panel_index = np.concatenate(
            [np.full(p.n_elements, ell) for ell, p in enumerate(spec.panels)])
        self.e_hat = np.concatenate(
            [lk.amp * lk.los_scale * lk.phases for lk in self.bs_links])
        self.bs_directions = np.array([lk.direction for lk in self.bs_links])
        self.areas = [self.at_points(sample_area(a), a) for a in spec.areas]

    @property
    def n_panels(self) -> int:
        return len(self.bs_links)

    def at_points(self, points, area: TargetArea) -> PointChannels:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        rf = self.rf
        h_hat = np.empty((len(points), self.n_elements), dtype=complex)
        floor_w = np.empty((len(points), self.n_elements))
        for panel, sl, bs in zip(self.spec.panels, self.slices, self.bs_links):
            alpha, kappa = panel.link_params(area)
            offsets = panel.element_positions - panel.ref_point
            delta = points - panel.ref_point
            dist = np.linalg.norm(delta, axis=1)
            if np.any(dist == 0):
                raise ValueError("degenerate link")
            dirs = delta / dist[:, None]
            amp = path_amplitude(rf.ref_gain, dist, alpha)
            los = np.sqrt(kappa / (kappa + 1.0))
            h_hat[:, sl] = (amp * los)[:, None] * np.exp(1j * rf.wavenumber * (dirs @ offsets.T))
            weight = amp ** 2 * bs.amp ** 2 * (kappa + bs.rician + 1.0) / (
                (kappa + 1.0) * (bs.rician + 1.0))
            floor_w[:, sl] = weight[:, None]
        return PointChannels(points, h_hat, floor_w)

    def tx_phases(self, layout: np.ndarray) -> np.ndarray:
        """``conj(g_l[m])`` for every element's panel, shape ``(N, M)``."""
        k = 2 * np.pi / self.wavelength
        per_panel = np.exp(1j * k * (self.bs_directions @ layout_3d(layout).T))
        return per_panel[self.panel_index]

    def cascade(self, layout: np.ndarray, pc: PointChannels) -> np.ndarray:
        """``Phi[g, n, m]`` such that the coherent row is ``v^T Phi[g]``."""
        return (pc.h_hat * self.e_hat)[:, :, None] * self.tx_phases(layout)[None, :, :]
