"""Received SNR under MRT: instantaneous, closed-form expectation, and MC oracle."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import (
    PointChannels,
    ScenarioChannels,
    bs_link,
    compose_channel,
    los_bs_to_irs,
    point_link,
    sample_nlos,
)
from .scenario import ScenarioSpec, TargetArea

FLOOR_AMPLITUDE = "amplitude"
FLOOR_UNIT = "unit"


def mrt_beamformer(effective_channel) -> np.ndarray:
    """Unit-norm beamformer ``h^H / ||h||`` for a ``1 x M`` effective channel."""
    h = np.asarray(effective_channel, dtype=complex).ravel()
    norm = np.linalg.norm(h)
    if norm == 0.0:
        raise ValueError("null effective channel")
    return h.conj() / norm


def effective_channel(bs_channels, point_channels, reflections, slices) -> np.ndarray:
    """``sum_l h_l^H Theta_l G_l``; accepts a leading batch axis on the channels."""
    v = np.asarray(reflections)
    out = None
    for G, h, sl in zip(bs_channels, point_channels, slices):
        G = np.asarray(G)
        h = np.asarray(h)
        if G.shape[-2] != h.shape[-1] or h.shape[-1] != sl.stop - sl.start:
            raise ValueError("shape mismatch between channels and reflections")
        term = np.einsum("...n,...nm->...m", h * v[sl], G)
        out = term if out is None else out + term
    return out


def instantaneous_snr(bs_channels, point_channels, reflections, slices, p_bar: float):
    """SNR with the MRT beamformer applied to one (or a batch of) channel draw(s)."""
    row = effective_channel(bs_channels, point_channels, reflections, slices)
    if row.ndim == 1:
        if not np.any(row):
            return 0.0
        w = mrt_beamformer(row)
        return float(p_bar * np.abs(row @ w) ** 2)
    # MRT attains |h w|^2 = ||h||^2
    return p_bar * np.sum(np.abs(row) ** 2, axis=-1)


@dataclass(frozen=True)
class ExpectedSnrTerms:
    coherent: np.ndarray
    floor: np.ndarray
    floor_kind: str = FLOOR_AMPLITUDE

    @property
    def total(self) -> np.ndarray:
        return self.coherent + self.floor


def coherent_rows(channels: ScenarioChannels, layout, reflections, pc: PointChannels):
    """LoS effective rows ``v^T Phi`` for every point, shape ``(G, M)``."""
    v = np.asarray(reflections, dtype=complex)
    weighted = pc.h_hat * (channels.e_hat * v)
    return weighted @ channels.tx_phases(layout)


def expected_snr(channels: ScenarioChannels, layout, reflections, pc: PointChannels,
                 floor: str = FLOOR_AMPLITUDE) -> ExpectedSnrTerms:
    """Closed-form NLoS-averaged SNR at every point of ``pc``.

    With ``floor="amplitude"`` the scattering floor scales with ``|v_n|^2``;
    ``floor="unit"`` assumes unit-modulus coefficients.
    """
    layout = np.asarray(layout, dtype=float).reshape(-1, 2)
    v = np.asarray(reflections, dtype=complex)
    rows = coherent_rows(channels, layout, v, pc)
    coherent = channels.p_bar * np.sum(np.abs(rows) ** 2, axis=1)
    power = np.abs(v) ** 2 if floor == FLOOR_AMPLITUDE else np.ones(v.shape)
    floor_val = channels.p_bar * len(layout) * (pc.floor_w @ power)
    return ExpectedSnrTerms(coherent, floor_val, floor)


def snr_db(linear) -> np.ndarray:
    return 10.0 * np.log10(linear)


# -- cosine expansion ----------------------------------------------------------

@dataclass(frozen=True)
class CosineExpansion:
    """Coherent term as a sum of per-antenna cosines over IRS pairs.

    ``b[g, l, l2]`` are the pair coefficients at each point; the phase of
    the pair ``(l, l2)`` at antenna position ``t`` is
    ``nu = k (y * alpha[l, l2] + z * omega[l, l2])``.
    """

    b: np.ndarray
    alpha: np.ndarray
    omega: np.ndarray
    p_bar: float
    wavelength: float

    def nu(self, layout) -> np.ndarray:
        """Phases ``nu[m, l, l2]``."""
        layout = np.asarray(layout, dtype=float).reshape(-1, 2)
        k = 2 * np.pi / self.wavelength
        return k * (layout[:, 0, None, None] * self.alpha + layout[:, 1, None, None] * self.omega)

    def coherent(self, layout) -> np.ndarray:
        """Exact coherent term ``p_bar * sum Re{b e^{j nu}}``."""
        nu = self.nu(layout)
        cos_sum = np.cos(nu).sum(axis=0)
        sin_sum = np.sin(nu).sum(axis=0)
        val = np.einsum("gab,ab->g", self.b.real, cos_sum) - np.einsum(
            "gab,ab->g", self.b.imag, sin_sum)
        return self.p_bar * val

    def real_part_only(self, layout) -> np.ndarray:
        """``p_bar * sum Re{b} cos(nu)``, dropping the sine terms."""
        return self.p_bar * np.einsum("gab,ab->g", self.b.real, np.cos(self.nu(layout)).sum(0))

    def sine_terms(self, layout) -> np.ndarray:
        """``sum Im{b} sin(nu)``; the gap between the two forms above."""
        return np.einsum("gab,ab->g", self.b.imag, np.sin(self.nu(layout)).sum(0))

    def imaginary_residual(self, layout) -> np.ndarray:
        """Imaginary part of the full complex double sum (identically zero)."""
        nu = self.nu(layout)
        total = np.einsum("gab,ab->g", self.b, np.exp(1j * nu).sum(axis=0))
        return total.imag


def pair_frequencies(channels: ScenarioChannels):
    """Direction differences ``(alpha, omega)`` for every ordered IRS pair."""
    a = channels.bs_directions
    alpha = a[:, 1, None] - a[None, :, 1]
    omega = a[:, 2, None] - a[None, :, 2]
    return alpha, omega


def panel_sums(channels: ScenarioChannels, reflections, pc: PointChannels) -> np.ndarray:
    """``S[g, l] = sum_{n in l} h_hat[g, n] v[n] e_hat[n]``."""
    v = np.asarray(reflections, dtype=complex)
    weighted = pc.h_hat * (channels.e_hat * v)
    return np.stack([weighted[:, sl].sum(axis=1) for sl in channels.slices], axis=1)


def cosine_expansion(channels: ScenarioChannels, reflections, pc: PointChannels) -> CosineExpansion:
    s = panel_sums(channels, reflections, pc)
    b = s[:, :, None] * s[:, None, :].conj()
    alpha, omega = pair_frequencies(channels)
    return CosineExpansion(b, alpha, omega, channels.p_bar, channels.wavelength)


# -- quadratic form in the reflection vector ----------------------------------

@dataclass(frozen=True)
class QuadraticForm:
    """``v^H Q v + offset`` per point; ``q_matrix`` has shape ``(G, N, N)``."""

    q_matrix: np.ndarray
    offset: np.ndarray

    def value(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=complex)
        return np.einsum("n,gnk,k->g", v.conj(), self.q_matrix, v).real + self.offset


def q_form(channels: ScenarioChannels, layout, pc: PointChannels,
           floor: str = FLOOR_AMPLITUDE) -> QuadraticForm:
    """Expected SNR as a Hermitian form: coherent Gram matrix plus diagonal floor.

    With ``floor="unit"`` the floor is a constant offset instead.
    """
    layout = np.asarray(layout, dtype=float).reshape(-1, 2)
    m = len(layout)
    phi = channels.cascade(layout, pc)
    q = channels.p_bar * np.einsum("gnm,gkm->gnk", phi.conj(), phi)
    scale = channels.p_bar * m * pc.floor_w
    if floor == FLOOR_AMPLITUDE:
        idx = np.arange(channels.n_elements)
        q[:, idx, idx] += scale
        offset = np.zeros(len(pc))
    else:
        offset = scale.sum(axis=1)
    return QuadraticForm(q, offset)


# -- Monte Carlo oracle --------------------------------------------------------

@dataclass(frozen=True)
class MonteCarloResult:
    mean: float
    stderr: float
    n_draws: int


def monte_carlo_expected_snr(spec: ScenarioSpec, layout, reflections, point,
                             area: TargetArea, n_draws: int, rng: np.random.Generator,
                             chunk: int = 20_000) -> MonteCarloResult:
    """Sample mean of the MRT SNR over independent NLoS draws.

    Channels are assembled from the per-link primitives so the estimate is
    independent of the closed-form cascade code.
    """
    if n_draws < 1:
        raise ValueError("n_draws must be >= 1")
    layout = np.asarray(layout, dtype=float).reshape(-1, 2)
    m = len(layout)
    v = np.asarray(reflections, dtype=complex)
    rf = spec.rf
    links = []
    for panel in spec.panels:
        e, g = los_bs_to_irs(panel, layout, rf)
        alpha, kappa = panel.link_params(area)
        pt = point_link(panel, point, alpha, kappa, rf)
        links.append((bs_link(panel, rf), np.outer(e, g.conj()), pt, pt.phases))
    slices = spec.panel_slices

    total = 0.0
    total_sq = 0.0
    done = 0
    while done < n_draws:
        size = min(chunk, n_draws - done)
        bs_ch, pt_ch = [], []
        for bs_stats, g_los, pt_stats, h_los in links:
            n_l = g_los.shape[0]
            bs_ch.append(compose_channel(bs_stats, g_los, sample_nlos(rng, n_l, m, size=size)))
            pt_ch.append(compose_channel(pt_stats, h_los, sample_nlos(rng, n_l, size=size)))
        snr = instantaneous_snr(bs_ch, pt_ch, v, slices, rf.p_bar)
        total += float(snr.sum())
        total_sq += float(np.sum(snr ** 2))
        done += size
    mean = total / n_draws
    if n_draws > 1:
        var = max(total_sq / n_draws - mean ** 2, 0.0) * n_draws / (n_draws - 1)
        stderr = float(np.sqrt(var / n_draws))
    else:
        stderr = float("inf")
    return MonteCarloResult(mean, stderr, n_draws)
