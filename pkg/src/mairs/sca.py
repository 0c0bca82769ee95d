"""Touching quadratic/affine bounds used by the SCA subproblems.

Antenna coordinates are ``(y, z)`` pairs; a layout of ``M`` antennas is
flattened to ``x = (y_1, z_1, ..., y_M, z_M)`` when handed to the solver.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .snr import CosineExpansion, QuadraticForm
from .solver import QuadConstraints

LOWER = "lower"
UPPER = "upper"


def z_value_grad(nu_params, t, wavelength: float, phase: float = 0.0):
    """``Z(t) = cos(k (y a + z w) + phase)`` and its gradient in ``(y, z)``."""
    a, w = nu_params
    k = 2 * np.pi / wavelength
    t = np.asarray(t, dtype=float)
    nu = k * (t[..., 0] * a + t[..., 1] * w) + phase
    s = np.sin(nu)
    grad = np.stack([-k * a * s, -k * w * s], axis=-1)
    return np.cos(nu), grad


def z_hessian(nu_params, t, wavelength: float, phase: float = 0.0) -> np.ndarray:
    a, w = nu_params
    k = 2 * np.pi / wavelength
    t = np.asarray(t, dtype=float)
    c = np.cos(k * (t[..., 0] * a + t[..., 1] * w) + phase)
    outer = np.array([[a * a, a * w], [a * w, w * w]])
    return -(k ** 2) * c[..., None, None] * outer


def curvature_bound(nu_params, wavelength: float) -> float:
    """Frobenius-norm bound on the Hessian of ``Z`` (taken at ``cos = 1``)."""
    a, w = nu_params
    return float((2 * np.pi / wavelength) ** 2 * (a * a + w * w))


@dataclass(frozen=True)
class QuadSurrogate:
    value_at_ref: float
    gradient: np.ndarray
    curvature: float
    ref_point: np.ndarray
    sense: str

    def __call__(self, t) -> np.ndarray:
        d = np.asarray(t, dtype=float) - self.ref_point
        sign = -1.0 if self.sense == LOWER else 1.0
        return (self.value_at_ref + d @ self.gradient
                + sign * 0.5 * self.curvature * np.sum(d * d, axis=-1))


def z_surrogate(nu_params, ref_point, sense: str, wavelength: float,
                phase: float = 0.0) -> QuadSurrogate:
    if sense not in (LOWER, UPPER):
        raise ValueError(f"unknown sense {sense!r}")
    ref = np.asarray(ref_point, dtype=float)
    val, grad = z_value_grad(nu_params, ref, wavelength, phase)
    return QuadSurrogate(float(val), grad, curvature_bound(nu_params, wavelength), ref, sense)


def surrogate_sense(coefficient: float) -> str:
    """Lower bound for a non-negative coefficient, upper bound otherwise."""
    return LOWER if coefficient >= 0 else UPPER


def build_position_constraints(expansion: CosineExpansion, layout_ref, floor) -> QuadConstraints:
    """Concave quadratic minorants of the expected SNR in the stacked layout.

    Each ordered pair ``(l, l2)`` with ``l != l2`` contributes
    ``Re{b e^{j nu}}``; the two orders combine into
    ``2 |b| cos(nu + arg b)``, whose non-negative weight always takes the
    lower surrogate. Diagonal pairs are layout independent. ``floor`` is the
    per-point scattering floor (constant in the layout).
    """
    ref = np.asarray(layout_ref, dtype=float).reshape(-1, 2)
    m = len(ref)
    n_pts, n_pan, _ = expansion.b.shape
    lam = expansion.wavelength
    p_bar = expansion.p_bar

    const = p_bar * m * np.einsum("gll->g", expansion.b).real + np.asarray(floor, dtype=float)
    lin = np.zeros((n_pts, 2 * m))
    curv = np.zeros(n_pts)
    for l1 in range(n_pan):
        for l2 in range(l1 + 1, n_pan):
            nu_params = (expansion.alpha[l1, l2], expansion.omega[l1, l2])
            psi = curvature_bound(nu_params, lam)
            weight = 2.0 * p_bar * np.abs(expansion.b[:, l1, l2])
            phase = np.angle(expansion.b[:, l1, l2])
            # Z_lb(t) = Z0 + g.(t - r) - psi/2 |t - r|^2, expanded per antenna
            vals, grads = z_value_grad(nu_params, ref[None, :, :], lam, phase[:, None])
            gr = grads + psi * ref[None, :, :]
            offs = vals - np.sum(grads * ref, axis=-1) - 0.5 * psi * np.sum(ref * ref, axis=-1)
            const += weight * offs.sum(axis=1)
            lin += weight[:, None] * gr.reshape(n_pts, 2 * m)
            curv += weight * psi
    return QuadConstraints(const, lin, curvature=curv)


def evaluate_quad(constraints: QuadConstraints, x) -> np.ndarray:
    return constraints.values(np.asarray(x, dtype=float).ravel())


@dataclass(frozen=True)
class LinearizedDistance:
    pair: tuple[int, int]
    constant: float
    gradient: np.ndarray

    def __call__(self, t_m, t_q) -> float:
        diff = np.asarray(t_m, dtype=float) - np.asarray(t_q, dtype=float)
        return float(self.constant + self.gradient @ diff)


def distance_lb(t_m_ref, t_q_ref, pair=(0, 1)) -> LinearizedDistance:
    """First-order minorant of ``|t_m - t_q|^2`` at the reference pair."""
    delta = np.asarray(t_m_ref, dtype=float) - np.asarray(t_q_ref, dtype=float)
    if not np.any(delta):
        raise ValueError("degenerate pair linearization")
    return LinearizedDistance(tuple(pair), -float(delta @ delta), 2.0 * delta)


def separate_coincident(layout, spacing: float) -> np.ndarray:
    """Nudge coincident reference antennas apart by ``spacing / 100``."""
    out = np.array(layout, dtype=float).reshape(-1, 2)
    for m in range(len(out)):
        for q in range(m):
            if not np.any(out[m] - out[q]):
                out[m, 0] += spacing / 100.0
    return out


def spacing_constraints(layout_ref, spacing: float):
    """Affine rows ``A x >= b`` enforcing linearized pairwise spacing."""
    ref = separate_coincident(layout_ref, spacing)
    m = len(ref)
    rows, rhs = [], []
    for i in range(m):
        for j in range(i + 1, m):
            lin = distance_lb(ref[i], ref[j], (i, j))
            row = np.zeros(2 * m)
            row[2 * i:2 * i + 2] = lin.gradient
            row[2 * j:2 * j + 2] = -lin.gradient
            rows.append(row)
            rhs.append(spacing ** 2 - lin.constant)
    if not rows:
        return np.zeros((0, 2 * m)), np.zeros(0)
    return np.array(rows), np.array(rhs)


@dataclass(frozen=True)
class LinearizedReflection:
    """``Omega(v) = 2 Re{coef^H v} + constant`` per point."""

    coefficient: np.ndarray
    constant: np.ndarray

    def __call__(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=complex)
        return 2.0 * np.real(self.coefficient.conj() @ v) + self.constant


def reflection_lb(form: QuadraticForm, v_ref) -> LinearizedReflection:
    v_ref = np.asarray(v_ref, dtype=complex)
    q = np.einsum("gnk,k->gn", form.q_matrix, v_ref)
    quad = np.real(q @ v_ref.conj())
    return LinearizedReflection(q, -quad + form.offset)


def reflection_lb_from_rows(phi_t_v, phi_conj, floor_diag, v_ref, offset=None) -> LinearizedReflection:
    """Same bound assembled from the cascade factor without forming ``Q``.

    ``phi_t_v[g] = Phi[g]^T v_ref`` (length ``M``), ``phi_conj[g] = conj(Phi[g])``
    scaled by ``sqrt(p_bar)``, and ``floor_diag[g]`` the diagonal floor of ``Q``.
    """
    v_ref = np.asarray(v_ref, dtype=complex)
    q = np.einsum("gnm,gm->gn", phi_conj, phi_t_v) + floor_diag * v_ref
    quad = np.sum(np.abs(phi_t_v) ** 2, axis=1) + floor_diag @ (np.abs(v_ref) ** 2)
    off = 0.0 if offset is None else offset
    return LinearizedReflection(q, -quad + off)


def reflection_constraints(lin: LinearizedReflection) -> QuadConstraints:
    """Affine constraints over the real stacking ``x = (Re v, Im v)``."""
    q = lin.coefficient
    return QuadConstraints(np.asarray(lin.constant, dtype=float),
                           2.0 * np.concatenate([q.real, q.imag], axis=1))
