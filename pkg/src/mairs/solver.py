"""Max-min programs over concave quadratics, solved by a log-barrier method.

The program is

    maximize   eta
    subject to f_i(x) = c_i + g_i.x - x.H_i.x / 2 >= eta     (objective set)
               lo <= x <= hi,  A x >= b,  x_a^2 + x_b^2 <= r^2  (hard set)

with every ``H_i`` positive semidefinite. The feasible ``x`` region must be
bounded by the box and/or disks. The barrier method returns a duality-gap
certificate: the true optimum lies in ``[eta*, eta* + gap]``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

logger = logging.getLogger(__name__)

OPTIMAL = "optimal"
MAX_ITER = "max_iter"
INFEASIBLE = "infeasible"

DEFAULT_TOL_OBJ = 1e-6
DEFAULT_TOL_FEAS = 1e-8
DEFAULT_MAX_ITER = 500

_MAX_CENTERING = 50


@dataclass(frozen=True)
class QuadConstraints:
    """Batch of concave quadratics ``c + g.x - x.H.x / 2``.

    ``H`` is either ``curvature[i] * I`` or an explicit ``hessians[i]``;
    both absent means affine.
    """

    constant: np.ndarray
    linear: np.ndarray
    curvature: np.ndarray | None = None
    hessians: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "constant", np.atleast_1d(np.asarray(self.constant, dtype=float)))
        object.__setattr__(self, "linear", np.atleast_2d(np.asarray(self.linear, dtype=float)))
        if self.curvature is not None:
            object.__setattr__(self, "curvature", np.atleast_1d(np.asarray(self.curvature, dtype=float)))
        if self.hessians is not None:
            object.__setattr__(self, "hessians", np.asarray(self.hessians, dtype=float))

    def __len__(self) -> int:
        return self.constant.shape[0]

    @property
    def dim(self) -> int:
        return self.linear.shape[1]

    def values(self, x: np.ndarray) -> np.ndarray:
        out = self.constant + self.linear @ x
        if self.curvature is not None:
            out = out - 0.5 * self.curvature * (x @ x)
        if self.hessians is not None:
            out = out - 0.5 * np.einsum("i,kij,j->k", x, self.hessians, x)
        return out

    def gradients(self, x: np.ndarray) -> np.ndarray:
        out = self.linear.copy()
        if self.curvature is not None:
            out -= self.curvature[:, None] * x[None, :]
        if self.hessians is not None:
            out -= self.hessians @ x
        return out

    def neg_hessian_sum(self, weights: np.ndarray) -> np.ndarray | None:
        n = self.dim
        out = None
        if self.curvature is not None:
            out = np.eye(n) * float(weights @ self.curvature)
        if self.hessians is not None:
            h = np.einsum("k,kij->ij", weights, self.hessians)
            out = h if out is None else out + h
        return out

    def scaled(self, factor: float) -> "QuadConstraints":
        return QuadConstraints(
            self.constant * factor, self.linear * factor,
            None if self.curvature is None else self.curvature * factor,
            None if self.hessians is None else self.hessians * factor)

    def stack(self, other: "QuadConstraints") -> "QuadConstraints":
        n = self.dim

        def full(qc):
            if qc.curvature is None and qc.hessians is None:
                return None
            h = np.zeros((len(qc), n, n))
            if qc.curvature is not None:
                h += qc.curvature[:, None, None] * np.eye(n)
            if qc.hessians is not None:
                h += qc.hessians
            return h

        if self.hessians is None and other.hessians is None:
            if self.curvature is None and other.curvature is None:
                curv = None
            else:
                curv = np.concatenate([
                    np.zeros(len(self)) if self.curvature is None else self.curvature,
                    np.zeros(len(other)) if other.curvature is None else other.curvature])
            return QuadConstraints(np.concatenate([self.constant, other.constant]),
                                   np.vstack([self.linear, other.linear]), curv)
        hs = [full(self), full(other)]
        hs = [np.zeros((len(q), n, n)) if h is None else h for q, h in zip((self, other), hs)]
        return QuadConstraints(np.concatenate([self.constant, other.constant]),
                               np.vstack([self.linear, other.linear]), None, np.concatenate(hs))


@dataclass(frozen=True)
class MaxMinProgram:
    objective: QuadConstraints
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None
    affine_a: np.ndarray | None = None
    affine_b: np.ndarray | None = None
    disks: np.ndarray | None = None
    disk_radius: float = 1.0

    @property
    def dim(self) -> int:
        return self.objective.dim

    def hard_violation(self, x: np.ndarray) -> float:
        viol = 0.0
        if self.lower is not None:
            viol = max(viol, float(np.max(self.lower - x, initial=0.0)))
        if self.upper is not None:
            viol = max(viol, float(np.max(x - self.upper, initial=0.0)))
        if self.affine_a is not None and len(self.affine_b):
            viol = max(viol, float(np.max(self.affine_b - self.affine_a @ x, initial=0.0)))
        if self.disks is not None and len(self.disks):
            r = np.hypot(x[self.disks[:, 0]], x[self.disks[:, 1]])
            viol = max(viol, float(np.max(r - self.disk_radius, initial=0.0)))
        return viol

    def objective_value(self, x: np.ndarray) -> float:
        return float(np.min(self.objective.values(x)))


@dataclass
class SolverReport:
    x: np.ndarray
    eta: float
    violation: float
    iterations: int
    status: str
    gap: float = np.inf
    history: list[float] = field(default_factory=list)


# -- barrier machinery ---------------------------------------------------------

class _Affine:
    def __init__(self, a: np.ndarray, b: np.ndarray):
        self.a = np.atleast_2d(a)
        self.b = np.asarray(b, dtype=float)

    def __len__(self):
        return len(self.b)

    def values(self, x):
        return self.a @ x - self.b

    def gradients(self, x):
        return self.a

    def neg_hessian_sum(self, w):
        return None


class _Quad:
    def __init__(self, qc: QuadConstraints):
        self.qc = qc

    def __len__(self):
        return len(self.qc)

    def values(self, x):
        return self.qc.values(x)

    def gradients(self, x):
        return self.qc.gradients(x)

    def neg_hessian_sum(self, w):
        return self.qc.neg_hessian_sum(w)


class _Disks:
    def __init__(self, pairs: np.ndarray, radius: float, n: int):
        self.pairs = np.asarray(pairs, dtype=int)
        self.r2 = radius * radius
        self.n = n

    def __len__(self):
        return len(self.pairs)

    def values(self, x):
        return self.r2 - x[self.pairs[:, 0]] ** 2 - x[self.pairs[:, 1]] ** 2

    def gradients(self, x):
        g = np.zeros((len(self.pairs), self.n))
        rows = np.arange(len(self.pairs))
        g[rows, self.pairs[:, 0]] = -2 * x[self.pairs[:, 0]]
        g[rows, self.pairs[:, 1]] = -2 * x[self.pairs[:, 1]]
        return g

    def neg_hessian_sum(self, w):
        d = np.zeros(self.n)
        np.add.at(d, self.pairs[:, 0], 2 * w)
        np.add.at(d, self.pairs[:, 1], 2 * w)
        return np.diag(d)


def _hard_blocks(program: MaxMinProgram) -> list:
    n = program.dim
    blocks = []
    rows, rhs = [], []
    eye = np.eye(n)
    if program.lower is not None:
        finite = np.isfinite(program.lower)
        rows.append(eye[finite])
        rhs.append(program.lower[finite])
    if program.upper is not None:
        finite = np.isfinite(program.upper)
        rows.append(-eye[finite])
        rhs.append(-program.upper[finite])
    if program.affine_a is not None and len(program.affine_b):
        a = np.atleast_2d(program.affine_a)
        norms = np.linalg.norm(a, axis=1)
        if np.any(norms == 0):
            raise ValueError("affine constraint with zero row")
        rows.append(a / norms[:, None])
        rhs.append(np.asarray(program.affine_b, dtype=float) / norms)
    if rows:
        blocks.append(_Affine(np.vstack(rows), np.concatenate(rhs)))
    if program.disks is not None and len(program.disks):
        blocks.append(_Disks(program.disks, program.disk_radius, n))
    return blocks


def _check_bounded(program: MaxMinProgram) -> None:
    n = program.dim
    bounded = np.zeros(n, dtype=bool)
    if program.lower is not None and program.upper is not None:
        bounded |= np.isfinite(program.lower) & np.isfinite(program.upper)
    if program.disks is not None and len(program.disks):
        bounded[np.asarray(program.disks).ravel()] = True
    if not bounded.all():
        raise ValueError("every coordinate needs a finite box or disk bound")


def _barrier(obj_blocks, hard_blocks, n, x0, eta0, tol_gap, max_iter, t0=1.0, mu=10.0,
             stop_above=None):
    """Minimise ``-t*eta - sum(log slacks)`` along the central path."""
    m = sum(len(b) for b in obj_blocks) + sum(len(b) for b in hard_blocks)
    z = np.append(x0, eta0)
    t = t0
    iters = 0
    history: list[float] = []

    def slacks(zz):
        x, eta = zz[:n], zz[n]
        return ([b.values(x) - eta for b in obj_blocks], [b.values(x) for b in hard_blocks])

    def fval(zz, tt):
        so, sh = slacks(zz)
        allv = np.concatenate(so + sh) if (so or sh) else np.zeros(0)
        if np.any(allv <= 0):
            return np.inf
        return -tt * zz[n] - np.sum(np.log(allv))

    converged = False
    while True:
        # centering
        steps = 0
        while iters < max_iter:
            x, eta = z[:n], z[n]
            grad = np.zeros(n + 1)
            grad[n] = -t
            hess = np.zeros((n + 1, n + 1))
            for blk in obj_blocks:
                s = blk.values(x) - eta
                gx = blk.gradients(x)
                jac = np.hstack([gx, -np.ones((len(s), 1))])
                inv = 1.0 / s
                grad -= jac.T @ inv
                hess += (jac * inv[:, None] ** 2).T @ jac
                nh = blk.neg_hessian_sum(inv)
                if nh is not None:
                    hess[:n, :n] += nh
            for blk in hard_blocks:
                s = blk.values(x)
                gx = blk.gradients(x)
                inv = 1.0 / s
                grad[:n] -= gx.T @ inv
                hess[:n, :n] += (gx * inv[:, None] ** 2).T @ gx
                nh = blk.neg_hessian_sum(inv)
                if nh is not None:
                    hess[:n, :n] += nh
            if not (np.all(np.isfinite(hess)) and np.all(np.isfinite(grad))):
                break
            try:
                step = -linalg.solve(hess, grad, assume_a="pos")
            except (linalg.LinAlgError, ValueError):
                step = -np.linalg.lstsq(hess, grad, rcond=None)[0]
            decrement = float(-grad @ step)
            iters += 1
            if decrement / 2 <= 1e-10 or not np.isfinite(decrement):
                break
            f0 = fval(z, t)
            alpha = 1.0
            while alpha > 1e-14:
                cand = z + alpha * step
                fc = fval(cand, t)
                if fc <= f0 - 0.25 * alpha * decrement:
                    break
                alpha *= 0.5
            else:
                break
            z = cand
            steps += 1
            # progress below round-off of the barrier value: centered as far as it goes
            if f0 - fc <= 1e-13 * max(1.0, abs(f0)) or steps >= _MAX_CENTERING:
                break
            if stop_above is not None and z[n] > stop_above:
                return z, iters, True, history, t
        history.append(float(z[n]))
        logger.debug("t=%g iters=%d eta=%g", t, iters, z[n])
        if m / t <= tol_gap:
            converged = True
            break
        if iters >= max_iter:
            break
        t *= mu
    return z, iters, converged, history, t


def _phase_one(hard_blocks, n, x0, max_iter):
    """Find a strictly interior point of the hard set, or report its absence."""
    cap = _Affine(np.zeros((1, n)), np.array([-1.0]))
    vals = np.concatenate([b.values(x0) for b in hard_blocks])
    s0 = min(float(vals.min()), 1.0) - 1.0
    z, iters, _, _, _ = _barrier(list(hard_blocks) + [cap], [], n, x0, s0, 1e-9, max_iter,
                              stop_above=1e-6)
    return z[:n], float(z[n]), iters


def solve_maxmin(program: MaxMinProgram, warm_start, tol_obj: float = DEFAULT_TOL_OBJ,
                 tol_feas: float = DEFAULT_TOL_FEAS,
                 max_iter: int = DEFAULT_MAX_ITER) -> SolverReport:
    """Maximise the smallest objective quadratic over the hard constraint set."""
    _check_bounded(program)
    n = program.dim
    x0 = np.asarray(warm_start, dtype=float).ravel().copy()
    if x0.shape != (n,):
        raise ValueError(f"warm start has shape {x0.shape}, expected ({n},)")
    hard = _hard_blocks(program)
    iters = 0
    if hard:
        min_slack = min(float(b.values(x0).min()) for b in hard if len(b))
        if min_slack <= 0:
            x_in, s, iters = _phase_one(hard, n, x0, max_iter)
            if s <= 0:
                logger.debug("no strictly feasible point (phase one s=%g)", s)
                return SolverReport(x0, program.objective_value(x0),
                                    program.hard_violation(x0), iters, INFEASIBLE)
            x0 = x_in

    f0 = program.objective.values(x0)
    # scale by value and slope so a zero objective at x0 stays well conditioned
    slope = float(np.max(np.linalg.norm(program.objective.gradients(x0), axis=1)))
    scale = max(float(np.max(np.abs(f0))), slope, 1e-12)
    obj = _Quad(program.objective.scaled(1.0 / scale))
    spread = float(np.ptp(f0)) / scale if len(f0) > 1 else 0.0
    eta0 = float(f0.min()) / scale - max(0.1, spread)
    z, more, converged, history, t = _barrier([obj], hard, n, x0, eta0, tol_obj / scale,
                                              max_iter - iters)
    iters += more
    x = z[:n]
    m = len(program.objective) + sum(len(b) for b in hard)
    gap = scale * m / t if history else np.inf
    eta = program.objective_value(x)
    viol = program.hard_violation(x)
    status = OPTIMAL if converged and viol <= tol_feas else MAX_ITER
    return SolverReport(x, eta, viol, iters, status, gap, [h * scale for h in history])


def solve_reflection_program(constraints: QuadConstraints, n_elements: int, warm_start,
                             tol_obj: float = DEFAULT_TOL_OBJ,
                             tol_feas: float = DEFAULT_TOL_FEAS,
                             max_iter: int = DEFAULT_MAX_ITER) -> SolverReport:
    """Maximise ``min_i Omega_i(v)`` over ``|v_n| <= 1``.

    ``constraints`` act on the real stacking ``(Re v, Im v)``; the returned
    report carries the complex solution.
    """
    v0 = np.asarray(warm_start, dtype=complex)
    pairs = np.column_stack([np.arange(n_elements), n_elements + np.arange(n_elements)])
    program = MaxMinProgram(constraints, disks=pairs, disk_radius=1.0)
    rep = solve_maxmin(program, np.concatenate([v0.real, v0.imag]), tol_obj, tol_feas, max_iter)
    rep.x = rep.x[:n_elements] + 1j * rep.x[n_elements:]
    return rep
