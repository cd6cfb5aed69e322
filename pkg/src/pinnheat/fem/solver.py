"""Jacobi-preconditioned CG, backward-Euler time stepping, and interpolation."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .mesh import FemMesh

log = logging.getLogger(__name__)


class SolverError(RuntimeError):
    def __init__(self, msg, residual=None):
        super().__init__(msg)
        self.residual = residual


def cg_solve(A, b, tol: float = 1e-10, x0=None, maxiter: int | None = None) -> np.ndarray:
    """Solve SPD ``A x = b`` to ``||Ax - b|| / ||b|| < tol`` with a Jacobi preconditioner."""
    b = np.asarray(b, dtype=np.float64)
    n = b.shape[0]
    maxiter = 10 * n if maxiter is None else maxiter
    diag = A.diagonal() if sp.issparse(A) else np.diag(A)
    if np.any(diag <= 0):
        raise SolverError("matrix diagonal must be positive for Jacobi preconditioning")
    inv_d = 1.0 / diag
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros(n)
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=np.float64)
    r = b - A @ x
    z = inv_d * r
    p = z.copy()
    rz = r @ z
    for _ in range(maxiter + 1):
        rel = np.linalg.norm(r) / bnorm
        if rel < tol:
            return x
        Ap = A @ p
        alpha = rz / (p @ Ap)
        x += alpha * p
        r -= alpha * Ap
        z = inv_d * r
        rz_new = r @ z
        p *= rz_new / rz
        p += z
        rz = rz_new
    raise SolverError(f"CG did not converge in {maxiter} iterations (relative residual {rel:.3e})", rel)


@dataclass
class FemSolution:
    mesh: FemMesh
    times: np.ndarray   # (n_steps + 1,)
    u: np.ndarray       # (n_steps + 1, n_nodes)

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0]) if len(self.times) > 1 else 0.0


def backward_euler_solve(M, K, load: Callable[[float], np.ndarray], dirichlet_nodes,
                         dirichlet_value, u0, dt: float, t_end: float, mesh: FemMesh | None = None,
                         tol: float = 1e-10) -> FemSolution:
    """Step ``(M + dt K) u_{n+1} = M u_n + dt F(t_{n+1})`` from 0 to ``t_end``.

    Dirichlet rows/columns are eliminated; ``dirichlet_value`` is a scalar or
    a callable ``(t) -> values at dirichlet_nodes``.
    """
    if not dt > 0:
        raise ValueError(f"time step must be > 0, got {dt}")
    n = M.shape[0]
    u0 = np.asarray(u0, dtype=np.float64)
    if u0.shape != (n,):
        raise ValueError(f"initial vector has length {u0.shape}, expected {n}")
    n_steps = max(1, int(round(t_end / dt)))
    times = dt * np.arange(n_steps + 1)

    fixed = np.asarray(dirichlet_nodes, dtype=np.int64)
    free = np.setdiff1d(np.arange(n), fixed)
    A = (M + dt * K).tocsr()
    A_ff = A[free][:, free].tocsr()
    A_fd = A[free][:, fixed].tocsr()
    M_f = M.tocsr()[free]

    def bc_values(t):
        if callable(dirichlet_value):
            return np.asarray(dirichlet_value(t), dtype=np.float64)
        return np.full(fixed.shape[0], float(dirichlet_value))

    U = np.empty((n_steps + 1, n))
    U[0] = u0
    u = u0.copy()
    for step in range(1, n_steps + 1):
        t = times[step]
        ud = bc_values(t)
        rhs = M_f @ u + dt * load(t)[free] - A_fd @ ud
        try:
            uf = cg_solve(A_ff, rhs, tol=tol, x0=u[free])
        except SolverError as exc:
            raise SolverError(f"step {step} (t={t:.4g} s): {exc}", exc.residual) from exc
        u = np.empty(n)
        u[free] = uf
        u[fixed] = ud
        U[step] = u
    return FemSolution(mesh, times, U)


def locate(mesh: FemMesh, xy: np.ndarray):
    """Containing triangle and barycentric coordinates for points (N, 2)."""
    xy = np.atleast_2d(np.asarray(xy, dtype=np.float64))
    tol = 1e-12 * max(mesh.length, mesh.width)
    outside = ((xy[:, 0] < -tol) | (xy[:, 0] > mesh.length + tol)
               | (xy[:, 1] < -tol) | (xy[:, 1] > mesh.width + tol))
    if np.any(outside):
        raise ValueError(f"point {tuple(xy[np.argmax(outside)])} lies outside the mesh")
    hx, hy = mesh.length / mesh.nx, mesh.width / mesh.ny
    i = np.clip(np.floor(xy[:, 0] / hx).astype(np.int64), 0, mesh.nx - 1)
    j = np.clip(np.floor(xy[:, 1] / hy).astype(np.int64), 0, mesh.ny - 1)
    fx = xy[:, 0] / hx - i
    fy = xy[:, 1] / hy - j
    cell = j * mesh.nx + i
    upper = fy > fx
    tri = 2 * cell + upper
    # lower triangle (n00, n10, n11): bary = (1 - fx, fx - fy, fy)
    # upper triangle (n00, n11, n01): bary = (1 - fy, fx, fy - fx)
    bary = np.where(upper[:, None],
                    np.column_stack([1.0 - fy, fx, fy - fx]),
                    np.column_stack([1.0 - fx, fx - fy, fy]))
    return tri, bary


def interpolate(sol: FemSolution, pts) -> np.ndarray:
    """Barycentric in space, linear in time, at points (x, y, t)."""
    pts = np.asarray(pts, dtype=np.float64)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    t = pts[:, 2]
    t0, t1 = sol.times[0], sol.times[-1]
    eps = 1e-9 * max(1.0, abs(t1))
    if np.any((t < t0 - eps) | (t > t1 + eps)):
        raise ValueError(f"time outside the solution range [{t0}, {t1}]")
    tri, bary = locate(sol.mesh, pts[:, :2])
    nodes = sol.mesh.triangles[tri]                      # (N, 3)
    s = np.clip((t - t0) / sol.dt, 0, len(sol.times) - 1) if sol.dt else np.zeros_like(t)
    k = np.minimum(np.floor(s).astype(np.int64), len(sol.times) - 2) if len(sol.times) > 1 \
        else np.zeros_like(t, dtype=np.int64)
    w = s - k
    ua = np.einsum("ni,ni->n", sol.u[k[:, None], nodes], bary)
    if len(sol.times) == 1:
        out = ua
    else:
        ub = np.einsum("ni,ni->n", sol.u[k[:, None] + 1, nodes], bary)
        out = (1.0 - w) * ua + w * ub
    return out[0] if single else out
