"""Manufactured-solution checks for the FEM solver."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..physics import DomainSpec, MaterialProps
from .assembly import _MIDEDGE_BARY, assemble, dirichlet_nodes, source_load
from .mesh import FemMesh, generate_mesh
from .solver import FemSolution, backward_euler_solve


@dataclass(frozen=True)
class ManufacturedSolution:
    """u = base + t^p sin(pi x / L) sin(pi y / W), equal to ``base`` on the whole boundary.

    With p = 1 backward Euler is exact in time, so only the spatial error remains.
    """

    length: float
    width: float
    material: MaterialProps
    base: float = 298.0
    time_power: int = 1

    def _modes(self, x, y):
        return np.sin(np.pi * x / self.length) * np.sin(np.pi * y / self.width)

    def exact(self, pts):
        pts = np.asarray(pts, dtype=np.float64)
        return self.base + pts[..., 2] ** self.time_power * self._modes(pts[..., 0], pts[..., 1])

    def source(self, pts):
        """gamma u_t - k lap(u)."""
        pts = np.asarray(pts, dtype=np.float64)
        s = self._modes(pts[..., 0], pts[..., 1])
        t, p = pts[..., 2], self.time_power
        lam = np.pi ** 2 * (1.0 / self.length ** 2 + 1.0 / self.width ** 2)
        return self.material.gamma * p * t ** (p - 1) * s + self.material.k * t ** p * lam * s


def l2_error(mesh: FemMesh, u_h: np.ndarray, exact, t: float) -> float:
    """L2 norm of (u_h - exact(., t)) with the mid-edge rule per triangle."""
    coords = mesh.nodes[mesh.triangles]
    qp = np.einsum("qi,nid->nqd", _MIDEDGE_BARY, coords)
    pts = np.concatenate([qp, np.full(qp.shape[:2] + (1,), float(t))], axis=2)
    uq = np.einsum("qi,ni->nq", _MIDEDGE_BARY, u_h[mesh.triangles])
    err2 = (uq - exact(pts)) ** 2
    return float(np.sqrt(np.sum(mesh.areas() / 3.0 * err2.sum(axis=1))))


def solve_manufactured(domain: DomainSpec, material: MaterialProps, h: float, dt: float,
                       t_end: float, time_power: int = 1) -> tuple[FemSolution, ManufacturedSolution]:
    """All four edges held at the base value; starts from the exact u(., 0)."""
    mms = ManufacturedSolution(domain.length, domain.width, material, time_power=time_power)
    mesh = generate_mesh(domain, h)
    M, K = assemble(mesh, material)
    fixed = np.unique(mesh.boundary_edges)
    u0 = mms.exact(np.column_stack([mesh.nodes, np.zeros(mesh.n_nodes)]))
    sol = backward_euler_solve(M, K, lambda t: source_load(mesh, mms.source, t), fixed, mms.base,
                               u0, dt, t_end, mesh=mesh)
    return sol, mms


def spatial_convergence(domain: DomainSpec, material: MaterialProps, hs=(1.0, 0.5, 0.25),
                        dt: float = 0.01, t_end: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """L2 errors at ``t_end`` for each mesh size and the observed orders between them."""
    errors = []
    for h in hs:
        sol, mms = solve_manufactured(domain, material, h, dt, t_end)
        errors.append(l2_error(sol.mesh, sol.u[-1], mms.exact, sol.times[-1]))
    errors = np.array(errors)
    hs = np.asarray(hs, dtype=np.float64)
    orders = np.log(errors[:-1] / errors[1:]) / np.log(hs[:-1] / hs[1:])
    return errors, orders


def _zero(pts):
    return np.zeros(np.shape(pts)[:-1])


def temporal_convergence(domain: DomainSpec, material: MaterialProps, h: float = 1.0,
                         dts=(0.2, 0.1, 0.05, 0.025), t_end: float = 1.0):
    """Self-convergence in time on a fixed mesh with u ~ t^2.

    Errors are L2 norms of the difference between successive step sizes, so the
    spatial error cancels. Returns ``(differences, orders)``.
    """
    finals = []
    mesh = None
    for dt in dts:
        sol, _ = solve_manufactured(domain, material, h, dt, t_end, time_power=2)
        mesh = sol.mesh
        finals.append(sol.u[-1])
    diffs = np.array([l2_error(mesh, finals[i] - finals[i + 1], _zero, t_end)
                      for i in range(len(dts) - 1)])
    ratios = np.asarray(dts[:-1], dtype=np.float64) / np.asarray(dts[1:], dtype=np.float64)
    orders = np.log(diffs[:-1] / diffs[1:]) / np.log(ratios[:-1])
    return diffs, orders


__all__ = ["ManufacturedSolution", "dirichlet_nodes", "l2_error", "solve_manufactured",
           "spatial_convergence", "temporal_convergence"]
