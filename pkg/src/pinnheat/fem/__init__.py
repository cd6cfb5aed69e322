"""Transient linear-triangle finite elements used as the reference solution."""
from __future__ import annotations

import numpy as np

from ..physics import DomainSpec, MaterialProps, SourceSpec, source_value
from .assembly import (DegenerateElement, assemble, assemble_load, dirichlet_nodes,
                       element_matrices, neumann_load, source_load)
from .mesh import FemMesh, generate_mesh
from .solver import FemSolution, SolverError, backward_euler_solve, cg_solve, interpolate, locate

__all__ = [
    "DegenerateElement", "FemMesh", "FemSolution", "SolverError", "assemble", "assemble_load",
    "backward_euler_solve", "cg_solve", "dirichlet_nodes", "element_matrices", "generate_mesh",
    "interpolate", "locate", "neumann_load", "solve_problem", "source_load",
]


def solve_problem(domain: DomainSpec, material: MaterialProps, source: SourceSpec,
                  h: float, dt: float, t_end: float, u0: float | None = None,
                  neumann_sign: float = 1.0, lumped: bool = False, tol: float = 1e-10) -> FemSolution:
    """Moving-source problem on ``domain`` from a uniform initial temperature."""
    mesh = generate_mesh(domain, h)
    M, K = assemble(mesh, material, lumped=lumped)
    flux = {e: neumann_sign * q for e, q in domain.neumann_flux.items()}
    f_neu = neumann_load(mesh, flux)
    u_init = domain.dirichlet_value if u0 is None else u0

    def load(t):
        return source_load(mesh, lambda p: source_value(source, p), t) + f_neu

    return backward_euler_solve(M, K, load, dirichlet_nodes(mesh, domain), domain.dirichlet_value,
                                np.full(mesh.n_nodes, float(u_init)), dt, t_end, mesh=mesh, tol=tol)

