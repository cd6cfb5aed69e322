"""Linear-triangle mass/stiffness matrices and load vectors."""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from ..physics import DomainSpec, MaterialProps, SourceSpec, source_value
from .mesh import FemMesh

_MASS_PATTERN = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]]) / 12.0

# mid-edge rule: points (barycentric) and the value of each hat function there
_MIDEDGE_BARY = np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]])


class DegenerateElement(ValueError):
    pass


def shape_gradients(coords: np.ndarray):
    """Constant hat-function gradients for triangles ``coords`` (n, 3, 2).

    Returns ``(grads (n, 3, 2), areas (n,))``.
    """
    x, y = coords[..., 0], coords[..., 1]
    area2 = (x[:, 1] - x[:, 0]) * (y[:, 2] - y[:, 0]) - (x[:, 2] - x[:, 0]) * (y[:, 1] - y[:, 0])
    bad = np.flatnonzero(~(area2 > 0))
    if bad.size:
        raise DegenerateElement(f"triangle {bad[0]} has non-positive area {area2[bad[0]] / 2}")
    b = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1)
    c = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1)
    grads = np.stack([b, c], axis=2) / area2[:, None, None]
    return grads, area2 / 2.0


def element_matrices(coords: np.ndarray, m: MaterialProps, lumped: bool = False):
    """Per-element stiffness k A B^T B and mass gamma A/12 [[2,1,1],...]."""
    grads, area = shape_gradients(np.asarray(coords, dtype=np.float64))
    ke = m.k * area[:, None, None] * np.einsum("eid,ejd->eij", grads, grads)
    if lumped:
        me = m.gamma * area[:, None, None] / 3.0 * np.eye(3)[None]
    else:
        me = m.gamma * area[:, None, None] * _MASS_PATTERN[None]
    return me, ke


def _scatter(mesh: FemMesh, elem: np.ndarray) -> sp.csr_matrix:
    t = mesh.triangles
    rows = np.repeat(t, 3, axis=1).ravel()
    cols = np.tile(t, (1, 3)).ravel()
    n = mesh.n_nodes
    # COO -> CSR sums duplicates in a fixed order
    return sp.coo_matrix((elem.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def assemble(mesh: FemMesh, m: MaterialProps, lumped: bool = False):
    """Global ``(M, K)`` as CSR matrices."""
    me, ke = element_matrices(mesh.nodes[mesh.triangles], m, lumped)
    return _scatter(mesh, me), _scatter(mesh, ke)


def source_load(mesh: FemMesh, f, t: float) -> np.ndarray:
    """Integrate ``f(x, y, t)`` against each hat function (mid-edge quadrature)."""
    coords = mesh.nodes[mesh.triangles]                       # (n, 3, 2)
    qp = np.einsum("qi,nid->nqd", _MIDEDGE_BARY, coords)       # (n, 3, 2)
    pts = np.concatenate([qp, np.full(qp.shape[:2] + (1,), float(t))], axis=2)
    fq = np.asarray(f(pts), dtype=np.float64)                  # (n, 3)
    area = mesh.areas()
    fe = (area / 3.0)[:, None] * (fq @ _MIDEDGE_BARY)          # (n, 3)
    return np.bincount(mesh.triangles.ravel(), weights=fe.ravel(), minlength=mesh.n_nodes)


def neumann_load(mesh: FemMesh, flux: dict) -> np.ndarray:
    """Constant flux density per edge id: q * (edge length) / 2 to each edge node."""
    out = np.zeros(mesh.n_nodes)
    for edge_id, q in flux.items():
        sel = mesh.boundary_edges[mesh.boundary_ids == edge_id]
        if q == 0 or sel.size == 0:
            continue
        seg = mesh.nodes[sel[:, 1]] - mesh.nodes[sel[:, 0]]
        half = 0.5 * q * np.hypot(seg[:, 0], seg[:, 1])
        out += np.bincount(sel.ravel(), weights=np.repeat(half, 2), minlength=mesh.n_nodes)
    return out


def assemble_load(mesh: FemMesh, src: SourceSpec, flux: dict, t: float) -> np.ndarray:
    return source_load(mesh, lambda p: source_value(src, p), t) + neumann_load(mesh, flux)


def dirichlet_nodes(mesh: FemMesh, d: DomainSpec) -> np.ndarray:
    if not d.dirichlet_edges:
        return np.zeros(0, dtype=np.int64)
    return np.unique(np.concatenate([mesh.edge_nodes(e) for e in d.dirichlet_edges]))
