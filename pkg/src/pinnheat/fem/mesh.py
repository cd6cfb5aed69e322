"""Structured triangulation of the rectangular domain."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..physics import DomainSpec


@dataclass
class FemMesh:
    nodes: np.ndarray            # (n_nodes, 2)
    triangles: np.ndarray        # (n_tri, 3), counter-clockwise
    boundary_edges: np.ndarray   # (n_edges, 2) node pairs
    boundary_ids: np.ndarray     # (n_edges,) edge labels "AB", "BC", "CD", "AD"
    h: float
    nx: int
    ny: int
    length: float
    width: float

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    def areas(self) -> np.ndarray:
        p = self.nodes[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def edge_nodes(self, edge_id: str) -> np.ndarray:
        """Sorted unique node ids on one labelled edge."""
        return np.unique(self.boundary_edges[self.boundary_ids == edge_id])


def generate_mesh(d: DomainSpec, h: float) -> FemMesh:
    """Split an nx-by-ny grid of cells into two triangles each.

    Cell counts are ``round(L/h)`` and ``round(W/h)``, at least 1.
    """
    if not h > 0:
        raise ValueError(f"mesh size must be > 0, got {h}")
    nx = max(1, int(round(d.length / h)))
    ny = max(1, int(round(d.width / h)))
    xs = np.linspace(0.0, d.length, nx + 1)
    ys = np.linspace(0.0, d.width, ny + 1)
    X, Y = np.meshgrid(xs, ys)
    nodes = np.column_stack([X.ravel(), Y.ravel()])

    j, i = np.meshgrid(np.arange(ny), np.arange(nx), indexing="ij")
    n00 = (j * (nx + 1) + i).ravel()
    n10 = n00 + 1
    n01 = n00 + nx + 1
    n11 = n01 + 1
    # cell c -> triangles 2c (lower-right) and 2c+1 (upper-left), diagonal n00-n11
    tris = np.empty((2 * nx * ny, 3), dtype=np.int64)
    tris[0::2] = np.column_stack([n00, n10, n11])
    tris[1::2] = np.column_stack([n00, n11, n01])

    bottom = np.arange(nx + 1)
    top = ny * (nx + 1) + np.arange(nx + 1)
    left = np.arange(ny + 1) * (nx + 1)
    right = left + nx
    edges, ids = [], []
    for seq, label in ((bottom, "AB"), (right, "BC"), (top, "CD"), (left, "AD")):
        edges.append(np.column_stack([seq[:-1], seq[1:]]))
        ids.extend([label] * (len(seq) - 1))
    return FemMesh(nodes, tris, np.vstack(edges), np.array(ids), float(h), nx, ny,
                   float(d.length), float(d.width))
