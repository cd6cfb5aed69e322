"""Collocation point sets for one time window."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import qmc

from .physics import EDGES, DomainSpec

# outward unit normals under the A=(0,0), B=(L,0), C=(L,W), D=(0,W) convention
NORMALS = {"AB": (0.0, -1.0), "BC": (1.0, 0.0), "CD": (0.0, 1.0), "AD": (-1.0, 0.0)}


@dataclass
class BoundarySamples:
    points: np.ndarray    # (N, 3)
    normals: np.ndarray   # (N, 2)
    edge_ids: np.ndarray  # (N,) str

    def select(self, edges) -> "BoundarySamples":
        mask = np.isin(self.edge_ids, list(edges))
        return BoundarySamples(self.points[mask], self.normals[mask], self.edge_ids[mask])

    def __len__(self):
        return self.points.shape[0]


@dataclass
class CollocationBatch:
    interior: np.ndarray
    boundary: BoundarySamples
    initial: np.ndarray


def _unit(rng, n, d, method):
    if method == "uniform":
        return rng.random((n, d))
    if method == "sobol":
        return qmc.Sobol(d, scramble=True, seed=rng).random(n)
    if method == "halton":
        return qmc.Halton(d, scramble=True, seed=rng).random(n)
    raise ValueError(f"unknown sampling method {method!r}")


def _strict_interior(rng, n, d, method):
    # unit samples with the spatial coordinates redrawn until they are off the x=0 / y=0 edges
    u = _unit(rng, n, d, method)
    bad = (u[:, 0] == 0) | (u[:, 1] == 0)
    while np.any(bad):
        u[bad, :2] = rng.random((int(bad.sum()), 2))
        bad = (u[:, 0] == 0) | (u[:, 1] == 0)
    return u


def sample_interior(d: DomainSpec, window, n: int, seed, method: str = "uniform") -> np.ndarray:
    """``n`` points uniform over the open rectangle times ``[t0, t1]``."""
    t0, t1 = window
    if not t1 > t0:
        raise ValueError(f"window must have t1 > t0, got {window}")
    if n <= 0:
        raise ValueError("sample count must be positive")
    rng = np.random.default_rng(seed)
    u = _strict_interior(rng, n, 3, method)
    return np.column_stack([d.length * u[:, 0], d.width * u[:, 1], t0 + (t1 - t0) * u[:, 2]])


def sample_boundary(d: DomainSpec, window, n_per_edge: int, seed, edges=EDGES) -> BoundarySamples:
    """Uniform samples on each edge with the outward normal and edge id."""
    t0, t1 = window
    if n_per_edge <= 0:
        raise ValueError("sample count must be positive")
    rng = np.random.default_rng(seed)
    L, W = d.length, d.width
    pts, normals, ids = [], [], []
    for edge in edges:
        s = rng.random(n_per_edge)
        t = t0 + (t1 - t0) * rng.random(n_per_edge)
        if edge == "AB":
            xy = np.column_stack([L * s, np.zeros(n_per_edge)])
        elif edge == "BC":
            xy = np.column_stack([np.full(n_per_edge, L), W * s])
        elif edge == "CD":
            xy = np.column_stack([L * s, np.full(n_per_edge, W)])
        elif edge == "AD":
            xy = np.column_stack([np.zeros(n_per_edge), W * s])
        else:
            raise ValueError(f"unknown edge {edge!r}")
        pts.append(np.column_stack([xy, t]))
        normals.append(np.tile(NORMALS[edge], (n_per_edge, 1)))
        ids.extend([edge] * n_per_edge)
    return BoundarySamples(np.vstack(pts), np.vstack(normals), np.array(ids))


def sample_initial(d: DomainSpec, t0: float, n: int, seed, method: str = "uniform") -> np.ndarray:
    """``n`` interior points at time ``t0``."""
    if n <= 0:
        raise ValueError("sample count must be positive")
    rng = np.random.default_rng(seed)
    u = _strict_interior(rng, n, 2, method)
    return np.column_stack([d.length * u[:, 0], d.width * u[:, 1], np.full(n, float(t0))])


def sample_window(d: DomainSpec, window, n_interior: int, n_boundary_per_edge: int,
                  n_initial: int, seed, method: str = "uniform") -> CollocationBatch:
    ss = np.random.SeedSequence(seed)
    s_int, s_bnd, s_ic = ss.spawn(3)
    return CollocationBatch(
        sample_interior(d, window, n_interior, s_int, method),
        sample_boundary(d, window, n_boundary_per_edge, s_bnd),
        sample_initial(d, window[0], n_initial, s_ic, method),
    )
