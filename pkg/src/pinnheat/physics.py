"""Heat-conduction problem definition and the PINN loss terms."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import DerivBundle, eval_batch
from .network import NetworkParams, Normalization

EDGES = ("AB", "BC", "CD", "AD")


@dataclass(frozen=True)
class MaterialProps:
    k: float = 0.025      # W/mm/K
    rho: float = 7.6e-6   # kg/mm^3
    c: float = 658.0      # J/kg/K

    def __post_init__(self):
        for name in ("k", "rho", "c"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ValueError(f"material.{name} must be > 0, got {v}")

    @property
    def gamma(self) -> float:
        """Volumetric heat capacity rho * c (J/mm^3/K)."""
        return self.rho * self.c


@dataclass(frozen=True)
class SourceSpec:
    q0: float = 5.0                 # W/mm^3
    r0: float = 1.0                 # mm
    velocity: float = 2.0           # mm/s
    start: tuple[float, float] = (0.0, 5.0)
    direction: tuple[float, float] = (1.0, 0.0)

    def __post_init__(self):
        if not (np.isfinite(self.q0) and self.q0 >= 0):
            raise ValueError(f"source.q0 must be >= 0, got {self.q0}")
        if not (np.isfinite(self.r0) and self.r0 > 0):
            raise ValueError(f"source.r0 must be > 0, got {self.r0}")
        if abs(np.hypot(*self.direction) - 1.0) > 1e-12:
            raise ValueError(f"source.direction must be a unit vector, got {self.direction}")


@dataclass(frozen=True)
class DomainSpec:
    """Rectangle [0, L] x [0, W] with corners A=(0,0), B=(L,0), C=(L,W), D=(0,W).

    Edge ids: ``AB`` (y=0), ``BC`` (x=L), ``CD`` (y=W), ``AD`` (x=0).
    """

    length: float = 20.0
    width: float = 10.0
    dirichlet_edges: tuple[str, ...] = ("AD",)
    dirichlet_value: float = 298.0
    # flux density k grad(u).n on each Neumann edge (W/mm^2)
    neumann_flux: dict = field(default_factory=lambda: {"AB": 0.001, "BC": 0.001, "CD": 0.001})
    path: tuple[tuple[float, float], tuple[float, float]] | None = None

    def __post_init__(self):
        if not (self.length > 0 and self.width > 0):
            raise ValueError("domain length and width must be > 0")
        d, n = set(self.dirichlet_edges), set(self.neumann_flux)
        unknown = (d | n) - set(EDGES)
        if unknown:
            raise ValueError(f"unknown edge ids {sorted(unknown)}; use {EDGES}")
        if d & n:
            raise ValueError(f"edges {sorted(d & n)} are both Dirichlet and Neumann")
        if d | n != set(EDGES):
            raise ValueError(f"edges {sorted(set(EDGES) - d - n)} have no boundary condition")
        if self.path is None:
            mid = self.width / 2.0
            object.__setattr__(self, "path", ((0.0, mid), (self.length, mid)))

    def contains(self, x, y, strict: bool = False):
        x, y = np.asarray(x), np.asarray(y)
        if strict:
            return (x > 0) & (x < self.length) & (y > 0) & (y < self.width)
        return (x >= 0) & (x <= self.length) & (y >= 0) & (y <= self.width)


@dataclass(frozen=True)
class LossWeights:
    lambda_ic: float = 250.0
    lambda_bc: float = 250.0
    lambda_r: float = 1000.0

    def __post_init__(self):
        if min(self.lambda_ic, self.lambda_bc, self.lambda_r) < 0:
            raise ValueError("loss weights must be >= 0")


@dataclass
class InitialConditionData:
    points: np.ndarray   # (N, 3), common t
    targets: np.ndarray  # (N,)

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=np.float64))
        self.targets = np.asarray(self.targets, dtype=np.float64).reshape(-1)
        if self.points.shape[0] == 0:
            raise ValueError("initial-condition data is empty")
        if self.points.shape[0] != self.targets.shape[0]:
            raise ValueError("points and targets differ in length")
        if np.ptp(self.points[:, 2]) != 0:
            raise ValueError("initial-condition points must share one time")

    @property
    def t(self) -> float:
        return float(self.points[0, 2])


def source_center(src: SourceSpec, t):
    t = np.asarray(t, dtype=np.float64)
    x = src.start[0] + src.velocity * t * src.direction[0]
    y = src.start[1] + src.velocity * t * src.direction[1]
    return x, y


def source_value(src: SourceSpec, pts) -> np.ndarray:
    """Gaussian power density Q0 exp(-r^2 / r0^2) at points (x, y, t)."""
    pts = np.asarray(pts, dtype=np.float64)
    cx, cy = source_center(src, pts[..., 2])
    r2 = (pts[..., 0] - cx) ** 2 + (pts[..., 1] - cy) ** 2
    return src.q0 * np.exp(-r2 / src.r0 ** 2)


def pde_residual(b: DerivBundle, m: MaterialProps, f, k=None):
    """gamma u_t - k (u_xx + u_yy) - f; ``k`` may be given per point."""
    k = m.k if k is None else k
    return m.gamma * b.du_dt - k * (b.d2u_dx2 + b.d2u_dy2) - f


# ---------------------------------------------------------------------------
# loss terms (PointwiseLoss implementations)

def _nonempty(points, what):
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if points.shape[0] == 0 or points.size == 0:
        raise ValueError(f"{what}: empty batch")
    return points


class ResidualTerm:
    order = 2

    def __init__(self, points, material: MaterialProps, source_values):
        self.points = _nonempty(points, "residual loss")
        self.material = material
        self.f = np.broadcast_to(np.asarray(source_values, dtype=np.float64), self.points.shape[:1])

    @classmethod
    def for_source(cls, points, material, src: SourceSpec):
        points = _nonempty(points, "residual loss")
        return cls(points, material, source_value(src, points))

    def value_and_cotangent(self, b):
        r = pde_residual(b, self.material, self.f)
        n = r.shape[0]
        g = 2.0 * r / n
        k = self.material.k
        return float(np.mean(r * r)), DerivBundle(
            u=None, du_dt=self.material.gamma * g, d2u_dx2=-k * g, d2u_dy2=-k * g)


class ValueTerm:
    """Mean squared mismatch between network temperature and targets."""
    order = 0

    def __init__(self, points, targets, what="value loss"):
        self.points = _nonempty(points, what)
        self.targets = np.broadcast_to(np.asarray(targets, dtype=np.float64), self.points.shape[:1])

    def value_and_cotangent(self, b):
        e = b.u - self.targets
        return float(np.mean(e * e)), DerivBundle(u=2.0 * e / e.shape[0])


class NeumannTerm:
    """Mean squared mismatch of the conductive flux k grad(u).n against targets."""
    order = 1

    def __init__(self, points, normals, flux, k: float):
        self.points = _nonempty(points, "Neumann loss")
        self.normals = np.atleast_2d(np.asarray(normals, dtype=np.float64))
        if self.normals.shape != (self.points.shape[0], 2):
            raise ValueError("need one 2D normal per boundary point")
        if np.any(np.abs(np.hypot(self.normals[:, 0], self.normals[:, 1]) - 1.0) > 1e-12):
            raise ValueError("boundary normals must have unit length")
        self.flux = np.broadcast_to(np.asarray(flux, dtype=np.float64), self.points.shape[:1])
        self.k = k

    def value_and_cotangent(self, b):
        nx, ny = self.normals[:, 0], self.normals[:, 1]
        e = self.k * (b.du_dx * nx + b.du_dy * ny) - self.flux
        g = 2.0 * e / e.shape[0]
        return float(np.mean(e * e)), DerivBundle(u=None, du_dx=self.k * nx * g, du_dy=self.k * ny * g)


def _term_value(net, norm, term) -> float:
    b = eval_batch(net, norm, term.points, order=term.order)
    return term.value_and_cotangent(b)[0]


def residual_loss(net: NetworkParams, norm: Normalization, m: MaterialProps,
                  src: SourceSpec, batch) -> float:
    return _term_value(net, norm, ResidualTerm.for_source(batch, m, src))


def ic_loss(net: NetworkParams, norm: Normalization, data: InitialConditionData) -> float:
    return _term_value(net, norm, ValueTerm(data.points, data.targets, "initial-condition loss"))


def bc_loss_dirichlet(net: NetworkParams, norm: Normalization, points, targets) -> float:
    return _term_value(net, norm, ValueTerm(points, targets, "Dirichlet loss"))


def bc_loss_neumann(net: NetworkParams, norm: Normalization, m: MaterialProps,
                    points, normals, flux) -> float:
    return _term_value(net, norm, NeumannTerm(points, normals, flux, m.k))


def total_loss(weights: LossWeights, l_ic: float, l_bc: float, l_r: float) -> float:
    """lambda_ic L_ic + lambda_bc L_bc + lambda_r L_r (L_bc = Dirichlet + Neumann)."""
    return weights.lambda_ic * l_ic + weights.lambda_bc * l_bc + weights.lambda_r * l_r
