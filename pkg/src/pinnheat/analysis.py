"""Line profiles, PINN-vs-FEM comparison metrics, velocity sweeps."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .config import SimulationConfig
from .fem import FemSolution, interpolate, solve_problem
from .physics import DomainSpec, source_center
from .training import WindowSnapshot, query

Field = Callable[[np.ndarray], np.ndarray]


def as_field(source) -> Field:
    """Wrap snapshots, a FEM solution, or a callable as ``f(points (N, 3)) -> (N,)``."""
    if isinstance(source, FemSolution):
        return lambda pts: interpolate(source, pts)
    if isinstance(source, (list, tuple)) and source and isinstance(source[0], WindowSnapshot):
        return lambda pts: query(source, pts)
    if callable(source):
        return source
    raise TypeError(f"cannot evaluate a field from {type(source).__name__}")


def time_range(source) -> tuple[float, float]:
    if isinstance(source, FemSolution):
        return float(source.times[0]), float(source.times[-1])
    if isinstance(source, (list, tuple)) and source and isinstance(source[0], WindowSnapshot):
        return source[0].t0, source[-1].t1
    return -np.inf, np.inf


def _check_time(source, t):
    lo, hi = time_range(source)
    eps = 1e-9 * max(1.0, abs(hi))
    if not (lo - eps <= t <= hi + eps):
        raise ValueError(f"t={t} is outside the solution range [{lo}, {hi}]")


def extract_line_profile(source, path, n: int, t: float, domain: DomainSpec | None = None):
    """``n`` evenly spaced samples along segment ``path``; returns ``(s, temperature)``."""
    (x0, y0), (x1, y1) = path
    if domain is not None:
        inside = domain.contains(np.array([x0, x1]), np.array([y0, y1]))
        if not np.all(inside):
            raise ValueError(f"path {path} leaves the domain")
    if n < 2:
        raise ValueError("a profile needs at least 2 samples")
    _check_time(source, t)
    s = np.linspace(0.0, 1.0, n)
    pts = np.column_stack([x0 + s * (x1 - x0), y0 + s * (y1 - y0), np.full(n, float(t))])
    # pin the endpoints exactly
    pts[0, :2] = (x0, y0)
    pts[-1, :2] = (x1, y1)
    length = float(np.hypot(x1 - x0, y1 - y0))
    return s * length, as_field(source)(pts)


def probe_grid(domain: DomainSpec, nx: int, ny: int) -> np.ndarray:
    """Cell-centred (nx * ny, 2) grid strictly inside the rectangle."""
    xs = (np.arange(nx) + 0.5) * domain.length / nx
    ys = (np.arange(ny) + 0.5) * domain.width / ny
    X, Y = np.meshgrid(xs, ys)
    return np.column_stack([X.ravel(), Y.ravel()])


@dataclass
class TimeMetrics:
    t: float
    l2: float              # RMS discrepancy over the probe grid (K)
    linf: float            # max discrepancy over the probe grid (K)
    rel_l2: float          # ||a - b|| / ||b|| on the probe grid
    peak_a: float
    peak_a_xy: tuple
    peak_b: float
    peak_b_xy: tuple
    profile_rel_l2: float  # along the E-F path
    profile_peak_rel: float
    profile_s: np.ndarray = dataclasses.field(repr=False, default=None)
    profile_a: np.ndarray = dataclasses.field(repr=False, default=None)
    profile_b: np.ndarray = dataclasses.field(repr=False, default=None)


@dataclass
class ComparisonReport:
    """Per-time discrepancy between solution ``a`` (e.g. PINN) and reference ``b`` (e.g. FEM)."""

    rows: list[TimeMetrics]

    COLUMNS = ("t_s", "l2_K", "linf_K", "rel_l2", "peak_a_K", "peak_a_x_mm", "peak_a_y_mm",
               "peak_b_K", "peak_b_x_mm", "peak_b_y_mm", "profile_rel_l2", "profile_peak_rel")

    def table(self) -> np.ndarray:
        return np.array([[r.t, r.l2, r.linf, r.rel_l2, r.peak_a, *r.peak_a_xy, r.peak_b, *r.peak_b_xy,
                          r.profile_rel_l2, r.profile_peak_rel] for r in self.rows])

    def summary(self) -> str:
        out = ["   t [s]   RMS [K]   max [K]   rel L2   peak a [K]   peak b [K]   "
               "E-F rel L2   E-F peak rel"]
        for r in self.rows:
            out.append(f"{r.t:8.3f} {r.l2:9.3f} {r.linf:9.3f} {r.rel_l2:8.4f} {r.peak_a:12.2f} "
                       f"{r.peak_b:12.2f} {r.profile_rel_l2:12.4f} {r.profile_peak_rel:14.4f}")
        return "\n".join(out)


def profile_metrics(a: np.ndarray, b: np.ndarray) -> tuple[float, float]:
    """Relative L2 discrepancy and relative peak error of profile ``a`` against ``b``."""
    rel = float(np.linalg.norm(a - b) / np.linalg.norm(b))
    peak = float(abs(a.max() - b.max()) / abs(b.max()))
    return rel, peak


def compare(a, b, times: Sequence[float], domain: DomainSpec, nx: int = 41, ny: int = 21,
            profile_points: int = 201) -> ComparisonReport:
    fa, fb = as_field(a), as_field(b)
    grid = probe_grid(domain, nx, ny)
    rows = []
    for t in times:
        _check_time(a, t)
        _check_time(b, t)
        pts = np.column_stack([grid, np.full(grid.shape[0], float(t))])
        ua, ub = fa(pts), fb(pts)
        d = ua - ub
        ia, ib = int(np.argmax(ua)), int(np.argmax(ub))
        s, pa = extract_line_profile(a, domain.path, profile_points, t)
        _, pb = extract_line_profile(b, domain.path, profile_points, t)
        rel, peak = profile_metrics(pa, pb)
        rows.append(TimeMetrics(
            float(t), float(np.sqrt(np.mean(d * d))), float(np.max(np.abs(d))),
            float(np.linalg.norm(d) / np.linalg.norm(ub)),
            float(ua[ia]), tuple(grid[ia]), float(ub[ib]), tuple(grid[ib]), rel, peak, s, pa, pb))
    return ComparisonReport(rows)


def passing_time(cfg: SimulationConfig, probe=(10.0, 5.0)) -> float:
    """Time at which the source centre is closest to ``probe``."""
    src = cfg.source
    d = np.asarray(probe) - np.asarray(src.start)
    if src.velocity == 0:
        return 0.0
    return max(0.0, float(d @ np.asarray(src.direction)) / src.velocity)


def with_velocity(cfg: SimulationConfig, v: float, t_end: float | None = None,
                  dt_window: float | None = None) -> SimulationConfig:
    from .config import WindowSchedule
    src = dataclasses.replace(cfg.source, velocity=float(v))
    out = cfg.replace(source=src)
    if t_end is not None:
        dtw = dt_window if dt_window is not None else min(cfg.schedule.dt_window, t_end)
        out = out.replace(schedule=WindowSchedule(t_end, dtw),
                          fem=dataclasses.replace(cfg.fem, t_end=t_end))
    return out


def sweep_config(cfg: SimulationConfig, v: float, probe=(10.0, 5.0), window: float | None = None,
                 travel: float | None = None) -> SimulationConfig:
    """Config for a PINN run at velocity ``v`` whose windows cover the passing time.

    Windows are ``window`` seconds long, or ``travel / v`` seconds when ``travel`` (mm the
    source moves per window) is given; the run ends at the first window edge at or after
    the passing time.
    """
    if (window is None) == (travel is None):
        raise ValueError("give exactly one of window and travel")
    dtw = float(window) if travel is None else float(travel) / float(v)
    tp = passing_time(with_velocity(cfg, v), probe)
    n = max(1, int(np.ceil(tp / dtw - 1e-9)))
    # a passing time on a window edge is served by the later window, so make sure it exists
    if abs(n * dtw - tp) <= 1e-9 * max(1.0, tp):
        n += 1
    return with_velocity(cfg, v, t_end=n * dtw, dt_window=dtw)


@dataclass
class SweepResult:
    velocity: float
    t_pass: float
    probe_temperature: float


def fem_velocity_sweep(cfg: SimulationConfig, velocities=(0.5, 1.0, 2.0), probe=(10.0, 5.0),
                       h: float | None = None, dt: float | None = None) -> list[SweepResult]:
    """FEM temperature at ``probe`` when the source centre passes it, for each velocity."""
    out = []
    for v in velocities:
        c = with_velocity(cfg, v)
        tp = passing_time(c, probe)
        sol = solve_problem(c.domain, c.material, c.source, h or c.fem.h, dt or c.fem.dt, tp,
                            u0=c.boundary.initial_temperature, neumann_sign=c.boundary.neumann_sign,
                            lumped=c.fem.lumped_mass, tol=c.fem.tol)
        # time grid may stop one step short of tp after rounding
        t_eval = min(tp, float(sol.times[-1]))
        out.append(SweepResult(v, tp, float(interpolate(sol, np.array([*probe, t_eval])))))
    return out


def strictly_decreasing(values) -> bool:
    values = list(values)
    return all(a > b for a, b in zip(values, values[1:]))


def source_track_distance(source_cfg, x_peak: float, y_peak: float, t: float) -> float:
    cx, cy = source_center(source_cfg, t)
    return float(np.hypot(x_peak - cx, y_peak - cy))
