"""Adam and sequential time-window training with a warm-started network."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .autodiff import loss_gradient
from .config import SimulationConfig, TrainHyper, WindowSchedule
from .network import NetworkParams, Normalization, forward, init_network
from .physics import (DomainSpec, InitialConditionData, NeumannTerm, ResidualTerm, ValueTerm,
                      total_loss)
from .sampling import sample_boundary, sample_initial, sample_interior

__all__ = [
    "AdamState", "TrainHyper", "TrainingDiverged", "WindowSchedule", "WindowSnapshot",
    "adam_step", "query", "run_sequential", "train_window", "transfer_ic", "window_normalization",
]

log = logging.getLogger(__name__)

HISTORY_COLUMNS = ("epoch", "L_ic", "L_bc", "L_r", "total")


class TrainingDiverged(FloatingPointError):
    """Raised when the loss or its gradient stops being finite.

    Carries whatever was completed: ``history`` for the current phase and
    ``snapshots`` for phases that finished.
    """

    def __init__(self, msg, history=None, snapshots=None):
        super().__init__(msg)
        self.history = history
        self.snapshots = snapshots or []


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0

    @classmethod
    def zeros(cls, n: int) -> "AdamState":
        return cls(np.zeros(n), np.zeros(n), 0)


def adam_step(params: NetworkParams, grads: NetworkParams, state: AdamState, hyper: TrainHyper,
              lr: float | None = None) -> tuple[NetworkParams, AdamState]:
    """One bias-corrected Adam update; returns new parameters and state."""
    g = grads.flat
    if g.shape != params.flat.shape or state.m.shape != g.shape:
        raise ValueError("parameter, gradient and moment shapes differ")
    if not np.all(np.isfinite(g)):
        bad = int(np.flatnonzero(~np.isfinite(g))[0])
        raise TrainingDiverged(f"non-finite gradient at parameter index {bad} (step {state.step + 1})")
    lr = hyper.learning_rate if lr is None else lr
    step = state.step + 1
    m = hyper.beta1 * state.m + (1.0 - hyper.beta1) * g
    v = hyper.beta2 * state.v + (1.0 - hyper.beta2) * (g * g)
    m_hat = m / (1.0 - hyper.beta1 ** step)
    v_hat = v / (1.0 - hyper.beta2 ** step)
    new = params.flat - lr * m_hat / (np.sqrt(v_hat) + hyper.eps)
    return NetworkParams(params.arch, new), AdamState(m, v, step)


@dataclass
class WindowSnapshot:
    index: int
    t0: float
    t1: float
    params: NetworkParams
    norm: Normalization
    final_losses: dict = field(default_factory=dict)

    def evaluate(self, pts) -> np.ndarray:
        return forward(self.params, self.norm, pts)


def window_normalization(cfg: SimulationConfig, window) -> Normalization:
    t0, t1 = window if cfg.network.window_time_normalization else (0.0, cfg.schedule.t_total)
    return Normalization.for_window(cfg.domain.length, cfg.domain.width, t0, t1,
                                    cfg.network.output_scale, cfg.network.output_offset,
                                    cfg.network.input_gain)


class _WindowProblem:
    """Loss terms for one window, resampled on demand."""

    def __init__(self, cfg: SimulationConfig, window, ic_data: InitialConditionData, seed_seq):
        self.cfg = cfg
        self.window = window
        self.ic_term = ValueTerm(ic_data.points, ic_data.targets, "initial-condition loss")
        self.seed_seq = seed_seq
        self.resample(0)

    def resample(self, round_: int):
        cfg, d = self.cfg, self.cfg.domain
        s_int, s_bnd = np.random.SeedSequence(self.seed_seq.entropy,
                                              spawn_key=self.seed_seq.spawn_key + (round_,)).spawn(2)
        interior = sample_interior(d, self.window, cfg.sampling.n_interior, s_int, cfg.sampling.method)
        self.residual = ResidualTerm.for_source(interior, cfg.material, cfg.source)
        self.interior = interior
        bnd = sample_boundary(d, self.window, cfg.sampling.n_boundary_per_edge, s_bnd)
        self.terms = [self.ic_term]
        self.weights = [cfg.loss_weights.lambda_ic]
        self.bc_slots = []
        if d.dirichlet_edges:
            dir_b = bnd.select(d.dirichlet_edges)
            self.bc_slots.append(len(self.terms))
            self.terms.append(ValueTerm(dir_b.points, d.dirichlet_value, "Dirichlet loss"))
            self.weights.append(cfg.loss_weights.lambda_bc)
        flux = cfg.neumann_flux
        if flux:
            neu = bnd.select(flux)
            q = np.array([flux[e] for e in neu.edge_ids])
            self.bc_slots.append(len(self.terms))
            self.terms.append(NeumannTerm(neu.points, neu.normals, q, cfg.material.k))
            self.weights.append(cfg.loss_weights.lambda_bc)
        self.terms.append(self.residual)
        self.weights.append(cfg.loss_weights.lambda_r)

    def minibatch(self, step: int):
        """Use the ``step``-th contiguous slice of the interior points for the residual."""
        mb = self.cfg.training.minibatch
        n = self.interior.shape[0]
        if mb == 0 or mb >= n:
            return
        n_chunks = -(-n // mb)
        lo = (step % n_chunks) * mb
        pts = self.interior[lo:lo + mb]
        self.terms[-1] = ResidualTerm.for_source(pts, self.cfg.material, self.cfg.source)

    def loss_and_grad(self, net, norm):
        total, grad, vals = loss_gradient(net, norm, self.terms, self.weights)
        l_ic = vals[0]
        l_bc = sum(vals[i] for i in self.bc_slots)
        l_r = vals[-1]
        return total, grad, (l_ic, l_bc, l_r)


def train_window(net: NetworkParams, window, ic_data: InitialConditionData, cfg: SimulationConfig,
                 seed, norm: Normalization | None = None, adam: AdamState | None = None,
                 window_index: int = 0,
                 progress: Callable[[int, tuple], None] | None = None):
    """Minimize the weighted loss over one window.

    Returns ``(net', history, adam_state)``; ``history`` is an array with
    columns ``epoch, L_ic, L_bc, L_r, total`` (one row per epoch, evaluated
    before that epoch's update).
    """
    hyper = cfg.training
    if abs(ic_data.t - window[0]) > 1e-12 * max(1.0, abs(window[0])):
        raise ValueError(f"initial-condition data at t={ic_data.t} does not start window {window}")
    norm = window_normalization(cfg, window) if norm is None else norm
    adam = AdamState.zeros(net.arch.n_params) if adam is None else adam
    seed_seq = np.random.SeedSequence(seed, spawn_key=(window_index,))
    problem = _WindowProblem(cfg, window, ic_data, seed_seq)
    history = np.zeros((hyper.epochs_per_phase, len(HISTORY_COLUMNS)))
    w = cfg.loss_weights

    for epoch in range(hyper.epochs_per_phase):
        if epoch and epoch % hyper.resample_every == 0:
            problem.resample(epoch // hyper.resample_every)
        problem.minibatch(epoch % hyper.resample_every)
        try:
            total, grad, (l_ic, l_bc, l_r) = problem.loss_and_grad(net, norm)
        except FloatingPointError as exc:
            raise TrainingDiverged(f"window {window_index}, epoch {epoch}: {exc}",
                                   history[:epoch]) from exc
        total = total_loss(w, l_ic, l_bc, l_r)
        history[epoch] = (epoch, l_ic, l_bc, l_r, total)
        if not np.isfinite(total):
            raise TrainingDiverged(f"window {window_index}, epoch {epoch}: loss is {total}",
                                   history[:epoch + 1])
        try:
            net, adam = adam_step(net, grad, adam, hyper, hyper.lr_at(epoch))
        except TrainingDiverged as exc:
            exc.history = history[:epoch + 1]
            raise
        if progress is not None:
            progress(epoch, (l_ic, l_bc, l_r, total))
    return net, history, adam


def transfer_ic(snapshot: WindowSnapshot, d: DomainSpec, n: int, seed,
                method: str = "uniform") -> InitialConditionData:
    """Initial data for the next window: the snapshot evaluated at its end time."""
    pts = sample_initial(d, snapshot.t1, n, seed, method)
    return InitialConditionData(pts, snapshot.evaluate(pts))


def initial_condition(cfg: SimulationConfig, seed) -> InitialConditionData:
    pts = sample_initial(cfg.domain, 0.0, cfg.sampling.n_initial, seed, cfg.sampling.method)
    return InitialConditionData(pts, np.full(pts.shape[0], cfg.boundary.initial_temperature))


def run_sequential(cfg: SimulationConfig, seed: int | None = None,
                   on_phase_end: Callable[[WindowSnapshot, np.ndarray], None] | None = None,
                   progress: Callable[[int, int, tuple], None] | None = None) -> list[WindowSnapshot]:
    """Train one network through every window, warm-starting each phase.

    ``on_phase_end(snapshot, history)`` is called after each phase.
    """
    seed = cfg.seed if seed is None else seed
    net = init_network(cfg.network.arch, seed, cfg.network.output_init_gain)
    ic_seeds = np.random.SeedSequence(seed, spawn_key=(10**6,))
    snapshots: list[WindowSnapshot] = []
    adam = None
    for k, window in enumerate(cfg.schedule.windows):
        ic_seed = np.random.SeedSequence(ic_seeds.entropy, spawn_key=ic_seeds.spawn_key + (k,))
        if k == 0:
            ic_data = initial_condition(cfg, ic_seed)
        else:
            ic_data = transfer_ic(snapshots[-1], cfg.domain, cfg.sampling.n_initial, ic_seed,
                                  cfg.sampling.method)
        if cfg.training.reset_adam_per_phase:
            adam = None
        step_cb = None if progress is None else (lambda e, l, k=k: progress(k, e, l))
        log.info("window %d: t in [%g, %g]", k, *window)
        try:
            net, history, adam = train_window(net, window, ic_data, cfg, seed, adam=adam,
                                              window_index=k, progress=step_cb)
        except TrainingDiverged as exc:
            exc.snapshots = list(snapshots)
            raise
        last = history[-1] if len(history) else np.full(len(HISTORY_COLUMNS), np.nan)
        snap = WindowSnapshot(k, window[0], window[1], net.copy(), window_normalization(cfg, window),
                              dict(zip(HISTORY_COLUMNS[1:], map(float, last[1:]))))
        snapshots.append(snap)
        if on_phase_end is not None:
            on_phase_end(snap, history)
    return snapshots


def window_index(snapshots, t) -> np.ndarray:
    """Index of the window containing each time; shared boundaries go to the later window."""
    t = np.atleast_1d(np.asarray(t, dtype=np.float64))
    starts = np.array([s.t0 for s in snapshots])
    t_lo, t_hi = snapshots[0].t0, snapshots[-1].t1
    if np.any((t < t_lo) | (t > t_hi)) or not np.all(np.isfinite(t)):
        bad = t[(t < t_lo) | (t > t_hi) | ~np.isfinite(t)][0]
        raise ValueError(f"t={bad} lies outside the trained range [{t_lo}, {t_hi}]")
    return np.searchsorted(starts, t, side="right") - 1


def query(snapshots, pts) -> np.ndarray:
    """Temperature at (x, y, t) points using the snapshot whose window holds t."""
    pts = np.asarray(pts, dtype=np.float64)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    idx = window_index(snapshots, pts[:, 2])
    out = np.empty(pts.shape[0])
    for k in np.unique(idx):
        sel = idx == k
        out[sel] = snapshots[k].evaluate(pts[sel])
    return out[0] if single else out
