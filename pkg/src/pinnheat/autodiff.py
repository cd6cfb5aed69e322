"""Exact input derivatives and parameter gradients for tanh MLPs.

Input derivatives are carried forward through the layers as extra "streams"
alongside the activations. For a hidden layer ``h = tanh(z)`` with
``s = 1 - h**2``:

    h_x  = s * z_x
    h_xx = s * z_xx - 2 h s * z_x**2

Streams, in order: value, d/dx, d/dy, d/dt, d2/dx2, d2/dy2 (all with respect
to the normalized inputs). Losses that use the streams are differentiated
with respect to the parameters by running the recurrence in reverse.
"""
from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Protocol, Sequence

import numpy as np

from . import _kernels
from .network import NetworkParams, Normalization, ParamGradient

STREAMS = ("u", "du_dx", "du_dy", "du_dt", "d2u_dx2", "d2u_dy2")
# number of streams needed for each derivative order
_N_STREAMS = {0: 1, 1: 4, 2: 6}
# fused loops when numba is importable; the numpy expressions below are the reference
USE_KERNELS = _kernels.AVAILABLE


class EvaluationError(FloatingPointError):
    pass


@dataclass
class DerivBundle:
    """Temperature and its input derivatives (physical units).

    Entries are floats for a single point or arrays of shape (N,) for a batch.
    Derivatives that were not requested are ``None``.
    """

    u: np.ndarray | float
    du_dt: np.ndarray | float | None = None
    du_dx: np.ndarray | float | None = None
    du_dy: np.ndarray | float | None = None
    d2u_dx2: np.ndarray | float | None = None
    d2u_dy2: np.ndarray | float | None = None

    def __getitem__(self, idx) -> "DerivBundle":
        return DerivBundle(**{f.name: (None if getattr(self, f.name) is None
                                       else getattr(self, f.name)[idx]) for f in fields(self)})

    def items(self):
        for f in fields(self):
            yield f.name, getattr(self, f.name)

    def scaled(self, a: float) -> "DerivBundle":
        return DerivBundle(**{k: (None if v is None else a * v) for k, v in self.items()})

    def __add__(self, other: "DerivBundle") -> "DerivBundle":
        out = {}
        for k, v in self.items():
            w = getattr(other, k)
            out[k] = None if v is None or w is None else v + w
        return DerivBundle(**out)


@dataclass
class _Tape:
    xhat: np.ndarray
    hidden: list  # per hidden layer: (H streams (S, N, w), Z streams (S, N, w))
    n_streams: int


def _propagate(net: NetworkParams, xhat: np.ndarray, order: int):
    """Forward pass returning normalized output streams (S, N) and the tape."""
    n_streams = _N_STREAMS[order]
    n = xhat.shape[0]
    hidden = []

    w0, b0 = net.weights[0], net.biases[0]
    Z = np.empty((n_streams, n, w0.shape[1]))
    np.matmul(xhat, w0, out=Z[0])
    Z[0] += b0
    if order >= 1:
        # d(xhat)/d(input j) is the unit vector e_j, so the first layer's
        # derivative streams are rows of W0; second derivatives vanish.
        Z[1] = w0[0]
        Z[2] = w0[1]
        Z[3] = w0[2]
    if order >= 2:
        Z[4] = 0.0
        Z[5] = 0.0

    for i in range(1, net.n_layers):
        H = _tanh_streams(Z, order)
        hidden.append((H, Z))
        w, b = net.weights[i], net.biases[i]
        Zn = np.empty((n_streams, n, w.shape[1]))
        # the value stream gets its own product so it matches network.mlp bit for bit
        np.matmul(H[0], w, out=Zn[0])
        Zn[0] += b
        if n_streams > 1:
            np.matmul(H[1:].reshape(-1, w.shape[0]), w, out=Zn[1:].reshape(-1, w.shape[1]))
        if not np.isfinite(Zn.sum()):
            raise EvaluationError(f"non-finite value produced by layer {i}")
        Z = Zn
    out = Z[:, :, 0]
    return out, _Tape(xhat, hidden, n_streams)


def _tanh_streams(Z: np.ndarray, order: int) -> np.ndarray:
    H = np.empty_like(Z)
    np.tanh(Z[0], out=H[0])
    if order == 0:
        return H
    if USE_KERNELS:
        _kernels.tanh_streams_fwd(Z, H)
        return H
    h = H[0]
    s = 1.0 - h * h
    H[1:4] = s * Z[1:4]
    if order >= 2:
        ds = -2.0 * h * s
        H[4] = s * Z[4] + ds * Z[1] * Z[1]
        H[5] = s * Z[5] + ds * Z[2] * Z[2]
    return H


def _tanh_streams_backward(G: np.ndarray, H: np.ndarray, Z: np.ndarray, order: int) -> np.ndarray:
    """Map cotangents of the activation streams to cotangents of the pre-activations."""
    GZ = np.empty_like(G)
    if USE_KERNELS:
        _kernels.tanh_streams_bwd(G, H, Z, GZ)
        return GZ
    h = H[0]
    s = 1.0 - h * h
    if order == 0:
        GZ[0] = G[0] * s
        return GZ
    ds = -2.0 * h * s
    acc = G[0] * s + ds * (G[1] * Z[1] + G[2] * Z[2] + G[3] * Z[3])
    GZ[1:4] = G[1:4] * s
    if order >= 2:
        d2s = -2.0 * s * s + 4.0 * h * h * s
        acc += G[4] * (ds * Z[4] + d2s * Z[1] * Z[1])
        acc += G[5] * (ds * Z[5] + d2s * Z[2] * Z[2])
        GZ[1] += 2.0 * ds * Z[1] * G[4]
        GZ[2] += 2.0 * ds * Z[2] * G[5]
        GZ[4] = G[4] * s
        GZ[5] = G[5] * s
    GZ[0] = acc
    return GZ


def _backward(net: NetworkParams, tape: _Tape, g_out: np.ndarray, order: int) -> np.ndarray:
    """Parameter gradient given cotangents ``g_out`` of the output streams, shape (S, N)."""
    grad = ParamGradient.zeros(net.arch)
    S = tape.n_streams
    G = g_out[:, :, None]  # (S, N, 1)
    for i in range(net.n_layers - 1, 0, -1):
        H, Z = tape.hidden[i - 1]
        w = net.weights[i]
        w_in, w_out = w.shape
        G2 = G.reshape(-1, w_out)
        np.matmul(H.reshape(-1, w_in).T, G2, out=grad.weights[i])
        np.sum(G[0], axis=0, out=grad.biases[i])
        GH = (G2 @ w.T).reshape(S, -1, w_in)
        G = _tanh_streams_backward(GH, H, Z, order)
    # first layer: Z0 = xhat @ W0 + b0, Z_j = W0[j-1] for j = 1..3
    np.matmul(tape.xhat.T, G[0], out=grad.weights[0])
    if order >= 1:
        grad.weights[0] += G[1:4].sum(axis=1)
    np.sum(G[0], axis=0, out=grad.biases[0])
    return grad


def _chain_factors(norm: Normalization):
    ax, ay, at = norm.in_scale
    c = norm.out_scale
    return np.array([c, c * ax, c * ay, c * at, c * ax * ax, c * ay * ay])


def _bundle_from_streams(out: np.ndarray, norm: Normalization, order: int) -> DerivBundle:
    f = _chain_factors(norm)
    u = norm.denormalize_output(out[0])
    b = DerivBundle(u=u)
    if order >= 1:
        b.du_dx, b.du_dy, b.du_dt = f[1] * out[1], f[2] * out[2], f[3] * out[3]
    if order >= 2:
        b.d2u_dx2, b.d2u_dy2 = f[4] * out[4], f[5] * out[5]
    return b


def eval_batch(net: NetworkParams, norm: Normalization, pts, order: int = 2) -> DerivBundle:
    """Evaluate the network and its input derivatives up to ``order`` at (N, 3) points."""
    pts = np.atleast_2d(np.asarray(pts, dtype=np.float64))
    if not np.all(np.isfinite(pts)):
        raise ValueError("evaluation points must be finite")
    out, _ = _propagate(net, norm.normalize_inputs(pts), order)
    return _bundle_from_streams(out, norm, order)


def eval_with_input_derivs(net: NetworkParams, norm: Normalization, p) -> DerivBundle:
    """Temperature and its five input derivatives at a single point ``(x, y, t)``."""
    return eval_batch(net, norm, np.asarray(p, dtype=np.float64).reshape(1, 3), order=2)[0]


class PointwiseLoss(Protocol):
    """A loss defined through network values/derivatives at a fixed set of points.

    ``value_and_cotangent`` receives the bundle at ``points`` and returns the
    loss together with d(loss)/d(bundle entry) for every entry it depends on.
    """

    points: np.ndarray
    order: int

    def value_and_cotangent(self, bundle: DerivBundle) -> tuple[float, DerivBundle]: ...


def _first_bad_point(bundle: DerivBundle, cot: DerivBundle | None, points: np.ndarray):
    bad = np.zeros(points.shape[0], dtype=bool)
    for src in (bundle, cot):
        if src is None:
            continue
        for _, v in src.items():
            if v is not None:
                bad |= ~np.isfinite(np.broadcast_to(v, bad.shape))
    idx = np.flatnonzero(bad)
    return tuple(points[idx[0]]) if idx.size else None


class NonFiniteLoss(FloatingPointError):
    def __init__(self, msg, point=None):
        super().__init__(msg)
        self.point = point


def loss_gradient(net: NetworkParams, norm: Normalization,
                  terms: Sequence[PointwiseLoss],
                  weights: Sequence[float] | None = None) -> tuple[float, ParamGradient, list[float]]:
    """Weighted sum of loss terms and its exact gradient with respect to ``net``.

    Returns ``(total, grad, per_term_values)``.
    """
    if weights is None:
        weights = [1.0] * len(terms)
    factors = _chain_factors(norm)
    total = 0.0
    grad = np.zeros(net.arch.n_params)
    values = []
    for term, lam in zip(terms, weights):
        pts = np.asarray(term.points, dtype=np.float64)
        if pts.shape[0] == 0:
            raise ValueError(f"{type(term).__name__}: empty batch")
        order = term.order
        out, tape = _propagate(net, norm.normalize_inputs(pts), order)
        bundle = _bundle_from_streams(out, norm, order)
        value, cot = term.value_and_cotangent(bundle)
        if not np.isfinite(value):
            raise NonFiniteLoss(f"{type(term).__name__} is not finite",
                                _first_bad_point(bundle, cot, pts))
        values.append(float(value))
        total += lam * value
        if lam == 0.0:
            continue
        S = _N_STREAMS[order]
        g_out = np.zeros((S, pts.shape[0]))
        for k, name in enumerate(STREAMS[:S]):
            c = getattr(cot, name)
            if c is not None:
                g_out[k] = lam * factors[k] * c
        grad += _backward(net, tape, g_out, order).flat
    return float(total), ParamGradient(net.arch, grad), values
