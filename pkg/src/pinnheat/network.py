"""Fully connected tanh network: parameters, input/output scaling, evaluation."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

INPUT_DIM = 3  # (x, y, t)
OUTPUT_DIM = 1


@dataclass(frozen=True)
class Architecture:
    hidden_layers: int = 9
    hidden_width: int = 128
    activation: str = "tanh"
    input_dim: int = INPUT_DIM
    output_dim: int = OUTPUT_DIM

    def __post_init__(self):
        if self.hidden_layers < 1:
            raise ValueError(f"hidden_layers must be >= 1, got {self.hidden_layers}")
        if self.hidden_width < 1:
            raise ValueError(f"hidden_width must be >= 1, got {self.hidden_width}")
        if self.activation != "tanh":
            raise ValueError(f"only tanh hidden activations are supported, got {self.activation!r}")
        if self.input_dim != INPUT_DIM or self.output_dim != OUTPUT_DIM:
            raise ValueError("network maps (x, y, t) to a single temperature")

    @property
    def layer_sizes(self) -> list[int]:
        return [self.input_dim] + [self.hidden_width] * self.hidden_layers + [self.output_dim]

    @property
    def layer_shapes(self) -> list[tuple[int, int]]:
        sizes = self.layer_sizes
        return [(sizes[i], sizes[i + 1]) for i in range(len(sizes) - 1)]

    @property
    def n_params(self) -> int:
        return sum(a * b + b for a, b in self.layer_shapes)


def _layer_views(arch: Architecture, flat: np.ndarray):
    weights, biases = [], []
    pos = 0
    for fan_in, fan_out in arch.layer_shapes:
        w = flat[pos:pos + fan_in * fan_out].reshape(fan_in, fan_out)
        pos += fan_in * fan_out
        b = flat[pos:pos + fan_out]
        pos += fan_out
        weights.append(w)
        biases.append(b)
    return weights, biases


@dataclass(eq=False)
class NetworkParams:
    """All weights and biases, stored in one flat float64 buffer.

    Layer ``i`` computes ``h @ weights[i] + biases[i]`` with ``weights[i]`` of
    shape ``(fan_in, fan_out)``. ``weights`` and ``biases`` are views into
    ``flat``, which is laid out layer by layer as weight (row-major) then bias.
    """

    arch: Architecture
    flat: np.ndarray
    weights: list[np.ndarray] = field(init=False, repr=False)
    biases: list[np.ndarray] = field(init=False, repr=False)

    def __post_init__(self):
        self.flat = np.ascontiguousarray(self.flat, dtype=np.float64)
        if self.flat.shape != (self.arch.n_params,):
            raise ValueError(
                f"expected {self.arch.n_params} parameters for {self.arch}, got {self.flat.shape}")
        self.weights, self.biases = _layer_views(self.arch, self.flat)

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def copy(self) -> "NetworkParams":
        return NetworkParams(self.arch, self.flat.copy())

    @classmethod
    def zeros(cls, arch: Architecture) -> "NetworkParams":
        return cls(arch, np.zeros(arch.n_params))

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.flat)))


# Gradients share the parameter layout exactly.
ParamGradient = NetworkParams


def init_network(arch: Architecture, seed: int, output_gain: float = 1.0) -> NetworkParams:
    """Glorot-uniform weights and zero biases, reproducible per seed.

    ``output_gain`` multiplies the output layer's weights; a small value starts
    the network close to the output offset.
    """
    rng = np.random.default_rng(seed)
    net = NetworkParams.zeros(arch)
    for w in net.weights:
        fan_in, fan_out = w.shape
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        w[...] = rng.uniform(-limit, limit, size=w.shape)
    net.weights[-1] *= output_gain
    return net


@dataclass(frozen=True)
class Normalization:
    """Affine maps between physical and network coordinates.

    Inputs: ``xhat = in_scale * (x, y, t) + in_shift``.
    Output: ``u = out_offset + out_scale * uhat``.
    """

    in_scale: tuple[float, float, float]
    in_shift: tuple[float, float, float]
    out_scale: float = 500.0
    out_offset: float = 298.0

    def __post_init__(self):
        if any(s == 0 or not np.isfinite(s) for s in self.in_scale) or self.out_scale == 0:
            raise ValueError("normalization scales must be finite and nonzero")

    @classmethod
    def for_window(cls, length: float, width: float, t0: float, t1: float,
                   out_scale: float = 500.0, out_offset: float = 298.0,
                   gain=(1.0, 1.0, 1.0)) -> "Normalization":
        """Map ``[0, L] x [0, W] x [t0, t1]`` onto ``[-g, g]`` per input (g = ``gain``)."""
        if t1 <= t0:
            raise ValueError(f"empty time range [{t0}, {t1}]")
        spans = (length, width, t1 - t0)
        lows = (0.0, 0.0, t0)
        scale = tuple(2.0 * g / s for g, s in zip(gain, spans))
        shift = tuple(-g - lo * sc for g, lo, sc in zip(gain, lows, scale))
        return cls(scale, shift, out_scale, out_offset)

    def normalize_inputs(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=np.float64)
        return pts * np.asarray(self.in_scale) + np.asarray(self.in_shift)

    def denormalize_inputs(self, xhat: np.ndarray) -> np.ndarray:
        xhat = np.asarray(xhat, dtype=np.float64)
        return (xhat - np.asarray(self.in_shift)) / np.asarray(self.in_scale)

    def normalize_output(self, u):
        return (np.asarray(u, dtype=np.float64) - self.out_offset) / self.out_scale

    def denormalize_output(self, uhat):
        return self.out_offset + self.out_scale * np.asarray(uhat, dtype=np.float64)

    def to_dict(self) -> dict:
        return {"in_scale": list(self.in_scale), "in_shift": list(self.in_shift),
                "out_scale": self.out_scale, "out_offset": self.out_offset}

    @classmethod
    def from_dict(cls, d: dict) -> "Normalization":
        return cls(tuple(d["in_scale"]), tuple(d["in_shift"]), d["out_scale"], d["out_offset"])


def mlp(net: NetworkParams, xhat: np.ndarray) -> np.ndarray:
    """Raw network output for normalized inputs of shape (N, 3); returns (N,)."""
    h = np.asarray(xhat, dtype=np.float64)
    last = net.n_layers - 1
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = h @ w
        z += b
        h = z if i == last else np.tanh(z)
    return h[:, 0]


def forward(net: NetworkParams, norm: Normalization, pts) -> np.ndarray:
    """Temperature (K) at physical points ``pts`` of shape (N, 3) or (3,)."""
    pts = np.asarray(pts, dtype=np.float64)
    single = pts.ndim == 1
    u = norm.denormalize_output(mlp(net, norm.normalize_inputs(np.atleast_2d(pts))))
    return u[0] if single else u
