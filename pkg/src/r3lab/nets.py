"""Small dense networks with explicit backpropagation.

Everything here is plain float64 numpy on fixed-topology multilayer
perceptrons. Besides the usual parameter gradients, the module computes
input gradients and the parameter gradients of the mean squared
input-gradient norm (double backprop), which gradient penalties need.
All functions are pure: networks are immutable values and every operation
returns new arrays.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "ACTIVATIONS",
    "Layer",
    "MlpNetwork",
    "GradientBundle",
    "init_mlp",
    "forward",
    "param_gradients",
    "input_gradient",
    "penalty_param_gradients",
    "backprop",
    "finite_difference_check",
    "FiniteDifferenceReport",
    "save_network",
    "load_network",
]

ACTIVATIONS = ("leaky_relu_0.2", "tanh", "identity")

_LEAKY_SLOPE = 0.2


def _act(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "leaky_relu_0.2":
        return np.where(z >= 0.0, z, _LEAKY_SLOPE * z)
    if kind == "tanh":
        return np.tanh(z)
    return z


def _act_prime(z: np.ndarray, kind: str) -> np.ndarray:
    # Convention at the leaky-ReLU kink: derivative(0) = 1 (positive-side slope).
    if kind == "leaky_relu_0.2":
        return np.where(z >= 0.0, 1.0, _LEAKY_SLOPE)
    if kind == "tanh":
        t = np.tanh(z)
        return 1.0 - t * t
    return np.ones_like(z)


def _act_second(z: np.ndarray, kind: str) -> np.ndarray:
    # Piecewise-linear activations contribute exactly zero here.
    if kind == "tanh":
        t = np.tanh(z)
        return -2.0 * t * (1.0 - t * t)
    return np.zeros_like(z)


def _frozen_array(values, shape_hint: str) -> np.ndarray:
    arr = np.array(values, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{shape_hint} contains non-finite entries")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Layer:
    """One affine map plus activation. weights has shape (out, in)."""

    weights: np.ndarray
    bias: np.ndarray
    activation: str

    def __post_init__(self):
        w = _frozen_array(self.weights, "layer weights")
        b = _frozen_array(self.bias, "layer bias")
        if w.ndim != 2:
            raise ValueError(f"weights must be 2-D, got shape {w.shape}")
        if b.shape != (w.shape[0],):
            raise ValueError(f"bias shape {b.shape} does not match output width {w.shape[0]}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}; expected one of {ACTIVATIONS}")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)

    @property
    def out_width(self) -> int:
        return self.weights.shape[0]

    @property
    def in_width(self) -> int:
        return self.weights.shape[1]


@dataclass(frozen=True)
class MlpNetwork:
    layers: tuple[Layer, ...]

    def __post_init__(self):
        layers = tuple(self.layers)
        if not layers:
            raise ValueError("network needs at least one layer")
        for prev, nxt in zip(layers, layers[1:]):
            if nxt.in_width != prev.out_width:
                raise ValueError(
                    f"layer widths do not chain: {prev.out_width} -> {nxt.in_width}"
                )
        object.__setattr__(self, "layers", layers)

    @property
    def input_width(self) -> int:
        return self.layers[0].in_width

    @property
    def output_width(self) -> int:
        return self.layers[-1].out_width

    def with_params(self, weights: list[np.ndarray], biases: list[np.ndarray]) -> "MlpNetwork":
        """Same topology and activations, new parameter values."""
        return MlpNetwork(tuple(
            Layer(w, b, layer.activation)
            for layer, w, b in zip(self.layers, weights, biases)
        ))

    def to_dict(self) -> dict:
        return {
            "layers": [
                {
                    "activation": layer.activation,
                    "weights": layer.weights.tolist(),
                    "bias": layer.bias.tolist(),
                }
                for layer in self.layers
            ]
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MlpNetwork":
        return cls(tuple(
            Layer(np.asarray(spec["weights"]), np.asarray(spec["bias"]), spec["activation"])
            for spec in d["layers"]
        ))


@dataclass(frozen=True)
class GradientBundle:
    """Per-layer weight and bias gradients, shape-matched to a network."""

    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]

    @classmethod
    def zeros_like(cls, net: MlpNetwork) -> "GradientBundle":
        return cls(
            tuple(np.zeros_like(layer.weights) for layer in net.layers),
            tuple(np.zeros_like(layer.bias) for layer in net.layers),
        )

    def matches(self, net: MlpNetwork) -> bool:
        return len(self.weights) == len(net.layers) and all(
            gw.shape == layer.weights.shape and gb.shape == layer.bias.shape
            for gw, gb, layer in zip(self.weights, self.biases, net.layers)
        )

    def __add__(self, other: "GradientBundle") -> "GradientBundle":
        return GradientBundle(
            tuple(a + b for a, b in zip(self.weights, other.weights)),
            tuple(a + b for a, b in zip(self.biases, other.biases)),
        )

    def scaled(self, factor: float) -> "GradientBundle":
        return GradientBundle(
            tuple(factor * w for w in self.weights),
            tuple(factor * b for b in self.biases),
        )

    def max_abs(self) -> float:
        parts = [np.max(np.abs(a)) if a.size else 0.0 for a in (*self.weights, *self.biases)]
        return float(max(parts))


def init_mlp(widths: list[int], activations: list[str] | None = None,
             rng: np.random.Generator | None = None,
             output_scale: float = 1.0) -> MlpNetwork:
    """Random network over the given widths, e.g. [2, 32, 32, 1].

    Default activations are leaky ReLU on hidden layers and identity on the
    output; weights use fan-in scaling. output_scale multiplies the final
    layer's weights (small values start the network near the zero function).
    """
    if len(widths) < 2:
        raise ValueError("need at least an input and an output width")
    n_layers = len(widths) - 1
    if activations is None:
        activations = ["leaky_relu_0.2"] * (n_layers - 1) + ["identity"]
    if len(activations) != n_layers:
        raise ValueError(f"expected {n_layers} activations, got {len(activations)}")
    if rng is None:
        rng = np.random.default_rng()
    layers = []
    for idx, (d_in, d_out, act) in enumerate(zip(widths[:-1], widths[1:], activations)):
        gain = np.sqrt(2.0) if act == "leaky_relu_0.2" else 1.0
        w = rng.standard_normal((d_out, d_in)) * (gain / np.sqrt(d_in))
        if idx == n_layers - 1:
            w = w * output_scale
        layers.append(Layer(w, np.zeros(d_out), act))
    return MlpNetwork(tuple(layers))


def _as_batch(net: MlpNetwork, batch: np.ndarray) -> np.ndarray:
    x = np.asarray(batch, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"batch must be 2-D (rows, features), got shape {x.shape}")
    if x.shape[1] != net.input_width:
        raise ValueError(
            f"batch width {x.shape[1]} does not match network input width {net.input_width}"
        )
    return x


def _forward_trace(net: MlpNetwork, batch: np.ndarray):
    """Forward pass keeping every activation and pre-activation."""
    acts = [batch]
    pres = []
    a = batch
    for layer in net.layers:
        z = a @ layer.weights.T + layer.bias
        a = _act(z, layer.activation)
        pres.append(z)
        acts.append(a)
    return acts, pres


def forward(net: MlpNetwork, batch: np.ndarray) -> np.ndarray:
    """Per-row network outputs, shape (rows, output_width)."""
    x = _as_batch(net, batch)
    for layer in net.layers:
        x = _act(x @ layer.weights.T + layer.bias, layer.activation)
    return x


def backprop(net: MlpNetwork, batch: np.ndarray, upstream: np.ndarray):
    """Reverse pass for sum_i <upstream_i, net(x_i)>.

    Returns (GradientBundle, input_grads) where input_grads has the batch's
    shape. upstream may be a vector (rows,) when the output width is 1, or a
    full (rows, output_width) matrix.
    """
    x = _as_batch(net, batch)
    up = np.asarray(upstream, dtype=np.float64)
    if up.ndim == 1:
        if net.output_width != 1:
            raise ValueError(
                f"vector upstream needs output width 1, network has {net.output_width}"
            )
        up = up[:, None]
    if up.shape != (x.shape[0], net.output_width):
        raise ValueError(
            f"upstream shape {up.shape} does not match (rows, output_width) = "
            f"({x.shape[0]}, {net.output_width})"
        )
    acts, pres = _forward_trace(net, x)
    grad_w: list[np.ndarray] = [None] * len(net.layers)
    grad_b: list[np.ndarray] = [None] * len(net.layers)
    delta = up
    for idx in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[idx]
        dz = delta * _act_prime(pres[idx], layer.activation)
        grad_w[idx] = dz.T @ acts[idx]
        grad_b[idx] = dz.sum(axis=0)
        delta = dz @ layer.weights
    return GradientBundle(tuple(grad_w), tuple(grad_b)), delta


def param_gradients(net: MlpNetwork, batch: np.ndarray, upstream: np.ndarray) -> GradientBundle:
    """Gradient of sum_i upstream_i * net(x_i) with respect to all parameters."""
    bundle, _ = backprop(net, batch, upstream)
    return bundle


def input_gradient(net: MlpNetwork, batch: np.ndarray) -> np.ndarray:
    """Row i holds the gradient of the scalar output at x_i."""
    x = _as_batch(net, batch)
    if net.output_width != 1:
        raise ValueError(f"input_gradient needs a scalar-output network, got width {net.output_width}")
    _, grads = backprop(net, x, np.ones(x.shape[0]))
    return grads


def penalty_param_gradients(net: MlpNetwork, batch: np.ndarray):
    """Mean squared input-gradient norm and its parameter gradients.

    penalty = (1/n) * sum_i ||grad_x net(x_i)||^2. The parameter gradient is
    computed by differentiating the input-gradient pass itself (double
    backprop). Exact for the supported activations: the second derivative of
    leaky ReLU and identity is zero, tanh's is analytic.
    """
    x = _as_batch(net, batch)
    if net.output_width != 1:
        raise ValueError(f"penalty needs a scalar-output network, got width {net.output_width}")
    n = x.shape[0]
    if n == 0:
        raise ValueError("penalty is undefined for an empty batch")
    num_layers = len(net.layers)
    acts, pres = _forward_trace(net, x)

    # Input-gradient chain: u_L = 1; v_l = u_l * act'(z_l); u_{l-1} = v_l W_l.
    prime = [_act_prime(pres[i], net.layers[i].activation) for i in range(num_layers)]
    u = [None] * (num_layers + 1)
    v = [None] * (num_layers + 1)
    u[num_layers] = np.ones((n, 1))
    for idx in range(num_layers, 0, -1):
        layer = net.layers[idx - 1]
        v[idx] = u[idx] * prime[idx - 1]
        u[idx - 1] = v[idx] @ layer.weights
    g = u[0]
    penalty = float(np.sum(g * g) / n)

    # Adjoint sweep over the chain above, seeded at d(penalty)/d(g).
    grad_w = [np.zeros_like(layer.weights) for layer in net.layers]
    grad_b = [np.zeros_like(layer.bias) for layer in net.layers]
    zbar_from_prime = [None] * num_layers
    ubar = (2.0 / n) * g
    for idx in range(1, num_layers + 1):
        layer = net.layers[idx - 1]
        vbar = ubar @ layer.weights.T
        grad_w[idx - 1] += v[idx].T @ ubar
        zbar_from_prime[idx - 1] = vbar * u[idx] * _act_second(pres[idx - 1], layer.activation)
        ubar = vbar * prime[idx - 1]

    # The chain also depends on parameters through the forward activations.
    abar = np.zeros((n, net.output_width))
    for idx in range(num_layers - 1, -1, -1):
        layer = net.layers[idx]
        zbar = zbar_from_prime[idx] + abar * prime[idx]
        grad_w[idx] += zbar.T @ acts[idx]
        grad_b[idx] += zbar.sum(axis=0)
        abar = zbar @ layer.weights

    return penalty, GradientBundle(tuple(grad_w), tuple(grad_b))


@dataclass(frozen=True)
class FiniteDifferenceReport:
    """Max relative errors between analytic gradients and central differences."""

    param_error: float
    input_error: float
    penalty_error: float

    def max_error(self) -> float:
        return max(self.param_error, self.input_error, self.penalty_error)


def _relative_errors(analytic: np.ndarray, numeric: np.ndarray, abs_floor: float) -> float:
    denom = np.maximum(np.abs(numeric), abs_floor)
    return float(np.max(np.abs(analytic - numeric) / denom)) if analytic.size else 0.0


def _perturb_params(net: MlpNetwork, layer_idx: int, is_bias: bool, flat_idx: int,
                    delta: float) -> MlpNetwork:
    weights = [layer.weights.copy() for layer in net.layers]
    biases = [layer.bias.copy() for layer in net.layers]
    target = biases[layer_idx] if is_bias else weights[layer_idx]
    target.flat[flat_idx] += delta
    return net.with_params(weights, biases)


def finite_difference_check(net: MlpNetwork, batch: np.ndarray, step: float,
                            abs_floor: float = 1e-6) -> FiniteDifferenceReport:
    """Central-difference audit of all three gradient routines.

    Purely diagnostic; the analytic code paths are untouched. The parameter
    check uses a fixed non-constant upstream so per-row weighting errors
    cannot cancel.
    """
    if step <= 0:
        raise ValueError(f"finite-difference step must be positive, got {step}")
    x = _as_batch(net, batch)
    n, out = x.shape[0], net.output_width
    upstream = np.linspace(0.5, 1.5, n * out).reshape(n, out)

    def weighted_sum(candidate: MlpNetwork) -> float:
        return float(np.sum(forward(candidate, x) * upstream))

    analytic_param = param_gradients(net, x, upstream)
    param_err = 0.0
    for layer_idx, layer in enumerate(net.layers):
        for is_bias, analytic in ((False, analytic_param.weights[layer_idx]),
                                  (True, analytic_param.biases[layer_idx])):
            size = layer.bias.size if is_bias else layer.weights.size
            numeric = np.empty(size)
            for flat in range(size):
                hi = weighted_sum(_perturb_params(net, layer_idx, is_bias, flat, step))
                lo = weighted_sum(_perturb_params(net, layer_idx, is_bias, flat, -step))
                numeric[flat] = (hi - lo) / (2.0 * step)
            param_err = max(param_err, _relative_errors(analytic.ravel(), numeric, abs_floor))

    input_err = 0.0
    penalty_err = 0.0
    if out == 1:
        analytic_input = input_gradient(net, x)
        numeric_input = np.empty_like(x)
        for i in range(n):
            for j in range(x.shape[1]):
                hi = x.copy()
                hi[i, j] += step
                lo = x.copy()
                lo[i, j] -= step
                numeric_input[i, j] = float(forward(net, hi)[i, 0] - forward(net, lo)[i, 0]) / (2.0 * step)
        input_err = _relative_errors(analytic_input, numeric_input, abs_floor)

        def penalty_value(candidate: MlpNetwork) -> float:
            grads = input_gradient(candidate, x)
            return float(np.sum(grads * grads) / n)

        _, analytic_pen = penalty_param_gradients(net, x)
        for layer_idx, layer in enumerate(net.layers):
            for is_bias, analytic in ((False, analytic_pen.weights[layer_idx]),
                                      (True, analytic_pen.biases[layer_idx])):
                size = layer.bias.size if is_bias else layer.weights.size
                numeric = np.empty(size)
                for flat in range(size):
                    hi = penalty_value(_perturb_params(net, layer_idx, is_bias, flat, step))
                    lo = penalty_value(_perturb_params(net, layer_idx, is_bias, flat, -step))
                    numeric[flat] = (hi - lo) / (2.0 * step)
                penalty_err = max(penalty_err, _relative_errors(analytic.ravel(), numeric, abs_floor))

    return FiniteDifferenceReport(param_err, input_err, penalty_err)


def save_network(net: MlpNetwork, path: str | Path) -> None:
    Path(path).write_text(json.dumps(net.to_dict()) + "\n")


def load_network(path: str | Path) -> MlpNetwork:
    return MlpNetwork.from_dict(json.loads(Path(path).read_text()))
