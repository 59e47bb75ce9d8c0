"""
Numerics - Dense network engine, Adam optimizer, min-max scalers and seeded RNG streams
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np

from src.core.errors import DimensionMismatchError, EmptyDatasetError, ScalerNotFittedError

logger = logging.getLogger(__name__)

PROB_FLOOR = 1e-12
HIDDEN_ACTIVATIONS = {"relu"}
OUTPUT_ACTIVATIONS = {"linear", "softmax"}


@dataclass(frozen=True)
class DenseNet:
    """Fully connected network; weights[l] has shape (n_l, n_{l+1})"""
    layer_sizes: Tuple[int, ...]
    weights: Tuple[np.ndarray, ...]
    biases: Tuple[np.ndarray, ...]
    hidden_activation: str = "relu"
    output_activation: str = "linear"

    def __post_init__(self):
        if self.hidden_activation not in HIDDEN_ACTIVATIONS:
            raise ValueError(f"Unsupported hidden activation: {self.hidden_activation}")
        if self.output_activation not in OUTPUT_ACTIVATIONS:
            raise ValueError(f"Unsupported output activation: {self.output_activation}")
        if len(self.weights) != len(self.layer_sizes) - 1 or len(self.biases) != len(self.weights):
            raise DimensionMismatchError("Layer count does not match weight/bias count")
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            expected = (self.layer_sizes[l], self.layer_sizes[l + 1])
            if w.shape != expected or b.shape != (expected[1],):
                raise DimensionMismatchError(
                    f"Layer {l}: weights {w.shape} / biases {b.shape} do not chain {expected}")

    @property
    def input_size(self) -> int:
        return self.layer_sizes[0]

    @property
    def output_size(self) -> int:
        return self.layer_sizes[-1]

    @property
    def parameter_count(self) -> int:
        return sum(n_in * n_out + n_out for n_in, n_out in zip(self.layer_sizes[:-1], self.layer_sizes[1:]))

    def params(self) -> List[np.ndarray]:
        """Flat parameter list [W0, b0, W1, b1, ...]"""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend([w, b])
        return out

    def with_params(self, params: Sequence[np.ndarray]) -> "DenseNet":
        return replace(self, weights=tuple(params[0::2]), biases=tuple(params[1::2]))


@dataclass(frozen=True)
class Gradients:
    weights: Tuple[np.ndarray, ...]
    biases: Tuple[np.ndarray, ...]
    input: np.ndarray

    def params(self) -> List[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend([w, b])
        return out


@dataclass(frozen=True)
class ForwardTrace:
    """Layer outputs of one forward pass; activations[0] is the batch input"""
    activations: Tuple[np.ndarray, ...]

    @property
    def output(self) -> np.ndarray:
        return self.activations[-1]


@dataclass
class AdamState:
    learning_rate: float
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    m: List[np.ndarray] = field(default_factory=list)
    v: List[np.ndarray] = field(default_factory=list)
    step: int = 0


@dataclass(frozen=True)
class MinMaxScaler:
    """Per-component [lower, upper] limits mapped to [0, 1]"""
    lower: Optional[np.ndarray] = None
    upper: Optional[np.ndarray] = None
    pinned: Optional[np.ndarray] = None

    @property
    def fitted(self) -> bool:
        return self.lower is not None and self.upper is not None

    @property
    def size(self) -> int:
        return 0 if self.lower is None else len(self.lower)


def make_rng(seed: int, *keys: int) -> np.random.Generator:
    """Generator for the substream identified by (seed, *keys)"""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys)))


def init_dense_net(layer_sizes: Sequence[int], rng: np.random.Generator,
                   output_activation: str = "linear") -> DenseNet:
    """Fan-in scaled uniform weights, zero biases"""
    sizes = tuple(int(n) for n in layer_sizes)
    weights = []
    biases = []
    for n_in, n_out in zip(sizes[:-1], sizes[1:]):
        bound = 1.0 / np.sqrt(n_in)
        weights.append(rng.uniform(-bound, bound, size=(n_in, n_out)))
        biases.append(np.zeros(n_out))
    return DenseNet(sizes, tuple(weights), tuple(biases), output_activation=output_activation)


def softmax(logits: np.ndarray, axis: int = -1) -> np.ndarray:
    shifted = logits - np.max(logits, axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=axis, keepdims=True)


def _as_batch(x, width: int, what: str = "input") -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    batch = arr.reshape(1, -1) if arr.ndim == 1 else arr
    if batch.ndim != 2 or batch.shape[1] != width:
        raise DimensionMismatchError(f"Expected {what} width {width}, got shape {arr.shape}")
    return batch


def forward_trace(net: DenseNet, x) -> ForwardTrace:
    a = _as_batch(x, net.input_size)
    activations = [a]
    last = len(net.weights) - 1
    for l, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = a @ w + b
        if l < last:
            a = np.maximum(z, 0.0)
        elif net.output_activation == "softmax":
            a = softmax(z, axis=1)
        else:
            a = z
        activations.append(a)
    return ForwardTrace(tuple(activations))


def forward(net: DenseNet, x) -> np.ndarray:
    """Evaluate the network on one vector or a (batch, width) matrix"""
    out = forward_trace(net, x).output
    return out[0] if np.ndim(x) == 1 else out


def backward(net: DenseNet, x, loss_grad, trace: Optional[ForwardTrace] = None) -> Gradients:
    """
    Backpropagate dLoss/dOutput through the network

    Gradients are summed over the batch rows. The input gradient keeps the
    shape of x.
    """
    single = np.ndim(x) == 1
    grad = _as_batch(loss_grad, net.output_size, what="loss gradient")
    if trace is None:
        trace = forward_trace(net, x)
    acts = trace.activations
    if acts[0].shape[0] != grad.shape[0]:
        raise DimensionMismatchError(
            f"Batch size mismatch: input {acts[0].shape[0]}, loss gradient {grad.shape[0]}")

    out = acts[-1]
    if net.output_activation == "softmax":
        delta = out * (grad - np.sum(out * grad, axis=1, keepdims=True))
    else:
        delta = grad

    n = len(net.weights)
    grad_w: List[np.ndarray] = [None] * n
    grad_b: List[np.ndarray] = [None] * n
    grad_in = delta
    for l in reversed(range(n)):
        grad_w[l] = acts[l].T @ delta
        grad_b[l] = delta.sum(axis=0)
        grad_in = delta @ net.weights[l].T
        if l > 0:
            delta = grad_in * (acts[l] > 0)
    return Gradients(tuple(grad_w), tuple(grad_b), grad_in[0] if single else grad_in)


def init_adam(params: Sequence[np.ndarray], learning_rate: float, beta1: float = 0.9,
              beta2: float = 0.999, epsilon: float = 1e-8) -> AdamState:
    return AdamState(
        learning_rate=learning_rate,
        beta1=beta1,
        beta2=beta2,
        epsilon=epsilon,
        m=[np.zeros_like(p, dtype=float) for p in params],
        v=[np.zeros_like(p, dtype=float) for p in params],
        step=0,
    )


def adam_step(state: AdamState, params: Sequence[np.ndarray],
              grads: Sequence[np.ndarray]) -> Tuple[List[np.ndarray], AdamState]:
    """One bias-corrected Adam update; returns new params and a new state"""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise DimensionMismatchError("Parameter, gradient and moment lists differ in length")
    t = state.step + 1
    b1, b2 = state.beta1, state.beta2
    correction1 = 1.0 - b1 ** t
    correction2 = 1.0 - b2 ** t
    new_params, new_m, new_v = [], [], []
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if np.shape(p) != np.shape(g) or np.shape(p) != np.shape(m):
            raise DimensionMismatchError(f"Shape mismatch: param {np.shape(p)}, grad {np.shape(g)}")
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * g * g
        step = state.learning_rate * (m / correction1) / (np.sqrt(v / correction2) + state.epsilon)
        new_params.append(p - step)
        new_m.append(m)
        new_v.append(v)
    return new_params, replace(state, m=new_m, v=new_v, step=t)


def minmax_fit(data, pinned_lower: Optional[Sequence[Optional[float]]] = None) -> MinMaxScaler:
    """Componentwise min/max limits; pinned components use the pin as lower limit"""
    arr = np.asarray(data, dtype=float)
    if arr.size == 0:
        raise EmptyDatasetError("Cannot fit a scaler on empty data")
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    lower = arr.min(axis=0)
    upper = arr.max(axis=0)
    pinned = np.zeros(arr.shape[1], dtype=bool)
    if pinned_lower is not None:
        if len(pinned_lower) != arr.shape[1]:
            raise DimensionMismatchError(
                f"pinned_lower has {len(pinned_lower)} entries for {arr.shape[1]} components")
        for i, pin in enumerate(pinned_lower):
            if pin is not None:
                lower[i] = pin
                upper[i] = max(upper[i], pin)
                pinned[i] = True
    return MinMaxScaler(lower=lower, upper=upper, pinned=pinned)


def _check_scaler(scaler: MinMaxScaler, x) -> np.ndarray:
    if not scaler.fitted:
        raise ScalerNotFittedError("Min-max scaler used before fitting")
    arr = np.asarray(x, dtype=float)
    if arr.shape[-1] != scaler.size:
        raise DimensionMismatchError(f"Scaler has {scaler.size} components, input has {arr.shape[-1]}")
    return arr


def minmax_apply(scaler: MinMaxScaler, x) -> np.ndarray:
    """Map limits to [0, 1]; out-of-range values extrapolate, degenerate components map to 0"""
    arr = _check_scaler(scaler, x)
    span = scaler.upper - scaler.lower
    safe = np.where(span > 0, span, 1.0)
    return np.where(span > 0, (arr - scaler.lower) / safe, 0.0)


def minmax_invert(scaler: MinMaxScaler, y) -> np.ndarray:
    arr = _check_scaler(scaler, y)
    span = scaler.upper - scaler.lower
    return np.where(span > 0, arr * span + scaler.lower, scaler.lower)


def cross_entropy(probs, label: int) -> float:
    return float(-np.log(max(float(np.asarray(probs, dtype=float)[label]), PROB_FLOOR)))


def mean_cross_entropy(probs: np.ndarray, labels: np.ndarray) -> Tuple[float, np.ndarray]:
    """Batch mean cross entropy and its gradient with respect to probs"""
    n = probs.shape[0]
    picked = np.maximum(probs[np.arange(n), labels], PROB_FLOOR)
    grad = np.zeros_like(probs)
    grad[np.arange(n), labels] = -1.0 / (picked * n)
    return float(-np.mean(np.log(picked))), grad


def iterate_minibatches(n: int, batch_size: int, rng: np.random.Generator) -> Iterator[np.ndarray]:
    """Shuffled index batches covering range(n) once"""
    order = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield order[start:start + batch_size]
