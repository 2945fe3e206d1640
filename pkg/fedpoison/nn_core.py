"""
Module/Script Name: nn_core.py
Path: fedpoison/nn_core.py

Description:
Minimal differentiable classifier for honest and malicious client training.

A multilayer perceptron with rectifier hidden layers and raw logit outputs,
trained with softmax cross-entropy. Every model is a flat float64 parameter
vector plus a ModelSpec describing the layer shapes, because attacks and
defenses only ever see flat vectors.

Parameter layout (layer-major): for each layer i, the weight matrix of shape
(in_i, out_i) in row-major order, followed by the bias of length out_i.

Author(s):
fedpoison maintainers

Created Date:
2026-10-19

Last Modified Date:
2026-10-19

Version:
v1.0.0

Comments:
- v1.0.0: Initial implementation
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, List, Protocol, Tuple, Union

import numpy as np
from scipy.special import logsumexp

from .errors import NumericError, ShapeError

PARAMVEC_HEADER = "paramvec v1"


@dataclass(frozen=True)
class ModelSpec:
    """Layer widths: input dim, hidden dims..., class count."""

    layer_sizes: Tuple[int, ...]
    activation: str = "relu"

    def __post_init__(self) -> None:
        sizes = tuple(int(s) for s in self.layer_sizes)
        if len(sizes) < 2:
            raise ShapeError(f"layer_sizes needs at least 2 entries, got {sizes}")
        if any(s < 1 for s in sizes):
            raise ShapeError(f"layer sizes must be >= 1, got {sizes}")
        if self.activation != "relu":
            raise ShapeError(f"unsupported activation '{self.activation}'")
        object.__setattr__(self, "layer_sizes", sizes)

    @property
    def layer_shapes(self) -> List[Tuple[int, int]]:
        return list(zip(self.layer_sizes[:-1], self.layer_sizes[1:]))

    @property
    def param_dim(self) -> int:
        return sum((fan_in + 1) * fan_out for fan_in, fan_out in self.layer_shapes)

    @property
    def input_dim(self) -> int:
        return self.layer_sizes[0]

    @property
    def num_classes(self) -> int:
        return self.layer_sizes[-1]


@dataclass(frozen=True)
class Batch:
    """Inputs (B x input_dim) and integer labels (B,)."""

    inputs: np.ndarray
    labels: np.ndarray

    def __post_init__(self) -> None:
        inputs = np.asarray(self.inputs, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        if inputs.ndim != 2 or labels.ndim != 1 or inputs.shape[0] != labels.shape[0]:
            raise ShapeError(
                f"batch shapes inconsistent: inputs {inputs.shape}, labels {labels.shape}"
            )
        if inputs.shape[0] < 1:
            raise ShapeError("batch must hold at least one sample")
        if not np.all(np.isfinite(inputs)):
            raise NumericError("batch inputs contain non-finite values")
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return int(self.labels.shape[0])


@dataclass(frozen=True)
class ModelState:
    """A ModelSpec plus its flat parameter vector."""

    spec: ModelSpec
    params: np.ndarray

    def __post_init__(self) -> None:
        params = np.asarray(self.params, dtype=np.float64)
        if params.shape != (self.spec.param_dim,):
            raise ShapeError(
                f"parameter vector has shape {params.shape}, spec needs ({self.spec.param_dim},)"
            )
        object.__setattr__(self, "params", params)

    def layers(self) -> List[Tuple[np.ndarray, np.ndarray]]:
        """(W, b) views into the flat vector, in codec order."""
        return unflatten(self.spec, self.params)


def unflatten(spec: ModelSpec, vector: np.ndarray) -> List[Tuple[np.ndarray, np.ndarray]]:
    """Split a flat vector into per-layer (W, b) views."""
    vector = np.asarray(vector, dtype=np.float64)
    if vector.shape != (spec.param_dim,):
        raise ShapeError(
            f"cannot unflatten vector of shape {vector.shape} into d={spec.param_dim}"
        )
    layers = []
    offset = 0
    for fan_in, fan_out in spec.layer_shapes:
        w = vector[offset : offset + fan_in * fan_out].reshape(fan_in, fan_out)
        offset += fan_in * fan_out
        b = vector[offset : offset + fan_out]
        offset += fan_out
        layers.append((w, b))
    return layers


def flatten(layers: List[Tuple[np.ndarray, np.ndarray]]) -> np.ndarray:
    """Concatenate per-layer (W, b) pairs in codec order."""
    parts = []
    for w, b in layers:
        parts.append(np.asarray(w, dtype=np.float64).ravel())
        parts.append(np.asarray(b, dtype=np.float64).ravel())
    return np.concatenate(parts)


def init_model(spec: ModelSpec, seed: int) -> ModelState:
    """
    Fresh model: weights ~ N(0, 1/fan_in), biases zero.

    Deterministic in (spec, seed).
    """
    rng = np.random.default_rng(seed)
    layers = []
    for fan_in, fan_out in spec.layer_shapes:
        w = rng.standard_normal((fan_in, fan_out)) / np.sqrt(fan_in)
        layers.append((w, np.zeros(fan_out)))
    return ModelState(spec, flatten(layers))


def _check_inputs(spec: ModelSpec, inputs: np.ndarray) -> np.ndarray:
    inputs = np.asarray(inputs, dtype=np.float64)
    if inputs.ndim != 2 or inputs.shape[1] != spec.input_dim:
        raise ShapeError(
            f"inputs of shape {inputs.shape} do not match input_dim={spec.input_dim}"
        )
    return inputs


def _forward(
    state: ModelState, inputs: np.ndarray
) -> Tuple[np.ndarray, List[np.ndarray], List[np.ndarray]]:
    """Logits plus the per-layer inputs and pre-activations needed for backprop."""
    layers = state.layers()
    activations = [inputs]
    pre_activations = []
    h = inputs
    for i, (w, b) in enumerate(layers):
        z = h @ w + b
        pre_activations.append(z)
        if i < len(layers) - 1:
            h = np.maximum(z, 0.0)
            activations.append(h)
        else:
            h = z
    return h, activations, pre_activations


def forward_logits(state: ModelState, batch: Union[Batch, np.ndarray]) -> np.ndarray:
    """
    Raw logits (B x C) for a Batch, or for a bare B x input_dim matrix.

    Raises:
        ShapeError: If the input width does not match the model input width
    """
    inputs = batch.inputs if isinstance(batch, Batch) else batch
    inputs = _check_inputs(state.spec, inputs)
    logits, _, _ = _forward(state, inputs)
    return logits


def predict_proba(state: ModelState, inputs: np.ndarray) -> np.ndarray:
    """Softmax class probabilities (B x C)."""
    logits = forward_logits(state, inputs)
    return np.exp(logits - logsumexp(logits, axis=1, keepdims=True))


def loss_and_grad(state: ModelState, batch: Batch, sign: int = 1) -> Tuple[float, np.ndarray]:
    """
    Signed mean cross-entropy and its exact gradient w.r.t. the flat parameters.

    sign=+1 is honest training; sign=-1 is the malicious objective -L_class.

    Raises:
        ValueError: If sign is not +1 or -1
        ShapeError: On input/label mismatches
        NumericError: If the loss or gradient is non-finite
    """
    if sign not in (1, -1):
        raise ValueError(f"sign must be +1 or -1, got {sign}")
    spec = state.spec
    inputs = _check_inputs(spec, batch.inputs)
    labels = batch.labels
    if labels.min() < 0 or labels.max() >= spec.num_classes:
        raise ShapeError(f"labels must lie in [0, {spec.num_classes})")

    logits, activations, pre_activations = _forward(state, inputs)
    size = inputs.shape[0]
    rows = np.arange(size)
    log_probs = logits - logsumexp(logits, axis=1, keepdims=True)
    loss = -float(np.mean(log_probs[rows, labels]))

    delta = np.exp(log_probs)
    delta[rows, labels] -= 1.0
    delta /= size

    layers = state.layers()
    grads: List[Tuple[np.ndarray, np.ndarray]] = [None] * len(layers)  # type: ignore[list-item]
    for i in range(len(layers) - 1, -1, -1):
        w, _ = layers[i]
        grads[i] = (activations[i].T @ delta, delta.sum(axis=0))
        if i > 0:
            delta = (delta @ w.T) * (pre_activations[i - 1] > 0.0)

    grad = flatten(grads)
    if not np.isfinite(loss) or not np.all(np.isfinite(grad)):
        raise NumericError("non-finite loss or gradient", details={"loss": loss})
    return sign * loss, sign * grad


class Optimizer(Protocol):
    """Optimizer contract: one update of a ModelState from a gradient."""

    @property
    def name(self) -> str: ...

    def step(self, state: ModelState, grad: np.ndarray) -> ModelState: ...


class SGD:
    """Plain gradient descent: w <- w - lr * g."""

    def __init__(self, lr: float):
        self.lr = lr

    @property
    def name(self) -> str:
        return "sgd"

    def step(self, state: ModelState, grad: np.ndarray) -> ModelState:
        return ModelState(state.spec, state.params - self.lr * grad)


class Adam:
    """Bias-corrected Adam. Moment buffers live as long as this object."""

    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self._m: np.ndarray | None = None
        self._v: np.ndarray | None = None
        self._t = 0

    @property
    def name(self) -> str:
        return "adam"

    def step(self, state: ModelState, grad: np.ndarray) -> ModelState:
        if self._m is None or self._v is None:
            self._m = np.zeros_like(grad)
            self._v = np.zeros_like(grad)
        self._t += 1
        self._m = self.beta1 * self._m + (1.0 - self.beta1) * grad
        self._v = self.beta2 * self._v + (1.0 - self.beta2) * grad * grad
        m_hat = self._m / (1.0 - self.beta1**self._t)
        v_hat = self._v / (1.0 - self.beta2**self._t)
        update = self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
        return ModelState(state.spec, state.params - update)


def make_optimizer(
    name: str, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8
) -> Optimizer:
    """Build a fresh optimizer (fresh moment buffers for Adam)."""
    if name == "sgd":
        return SGD(lr)
    if name == "adam":
        return Adam(lr, beta1, beta2, eps)
    raise ValueError(f"unknown optimizer '{name}'")


def optimizer_step(state: ModelState, grad: np.ndarray, opt: Optimizer) -> ModelState:
    """
    Apply one optimizer update.

    Raises:
        ShapeError: If grad length differs from the parameter dimension
        NumericError: If grad contains non-finite values
    """
    grad = np.asarray(grad, dtype=np.float64)
    if grad.shape != state.params.shape:
        raise ShapeError(f"gradient shape {grad.shape} != parameter shape {state.params.shape}")
    if not np.all(np.isfinite(grad)):
        raise NumericError("non-finite gradient passed to optimizer")
    return opt.step(state, grad)


def iter_minibatches(batch: Batch, batch_size: int, rng: np.random.Generator) -> Iterator[Batch]:
    """One shuffled epoch of minibatches; the last one may be short."""
    order = rng.permutation(len(batch))
    for start in range(0, len(order), batch_size):
        idx = order[start : start + batch_size]
        yield Batch(batch.inputs[idx], batch.labels[idx])


def dump_param_vector(vector: np.ndarray, path: str) -> None:
    """Write `paramvec v1 <d>` followed by one round-trip exact value per line."""
    values = np.asarray(vector, dtype=np.float64).ravel()
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"{PARAMVEC_HEADER} {values.shape[0]}\n")
        for value in values:
            f.write(f"{float(value)!r}\n")


def load_param_vector(path: str) -> np.ndarray:
    """
    Read a parameter vector written by dump_param_vector.

    Raises:
        ShapeError: On a bad header or a value count that disagrees with it
    """
    with open(path, "r", encoding="utf-8") as f:
        header = f.readline().strip()
        values = [float(line) for line in f if line.strip()]
    prefix, _, count = header.rpartition(" ")
    if prefix != PARAMVEC_HEADER or not count.isdigit():
        raise ShapeError(f"not a parameter vector dump: header '{header}'")
    if int(count) != len(values):
        raise ShapeError(f"header announces {count} values, file holds {len(values)}")
    return np.array(values, dtype=np.float64)
