"""Shared neural-network plumbing: flat parameter vectors partitioned into
named tensors, activations, cross-entropy, SGD/Adam, and checkpoint files.

All arithmetic is float64 so finite-difference gradient checks can use tight
tolerances.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .rng import generator


class TrainingError(Exception):
    """Training cannot proceed (non-finite gradients, divergence, ...)."""


# ---------------------------------------------------------------------------
# Named-tensor parameter vectors
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ParamSpec:
    """Ordered (name, shape) layout of one flat parameter vector."""

    entries: tuple[tuple[str, tuple[int, ...]], ...]

    @property
    def total(self) -> int:
        return sum(int(np.prod(shape)) for _, shape in self.entries)

    def views(self, flat: np.ndarray) -> dict[str, np.ndarray]:
        """Reshaped views into ``flat``; writes through to the vector."""
        if flat.shape != (self.total,):
            raise ValueError(f"expected flat vector of length {self.total}")
        out = {}
        offset = 0
        for name, shape in self.entries:
            size = int(np.prod(shape))
            out[name] = flat[offset : offset + size].reshape(shape)
            offset += size
        return out


def glorot_init(spec: ParamSpec, *key_parts: int) -> np.ndarray:
    """Weight matrices ~ uniform(-a, a) with a = sqrt(6 / (fan_in + fan_out));
    one-dimensional tensors (biases) start at zero."""
    rng = generator(*key_parts)
    flat = np.zeros(spec.total, dtype=np.float64)
    views = spec.views(flat)
    for name, shape in spec.entries:
        if len(shape) >= 2:
            a = np.sqrt(6.0 / (shape[0] + shape[1]))
            views[name][...] = rng.uniform(-a, a, size=shape)
    return flat


# ---------------------------------------------------------------------------
# Activations and losses
# ---------------------------------------------------------------------------


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def softmax_rows(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax with max subtraction."""
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def cross_entropy_and_dlogits(
    logits: np.ndarray, labels: np.ndarray, subset: np.ndarray
) -> tuple[float, np.ndarray]:
    """Mean cross-entropy over ``subset`` rows; gradient is zero elsewhere."""
    subset = np.asarray(subset, dtype=np.int64)
    if subset.size == 0:
        raise TrainingError("cross-entropy over an empty labeled subset")
    probs = softmax_rows(logits[subset])
    picked = probs[np.arange(subset.size), labels[subset]]
    loss = float(-np.log(np.maximum(picked, 1e-300)).mean())
    dlogits = np.zeros_like(logits)
    grad_rows = probs.copy()
    grad_rows[np.arange(subset.size), labels[subset]] -= 1.0
    dlogits[subset] = grad_rows / subset.size
    return loss, dlogits


# ---------------------------------------------------------------------------
# Dense propagation layers (shared by the encoder and the GoG classifier)
# ---------------------------------------------------------------------------


def normalize_adjacency(adj: np.ndarray, add_self_loops: bool = True) -> np.ndarray:
    """Symmetric degree normalization D^{-1/2} (A [+ I]) D^{-1/2}.

    Rows whose degree is zero (possible only without self-loops) stay zero.
    """
    a = adj.astype(np.float64, copy=True)
    if add_self_loops:
        a[np.diag_indices_from(a)] += 1.0
    deg = a.sum(axis=1)
    inv_sqrt = np.zeros_like(deg)
    positive = deg > 0
    inv_sqrt[positive] = 1.0 / np.sqrt(deg[positive])
    return a * inv_sqrt[:, None] * inv_sqrt[None, :]


def propagate_forward(
    prop: np.ndarray,
    x: np.ndarray,
    w: np.ndarray,
    activation: bool,
    bias: np.ndarray | None = None,
) -> tuple[np.ndarray, tuple]:
    """One graph-convolution layer out = [relu](prop @ x @ w [+ b]) with cache."""
    px = prop @ x
    z = px @ w
    if bias is not None:
        z = z + bias
    out = relu(z) if activation else z
    return out, (prop, px, z if activation else None, w, bias is not None)


def propagate_backward(cache: tuple, dout: np.ndarray):
    """Gradients (dx, dw, db) for propagate_forward; db is None without bias."""
    prop, px, z, w, has_bias = cache
    dz = dout * (z > 0) if z is not None else dout
    dw = px.T @ dz
    db = dz.sum(axis=0) if has_bias else None
    dx = prop.T @ (dz @ w.T)
    return dx, dw, db


def mlp2_forward(
    x: np.ndarray, w1: np.ndarray, b1: np.ndarray, w2: np.ndarray, b2: np.ndarray
) -> tuple[np.ndarray, tuple]:
    """Two-layer perceptron w2 @ relu(w1 x + b1) + b2 applied row-wise."""
    z1 = x @ w1 + b1
    h1 = relu(z1)
    out = h1 @ w2 + b2
    return out, (x, z1, h1, w1, w2)


def mlp2_backward(cache: tuple, dout: np.ndarray):
    """Returns (dx, dw1, db1, dw2, db2)."""
    x, z1, h1, w1, w2 = cache
    dw2 = h1.T @ dout
    db2 = dout.sum(axis=0)
    dh1 = dout @ w2.T
    dz1 = dh1 * (z1 > 0)
    dw1 = x.T @ dz1
    db1 = dz1.sum(axis=0)
    dx = dz1 @ w1.T
    return dx, dw1, db1, dw2, db2


# ---------------------------------------------------------------------------
# Optimizers
# ---------------------------------------------------------------------------

SCHEDULE_CONSTANT = "constant"
SCHEDULE_INVERSE = "inverse"  # eta_s = eta_0 / s, the diminishing-rate mode


@dataclass
class ModelState:
    """Flat parameters plus optimizer moments and a private random stream."""

    spec: ParamSpec
    params: np.ndarray
    optimizer: str = "adam"
    learning_rate: float = 0.01
    schedule: str = SCHEDULE_CONSTANT
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    m: np.ndarray = field(default=None)  # type: ignore[assignment]
    v: np.ndarray = field(default=None)  # type: ignore[assignment]
    rng: np.random.Generator = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.schedule not in (SCHEDULE_CONSTANT, SCHEDULE_INVERSE):
            raise ValueError(f"unknown schedule {self.schedule!r}")
        if self.m is None:
            self.m = np.zeros_like(self.params)
        if self.v is None:
            self.v = np.zeros_like(self.params)
        if self.rng is None:
            self.rng = generator(0)
        if self.m.shape != self.params.shape or self.v.shape != self.params.shape:
            raise ValueError("moment vectors must match parameter length")

    def views(self) -> dict[str, np.ndarray]:
        return self.spec.views(self.params)

    def current_lr(self) -> float:
        s = self.step_count + 1
        if self.schedule == SCHEDULE_INVERSE:
            return self.learning_rate / s
        return self.learning_rate


def init_model_state(
    spec: ParamSpec,
    seed_parts: tuple[int, ...],
    optimizer: str = "adam",
    learning_rate: float = 0.01,
    schedule: str = SCHEDULE_CONSTANT,
) -> ModelState:
    return ModelState(
        spec=spec,
        params=glorot_init(spec, *seed_parts),
        optimizer=optimizer,
        learning_rate=learning_rate,
        schedule=schedule,
        rng=generator(*seed_parts, 0xD0),
    )


def optimizer_step(state: ModelState, grad: np.ndarray) -> ModelState:
    """Apply one SGD or Adam update in place; returns the same state."""
    if grad.shape != state.params.shape:
        raise TrainingError(
            f"gradient length {grad.shape} != parameters {state.params.shape}"
        )
    if not np.all(np.isfinite(grad)):
        raise TrainingError("non-finite gradient; halting")
    lr = state.current_lr()
    state.step_count += 1
    if state.optimizer == "sgd":
        state.params -= lr * grad
    else:
        s = state.step_count
        state.m = state.beta1 * state.m + (1.0 - state.beta1) * grad
        state.v = state.beta2 * state.v + (1.0 - state.beta2) * grad * grad
        m_hat = state.m / (1.0 - state.beta1**s)
        v_hat = state.v / (1.0 - state.beta2**s)
        state.params -= lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return state


# ---------------------------------------------------------------------------
# Checkpoint files: version byte, then a named-tensor list
# ---------------------------------------------------------------------------

CHECKPOINT_VERSION = 1


def save_checkpoint(path: str, tensors: dict[str, np.ndarray]) -> None:
    with open(path, "wb") as f:
        f.write(bytes([CHECKPOINT_VERSION]))
        f.write(struct.pack("<I", len(tensors)))
        for name, arr in tensors.items():
            arr = np.asarray(arr, dtype=np.float64)
            encoded = name.encode("utf-8")
            f.write(struct.pack("<H", len(encoded)))
            f.write(encoded)
            f.write(struct.pack("<B", arr.ndim))
            for d in arr.shape:
                f.write(struct.pack("<I", d))
            f.write(np.ascontiguousarray(arr).astype("<f8").tobytes())


def load_checkpoint(path: str) -> dict[str, np.ndarray]:
    with open(path, "rb") as f:
        version = f.read(1)
        if not version or version[0] != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version in {path}")
        (count,) = struct.unpack("<I", f.read(4))
        out = {}
        for _ in range(count):
            (name_len,) = struct.unpack("<H", f.read(2))
            name = f.read(name_len).decode("utf-8")
            (ndim,) = struct.unpack("<B", f.read(1))
            shape = tuple(struct.unpack("<I", f.read(4))[0] for _ in range(ndim))
            size = int(np.prod(shape)) if shape else 1
            data = np.frombuffer(f.read(8 * size), dtype="<f8").astype(np.float64)
            out[name] = data.reshape(shape)
        return out


def model_tensors(state: ModelState) -> dict[str, np.ndarray]:
    return {name: view.copy() for name, view in state.views().items()}


def load_model_params(state: ModelState, tensors: dict[str, np.ndarray]) -> None:
    views = state.views()
    for name, view in views.items():
        if name not in tensors:
            raise ValueError(f"checkpoint missing tensor {name!r}")
        if tensors[name].shape != view.shape:
            raise ValueError(
                f"tensor {name!r} shape {tensors[name].shape} != {view.shape}"
            )
        view[...] = tensors[name]
