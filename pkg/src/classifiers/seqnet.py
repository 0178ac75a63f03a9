"""
Many-to-one GRU sequence classifier, implemented directly on numpy.

A stack of L GRU layers reads a T×D embedding sequence; the top-layer hidden
state at the last true timestep goes through one linear layer to produce C
logits. Training minimises mean cross-entropy with Adam over seeded,
shuffled, zero-padded mini-batches and keeps the epoch with the best
validation accuracy.

Recurrence per layer (h_0 = 0):
    z_t  = σ(W_z x_t + U_z h_{t-1} + b_z)
    r_t  = σ(W_r x_t + U_r h_{t-1} + b_r)
    h̃_t = tanh(W_h x_t + U_h (r_t ⊙ h_{t-1}) + b_h)
    h_t  = (1 − z_t) ⊙ h_{t-1} + z_t ⊙ h̃_t

classify() reads only the first `length` timesteps, so its output never
depends on padding. Several camera streams are merged by summing logits
before the softmax (combine_streams).
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from src.models.labels import ClassProbs
from src.models.media import EmbeddingSequence
from src.utils.exceptions import DomainError, MediaFormatError, TrainingError

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
GATES = ("z", "r", "h")
LAYER_PARAM_NAMES = tuple(f"{kind}_{gate}" for kind in ("W", "U", "b") for gate in GATES)


class TrainingConfig(BaseModel):
    """Optimisation settings shared by every GRU model."""

    model_config = ConfigDict(frozen=True)

    batch_size: int = Field(default=64, ge=1)
    lr: float = Field(default=3e-4, ge=0.0)
    max_epochs: int = Field(default=30, ge=1)
    beta1: float = Field(default=0.9, ge=0.0, lt=1.0)
    beta2: float = Field(default=0.999, ge=0.0, lt=1.0)
    eps: float = Field(default=1e-8, gt=0.0)
    seed: int = 0


# ─────────────────────────────────────────────
# PARAMETERS
# ─────────────────────────────────────────────

@dataclass
class GruLayerParams:
    W_z: np.ndarray
    W_r: np.ndarray
    W_h: np.ndarray
    U_z: np.ndarray
    U_r: np.ndarray
    U_h: np.ndarray
    b_z: np.ndarray
    b_r: np.ndarray
    b_h: np.ndarray

    def __post_init__(self) -> None:
        hidden, d_in = self.W_z.shape
        for gate in GATES:
            shapes = {
                f"W_{gate}": (getattr(self, f"W_{gate}").shape, (hidden, d_in)),
                f"U_{gate}": (getattr(self, f"U_{gate}").shape, (hidden, hidden)),
                f"b_{gate}": (getattr(self, f"b_{gate}").shape, (hidden,)),
            }
            for name, (actual, expected) in shapes.items():
                if actual != expected:
                    raise DomainError(component="classifiers.seqnet", message=f"{name} has shape {actual}, expected {expected}")

    @property
    def hidden_size(self) -> int:
        return int(self.W_z.shape[0])

    @property
    def input_size(self) -> int:
        return int(self.W_z.shape[1])

    def named(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in LAYER_PARAM_NAMES}

    @classmethod
    def zeros(cls, input_size: int, hidden_size: int) -> "GruLayerParams":
        return cls(
            **{f"W_{g}": np.zeros((hidden_size, input_size)) for g in GATES},
            **{f"U_{g}": np.zeros((hidden_size, hidden_size)) for g in GATES},
            **{f"b_{g}": np.zeros(hidden_size) for g in GATES},
        )


@dataclass
class GruStack:
    layers: list[GruLayerParams]

    def __post_init__(self) -> None:
        if not self.layers:
            raise DomainError(component="classifiers.seqnet", message="A GRU stack needs at least one layer")
        hidden = self.layers[0].hidden_size
        for i, layer in enumerate(self.layers[1:], start=1):
            if layer.input_size != hidden or layer.hidden_size != hidden:
                raise DomainError(component="classifiers.seqnet", message=f"Layer {i} does not chain onto hidden size {hidden}")

    @property
    def input_size(self) -> int:
        return self.layers[0].input_size

    @property
    def hidden_size(self) -> int:
        return self.layers[0].hidden_size

    @property
    def n_layers(self) -> int:
        return len(self.layers)


@dataclass
class ClassifierHead:
    W: np.ndarray
    b: np.ndarray

    def __post_init__(self) -> None:
        if self.W.ndim != 2 or self.b.shape != (self.W.shape[0],):
            raise DomainError(component="classifiers.seqnet", message=f"Head shapes W{self.W.shape} and b{self.b.shape} disagree")

    @property
    def n_classes(self) -> int:
        return int(self.W.shape[0])


def init_stack(input_size: int, hidden_size: int, n_layers: int, rng: np.random.Generator) -> GruStack:
    """uniform(−1/√H, 1/√H) for every weight and bias."""
    k = 1.0 / np.sqrt(hidden_size)
    layers = []
    for i in range(n_layers):
        d_in = input_size if i == 0 else hidden_size
        layers.append(
            GruLayerParams(
                **{f"W_{g}": rng.uniform(-k, k, (hidden_size, d_in)) for g in GATES},
                **{f"U_{g}": rng.uniform(-k, k, (hidden_size, hidden_size)) for g in GATES},
                **{f"b_{g}": rng.uniform(-k, k, hidden_size) for g in GATES},
            )
        )
    return GruStack(layers=layers)


def init_head(hidden_size: int, n_classes: int, rng: np.random.Generator) -> ClassifierHead:
    k = 1.0 / np.sqrt(hidden_size)
    return ClassifierHead(W=rng.uniform(-k, k, (n_classes, hidden_size)), b=rng.uniform(-k, k, n_classes))


def named_parameters(stack: GruStack, head: ClassifierHead) -> dict[str, np.ndarray]:
    """Flat name → array view of every trainable tensor (updates write through)."""
    params = {f"layer{i}.{name}": arr for i, layer in enumerate(stack.layers) for name, arr in layer.named().items()}
    params["head.W"] = head.W
    params["head.b"] = head.b
    return params


def copy_model(stack: GruStack, head: ClassifierHead) -> tuple[GruStack, ClassifierHead]:
    layers = [GruLayerParams(**{name: arr.copy() for name, arr in layer.named().items()}) for layer in stack.layers]
    return GruStack(layers=layers), ClassifierHead(W=head.W.copy(), b=head.b.copy())


# ─────────────────────────────────────────────
# FORWARD
# ─────────────────────────────────────────────

def _sigmoid(a: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * a))


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - np.max(logits, axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def _layer_forward(layer: GruLayerParams, X: np.ndarray, keep_cache: bool) -> tuple[np.ndarray, list[tuple]]:
    """Run one layer over X (T×B×D_in); returns states T×B×H and per-step caches."""
    T, B, _ = X.shape
    H = layer.hidden_size
    # input projections for all timesteps at once
    xz = X @ layer.W_z.T + layer.b_z
    xr = X @ layer.W_r.T + layer.b_r
    xh = X @ layer.W_h.T + layer.b_h

    h = np.zeros((B, H))
    out = np.empty((T, B, H))
    cache = []
    for t in range(T):
        z = _sigmoid(xz[t] + h @ layer.U_z.T)
        r = _sigmoid(xr[t] + h @ layer.U_r.T)
        hh = np.tanh(xh[t] + (r * h) @ layer.U_h.T)
        h_new = (1.0 - z) * h + z * hh
        if keep_cache:
            cache.append((h, z, r, hh))
        h = h_new
        out[t] = h
    return out, cache


def gru_forward(stack: GruStack, sequence: np.ndarray) -> np.ndarray:
    """
    Top-layer hidden states (T×H) for one T×D sequence.

    Raises:
        DomainError: Empty sequence or input width ≠ stack input size
    """
    sequence = np.asarray(sequence, dtype=np.float64)
    if sequence.ndim != 2 or sequence.shape[0] < 1 or sequence.shape[1] != stack.input_size:
        raise DomainError(
            component="classifiers.seqnet",
            message=f"Expected a T×{stack.input_size} sequence with T ≥ 1, got shape {sequence.shape}",
        )
    X = sequence[:, None, :]
    for layer in stack.layers:
        X, _ = _layer_forward(layer, X, keep_cache=False)
    return X[:, 0, :]


def classify(stack: GruStack, head: ClassifierHead, sequence: np.ndarray, length: Optional[int] = None) -> np.ndarray:
    """
    Logits W·h_length + b from the top-layer state at the last true timestep.

    Raises:
        DomainError: length < 1 or beyond the sequence
    """
    sequence = np.asarray(sequence, dtype=np.float64)
    length = sequence.shape[0] if length is None else int(length)
    if length < 1 or length > sequence.shape[0]:
        raise DomainError(component="classifiers.seqnet", message=f"length must lie in [1, {sequence.shape[0]}], got {length}")
    states = gru_forward(stack, sequence[:length])
    return head.W @ states[-1] + head.b


def predict_logits_batch(stack: GruStack, head: ClassifierHead, sequences: Sequence[np.ndarray]) -> np.ndarray:
    """N×C logits, one classify() call per sequence."""
    return np.stack([classify(stack, head, _as_array(seq)) for seq in sequences])


def combine_streams(logit_list: Sequence[np.ndarray]) -> ClassProbs:
    """
    softmax(Σ logits) over several streams of the same task.

    Raises:
        DomainError: Empty list or unequal class counts
    """
    if len(logit_list) == 0:
        raise DomainError(component="classifiers.seqnet", message="combine_streams needs at least one logit vector")
    shapes = {np.shape(logits) for logits in logit_list}
    if len(shapes) != 1 or len(shapes.pop()) != 1:
        raise DomainError(component="classifiers.seqnet", message="All streams must be C-vectors of the same C")
    stacked = np.stack([np.asarray(logits, dtype=np.float64) for logits in logit_list])
    return ClassProbs(p=softmax(stacked.sum(axis=0)))


def cross_entropy(logits: np.ndarray, label: int) -> tuple[float, np.ndarray]:
    """Loss −log softmax(logits)[label] and its gradient softmax − onehot."""
    logits = np.asarray(logits, dtype=np.float64)
    if not 0 <= label < logits.shape[-1]:
        raise DomainError(component="classifiers.seqnet", message=f"label {label} outside [0, {logits.shape[-1]})")
    m = np.max(logits)
    log_sum = m + np.log(np.exp(logits - m).sum())
    grad = softmax(logits)
    grad[label] -= 1.0
    return float(log_sum - logits[label]), grad


# ─────────────────────────────────────────────
# BATCHES AND BACKPROPAGATION
# ─────────────────────────────────────────────

@dataclass
class PaddedBatch:
    """B×T_max×D zero-padded data plus the true length of every row."""

    data: np.ndarray
    lengths: np.ndarray

    def __post_init__(self) -> None:
        if self.data.ndim != 3 or self.lengths.shape != (self.data.shape[0],):
            raise DomainError(component="classifiers.seqnet", message="PaddedBatch needs B×T×D data and B lengths")
        if np.any(self.lengths < 1) or np.any(self.lengths > self.data.shape[1]):
            raise DomainError(component="classifiers.seqnet", message="Every length must lie in [1, T_max]")

    @classmethod
    def from_sequences(cls, sequences: Sequence[np.ndarray]) -> "PaddedBatch":
        arrays = [_as_array(seq) for seq in sequences]
        if not arrays:
            raise DomainError(component="classifiers.seqnet", message="Cannot batch zero sequences")
        t_max = max(a.shape[0] for a in arrays)
        data = np.zeros((len(arrays), t_max, arrays[0].shape[1]))
        for i, a in enumerate(arrays):
            data[i, : a.shape[0]] = a
        return cls(data=data, lengths=np.array([a.shape[0] for a in arrays], dtype=np.int64))


def loss_and_grads(
    stack: GruStack,
    head: ClassifierHead,
    batch: PaddedBatch,
    labels: np.ndarray,
) -> tuple[float, dict[str, np.ndarray], np.ndarray]:
    """
    Mean cross-entropy over the batch and its gradient for every parameter.

    Returns:
        (loss, grads keyed like named_parameters, logits B×C)
    """
    labels = np.asarray(labels, dtype=np.int64)
    B = batch.data.shape[0]
    rows = np.arange(B)
    last = batch.lengths - 1

    X = np.transpose(batch.data, (1, 0, 2))
    inputs: list[np.ndarray] = []
    caches: list[list[tuple]] = []
    for layer in stack.layers:
        inputs.append(X)
        X, cache = _layer_forward(layer, X, keep_cache=True)
        caches.append(cache)

    h_last = X[last, rows]
    logits = h_last @ head.W.T + head.b
    probs = softmax(logits)
    log_probs = np.log(np.maximum(probs[rows, labels], 1e-300))
    loss = float(-log_probs.mean())

    d_logits = probs.copy()
    d_logits[rows, labels] -= 1.0
    d_logits /= B
    grads: dict[str, np.ndarray] = {"head.W": d_logits.T @ h_last, "head.b": d_logits.sum(axis=0)}

    d_out = np.zeros_like(X)
    d_out[last, rows] = d_logits @ head.W

    for index in range(len(stack.layers) - 1, -1, -1):
        layer = stack.layers[index]
        d_out, layer_grads = _layer_backward(layer, inputs[index], caches[index], d_out)
        for name, g in layer_grads.items():
            grads[f"layer{index}.{name}"] = g
    return loss, grads, logits


def _layer_backward(
    layer: GruLayerParams,
    X: np.ndarray,
    cache: list[tuple],
    d_out: np.ndarray,
) -> tuple[np.ndarray, dict[str, np.ndarray]]:
    """BPTT through one layer; returns the gradient w.r.t. its inputs and its parameter gradients."""
    grads = {name: np.zeros_like(arr) for name, arr in layer.named().items()}
    d_inputs = np.zeros_like(X)
    d_carry = np.zeros_like(d_out[0])

    for t in range(X.shape[0] - 1, -1, -1):
        h_prev, z, r, hh = cache[t]
        x = X[t]
        dh = d_out[t] + d_carry

        d_hh = dh * z
        dz = dh * (hh - h_prev)
        dh_prev = dh * (1.0 - z)

        da_h = d_hh * (1.0 - hh ** 2)
        grads["W_h"] += da_h.T @ x
        grads["U_h"] += da_h.T @ (r * h_prev)
        grads["b_h"] += da_h.sum(axis=0)
        d_rh = da_h @ layer.U_h
        dr = d_rh * h_prev
        dh_prev += d_rh * r

        da_z = dz * z * (1.0 - z)
        da_r = dr * r * (1.0 - r)
        grads["W_z"] += da_z.T @ x
        grads["U_z"] += da_z.T @ h_prev
        grads["b_z"] += da_z.sum(axis=0)
        grads["W_r"] += da_r.T @ x
        grads["U_r"] += da_r.T @ h_prev
        grads["b_r"] += da_r.sum(axis=0)

        d_inputs[t] = da_h @ layer.W_h + da_z @ layer.W_z + da_r @ layer.W_r
        d_carry = dh_prev + da_z @ layer.U_z + da_r @ layer.U_r
    return d_inputs, grads


# ─────────────────────────────────────────────
# OPTIMISATION
# ─────────────────────────────────────────────

@dataclass
class AdamState:
    t: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: AdamState,
    config: TrainingConfig,
) -> AdamState:
    """
    One bias-corrected Adam update, applied to params in place.

    Raises:
        TrainingError: A gradient holds NaN or inf (nothing is updated)
    """
    for name, g in grads.items():
        if name not in params or params[name].shape != g.shape:
            raise DomainError(component="classifiers.seqnet", message=f"Gradient '{name}' does not match any parameter")
        if not np.all(np.isfinite(g)):
            raise TrainingError(
                component="classifiers.seqnet",
                message=f"Non-finite gradient for '{name}' at step {state.t + 1}",
                details={"param": name, "step": state.t + 1, "bad_entries": int(np.sum(~np.isfinite(g)))},
            )

    state.t += 1
    correction1 = 1.0 - config.beta1 ** state.t
    correction2 = 1.0 - config.beta2 ** state.t
    for name, g in grads.items():
        m = state.m.setdefault(name, np.zeros_like(g))
        v = state.v.setdefault(name, np.zeros_like(g))
        m *= config.beta1
        m += (1.0 - config.beta1) * g
        v *= config.beta2
        v += (1.0 - config.beta2) * g * g
        params[name] -= config.lr * (m / correction1) / (np.sqrt(v / correction2) + config.eps)
    return state


# ─────────────────────────────────────────────
# TRAINING
# ─────────────────────────────────────────────

@dataclass
class EpochMetrics:
    epoch: int
    train_loss: float
    train_accuracy: float
    val_accuracy: Optional[float]


@dataclass
class TrainResult:
    stack: GruStack
    head: ClassifierHead
    history: list[EpochMetrics]
    best_epoch: int


def _as_array(item: Any) -> np.ndarray:
    return item.data if isinstance(item, EmbeddingSequence) else np.asarray(item, dtype=np.float64)


def accuracy(stack: GruStack, head: ClassifierHead, items: Sequence[tuple[Any, int]]) -> float:
    logits = predict_logits_batch(stack, head, [seq for seq, _ in items])
    labels = np.array([label for _, label in items])
    return float(np.mean(np.argmax(logits, axis=1) == labels))


def train(
    stack: GruStack,
    head: ClassifierHead,
    train_items: Sequence[tuple[Any, int]],
    config: TrainingConfig,
    val_items: Optional[Sequence[tuple[Any, int]]] = None,
) -> TrainResult:
    """
    Mini-batch Adam training with best-epoch selection.

    The initial stack/head are left untouched; the returned model is a copy
    snapshotted at the epoch with the highest validation accuracy (earliest
    on ties). Without validation items the training accuracy selects.

    Raises:
        DomainError: Empty training set
        TrainingError: Non-finite gradients
    """
    if len(train_items) == 0:
        raise DomainError(component="classifiers.seqnet", message="Training set is empty")

    work_stack, work_head = copy_model(stack, head)
    params = named_parameters(work_stack, work_head)
    state = AdamState()
    rng = np.random.default_rng(config.seed)
    arrays = [_as_array(seq) for seq, _ in train_items]
    labels = np.array([label for _, label in train_items], dtype=np.int64)

    best: Optional[tuple[float, int, GruStack, ClassifierHead]] = None
    history: list[EpochMetrics] = []
    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(len(arrays))
        total_loss = 0.0
        correct = 0
        for start in range(0, len(order), config.batch_size):
            idx = order[start: start + config.batch_size]
            batch = PaddedBatch.from_sequences([arrays[i] for i in idx])
            loss, grads, logits = loss_and_grads(work_stack, work_head, batch, labels[idx])
            adam_step(params, grads, state, config)
            total_loss += loss * len(idx)
            correct += int(np.sum(np.argmax(logits, axis=1) == labels[idx]))

        val_acc = accuracy(work_stack, work_head, val_items) if val_items else None
        metrics = EpochMetrics(
            epoch=epoch,
            train_loss=total_loss / len(arrays),
            train_accuracy=correct / len(arrays),
            val_accuracy=val_acc,
        )
        history.append(metrics)
        logger.debug(
            "epoch %d loss=%.4f train_acc=%.3f val_acc=%s",
            epoch, metrics.train_loss, metrics.train_accuracy,
            "n/a" if val_acc is None else f"{val_acc:.3f}",
        )

        score = val_acc if val_acc is not None else metrics.train_accuracy
        if best is None or score > best[0]:
            best = (score, epoch, *copy_model(work_stack, work_head))

    _, best_epoch, best_stack, best_head = best
    return TrainResult(stack=best_stack, head=best_head, history=history, best_epoch=best_epoch)


# ─────────────────────────────────────────────
# CHECKPOINTS
# ─────────────────────────────────────────────

def seqnet_to_dict(stack: GruStack, head: ClassifierHead) -> dict[str, Any]:
    return {
        "format_version": FORMAT_VERSION,
        "kind": "gru_classifier",
        "input_size": stack.input_size,
        "hidden_size": stack.hidden_size,
        "n_layers": stack.n_layers,
        "n_classes": head.n_classes,
        "params": {name: {"shape": list(arr.shape), "values": arr.reshape(-1).tolist()}
                   for name, arr in named_parameters(stack, head).items()},
    }


def seqnet_from_dict(data: dict[str, Any]) -> tuple[GruStack, ClassifierHead]:
    if data.get("kind") != "gru_classifier" or data.get("format_version") != FORMAT_VERSION:
        raise MediaFormatError(
            component="classifiers.seqnet",
            message="Not a version-1 GRU checkpoint",
            details={"kind": data.get("kind"), "format_version": data.get("format_version")},
        )
    arrays = {name: np.array(entry["values"], dtype=np.float64).reshape(entry["shape"]) for name, entry in data["params"].items()}
    layers = [
        GruLayerParams(**{name: arrays[f"layer{i}.{name}"] for name in LAYER_PARAM_NAMES})
        for i in range(int(data["n_layers"]))
    ]
    return GruStack(layers=layers), ClassifierHead(W=arrays["head.W"], b=arrays["head.b"])


def save_seqnet(path: str | Path, stack: GruStack, head: ClassifierHead) -> None:
    Path(path).write_text(json.dumps(seqnet_to_dict(stack, head), sort_keys=True), encoding="utf-8")


def load_seqnet(path: str | Path) -> tuple[GruStack, ClassifierHead]:
    return seqnet_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
