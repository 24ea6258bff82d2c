"""Compact trainable classifier: linear or one-hidden-layer tanh network.

Plain numpy forward/backward with softmax cross-entropy, SGD with decoupled
weight decay (weights only, never biases), and deep frozen clones for
virtual-model evaluation. Gradients are exact; the test suite checks them
against central finite differences.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DivergenceError, LearnerError
from .stream import LabeledVector

CHECKPOINT_VERSION = 1


@dataclass
class SgdConfig:
    learning_rate: float = 0.001
    weight_decay: float = 1e-4

    def __post_init__(self) -> None:
        if self.learning_rate <= 0:
            raise LearnerError("learning_rate must be > 0")
        if self.weight_decay < 0:
            raise LearnerError("weight_decay must be >= 0")


@dataclass
class ClassifierState:
    """Parameters plus architecture descriptor.

    ``hidden_dim is None`` selects the pure-linear model. The output head
    always has ``num_classes`` columns (fixed head: classes the stream has
    not reached yet simply stay untrained).
    """

    input_dim: int
    num_classes: int
    hidden_dim: int | None
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    step_count: int = 0
    frozen: bool = False

    def copy(self, frozen: bool | None = None) -> "ClassifierState":
        return ClassifierState(
            input_dim=self.input_dim,
            num_classes=self.num_classes,
            hidden_dim=self.hidden_dim,
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
            step_count=self.step_count,
            frozen=self.frozen if frozen is None else frozen,
        )

    def num_params(self) -> int:
        return sum(w.size for w in self.weights) + sum(b.size for b in self.biases)


@dataclass
class Gradients:
    weights: list[np.ndarray]
    biases: list[np.ndarray] = field(default_factory=list)


def flatten_gradients(grads: Gradients) -> np.ndarray:
    """Canonical layer-interleaved flattening: W1, b1[, W2, b2]."""
    parts: list[np.ndarray] = []
    for w, b in zip(grads.weights, grads.biases):
        parts.append(w.ravel())
        parts.append(b.ravel())
    return np.concatenate(parts)


def init_classifier(
    input_dim: int,
    num_classes: int,
    hidden_dim: int | None = 64,
    rng: np.random.Generator | None = None,
) -> ClassifierState:
    """Seeded uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) init for every layer."""
    if input_dim < 1 or num_classes < 2:
        raise LearnerError("need input_dim >= 1 and num_classes >= 2")
    if hidden_dim is not None and hidden_dim < 1:
        raise LearnerError("hidden_dim must be >= 1 or None for a linear model")
    rng = rng or np.random.default_rng()
    dims = [input_dim] + ([hidden_dim] if hidden_dim else []) + [num_classes]
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(rng.uniform(-bound, bound, size=fan_out))
    return ClassifierState(input_dim, num_classes, hidden_dim, weights, biases)


def features_matrix(batch: list[LabeledVector] | np.ndarray) -> np.ndarray:
    if isinstance(batch, np.ndarray):
        return np.atleast_2d(batch)
    return np.stack([sample.features for sample in batch])


def labels_vector(batch: list[LabeledVector]) -> np.ndarray:
    return np.array([sample.label for sample in batch], dtype=np.int64)


def _check_input(state: ClassifierState, x: np.ndarray) -> None:
    if x.ndim != 2 or x.shape[1] != state.input_dim:
        raise LearnerError(
            f"feature matrix shape {x.shape} does not match input_dim {state.input_dim}"
        )


def forward(state: ClassifierState, batch: list[LabeledVector] | np.ndarray) -> np.ndarray:
    """Logits, one row per sample and ``num_classes`` columns."""
    x = features_matrix(batch)
    _check_input(state, x)
    if state.hidden_dim is None:
        return x @ state.weights[0] + state.biases[0]
    hidden = np.tanh(x @ state.weights[0] + state.biases[0])
    return hidden @ state.weights[1] + state.biases[1]


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def loss_per_sample(state: ClassifierState, batch: list[LabeledVector]) -> np.ndarray:
    """Per-sample softmax cross-entropy, no reduction."""
    logits = forward(state, batch)
    labels = labels_vector(batch)
    log_probs = _log_softmax(logits)
    return -log_probs[np.arange(len(batch)), labels]


def loss_and_grads(state: ClassifierState, batch: list[LabeledVector]) -> tuple[float, Gradients]:
    """Mean cross-entropy over the batch and exact parameter gradients.

    Weight decay is not part of this loss; it is applied decoupled inside
    ``sgd_step`` so these gradients match finite differences exactly.
    """
    if not batch:
        raise LearnerError("loss_and_grads needs a non-empty batch")
    x = features_matrix(batch)
    _check_input(state, x)
    labels = labels_vector(batch)
    n = len(batch)

    if state.hidden_dim is None:
        logits = x @ state.weights[0] + state.biases[0]
    else:
        pre = x @ state.weights[0] + state.biases[0]
        hidden = np.tanh(pre)
        logits = hidden @ state.weights[1] + state.biases[1]

    log_probs = _log_softmax(logits)
    loss = float(-log_probs[np.arange(n), labels].mean())

    delta = np.exp(log_probs)
    delta[np.arange(n), labels] -= 1.0
    delta /= n

    if state.hidden_dim is None:
        grads = Gradients(weights=[x.T @ delta], biases=[delta.sum(axis=0)])
    else:
        gw2 = hidden.T @ delta
        gb2 = delta.sum(axis=0)
        dh = (delta @ state.weights[1].T) * (1.0 - hidden**2)
        grads = Gradients(weights=[x.T @ dh, gw2], biases=[dh.sum(axis=0), gb2])
    return loss, grads


def per_sample_grad_vectors(state: ClassifierState, batch: list[LabeledVector]) -> np.ndarray:
    """Flattened single-sample loss gradients, one row per sample.

    Row i equals the concatenation (W1, b1[, W2, b2]) of the gradients that
    ``loss_and_grads(state, [batch[i]])`` would produce, computed in one
    vectorized pass.
    """
    if not batch:
        return np.zeros((0, state.num_params()))
    x = features_matrix(batch)
    _check_input(state, x)
    labels = labels_vector(batch)
    n = len(batch)

    if state.hidden_dim is None:
        logits = x @ state.weights[0] + state.biases[0]
        log_probs = _log_softmax(logits)
        delta = np.exp(log_probs)
        delta[np.arange(n), labels] -= 1.0
        gw = np.einsum("ni,nj->nij", x, delta).reshape(n, -1)
        return np.concatenate([gw, delta], axis=1)

    pre = x @ state.weights[0] + state.biases[0]
    hidden = np.tanh(pre)
    logits = hidden @ state.weights[1] + state.biases[1]
    log_probs = _log_softmax(logits)
    delta = np.exp(log_probs)
    delta[np.arange(n), labels] -= 1.0
    dh = (delta @ state.weights[1].T) * (1.0 - hidden**2)
    gw1 = np.einsum("ni,nj->nij", x, dh).reshape(n, -1)
    gw2 = np.einsum("ni,nj->nij", hidden, delta).reshape(n, -1)
    return np.concatenate([gw1, dh, gw2, delta], axis=1)


def sgd_step(state: ClassifierState, grads: Gradients, cfg: SgdConfig) -> ClassifierState:
    """In-place update: w -= lr*(g + wd*w) for weights, b -= lr*g for biases."""
    if state.frozen:
        raise LearnerError("cannot apply an SGD step to a frozen clone")
    if len(grads.weights) != len(state.weights) or len(grads.biases) != len(state.biases):
        raise LearnerError("gradient structure does not match the classifier")
    for g in [*grads.weights, *grads.biases]:
        if not np.all(np.isfinite(g)):
            raise DivergenceError("non-finite gradient encountered")
    lr, wd = cfg.learning_rate, cfg.weight_decay
    for w, g in zip(state.weights, grads.weights):
        if w.shape != g.shape:
            raise LearnerError(f"weight gradient shape {g.shape} != parameter shape {w.shape}")
        w -= lr * (g + wd * w)
    for b, g in zip(state.biases, grads.biases):
        if b.shape != g.shape:
            raise LearnerError(f"bias gradient shape {g.shape} != parameter shape {b.shape}")
        b -= lr * g
    state.step_count += 1
    return state


def clone_frozen(state: ClassifierState) -> ClassifierState:
    """Deep value copy flagged non-trainable; mutating the original never
    touches the clone and vice versa."""
    return state.copy(frozen=True)


def predict(state: ClassifierState, batch: list[LabeledVector] | np.ndarray) -> np.ndarray:
    """Argmax class per row; ties resolve to the lowest class id."""
    logits = forward(state, batch)
    return logits.argmax(axis=1)


def ncm_predict(
    class_means: dict[int, np.ndarray],
    batch: list[LabeledVector] | np.ndarray,
) -> np.ndarray:
    """Nearest-class-mean in Euclidean distance; ties go to the lowest id."""
    if not class_means:
        raise LearnerError("ncm_predict needs at least one class mean")
    ids = np.array(sorted(class_means), dtype=np.int64)
    means = np.stack([class_means[int(c)] for c in ids])
    x = features_matrix(batch)
    d2 = ((x[:, None, :] - means[None, :, :]) ** 2).sum(axis=2)
    return ids[d2.argmin(axis=1)]


def classifier_to_dict(state: ClassifierState) -> dict:
    return {
        "version": CHECKPOINT_VERSION,
        "input_dim": state.input_dim,
        "num_classes": state.num_classes,
        "hidden_dim": state.hidden_dim,
        "weights": [w.tolist() for w in state.weights],
        "biases": [b.tolist() for b in state.biases],
        "step_count": state.step_count,
        "frozen": state.frozen,
    }


def classifier_from_dict(payload: dict) -> ClassifierState:
    if payload.get("version") != CHECKPOINT_VERSION:
        raise LearnerError(f"unsupported checkpoint version {payload.get('version')!r}")
    return ClassifierState(
        input_dim=int(payload["input_dim"]),
        num_classes=int(payload["num_classes"]),
        hidden_dim=None if payload["hidden_dim"] is None else int(payload["hidden_dim"]),
        weights=[np.array(w, dtype=np.float64) for w in payload["weights"]],
        biases=[np.array(b, dtype=np.float64) for b in payload["biases"]],
        step_count=int(payload["step_count"]),
        frozen=bool(payload["frozen"]),
    )


def save_classifier(state: ClassifierState, path: str | Path) -> None:
    Path(path).write_text(json.dumps(classifier_to_dict(state)) + "\n")


def load_classifier(path: str | Path) -> ClassifierState:
    return classifier_from_dict(json.loads(Path(path).read_text()))
