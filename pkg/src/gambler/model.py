"""Multilayer perceptron with an ``m + 1`` softmax head, trained by hand.

Parameters are a list of ``(W, b)`` pairs with ``W`` shaped ``(fan_in,
fan_out)``.  The last layer emits ``m + 1`` logits; slot 0 is the rejection
score.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .exceptions import DivergenceError, FormatError, InvalidInputError, ShapeError
from .losses import LossKind, head_loss_and_grad
from .noise import CorruptedDataset
from .numerics import softmax
from .schedule import LambdaSchedule, schedule_batch

ACTIVATIONS = ("relu", "tanh")
OPTIMIZERS = ("sgd", "sgd-momentum", "adaptive-moment")

CHECKPOINT_MAGIC = b"GMBL"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class MlpSpec:
    """Layer widths from input to the ``m + 1`` head.

    ``init_scale=None`` draws each weight matrix from a normal with standard
    deviation ``sqrt(2 / fan_in)``; a number fixes the deviation for every
    layer.  Biases start at zero.
    """

    layer_widths: tuple[int, ...]
    activation: str = "relu"
    init_scale: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "layer_widths", tuple(int(w) for w in self.layer_widths))
        if len(self.layer_widths) < 2:
            raise InvalidInputError("need at least an input and an output width")
        if any(w < 1 for w in self.layer_widths):
            raise InvalidInputError("layer widths must be positive")
        if self.layer_widths[-1] < 3:
            raise InvalidInputError("head width must be m + 1 with m >= 2")
        if self.activation not in ACTIVATIONS:
            raise InvalidInputError(f"activation must be one of {ACTIVATIONS}")

    @property
    def num_classes(self) -> int:
        return self.layer_widths[-1] - 1

    @property
    def input_dim(self) -> int:
        return self.layer_widths[0]


@dataclass(frozen=True)
class OptimizerSpec:
    kind: str = "sgd-momentum"
    learning_rate: float = 1e-3
    momentum: float = 0.9
    batch_size: int = 128
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.kind not in OPTIMIZERS:
            raise InvalidInputError(f"optimizer must be one of {OPTIMIZERS}")
        if not self.learning_rate >= 0:
            raise InvalidInputError("learning_rate must be non-negative")
        if not 0.0 <= self.momentum < 1.0:
            raise InvalidInputError("momentum must lie in [0, 1)")
        if self.batch_size < 1:
            raise InvalidInputError("batch_size must be >= 1")


@dataclass(frozen=True)
class LossConfig:
    kind: LossKind = LossKind.GAMBLER
    q: float = 0.7
    mask_rejection: bool = False

    def __post_init__(self):
        object.__setattr__(self, "kind", LossKind(self.kind))


def init_params(spec: MlpSpec, rng: np.random.Generator) -> list[tuple[np.ndarray, np.ndarray]]:
    params = []
    for fan_in, fan_out in zip(spec.layer_widths[:-1], spec.layer_widths[1:]):
        std = math.sqrt(2.0 / fan_in) if spec.init_scale is None else float(spec.init_scale)
        W = rng.standard_normal((fan_in, fan_out)) * std
        params.append((W, np.zeros(fan_out)))
    return params


def _act(x, kind):
    return np.maximum(x, 0.0) if kind == "relu" else np.tanh(x)


def _act_grad(pre, post, kind):
    return (pre > 0).astype(np.float64) if kind == "relu" else 1.0 - post * post


def forward_logits(params, X, activation: str = "relu", *, cache: bool = False):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != params[0][0].shape[0]:
        raise ShapeError(f"batch has shape {X.shape}, network expects {params[0][0].shape[0]} columns")
    h = X
    tape = [(None, X)]
    for W, b in params[:-1]:
        pre = h @ W + b
        h = _act(pre, activation)
        tape.append((pre, h))
    W, b = params[-1]
    logits = h @ W + b
    return (logits, tape) if cache else logits


def forward(params, X, activation: str = "relu") -> np.ndarray:
    """Head probabilities, one ``m + 1`` row per input (slot 0 = rejection)."""
    return softmax(forward_logits(params, X, activation))


def backward(params, tape, dlogits, activation: str = "relu"):
    """Parameter gradients given ``dlogits`` (already scaled for the mean)."""
    grads = [None] * len(params)
    delta = dlogits
    for layer in range(len(params) - 1, -1, -1):
        W, _ = params[layer]
        h_in = tape[layer][1]
        grads[layer] = (h_in.T @ delta, delta.sum(axis=0))
        if layer > 0:
            pre, post = tape[layer]
            delta = (delta @ W.T) * _act_grad(pre, post, activation)
    return grads


def loss_and_grads(params, X, labels, losscfg: LossConfig, lam, activation="relu"):
    """Mean batch loss and its gradient for every parameter."""
    logits, tape = forward_logits(params, X, activation, cache=True)
    losses, dlogits, _ = head_loss_and_grad(
        logits, labels, losscfg.kind, lam, q=losscfg.q, mask_rejection=losscfg.mask_rejection
    )
    n = X.shape[0]
    return float(np.mean(losses)), backward(params, tape, dlogits / n, activation)


@dataclass
class TrainState:
    spec: MlpSpec
    optimizer: OptimizerSpec
    params: list
    slots: list = field(default_factory=list)
    steps: int = 0
    epoch: int = 0

    @classmethod
    def create(cls, spec: MlpSpec, optimizer: OptimizerSpec, rng: np.random.Generator) -> "TrainState":
        return cls(spec, optimizer, init_params(spec, rng))


def _optimizer_step(state: TrainState, grads) -> None:
    opt = state.optimizer
    lr = opt.learning_rate
    if not state.slots:
        state.slots = [[np.zeros_like(W), np.zeros_like(b), np.zeros_like(W), np.zeros_like(b)] for W, b in state.params]
    state.steps += 1
    t = state.steps
    new_params = []
    for (W, b), (gW, gb), slot in zip(state.params, grads, state.slots):
        if opt.kind == "sgd":
            W = W - lr * gW
            b = b - lr * gb
        elif opt.kind == "sgd-momentum":
            slot[0] = opt.momentum * slot[0] + gW
            slot[1] = opt.momentum * slot[1] + gb
            W = W - lr * slot[0]
            b = b - lr * slot[1]
        else:
            beta1, beta2 = opt.momentum, opt.beta2
            c1 = 1.0 - beta1**t
            c2 = 1.0 - beta2**t
            out = []
            for i, (p, g) in enumerate(((W, gW), (b, gb))):
                slot[i] = beta1 * slot[i] + (1.0 - beta1) * g
                slot[i + 2] = beta2 * slot[i + 2] + (1.0 - beta2) * g * g
                step = (slot[i] / c1) / (np.sqrt(slot[i + 2] / c2) + opt.eps)
                out.append(p - lr * step)
            W, b = out
        new_params.append((W, b))
    state.params = new_params


@dataclass
class EpochRecord:
    """Metrics after one training epoch.  ``None`` marks an undefined value."""

    epoch: int
    train_loss_total: float
    train_loss_clean: float | None
    train_loss_corrupt: float | None
    train_acc: float
    test_acc: float | None
    val_acc: float | None
    rejection_mean_clean: float | None
    rejection_mean_corrupt: float | None
    abstain_fraction: float
    lambda_mean: float | None
    lambda_min: float | None
    lambda_max: float | None
    stage: str = ""

    @classmethod
    def columns(cls) -> list[str]:
        return [f.name for f in fields(cls)]


@dataclass
class Evaluation:
    losses: np.ndarray
    probs: np.ndarray

    @property
    def predictions(self) -> np.ndarray:
        return np.argmax(self.probs[:, 1:], axis=1)

    @property
    def rejection(self) -> np.ndarray:
        return self.probs[:, 0]


def evaluate(state: TrainState, X, labels, losscfg: LossConfig, sched: LambdaSchedule, epoch: int, chunk: int = 4096):
    """Per-sample loss and head probabilities with the current parameters."""
    losses, probs = [], []
    m = state.spec.num_classes
    for start in range(0, X.shape[0], chunk):
        logits = forward_logits(state.params, X[start : start + chunk], state.spec.activation)
        if not np.all(np.isfinite(logits)):
            raise DivergenceError("non-finite logits during evaluation")
        lam = _batch_lambda(logits, losscfg, sched, epoch, m)
        loss, _, p = head_loss_and_grad(
            logits, labels[start : start + chunk], losscfg.kind, lam,
            q=losscfg.q, mask_rejection=losscfg.mask_rejection,
        )
        losses.append(loss)
        probs.append(p)
    return Evaluation(np.concatenate(losses), np.concatenate(probs))


def accuracy(params, X, y, activation="relu") -> float:
    logits = forward_logits(params, X, activation)
    return float(np.mean(np.argmax(logits[:, 1:], axis=1) == y))


def _batch_lambda(logits, losscfg: LossConfig, sched: LambdaSchedule, epoch: int, m: int):
    if not losscfg.kind.uses_rejection:
        return None
    if sched.mode == "fixed" and epoch >= sched.warmup_epochs:
        return np.full(logits.shape[0], float(sched.fixed_value))
    probs = softmax(logits)
    return schedule_batch(probs[:, 1:], sched, epoch)


def _mean_or_none(x: np.ndarray) -> float | None:
    return float(np.mean(x)) if x.size else None


def train_epoch(
    state: TrainState,
    dataset: CorruptedDataset,
    losscfg: LossConfig,
    sched: LambdaSchedule,
    rng: np.random.Generator,
    *,
    test: tuple[np.ndarray, np.ndarray] | None = None,
    val: tuple[np.ndarray, np.ndarray] | None = None,
) -> tuple[TrainState, EpochRecord]:
    """One shuffled pass over ``dataset`` followed by a full evaluation.

    The record's losses and rejection statistics come from an evaluation
    pass with the end-of-epoch parameters, so they partition exactly into the
    clean and corrupt subsets.  Payoff statistics cover the minibatches seen
    during the pass.
    """
    X = dataset.inputs
    y = dataset.noisy_labels
    n = X.shape[0]
    m = state.spec.num_classes
    act = state.spec.activation
    epoch_index = state.epoch
    bs = state.optimizer.batch_size
    order = rng.permutation(n)
    lam_sum, lam_min, lam_max, lam_count = 0.0, math.inf, -math.inf, 0

    for start in range(0, n, bs):
        idx = order[start : start + bs]
        logits, tape = forward_logits(state.params, X[idx], act, cache=True)
        if not np.all(np.isfinite(logits)):
            raise DivergenceError(f"non-finite logits at epoch {epoch_index + 1}, step {state.steps + 1}")
        lam = _batch_lambda(logits, losscfg, sched, epoch_index, m)
        losses, dlogits, _ = head_loss_and_grad(
            logits, y[idx], losscfg.kind, lam, q=losscfg.q, mask_rejection=losscfg.mask_rejection
        )
        if not np.all(np.isfinite(losses)):
            raise DivergenceError(f"non-finite loss at epoch {epoch_index + 1}, step {state.steps + 1}")
        if lam is not None:
            lam_sum += float(np.sum(lam))
            lam_min = min(lam_min, float(np.min(lam)))
            lam_max = max(lam_max, float(np.max(lam)))
            lam_count += lam.size
        grads = backward(state.params, tape, dlogits / idx.size, act)
        _optimizer_step(state, grads)

    state.epoch += 1
    ev = evaluate(state, X, y, losscfg, sched, epoch_index)
    if not np.all(np.isfinite(ev.losses)):
        raise DivergenceError(f"non-finite training loss after epoch {state.epoch}")
    mask = dataset.corrupt_mask
    reject = ev.rejection if losscfg.kind.uses_rejection else np.zeros(n)
    abstain = np.argmax(ev.probs, axis=1) == 0
    record = EpochRecord(
        epoch=state.epoch,
        train_loss_total=float(np.mean(ev.losses)),
        train_loss_clean=_mean_or_none(ev.losses[~mask]),
        train_loss_corrupt=_mean_or_none(ev.losses[mask]),
        train_acc=float(np.mean(ev.predictions == y)),
        test_acc=accuracy(state.params, test[0], test[1], act) if test is not None else None,
        val_acc=accuracy(state.params, val[0], val[1], act) if val is not None and len(val[1]) else None,
        rejection_mean_clean=_mean_or_none(reject[~mask]),
        rejection_mean_corrupt=_mean_or_none(reject[mask]),
        abstain_fraction=float(np.mean(abstain)),
        lambda_mean=lam_sum / lam_count if lam_count else None,
        lambda_min=lam_min if lam_count else None,
        lambda_max=lam_max if lam_count else None,
    )
    return state, record


def save_checkpoint(path, spec: MlpSpec, params) -> None:
    """Write ``params`` in the GMBL checkpoint layout (little endian).

    ``magic "GMBL" | u32 version | u32 layer count L | L + 1 u32 widths``,
    then for each layer the weights (``fan_in x fan_out``, row-major)
    followed by the biases, all float64.
    """
    widths = spec.layer_widths
    buf = bytearray(CHECKPOINT_MAGIC)
    buf += struct.pack("<II", CHECKPOINT_VERSION, len(widths) - 1)
    buf += struct.pack(f"<{len(widths)}I", *widths)
    for W, b in params:
        buf += np.ascontiguousarray(W, dtype="<f8").tobytes()
        buf += np.ascontiguousarray(b, dtype="<f8").tobytes()
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(bytes(buf))
    tmp.replace(path)


def load_checkpoint(path) -> tuple[tuple[int, ...], list]:
    data = Path(path).read_bytes()
    if data[:4] != CHECKPOINT_MAGIC:
        raise FormatError(f"{path}: not a GMBL checkpoint")
    try:
        version, n_layers = struct.unpack_from("<II", data, 4)
        if version != CHECKPOINT_VERSION:
            raise FormatError(f"{path}: unsupported checkpoint version {version}")
        widths = struct.unpack_from(f"<{n_layers + 1}I", data, 12)
    except struct.error as exc:
        raise FormatError(f"{path}: truncated checkpoint header") from exc
    offset = 12 + 4 * (n_layers + 1)
    params = []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        size = fan_in * fan_out
        try:
            W = np.frombuffer(data, dtype="<f8", count=size, offset=offset).reshape(fan_in, fan_out)
            offset += 8 * size
            b = np.frombuffer(data, dtype="<f8", count=fan_out, offset=offset)
            offset += 8 * fan_out
        except ValueError as exc:
            raise FormatError(f"{path}: truncated checkpoint") from exc
        params.append((W.astype(np.float64), b.astype(np.float64)))
    if offset != len(data):
        raise FormatError(f"{path}: trailing bytes after last layer")
    return tuple(widths), params
