"""Linear softmax classifier trained with minibatch Adam on frozen features."""

from __future__ import annotations

import io
import json
import zipfile
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ConfigError, ContractViolation
from .rng import generator

MODEL_FORMAT = "bcpnn-linear-model"
MODEL_VERSION = 1
SHUFFLE_STREAM = 31


@dataclass(frozen=True)
class ClassifierParams:
    n_classes: int = 10
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    batch_size: int = 128
    n_epochs: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.n_classes < 2:
            raise ConfigError("n_classes must be >= 2")
        if not self.lr > 0:
            raise ConfigError(f"lr must be > 0, got {self.lr}")
        for name in ("beta1", "beta2"):
            v = getattr(self, name)
            if not 0 < v < 1:
                raise ConfigError(f"{name} must be in (0, 1), got {v}")
        if not self.adam_eps > 0:
            raise ConfigError("adam_eps must be > 0")
        if self.batch_size < 1 or self.n_epochs < 0:
            raise ConfigError("batch_size must be >= 1 and n_epochs >= 0")


@dataclass
class LinearModel:
    weights: np.ndarray  # (n_features, n_classes)
    bias: np.ndarray  # (n_classes,)
    m_w: np.ndarray = field(default=None)
    v_w: np.ndarray = field(default=None)
    m_b: np.ndarray = field(default=None)
    v_b: np.ndarray = field(default=None)
    step: int = 0

    def __post_init__(self):
        for name in ("m_w", "v_w"):
            if getattr(self, name) is None:
                setattr(self, name, np.zeros_like(self.weights))
        for name in ("m_b", "v_b"):
            if getattr(self, name) is None:
                setattr(self, name, np.zeros_like(self.bias))

    @classmethod
    def zeros(cls, n_features: int, n_classes: int) -> "LinearModel":
        return cls(np.zeros((n_features, n_classes)), np.zeros(n_classes))

    @property
    def n_features(self) -> int:
        return self.weights.shape[0]

    @property
    def n_classes(self) -> int:
        return self.weights.shape[1]

    def logits(self, features) -> np.ndarray:
        return np.asarray(features, dtype=np.float64) @ self.weights + self.bias

    def predict(self, features) -> np.ndarray:
        # np.argmax returns the first maximum, i.e. ties go to the lower class
        return np.argmax(self.logits(features), axis=1)

    def save(self, path):
        header = {"format": MODEL_FORMAT, "version": MODEL_VERSION, "step": self.step}
        with zipfile.ZipFile(path, "w", zipfile.ZIP_DEFLATED) as zf:
            _write_member(zf, "header.json", json.dumps(header, sort_keys=True).encode())
            for name in ("weights", "bias", "m_w", "v_w", "m_b", "v_b"):
                buf = io.BytesIO()
                np.save(buf, getattr(self, name), allow_pickle=False)
                _write_member(zf, f"{name}.npy", buf.getvalue())

    @classmethod
    def load(cls, path) -> "LinearModel":
        with zipfile.ZipFile(path) as zf:
            header = json.loads(zf.read("header.json"))
            if header.get("format") != MODEL_FORMAT:
                raise ContractViolation(f"{path}: not a linear-model file")
            if header.get("version") != MODEL_VERSION:
                raise ContractViolation(f"{path}: unsupported model version {header.get('version')}")
            arrays = {
                name: np.load(io.BytesIO(zf.read(f"{name}.npy")), allow_pickle=False)
                for name in ("weights", "bias", "m_w", "v_w", "m_b", "v_b")
            }
        return cls(step=int(header["step"]), **arrays)


def _write_member(zf, name, data):
    info = zipfile.ZipInfo(name, date_time=(1980, 1, 1, 0, 0, 0))
    info.compress_type = zipfile.ZIP_DEFLATED
    zf.writestr(info, data)


def softmax_rows(logits):
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def loss_and_grad(model: LinearModel, features, labels):
    """Mean cross-entropy over the batch and its gradient w.r.t. (weights, bias)."""
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels)
    logits = model.logits(x)
    z = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(z).sum(axis=1))
    n = x.shape[0]
    loss = float(np.mean(log_norm - z[np.arange(n), y]))
    delta = np.exp(z - log_norm[:, None])
    delta[np.arange(n), y] -= 1.0
    delta /= n
    return loss, x.T @ delta, delta.sum(axis=0)


def adam_step(model: LinearModel, grad_w, grad_b, params: ClassifierParams):
    """One bias-corrected Adam update, in place."""
    model.step += 1
    b1, b2 = params.beta1, params.beta2
    c1 = 1.0 - b1**model.step
    c2 = 1.0 - b2**model.step
    for p, g, m, v in ((model.weights, grad_w, model.m_w, model.v_w), (model.bias, grad_b, model.m_b, model.v_b)):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= params.lr * (m / c1) / (np.sqrt(v / c2) + params.adam_eps)


def _check_inputs(features, labels, n_classes):
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels)
    if x.ndim != 2 or y.shape != (x.shape[0],):
        raise ContractViolation(f"features {x.shape} and labels {y.shape} do not match")
    if not np.all(np.isfinite(x)):
        raise ContractViolation("features contain non-finite values")
    if y.size and (y.min() < 0 or y.max() >= n_classes):
        raise ContractViolation(f"labels outside [0, {n_classes - 1}]")
    return x, y.astype(np.int64)


def train_classifier(features, labels, params: ClassifierParams = ClassifierParams()):
    """Fit softmax regression; returns (model, per-epoch mean loss).

    Batches are drawn from a fresh seeded permutation every epoch.  A
    non-finite loss stops training with a ContractViolation.
    """
    x, y = _check_inputs(features, labels, params.n_classes)
    model = LinearModel.zeros(x.shape[1], params.n_classes)
    rng = generator(params.seed, SHUFFLE_STREAM)
    n = x.shape[0]
    curve = []
    for epoch in range(params.n_epochs):
        order = rng.permutation(n)
        total = 0.0
        for lo in range(0, n, params.batch_size):
            idx = order[lo : lo + params.batch_size]
            loss, gw, gb = loss_and_grad(model, x[idx], y[idx])
            if not np.isfinite(loss):
                raise ContractViolation(f"non-finite loss at epoch {epoch}, batch starting {lo}")
            adam_step(model, gw, gb, params)
            total += loss * idx.size
        curve.append(total / max(n, 1))
    return model, np.array(curve)


@dataclass
class EvalReport:
    accuracy: float
    per_class_accuracy: list
    confusion: list  # rows: true class, columns: predicted class

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


def evaluate(model: LinearModel, features, labels) -> EvalReport:
    x, y = _check_inputs(features, labels, model.n_classes)
    if x.shape[1] != model.n_features:
        raise ContractViolation(f"model expects {model.n_features} features, got {x.shape[1]}")
    pred = model.predict(x)
    k = model.n_classes
    confusion = np.zeros((k, k), dtype=np.int64)
    np.add.at(confusion, (y, pred), 1)
    support = confusion.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        per_class = np.where(support > 0, np.diag(confusion) / np.maximum(support, 1), np.nan)
    acc = float(np.mean(pred == y)) if y.size else float("nan")
    return EvalReport(
        accuracy=acc,
        per_class_accuracy=[None if np.isnan(v) else float(v) for v in per_class],
        confusion=confusion.tolist(),
    )
