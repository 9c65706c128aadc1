"""Loss, Adam and the mini-batch training loop."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..datagen import SnapshotSet
from ..errors import InvalidArgument, ShapeMismatch
from .model import Model


def mse(a, b) -> float:
    """Mean over nodes and examples of the squared error norm across channels.

    Inputs are ``(E, N)`` or ``(E, N, C)`` (or ``(E, C, N)`` consistently for both).
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeMismatch(f"shapes {a.shape} and {b.shape} differ")
    if a.size == 0:
        return 0.0
    d = a - b
    if a.ndim <= 2:
        return float(np.mean(d * d))
    # channels contribute to one squared norm per node
    count = a.size // (a.shape[2] if a.ndim == 3 else 1)
    return float(np.sum(d * d) / count)


def _model_mse(pred: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    """Loss and its gradient for batches laid out ``(B, C, N)``."""
    d = pred - target
    count = d.shape[0] * d.shape[2]
    return float(np.sum(d * d) / count), 2.0 * d / count


@dataclass
class Adam:
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        if len(params) != len(grads):
            raise ShapeMismatch("parameter and gradient lists differ in length")
        for i, (p, g) in enumerate(zip(params, grads)):
            if p.shape != g.shape:
                raise ShapeMismatch(f"gradient {i} has shape {g.shape}, parameter {p.shape}")
            if not np.all(np.isfinite(g)):
                raise FloatingPointError(f"non-finite gradient in parameter tensor {i} {p.shape}")
        if not self.m:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
        self.step_count += 1
        t = self.step_count
        c1 = 1.0 - self.beta1 ** t
        c2 = 1.0 - self.beta2 ** t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 64
    lr: float = 1e-4
    epochs: int = 500
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise InvalidArgument("batch size must be at least 1")
        if not self.lr > 0:
            raise InvalidArgument("learning rate must be positive")
        if self.epochs < 0:
            raise InvalidArgument("epoch count must be non-negative")


@dataclass
class TrainReport:
    train_mse: list[float] = field(default_factory=list)
    val_mse: list[float] = field(default_factory=list)

    def rows(self):
        for i, (t, v) in enumerate(zip(self.train_mse, self.val_mse), start=1):
            yield i, t, v


def to_model_layout(values: np.ndarray) -> np.ndarray:
    """``(E, N, C)`` snapshots to ``(E, C, N)`` model batches."""
    return np.ascontiguousarray(np.transpose(values, (0, 2, 1)))


def evaluate(model: Model, values: np.ndarray, batch_size: int = 256) -> float:
    """MSE of the reconstruction of ``(E, N, C)`` values."""
    if len(values) == 0:
        return float("nan")
    x = to_model_layout(values)
    total = 0.0
    for start in range(0, len(x), batch_size):
        xb = x[start:start + batch_size]
        d = model.predict(xb) - xb
        total += float(np.sum(d * d))
    return total / (x.shape[0] * x.shape[2])


def reconstruct(model: Model, values: np.ndarray, batch_size: int = 256) -> np.ndarray:
    x = to_model_layout(values)
    out = np.concatenate([model.predict(x[s:s + batch_size]) for s in range(0, len(x), batch_size)])
    return np.transpose(out, (0, 2, 1))


def train(model: Model, snap: SnapshotSet, config: TrainConfig, optimizer: Adam | None = None,
          progress=None) -> TrainReport:
    """Shuffled mini-batch Adam on the train split, tracking train and val MSE per epoch.

    The reported train MSE is the mean batch loss seen during the epoch.
    """
    if snap.split is None:
        raise InvalidArgument("snapshot set has no train/val/test split")
    train_x = to_model_layout(snap.part("train"))
    val = snap.part("val")
    if len(train_x) == 0:
        raise InvalidArgument("training split is empty")
    if train_x.shape[1:] != tuple(model.input_shape):
        raise ShapeMismatch(f"data shape {train_x.shape[1:]} does not match model input {model.input_shape}")
    opt = optimizer or Adam(lr=config.lr)
    rng = np.random.default_rng(config.seed)
    report = TrainReport()
    params = model.arrays()
    for epoch in range(config.epochs):
        order = rng.permutation(len(train_x))
        seen, total = 0, 0.0
        for start in range(0, len(order), config.batch_size):
            xb = train_x[order[start:start + config.batch_size]]
            out, cache = model.forward(xb)
            loss, dout = _model_mse(out, xb)
            opt.step(params, model.backward(cache, dout))
            total += loss * len(xb)
            seen += len(xb)
        report.train_mse.append(total / seen)
        report.val_mse.append(evaluate(model, val))
        if progress is not None:
            progress(epoch + 1, report.train_mse[-1], report.val_mse[-1])
    return report


@dataclass
class GradCheck:
    max_rel_error: float
    checked: int
    skipped: int


def gradient_check(model: Model, x: np.ndarray, rng: np.random.Generator, samples: int = 12,
                   step: float = 1e-5, target: np.ndarray | None = None) -> GradCheck:
    """Compare analytic gradients with central differences on sampled entries.

    Up to ``samples`` entries per parameter tensor are probed. The error of a
    tensor is ``max|analytic - numeric| / max(|numeric|, |analytic|, 1e-8)``
    over its probes. A probe whose forward and backward one-sided slopes
    disagree by more than ``1e-4`` of the slope scale straddles a ReLU kink,
    where the central difference is not a derivative; such probes are
    counted as skipped.
    """
    x = np.asarray(x, dtype=np.float64)
    target = x if target is None else target

    def loss() -> float:
        return _model_mse(model.predict(x), target)[0]

    out, cache = model.forward(x)
    grads = model.backward(cache, _model_mse(out, target)[1])
    base = loss()
    worst, checked, skipped = 0.0, 0, 0
    for p, g in zip(model.arrays(), grads):
        flat_p, flat_g = p.reshape(-1), g.reshape(-1)
        idx = rng.choice(flat_p.size, size=min(samples, flat_p.size), replace=False)
        ana, num = [], []
        for k in idx:
            keep = flat_p[k]
            flat_p[k] = keep + step
            up = loss()
            flat_p[k] = keep - step
            down = loss()
            flat_p[k] = keep
            fwd, bwd = (up - base) / step, (base - down) / step
            if abs(fwd - bwd) > 1e-4 * max(abs(fwd), abs(bwd), 1e-6):
                skipped += 1
                continue
            ana.append(flat_g[k])
            num.append((up - down) / (2 * step))
        if not num:
            continue
        ana, num = np.array(ana), np.array(num)
        checked += len(num)
        scale = max(np.max(np.abs(num)), np.max(np.abs(ana)), 1e-8)
        worst = max(worst, float(np.max(np.abs(ana - num)) / scale))
    return GradCheck(worst, checked, skipped)
