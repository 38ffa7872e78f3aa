"""Recurrent behaviour model: plain RNN or LSTM with a linear read-out.

Parameters are float64 arrays.  Forward and backward passes run in
:mod:`hybridlearn.kernels`, which picks the compiled core when available.
The loss is the summed squared error over all steps and output dimensions,
divided by the number of sequences.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from . import kernels

MODES = ("rnn", "lstm")
TENSORS = ("W_x", "W_h", "b_h", "W_y", "b_y")


class DivergenceError(RuntimeError):
    pass


class ShapeError(ValueError):
    pass


@dataclass
class RnnParams:
    mode: str
    W_x: np.ndarray
    W_h: np.ndarray
    b_h: np.ndarray
    W_y: np.ndarray
    b_y: np.ndarray

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        for name in TENSORS:
            setattr(self, name, np.ascontiguousarray(getattr(self, name), dtype=np.float64))
        rows = self.gate_rows
        d_h, d_x, d_y = self.d_h, self.d_x, self.d_y
        expected = {
            "W_x": (rows, d_x), "W_h": (rows, d_h), "b_h": (rows,),
            "W_y": (d_y, d_h), "b_y": (d_y,),
        }
        for name, shape in expected.items():
            if getattr(self, name).shape != shape:
                raise ShapeError(f"{name} has shape {getattr(self, name).shape}, expected {shape}")

    @property
    def d_h(self) -> int:
        return self.W_y.shape[1]

    @property
    def d_x(self) -> int:
        return self.W_x.shape[1]

    @property
    def d_y(self) -> int:
        return self.W_y.shape[0]

    @property
    def gate_rows(self) -> int:
        return (4 if self.mode == "lstm" else 1) * self.d_h

    def tensors(self) -> tuple:
        return tuple(getattr(self, name) for name in TENSORS)

    def copy(self) -> "RnnParams":
        return RnnParams(self.mode, *(t.copy() for t in self.tensors()))


def init_params(mode: str, d_x: int, d_h: int, d_y: int, rng, scale: float = 0.08) -> RnnParams:
    rows = (4 if mode == "lstm" else 1) * d_h
    W_x = rng.uniform(-scale, scale, size=(rows, d_x))
    W_h = rng.uniform(-scale, scale, size=(rows, d_h))
    W_y = rng.uniform(-scale, scale, size=(d_y, d_h))
    b_h = np.zeros(rows)
    if mode == "lstm":
        b_h[d_h:2 * d_h] = 1.0
    return RnnParams(mode, W_x, W_h, b_h, W_y, np.zeros(d_y))


def _batch(params: RnnParams, X, targets=None):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 2:
        X = X[None]
    if X.ndim != 3 or X.shape[2] != params.d_x:
        raise ShapeError(f"inputs must be (N, T, {params.d_x}), got {X.shape}")
    X = np.ascontiguousarray(X)
    if targets is None:
        return X, None
    Tg = np.asarray(targets, dtype=np.float64)
    if Tg.ndim == 2:
        Tg = Tg[None]
    if Tg.shape != X.shape[:2] + (params.d_y,):
        raise ShapeError(f"targets must be {X.shape[:2] + (params.d_y,)}, got {Tg.shape}")
    if X.shape[0] == 0:
        raise ShapeError("empty batch")
    return X, np.ascontiguousarray(Tg)


def forward(params: RnnParams, X, backend=None) -> np.ndarray:
    """Outputs for one sequence ``(T, d_x)`` or a batch ``(N, T, d_x)``."""
    single = np.ndim(X) == 2
    Xb, _ = _batch(params, X)
    impl = kernels if backend is None else kernels.get_backend(backend)
    Y = impl.forward(params.mode, *params.tensors(), Xb)
    return Y[0] if single else Y


def mse_loss(params: RnnParams, X, targets, backend=None) -> float:
    Xb, Tg = _batch(params, X, targets)
    Y = forward(params, Xb, backend)
    return float(np.sum((Y - Tg) ** 2)) / Xb.shape[0]


def loss_and_grad(params: RnnParams, X, targets, backend=None):
    Xb, Tg = _batch(params, X, targets)
    impl = kernels if backend is None else kernels.get_backend(backend)
    loss, grads = impl.loss_grad(params.mode, *params.tensors(), Xb, Tg)
    return loss, dict(zip(TENSORS, grads))


def backward(params: RnnParams, X, targets, backend=None) -> dict:
    """Gradient of :func:`mse_loss` for every tensor, keyed by name."""
    return loss_and_grad(params, X, targets, backend)[1]


class Adam:
    def __init__(self, params: RnnParams, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = {n: np.zeros_like(getattr(params, n)) for n in TENSORS}
        self.v = {n: np.zeros_like(getattr(params, n)) for n in TENSORS}
        self.t = 0

    def step(self, params: RnnParams, grads: dict) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for n in TENSORS:
            g = grads[n]
            m, v = self.m[n], self.v[n]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p = getattr(params, n)
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    epochs: int = 100
    hidden: int = 32
    mode: str = "lstm"
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    init_scale: float = 0.08
    # None means max(1, min(N // 100, 500))
    minibatch: int | None = None

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")

    def batch_size(self, n: int) -> int:
        if self.minibatch is not None:
            return max(1, min(self.minibatch, n))
        return max(1, min(n // 100, 500))


def train(X, targets, cfg: TrainConfig, backend=None):
    """Adam on reshuffled minibatches; returns ``(params, per-epoch loss)``.

    The epoch loss is the size-weighted mean of the minibatch losses, that is
    the dataset loss seen along the way.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    Tg = np.ascontiguousarray(targets, dtype=np.float64)
    n = X.shape[0]
    if n == 0:
        raise ValueError("empty training set")
    init_ss, shuffle_ss = np.random.SeedSequence(cfg.seed).spawn(2)
    params = init_params(cfg.mode, X.shape[2], cfg.hidden, Tg.shape[2],
                         np.random.default_rng(init_ss), cfg.init_scale)
    _batch(params, X, Tg)
    opt = Adam(params, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.eps)
    rng = np.random.default_rng(shuffle_ss)
    bs = cfg.batch_size(n)
    impl = kernels if backend is None else kernels.get_backend(backend)
    curve = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        total = 0.0
        for lo in range(0, n, bs):
            idx = order[lo:lo + bs]
            loss, grads = impl.loss_grad(cfg.mode, *params.tensors(), X[idx], Tg[idx])
            if not np.isfinite(loss):
                raise DivergenceError(f"loss became {loss} in epoch {epoch + 1}")
            total += loss * len(idx)
            opt.step(params, dict(zip(TENSORS, grads)))
        curve.append(total / n)
    return params, curve


def first_crossing(d, threshold: float):
    """Index of the first value strictly below ``threshold``, or None."""
    below = np.flatnonzero(np.asarray(d) < threshold)
    return int(below[0]) if below.size else None


def predict_crash(params: RnnParams, X, stats, threshold_m: float, d_index: int = 2):
    """``(positive, crash step)`` for one normalized input sequence."""
    Y = stats.invert(forward(params, X))
    t = first_crossing(Y[:, d_index], threshold_m)
    return t is not None, t


def predict_crashes(params: RnnParams, X, stats, threshold_m: float, d_index: int = 2):
    """Batched :func:`predict_crash`; returns a list of pairs."""
    Y = stats.invert(forward(params, X))
    out = []
    for seq in Y:
        t = first_crossing(seq[:, d_index], threshold_m)
        out.append((t is not None, t))
    return out


def save_weights(path, params: RnnParams) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"rnnweights mode={params.mode} d_x={params.d_x} d_h={params.d_h} d_y={params.d_y}\n")
        for name in TENSORS:
            arr = np.atleast_2d(getattr(params, name))
            fh.write(f"{name} {' '.join(str(s) for s in getattr(params, name).shape)}\n")
            for row in arr:
                fh.write(" ".join(repr(float(v)) for v in row) + "\n")


def load_weights(path) -> RnnParams:
    with open(path, encoding="utf-8") as fh:
        lines = [ln.split() for ln in fh if ln.strip()]
    head = lines[0]
    if not head or head[0] != "rnnweights":
        raise ValueError(f"{path}: not a weight file")
    meta = dict(tok.split("=", 1) for tok in head[1:])
    pos = 1
    tensors = {}
    for name in TENSORS:
        label, *dims = lines[pos]
        if label != name:
            raise ValueError(f"{path}: expected block {name}, found {label}")
        shape = tuple(int(s) for s in dims)
        n_rows = shape[0] if len(shape) == 2 else 1
        rows = lines[pos + 1:pos + 1 + n_rows]
        tensors[name] = np.array([[float(v) for v in r] for r in rows]).reshape(shape)
        pos += 1 + n_rows
    return RnnParams(meta["mode"], **tensors)


def write_loss_curve(path, curve) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", "loss"])
        for k, loss in enumerate(curve, 1):
            w.writerow([k, repr(float(loss))])
