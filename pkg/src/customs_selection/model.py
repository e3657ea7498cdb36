"""Dual-head reference model: ReLU encoder, fraud head and revenue head.

    z      = relu(x @ W1 + b1)
    y_cls  = sigmoid(z @ w + b)
    y_rev  = softplus(z @ v + c)

Trained with Adam on ``BCE(y_cls) + rev_weight * MSE(log1p(y_rev), log1p(revenue))``.
Weights are retrained from scratch every week.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

SNAPSHOT_FORMAT = "customs-selection/model-snapshot"
SNAPSHOT_VERSION = 1
PARAM_NAMES = ("W1", "b1", "w", "b", "v", "c")


def sigmoid(x):
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def softplus(x):
    x = np.asarray(x, dtype=float)
    return np.logaddexp(0.0, x)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 10
    batch_size: int = 512
    lr: float = 1e-3
    rev_weight: float = 1.0
    hidden: int = 16
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.lr <= 0:
            raise ValueError("learning rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.hidden < 2:
            raise ValueError("hidden width must be >= 2")


@dataclass
class Prediction:
    fraud_score: np.ndarray
    revenue_pred: np.ndarray
    embedding: np.ndarray


@dataclass
class ModelSnapshot:
    W1: np.ndarray  # (D, H)
    b1: np.ndarray  # (H,)
    w: np.ndarray  # (H,) fraud head
    b: float
    v: np.ndarray  # (H,) revenue head
    c: float
    metadata: dict = field(default_factory=dict)

    @property
    def input_dim(self) -> int:
        return self.W1.shape[0]

    @property
    def hidden(self) -> int:
        return self.W1.shape[1]

    def params(self) -> dict:
        return {n: getattr(self, n) for n in PARAM_NAMES}

    def embed(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.input_dim:
            raise ValueError(f"feature dimension {x.shape[-1]} != model input {self.input_dim}")
        return np.maximum(x @ self.W1 + self.b1, 0.0)

    def fraud_logit(self, z: np.ndarray) -> np.ndarray:
        return z @ self.w + self.b

    def predict(self, x: np.ndarray) -> Prediction:
        """Score one vector or a matrix of feature rows."""
        z = self.embed(x)
        return Prediction(
            fraud_score=sigmoid(self.fraud_logit(z)),
            revenue_pred=softplus(z @ self.v + self.c),
            embedding=z,
        )

    def to_json(self) -> str:
        doc = {
            "format": SNAPSHOT_FORMAT,
            "version": SNAPSHOT_VERSION,
            "params": {n: np.asarray(getattr(self, n)).tolist() for n in PARAM_NAMES},
            "metadata": self.metadata,
        }
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> "ModelSnapshot":
        doc = json.loads(text)
        if doc.get("format") != SNAPSHOT_FORMAT or doc.get("version") != SNAPSHOT_VERSION:
            raise ValueError("unsupported snapshot format")
        p = doc["params"]
        return cls(
            W1=np.array(p["W1"], dtype=float).reshape(len(p["W1"]), -1),
            b1=np.array(p["b1"], dtype=float),
            w=np.array(p["w"], dtype=float),
            b=float(p["b"]),
            v=np.array(p["v"], dtype=float),
            c=float(p["c"]),
            metadata=doc.get("metadata", {}),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path: str | Path) -> "ModelSnapshot":
        return cls.from_json(Path(path).read_text())


def predict(m: ModelSnapshot, f: np.ndarray) -> Prediction:
    return m.predict(f)


def init_params(input_dim: int, hidden: int, rng: np.random.Generator) -> dict:
    return {
        "W1": rng.normal(0.0, math.sqrt(2.0 / input_dim), size=(input_dim, hidden)),
        "b1": np.zeros(hidden),
        "w": np.zeros(hidden),
        "b": 0.0,
        "v": np.zeros(hidden),
        "c": 0.0,
    }


def loss_and_grads(params: dict, x, y_cls, y_rev, rev_weight: float = 1.0):
    """Mean training loss over a mini-batch and its analytic gradients."""
    x = np.asarray(x, dtype=float)
    y_cls = np.asarray(y_cls, dtype=float)
    t_rev = np.log1p(np.asarray(y_rev, dtype=float))
    n = len(x)

    pre = x @ params["W1"] + params["b1"]
    z = np.maximum(pre, 0.0)
    logit = z @ params["w"] + params["b"]
    r_pre = z @ params["v"] + params["c"]
    p = sigmoid(logit)
    rev = softplus(r_pre)
    log_rev = np.log1p(rev)

    # BCE on logits: softplus(l) - y*l
    bce = np.mean(softplus(logit) - y_cls * logit)
    err = log_rev - t_rev
    mse = np.mean(err**2)
    loss = bce + rev_weight * mse

    d_logit = (p - y_cls) / n
    # d log1p(softplus(u))/du = sigmoid(u) / (1 + softplus(u))
    d_rpre = rev_weight * 2.0 * err * sigmoid(r_pre) / (1.0 + rev) / n
    d_z = np.outer(d_logit, params["w"]) + np.outer(d_rpre, params["v"])
    d_pre = d_z * (pre > 0)
    grads = {
        "W1": x.T @ d_pre,
        "b1": d_pre.sum(axis=0),
        "w": z.T @ d_logit,
        "b": float(d_logit.sum()),
        "v": z.T @ d_rpre,
        "c": float(d_rpre.sum()),
    }
    return float(loss), grads


class _Adam:
    def __init__(self, params: dict, lr: float, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = {k: np.zeros_like(np.asarray(v, dtype=float)) for k, v in params.items()}
        self.s = {k: np.zeros_like(np.asarray(v, dtype=float)) for k, v in params.items()}
        self.t = 0

    def step(self, params: dict, grads: dict) -> None:
        self.t += 1
        c1 = 1 - self.beta1**self.t
        c2 = 1 - self.beta2**self.t
        for k, g in grads.items():
            self.m[k] = self.beta1 * self.m[k] + (1 - self.beta1) * g
            self.s[k] = self.beta2 * self.s[k] + (1 - self.beta2) * g * g
            update = self.lr * (self.m[k] / c1) / (np.sqrt(self.s[k] / c2) + self.eps)
            params[k] = params[k] - update if np.ndim(params[k]) else float(params[k] - update)


def _inv_softplus(y: float) -> float:
    y = max(y, 1e-9)
    return y + math.log(-math.expm1(-y))


def _constant_model(input_dim: int, y_cls, y_rev, cfg: TrainConfig, rng) -> ModelSnapshot:
    params = init_params(input_dim, cfg.hidden, rng)
    prior = float(np.clip(np.mean(y_cls), 0.01, 0.99)) if len(y_cls) else 0.5
    mean_log_rev = float(np.mean(np.log1p(y_rev))) if len(y_rev) else 0.0
    return ModelSnapshot(
        W1=params["W1"],
        b1=params["b1"],
        w=np.zeros(cfg.hidden),
        b=math.log(prior / (1 - prior)),
        v=np.zeros(cfg.hidden),
        c=_inv_softplus(math.expm1(mean_log_rev)),
        metadata={"fallback": "constant_prior", "seed": cfg.seed, "epochs": 0, "loss_trace": []},
    )


def train(x, y_cls, y_rev, cfg: TrainConfig = TrainConfig()) -> ModelSnapshot:
    """Fit a fresh model on inspected items.

    Training data with a single class (or no rows) yields a constant model
    whose fraud score is the clamped class prior; ``metadata["fallback"]`` is
    set in that case.
    """
    x = np.asarray(x, dtype=float)
    y_cls = np.asarray(y_cls, dtype=float)
    y_rev = np.asarray(y_rev, dtype=float)
    rng = np.random.default_rng(cfg.seed)
    if len(x) == 0 or np.all(y_cls == y_cls[0]):
        return _constant_model(x.shape[1], y_cls, y_rev, cfg, rng)

    params = init_params(x.shape[1], cfg.hidden, rng)
    # start both heads at the training prior
    prior = float(np.mean(y_cls))
    params["b"] = math.log(prior / (1 - prior))
    params["c"] = _inv_softplus(math.expm1(float(np.mean(np.log1p(y_rev)))))
    opt = _Adam(params, cfg.lr)
    trace = []
    n = len(x)
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            loss, grads = loss_and_grads(params, x[idx], y_cls[idx], y_rev[idx], cfg.rev_weight)
            opt.step(params, grads)
            total += loss * len(idx)
        trace.append(total / n)
    return ModelSnapshot(
        **{k: params[k] for k in PARAM_NAMES},
        metadata={"seed": cfg.seed, "epochs": cfg.epochs, "loss_trace": trace},
    )


def validation_revenue(m, x_val, rev_val, n: float) -> float:
    """Share of validation revenue captured by the top ``n`` fraction by fraud score.

    At least one item is taken. Returns 0.0 when the validation set carries
    no revenue at all.
    """
    rev_val = np.asarray(rev_val, dtype=float)
    if len(rev_val) == 0:
        raise ValueError("validation set is empty")
    if not 0 < n <= 1:
        raise ValueError("n must lie in (0, 1]")
    total = rev_val.sum()
    if total <= 0:
        return 0.0
    scores = m.predict(x_val).fraud_score
    k = max(1, math.floor(n * len(rev_val) + 1e-9))
    top = np.argsort(-scores, kind="stable")[:k]
    return float(rev_val[top].sum() / total)


def write_loss_trace(m: ModelSnapshot, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("epoch,loss\n")
        for i, loss in enumerate(m.metadata.get("loss_trace", [])):
            fh.write(f"{i},{loss!r}\n")
