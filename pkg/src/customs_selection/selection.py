"""Selection strategies: exploitation, random, BADGE, bATE, gATE and hybrids."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import ModelSnapshot, Prediction, sigmoid, validation_revenue

KINDS = ("random", "exploit", "badge", "bate", "gate", "hybrid")

# CLI spelling -> strategy kind
ALIASES = {
    "random": "random",
    "date": "exploit",
    "exploit": "exploit",
    "badge": "badge",
    "bate": "bate",
    "gate": "gate",
    "hybrid": "hybrid",
}


@dataclass
class StrategySpec:
    kind: str
    children: list["StrategySpec"] = field(default_factory=list)
    weights: list[float] = field(default_factory=list)
    theta: float = 0.3
    n: float | None = None  # gatekeeper Rev@n; None -> current inspection rate
    first_pick: str = "uniform"  # k-means++ seed: "uniform" or "max_norm"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown strategy kind {self.kind!r}")
        if self.first_pick not in ("uniform", "max_norm"):
            raise ValueError(f"unknown first_pick {self.first_pick!r}")
        if self.kind == "hybrid":
            if not self.children:
                self.children = [StrategySpec("exploit"), StrategySpec("gate")]
                self.weights = [0.9, 0.1]
            if len(self.children) != len(self.weights):
                raise ValueError("hybrid needs one weight per child")
            if any(w < 0 for w in self.weights) or abs(sum(self.weights) - 1.0) > 1e-9:
                raise ValueError(f"hybrid weights must be non-negative and sum to 1, got {self.weights}")
            if any(c.kind == "hybrid" for c in self.children):
                raise ValueError("nested hybrids are not supported")

    @classmethod
    def parse(cls, sampling: str, subsamplings: str = "", weights: str = "", **kw) -> "StrategySpec":
        """Build a spec from CLI strings, e.g. ``("hybrid", "DATE/bATE", "0.9/0.1")``."""
        kind = ALIASES.get(sampling.lower())
        if kind is None:
            raise ValueError(f"unknown sampling {sampling!r}")
        if kind != "hybrid":
            return cls(kind, **kw)
        names = [s for s in subsamplings.split("/") if s]
        try:
            ws = [float(w) for w in weights.split("/") if w]
        except ValueError:
            raise ValueError(f"malformed weights {weights!r}") from None
        children = []
        for name in names:
            child = ALIASES.get(name.lower())
            if child is None:
                raise ValueError(f"unknown subsampling {name!r}")
            children.append(cls(child, **kw))
        if not children:
            raise ValueError("hybrid sampling needs --subsamplings")
        return cls("hybrid", children, ws, **kw)

    @property
    def needs_model(self) -> bool:
        if self.kind == "hybrid":
            return any(c.needs_model for c in self.children)
        return self.kind != "random"

    def label(self) -> str:
        if self.kind != "hybrid":
            return self.kind
        names = "/".join(c.kind for c in self.children)
        ws = "/".join(f"{w:g}" for w in self.weights)
        return f"hybrid-{names}-{ws}"


@dataclass
class SelectionResult:
    indices: np.ndarray
    provenance: list[str]
    seed: int | None = None
    gate_branch: str = ""

    def __post_init__(self):
        self.indices = np.asarray(self.indices, dtype=np.intp)

    def __len__(self):
        return len(self.indices)

    def counts(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for p in self.provenance:
            out[p] = out.get(p, 0) + 1
        return out


@dataclass
class BatchContext:
    """Everything a strategy may look at for one week's batch.

    ``val_x``/``val_revenue`` hold the inspected items of the trailing
    validation window; ``rate`` is this week's inspection rate.
    """

    model: ModelSnapshot | None
    x: np.ndarray
    val_x: np.ndarray | None = None
    val_revenue: np.ndarray | None = None
    rate: float = 0.1
    _pred: Prediction | None = None

    def __len__(self):
        return len(self.x)

    @property
    def prediction(self) -> Prediction:
        if self._pred is None:
            if self.model is None:
                raise ValueError("strategy requires a trained model")
            self._pred = self.model.predict(self.x)
        return self._pred

    def subset(self, rows: np.ndarray) -> "BatchContext":
        pred = None
        if self._pred is not None:
            p = self._pred
            pred = Prediction(p.fraud_score[rows], p.revenue_pred[rows], p.embedding[rows])
        return BatchContext(self.model, self.x[rows], self.val_x, self.val_revenue, self.rate, pred)


def _budget(k: int, n: int) -> int:
    if k < 0:
        raise ValueError("budget must be non-negative")
    return min(k, n)


def top_k(scores: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Indices of the ``k`` highest scores; ties resolved by a seeded permutation."""
    scores = np.asarray(scores, dtype=float)
    k = _budget(k, len(scores))
    perm = rng.permutation(len(scores))
    order = perm[np.argsort(-scores[perm], kind="stable")]
    return order[:k]


def select_exploit(m, batch: BatchContext, k: int, rng: np.random.Generator) -> SelectionResult:
    idx = top_k(batch.prediction.fraud_score, k, rng)
    return SelectionResult(idx, ["exploit"] * len(idx))


def select_random(batch, k: int, rng: np.random.Generator) -> SelectionResult:
    n = len(batch)
    idx = rng.choice(n, size=_budget(k, n), replace=False) if n else np.array([], dtype=np.intp)
    return SelectionResult(idx, ["random"] * len(idx))


def gradient_embedding(m: ModelSnapshot, f: np.ndarray, pred: Prediction | None = None) -> np.ndarray:
    """Last-layer gradient of the pseudo-labelled loss, ``[g_c0, g_c1]``.

    The pseudo label is ``y_cls >= 0.5``. Each block is
    ``(p_c - 1[pseudo == c]) * z``, i.e. the cross-entropy gradient with
    respect to the two class rows of an equivalent softmax output layer.
    Works for a single vector (shape ``2H``) or a matrix (``n x 2H``).
    """
    if pred is None:
        pred = m.predict(f)
    y = np.asarray(pred.fraud_score, dtype=float)
    z = np.asarray(pred.embedding, dtype=float)
    pseudo = y >= 0.5
    # q = probability of the other class; from the logit when available so
    # saturated scores keep their tiny gradients instead of rounding 1 - y to 0
    logit_fn = getattr(m, "fraud_logit", None)
    if logit_fn is not None:
        q = sigmoid(-np.abs(logit_fn(z)))
    else:
        q = np.minimum(y, 1.0 - y)
    sign = np.where(pseudo, 1.0, -1.0) * q
    g0 = sign[..., None] * z
    return np.concatenate([g0, -g0], axis=-1)


def uncertainty_scale(y_cls):
    """-1.8 * |y - 0.5| + 1, ranging over [0.1, 1]."""
    return -1.8 * np.abs(np.asarray(y_cls, dtype=float) - 0.5) + 1.0


def scale_factor(unc, y_rev, eps: float = 1.0):
    """Uncertainty times log predicted revenue; ``eps=1`` keeps it non-negative."""
    return np.asarray(unc, dtype=float) * np.log(np.asarray(y_rev, dtype=float) + eps)


def scaled_embedding(m: ModelSnapshot, f: np.ndarray, pred: Prediction | None = None) -> np.ndarray:
    if pred is None:
        pred = m.predict(f)
    s = scale_factor(uncertainty_scale(pred.fraud_score), pred.revenue_pred)
    return np.asarray(s)[..., None] * gradient_embedding(m, f, pred)


def kmeanspp_select(
    embeddings: np.ndarray,
    k: int,
    rng: np.random.Generator,
    first: int | None = None,
    first_pick: str = "uniform",
) -> np.ndarray:
    """k-means++ seeding: return ``k`` distinct row indices.

    The first index is uniform over the pool (or ``first`` if given, or the
    largest-norm row with ``first_pick="max_norm"``). Each later index is
    drawn with probability proportional to its squared distance to the
    nearest chosen row. If every remaining distance is zero the draw falls
    back to uniform over unchosen rows.
    """
    x = np.asarray(embeddings, dtype=float)
    n = len(x)
    if k > n:
        raise ValueError(f"cannot pick {k} seeds from a pool of {n}")
    if k <= 0:
        return np.array([], dtype=np.intp)
    if first is None:
        if first_pick == "max_norm":
            first = int(np.argmax(np.einsum("ij,ij->i", x, x)))
        else:
            first = int(rng.integers(n))
    chosen = [first]
    taken = np.zeros(n, dtype=bool)
    taken[first] = True
    d2 = np.einsum("ij,ij->i", x - x[first], x - x[first])
    d2[first] = 0.0
    for _ in range(1, k):
        total = d2.sum()
        if total > 0:
            cdf = np.cumsum(d2)
            u = rng.random() * cdf[-1]
            nxt = int(np.searchsorted(cdf, u, side="right"))
            nxt = min(nxt, n - 1)
            # guard against landing on a zero-width slot through rounding
            while d2[nxt] == 0:
                nxt -= 1
        else:
            free = np.flatnonzero(~taken)
            nxt = int(free[rng.integers(len(free))])
        chosen.append(nxt)
        taken[nxt] = True
        diff = x - x[nxt]
        d2 = np.minimum(d2, np.einsum("ij,ij->i", diff, diff))
        d2[taken] = 0.0
    return np.array(chosen, dtype=np.intp)


def select_bate(m, batch: BatchContext, k: int, rng: np.random.Generator, first_pick="uniform") -> SelectionResult:
    emb = scaled_embedding(batch.model, batch.x, batch.prediction)
    idx = kmeanspp_select(emb, _budget(k, len(batch)), rng, first_pick=first_pick)
    return SelectionResult(idx, ["bate"] * len(idx))


def select_badge(m, batch: BatchContext, k: int, rng: np.random.Generator, first_pick="uniform") -> SelectionResult:
    emb = gradient_embedding(batch.model, batch.x, batch.prediction)
    idx = kmeanspp_select(emb, _budget(k, len(batch)), rng, first_pick=first_pick)
    return SelectionResult(idx, ["badge"] * len(idx))


def select_gate(
    m,
    batch: BatchContext,
    k: int,
    val_x,
    val_revenue,
    theta: float,
    n: float,
    rng: np.random.Generator,
    first_pick="uniform",
) -> SelectionResult:
    """bATE when the model's validation Rev@n beats ``theta``, random otherwise.

    An empty validation window sends the gate to the random branch.
    """
    if val_revenue is None or len(val_revenue) == 0:
        res, branch = select_random(batch, k, rng), "random:no_validation"
    elif validation_revenue(batch.model, val_x, val_revenue, n) > theta:
        res, branch = select_bate(m, batch, k, rng, first_pick), "bate"
    else:
        res, branch = select_random(batch, k, rng), "random"
    return SelectionResult(res.indices, ["gate"] * len(res), gate_branch=branch)


def _select_leaf(spec: StrategySpec, batch: BatchContext, k: int, rng, tiebreak_rng) -> SelectionResult:
    if spec.kind == "random":
        return select_random(batch, k, rng)
    if spec.kind == "exploit":
        return select_exploit(batch.model, batch, k, tiebreak_rng)
    if spec.kind == "badge":
        return select_badge(batch.model, batch, k, rng, spec.first_pick)
    if spec.kind == "bate":
        return select_bate(batch.model, batch, k, rng, spec.first_pick)
    if spec.kind == "gate":
        n = spec.n if spec.n is not None else batch.rate
        return select_gate(
            batch.model, batch, k, batch.val_x, batch.val_revenue, spec.theta, n, rng, spec.first_pick
        )
    raise ValueError(f"not a leaf strategy: {spec.kind}")


def split_budget(weights, k: int) -> list[int]:
    """Floor share per child; the remainder goes to the last child."""
    shares = [math.floor(w * k + 1e-9) for w in weights[:-1]]
    shares.append(k - sum(shares))
    return shares


def select_hybrid(
    spec: StrategySpec, m, batch: BatchContext, k: int, rng, tiebreak_rng=None
) -> SelectionResult:
    """Children pick in order from a shrinking pool; picks are disjoint."""
    tiebreak_rng = rng if tiebreak_rng is None else tiebreak_rng
    k = _budget(k, len(batch))
    pool = np.arange(len(batch))
    indices, provenance, branches = [], [], []
    for child, share in zip(spec.children, split_budget(spec.weights, k)):
        share = min(share, len(pool))
        if share == 0:
            continue
        res = _select_leaf(child, batch.subset(pool), share, rng, tiebreak_rng)
        picked = pool[res.indices]
        indices.append(picked)
        provenance += res.provenance
        if res.gate_branch:
            branches.append(res.gate_branch)
        pool = np.setdiff1d(pool, picked, assume_unique=True)
    idx = np.concatenate(indices) if indices else np.array([], dtype=np.intp)
    return SelectionResult(idx, provenance, gate_branch="|".join(branches))


def select(spec: StrategySpec, batch: BatchContext, k: int, rng, tiebreak_rng=None, seed=None) -> SelectionResult:
    """Run any strategy on a batch with budget ``k``."""
    tiebreak_rng = rng if tiebreak_rng is None else tiebreak_rng
    if spec.kind == "hybrid":
        res = select_hybrid(spec, batch.model, batch, k, rng, tiebreak_rng)
    else:
        res = _select_leaf(spec, batch, _budget(k, len(batch)), rng, tiebreak_rng)
    res.seed = seed
    return res
