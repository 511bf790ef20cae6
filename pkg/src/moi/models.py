"""Built-in predictors: closed-form ridge regression and a greedy
boosted ensemble of shallow axis-aligned regression trees.

Both are deterministic, serialize to JSON, and exist so the toolchain
can run end-to-end without linking against ML libraries. External
models enter through the two-pass counterfactual protocol instead.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError
from . import formats

_SPLIT_CANDIDATES = 32
_MIN_GAIN = 1e-12


@dataclass(frozen=True)
class RidgeModel:
    weights: np.ndarray
    intercept: float
    lam: float = 0.0

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if not np.all(np.isfinite(w)) or not np.isfinite(self.intercept):
            raise DataError("ridge model has non-finite parameters")
        w = w.copy()
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    def predict(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        return x @ self.weights + self.intercept

    def to_payload(self) -> dict:
        return {
            "kind": "ridge",
            "weights": [float(w) for w in self.weights],
            "intercept": float(self.intercept),
            "lam": float(self.lam),
        }


def fit_ridge(x, y, lam: float = 0.0) -> RidgeModel:
    """Closed-form ridge on centered data; lam=0 falls back to least squares."""
    if lam < 0:
        raise DataError("lambda must be >= 0")
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    xm = x.mean(axis=0)
    ym = float(y.mean())
    xc = x - xm
    yc = y - ym
    if lam == 0:
        w, *_ = np.linalg.lstsq(xc, yc, rcond=None)
    else:
        d = x.shape[1]
        w = np.linalg.solve(xc.T @ xc + lam * np.eye(d), xc.T @ yc)
    return RidgeModel(weights=w, intercept=ym - float(xm @ w), lam=float(lam))


@dataclass(frozen=True)
class Tree:
    """Flat node arrays; feature == -1 marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def predict(self, x: np.ndarray) -> np.ndarray:
        # route all rows level by level; shallow trees need few passes
        n = x.shape[0]
        idx = np.zeros(n, dtype=np.int64)
        rows = np.arange(n)
        while True:
            feat = self.feature[idx]
            active = feat >= 0
            if not active.any():
                break
            safe_feat = np.where(active, feat, 0)
            goes_left = x[rows, safe_feat] <= self.threshold[idx]
            nxt = np.where(goes_left, self.left[idx], self.right[idx])
            idx = np.where(active, nxt, idx)
        return self.value[idx]


def _best_split(x: np.ndarray, residual: np.ndarray, min_leaf: int):
    """Best (feature, threshold, gain) under squared loss; returns None
    when no split clears the minimum gain. Ties break toward the smaller
    feature id, then the smaller threshold."""
    n = x.shape[0]
    total = residual.sum()
    base = total * total / n
    best = None
    for f in range(x.shape[1]):
        col = x[:, f]
        uniq = np.unique(col)
        if uniq.size < 2:
            continue
        if uniq.size - 1 > _SPLIT_CANDIDATES:
            qs = np.linspace(0, 1, _SPLIT_CANDIDATES + 2)[1:-1]
            cand = np.unique(np.quantile(col, qs))
        else:
            cand = (uniq[:-1] + uniq[1:]) / 2.0
        left_mask = col[:, None] <= cand[None, :]
        left_cnt = left_mask.sum(axis=0)
        ok = (left_cnt >= min_leaf) & (n - left_cnt >= min_leaf)
        if not ok.any():
            continue
        left_sum = residual @ left_mask
        right_sum = total - left_sum
        right_cnt = n - left_cnt
        with np.errstate(divide="ignore", invalid="ignore"):
            gain = left_sum**2 / left_cnt + right_sum**2 / right_cnt - base
        gain[~ok] = -np.inf
        idx = int(np.argmax(gain))
        if gain[idx] > _MIN_GAIN and (best is None or gain[idx] > best[2] + _MIN_GAIN):
            best = (f, float(cand[idx]), float(gain[idx]))
    return best


def _fit_tree(x: np.ndarray, residual: np.ndarray, max_depth: int, min_leaf: int) -> Tree:
    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    value: list[float] = []

    def grow(rows: np.ndarray, depth: int) -> int:
        node = len(feature)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(float(residual[rows].mean()))
        if depth >= max_depth or rows.size < 2 * min_leaf:
            return node
        split = _best_split(x[rows], residual[rows], min_leaf)
        if split is None:
            return node
        f, thr, _ = split
        goes_left = x[rows, f] <= thr
        feature[node] = f
        threshold[node] = thr
        left[node] = grow(rows[goes_left], depth + 1)
        right[node] = grow(rows[~goes_left], depth + 1)
        return node

    grow(np.arange(x.shape[0]), 0)
    return Tree(
        feature=np.array(feature, dtype=np.int64),
        threshold=np.array(threshold),
        left=np.array(left, dtype=np.int64),
        right=np.array(right, dtype=np.int64),
        value=np.array(value),
    )


@dataclass(frozen=True)
class TreeEnsemble:
    """Boosted shallow trees, squared loss, no subsampling."""

    trees: tuple[Tree, ...]
    learning_rate: float
    base_score: float
    max_depth: int = 3

    def predict(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        pred = np.full(x.shape[0], self.base_score)
        for tree in self.trees:
            pred += self.learning_rate * tree.predict(x)
        return pred

    def to_payload(self) -> dict:
        return {
            "kind": "tree_ensemble",
            "learning_rate": float(self.learning_rate),
            "base_score": float(self.base_score),
            "max_depth": int(self.max_depth),
            "trees": [
                {
                    "feature": [int(v) for v in t.feature],
                    "threshold": [float(v) for v in t.threshold],
                    "left": [int(v) for v in t.left],
                    "right": [int(v) for v in t.right],
                    "value": [float(v) for v in t.value],
                }
                for t in self.trees
            ],
        }


def fit_tree_ensemble(
    x,
    y,
    rounds: int = 200,
    learning_rate: float = 0.1,
    max_depth: int = 3,
    min_leaf: int = 10,
) -> TreeEnsemble:
    if max_depth > 3:
        raise DataError("built-in trees stay shallow: max_depth <= 3")
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    base = float(y.mean())
    pred = np.full(x.shape[0], base)
    trees = []
    for _ in range(rounds):
        tree = _fit_tree(x, y - pred, max_depth, min_leaf)
        if tree.feature[0] < 0 and len(tree.feature) == 1:
            break
        pred += learning_rate * tree.predict(x)
        trees.append(tree)
    return TreeEnsemble(trees=tuple(trees), learning_rate=learning_rate, base_score=base, max_depth=max_depth)


def model_from_payload(payload: dict):
    kind = payload.get("kind")
    if kind == "ridge":
        return RidgeModel(
            weights=np.array(payload["weights"], dtype=np.float64),
            intercept=float(payload["intercept"]),
            lam=float(payload.get("lam", 0.0)),
        )
    if kind == "tree_ensemble":
        trees = tuple(
            Tree(
                feature=np.array(t["feature"], dtype=np.int64),
                threshold=np.array(t["threshold"]),
                left=np.array(t["left"], dtype=np.int64),
                right=np.array(t["right"], dtype=np.int64),
                value=np.array(t["value"]),
            )
            for t in payload["trees"]
        )
        return TreeEnsemble(
            trees=trees,
            learning_rate=float(payload["learning_rate"]),
            base_score=float(payload["base_score"]),
            max_depth=int(payload.get("max_depth", 3)),
        )
    raise DataError(f"unknown model kind {kind!r}")


def save_model(path, model) -> None:
    formats.dump_json(path, model.to_payload())


def load_model(path):
    return model_from_payload(formats.load_json(path))
