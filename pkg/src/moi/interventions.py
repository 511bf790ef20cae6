"""Module ablations and synergy.

A policy turns a module of input columns into counterfactual values:
joint draws from a reference pool (hard), draws conditioned on nearest
reference neighbors (knn), or deterministic attenuation toward the
reference means (soft). The ablation drop is the evaluation-metric
change after replacing a module; synergy is the drop's deviation from
additivity over two disjoint modules, all computed on one seed stream
so per-instance draws cancel exactly for additive models.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .communities import Partition
from .errors import DataError
from . import formats

POLICY_KINDS = ("hard_marginal", "conditional_knn", "soft_attenuate")
METRIC_KINDS = ("mean_prediction", "r2", "auroc", "accuracy")
DEFAULT_DRAWS = 8


@dataclass(frozen=True)
class InterventionPolicy:
    kind: str = "hard_marginal"
    delta: float = 1.0
    donor_k: int = 5
    draws: int = DEFAULT_DRAWS
    seed: int = 0

    def __post_init__(self):
        if self.kind not in POLICY_KINDS:
            raise DataError(f"unknown policy kind {self.kind!r}")
        if not (0.0 <= self.delta <= 1.0):
            raise DataError("delta must be in [0, 1]")
        if self.donor_k < 1:
            raise DataError("donor_k must be >= 1")
        if self.draws < 1:
            raise DataError("draws must be >= 1")

    @property
    def effective_draws(self) -> int:
        # soft attenuation is deterministic: one draw carries everything
        return 1 if self.kind == "soft_attenuate" else self.draws


def _predict(model, x: np.ndarray) -> np.ndarray:
    fn = getattr(model, "predict", model)
    return np.asarray(fn(x), dtype=np.float64)


def intervene(x, module, policy: InterventionPolicy, reference=None) -> np.ndarray:
    """Counterfactual rows: R stacked blocks of n instances each.

    Only the module's columns change; reference defaults to the data
    itself (marginal pool).
    """
    x = np.asarray(x, dtype=np.float64)
    members = np.asarray(sorted(int(i) for i in module), dtype=np.int64)
    if members.size == 0:
        raise DataError("module must be non-empty")
    if members.min() < 0 or members.max() >= x.shape[1]:
        raise DataError("module index out of range")
    ref = x if reference is None else np.asarray(reference, dtype=np.float64)
    if ref.ndim != 2 or ref.shape[1] != x.shape[1]:
        raise DataError("reference must have the same columns as the data")
    if ref.shape[0] == 0:
        raise DataError("reference must be non-empty")
    n = x.shape[0]
    r = policy.effective_draws
    rng = np.random.default_rng(policy.seed)

    if policy.kind == "soft_attenuate":
        out = x.copy()
        if policy.delta == 1.0:
            return out
        mu = ref[:, members].mean(axis=0)
        out[:, members] = mu + policy.delta * (out[:, members] - mu)
        return out

    if policy.kind == "hard_marginal":
        # one donor row per (draw, instance); consumption depends only on (n, r, seed)
        donors = rng.integers(0, ref.shape[0], size=(r, n))
        out = np.tile(x, (r, 1))
        for t in range(r):
            out[t * n : (t + 1) * n][:, members] = ref[donors[t]][:, members]
        return out

    # conditional_knn: donors drawn among nearest reference rows by the
    # non-module columns, standardized by the reference spread
    if ref.shape[0] < policy.donor_k:
        raise DataError(f"reference has {ref.shape[0]} rows < donor_k={policy.donor_k}")
    rest = np.setdiff1d(np.arange(x.shape[1]), members)
    if rest.size == 0:
        donors_idx = np.broadcast_to(np.arange(ref.shape[0])[:policy.donor_k], (n, policy.donor_k))
    else:
        scale = ref[:, rest].std(axis=0)
        scale = np.where(scale > 0, scale, 1.0)
        a = x[:, rest] / scale
        b = ref[:, rest] / scale
        d2 = (a**2).sum(axis=1)[:, None] + (b**2).sum(axis=1)[None, :] - 2.0 * (a @ b.T)
        donors_idx = np.argsort(d2, axis=1, kind="stable")[:, : policy.donor_k]
    choice = rng.integers(0, policy.donor_k, size=(r, n))
    out = np.tile(x, (r, 1))
    for t in range(r):
        picked = donors_idx[np.arange(n), choice[t]]
        out[t * n : (t + 1) * n][:, members] = ref[picked][:, members]
    return out


def evaluate_metric(kind: str, predictions: np.ndarray, y=None) -> float:
    predictions = np.asarray(predictions, dtype=np.float64)
    if kind == "mean_prediction":
        return float(predictions.mean())
    if y is None:
        raise DataError(f"metric {kind!r} needs ground-truth labels")
    y = np.asarray(y, dtype=np.float64)
    if kind == "r2":
        ss_tot = float(((y - y.mean()) ** 2).sum())
        if ss_tot == 0:
            raise DataError("r2 undefined: constant targets")
        ss_res = float(((y - predictions) ** 2).sum())
        return 1.0 - ss_res / ss_tot
    if kind == "accuracy":
        return float(((predictions >= 0.5) == (y >= 0.5)).mean())
    if kind == "auroc":
        pos = y >= 0.5
        n_pos = int(pos.sum())
        n_neg = int((~pos).sum())
        if n_pos == 0 or n_neg == 0:
            raise DataError("auroc undefined: one class missing")
        order = np.argsort(predictions, kind="stable")
        ranks = np.empty(predictions.size)
        ranks[order] = np.arange(1, predictions.size + 1, dtype=np.float64)
        # average ranks over ties
        sorted_preds = predictions[order]
        start = 0
        for stop in range(1, predictions.size + 1):
            if stop == predictions.size or sorted_preds[stop] != sorted_preds[start]:
                if stop - start > 1:
                    ranks[order[start:stop]] = (start + 1 + stop) / 2.0
                start = stop
        return float((ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))
    raise DataError(f"unknown metric {kind!r}")


def counterfactual_predictions(model, x, module, policy: InterventionPolicy, reference=None) -> np.ndarray:
    """Per-instance mean over the R counterfactual draws."""
    cf = intervene(x, module, policy, reference)
    preds = _predict(model, cf)
    r = policy.effective_draws
    return preds.reshape(r, -1).mean(axis=0)


def ablation_drop(model, x, y, module, metric: str = "mean_prediction", policy: InterventionPolicy | None = None, reference=None) -> float:
    """Metric(original predictions) minus metric(counterfactual predictions)."""
    members = list(module)
    if len(members) == 0:
        return 0.0
    policy = policy or InterventionPolicy()
    x = np.asarray(x, dtype=np.float64)
    before = evaluate_metric(metric, _predict(model, x), y)
    after = evaluate_metric(metric, counterfactual_predictions(model, x, members, policy, reference), y)
    return float(before - after)


def synergy(model, x, y, module_a, module_b, metric: str = "mean_prediction", policy: InterventionPolicy | None = None, reference=None) -> float:
    """Deviation of the joint ablation drop from the sum of the separate
    drops; all three use the same seed stream."""
    a = set(int(i) for i in module_a)
    b = set(int(i) for i in module_b)
    if a & b:
        raise DataError("synergy needs disjoint modules")
    policy = policy or InterventionPolicy()
    joint = ablation_drop(model, x, y, sorted(a | b), metric, policy, reference)
    drop_a = ablation_drop(model, x, y, sorted(a), metric, policy, reference)
    drop_b = ablation_drop(model, x, y, sorted(b), metric, policy, reference)
    return float(joint - drop_a - drop_b)


def synergy_null_calibration(
    model,
    x,
    y,
    module_a,
    module_b,
    metric: str = "r2",
    policy: InterventionPolicy | None = None,
    reference=None,
    permutations: int = 200,
    seed: int = 0,
):
    """Null distribution of synergy under re-splits of the two modules.

    Each draw permutes the module labels across the union's features
    (sizes preserved). Draws that reproduce the observed split carry no
    evidence against the split and are redrawn; with only
    C(|A|+|B|, |A|) distinct splits they would otherwise put an atom of
    probability at the observed value and no statistic could clear a 1%
    level. Returns (observed, null_array).
    """
    policy = policy or InterventionPolicy()
    a = sorted(int(i) for i in module_a)
    b = sorted(int(i) for i in module_b)
    observed = synergy(model, x, y, a, b, metric, policy, reference)
    union = np.array(a + b)
    size_a = len(a)
    rng = np.random.default_rng(seed)
    true_split = frozenset(a)
    nulls = np.empty(permutations)
    x = np.asarray(x, dtype=np.float64)
    # the joint term never changes across re-splits of the same union
    joint = ablation_drop(model, x, y, sorted(union), metric, policy, reference)
    for t in range(permutations):
        while True:
            perm = rng.permutation(union)
            left = frozenset(int(v) for v in perm[:size_a])
            if left != true_split and left != frozenset(int(v) for v in union) - true_split:
                break
        drop_left = ablation_drop(model, x, y, sorted(left), metric, policy, reference)
        drop_right = ablation_drop(model, x, y, sorted(set(int(v) for v in union) - left), metric, policy, reference)
        nulls[t] = joint - drop_left - drop_right
    return observed, nulls


def emit_counterfactuals(x, partition: Partition, policy: InterventionPolicy, out_dir, feature_names=None, reference=None) -> dict:
    """First pass of the external-model protocol: write the original data
    plus one counterfactual CSV per module, and a manifest mapping files
    to modules. Per-module seeds derive as policy.seed XOR module id."""
    x = np.asarray(x, dtype=np.float64)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    names = list(feature_names) if feature_names is not None else [f"x{i}" for i in range(x.shape[1])]
    formats.write_phi_csv(out_dir / "X.csv", x, names)
    entries = []
    for k, members in enumerate(partition.modules()):
        module_policy = replace(policy, seed=policy.seed ^ k)
        cf = intervene(x, members, module_policy, reference)
        fname = f"module_{k}.csv"
        formats.write_phi_csv(out_dir / fname, cf, names)
        entries.append(
            {
                "id": k,
                "file": fname,
                "R": module_policy.effective_draws,
                "policy": policy.kind,
                "features": [int(i) for i in members],
            }
        )
    manifest = {"original": "X.csv", "modules": entries, "seed": policy.seed}
    formats.dump_json(out_dir / "manifest.json", manifest)
    return manifest


def _read_prediction_file(path) -> np.ndarray:
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["prediction"]:
            raise DataError(f"{path}: expected single-column header 'prediction'")
        vals = [float(row[0]) for row in reader]
    return np.asarray(vals, dtype=np.float64)


def prediction_filename(counterfactual_file: str) -> str:
    return Path(counterfactual_file).stem + ".pred.csv"


def ingest_predictions(manifest, predictions_dir, metric: str = "mean_prediction", y=None) -> dict[int, float]:
    """Second pass: compute the drops from externally supplied predictions.

    For every manifest file F there must be a row-aligned
    single-column prediction file named F's stem + ".pred.csv".
    """
    if not isinstance(manifest, dict):
        manifest = formats.load_json(manifest)
    predictions_dir = Path(predictions_dir)
    orig_path = predictions_dir / prediction_filename(manifest["original"])
    if not orig_path.exists():
        raise DataError(f"missing predictions for original data: {orig_path}")
    original = _read_prediction_file(orig_path)
    before = evaluate_metric(metric, original, y)
    drops: dict[int, float] = {}
    for entry in manifest["modules"]:
        pred_path = predictions_dir / prediction_filename(entry["file"])
        if not pred_path.exists():
            raise DataError(f"module {entry['id']}: missing prediction file {pred_path}")
        preds = _read_prediction_file(pred_path)
        r = int(entry["R"])
        if preds.size != r * original.size:
            raise DataError(
                f"module {entry['id']}: expected {r * original.size} predictions, got {preds.size}"
            )
        per_instance = preds.reshape(r, -1).mean(axis=0)
        drops[int(entry["id"])] = float(before - evaluate_metric(metric, per_instance, y))
    return drops
