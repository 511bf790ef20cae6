"""Module-level audit metrics.

Attributions aggregate exactly to modules (additivity is preserved), and
the per-module scores cover redundancy (within-module attribution
correlation), bias exposure (standardized group contrast of module
attributions), and partition agreement (ARI / NMI / VI), plus the
group-level fairness gaps computed from labels alone.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .communities import Partition, normalize_labels
from .errors import DataError
from .store import AttributionMatrix, LabelTable, WorkingMatrix

DEFAULT_BEI_EPS = 1e-6
DEFAULT_BOOTSTRAP = 200


@dataclass(frozen=True)
class ModuleAttributions:
    """n x K matrix of per-instance module sums."""

    psi: np.ndarray
    partition: Partition

    def __post_init__(self):
        psi = np.asarray(self.psi, dtype=np.float64)
        if psi.ndim != 2 or psi.shape[1] != self.partition.K:
            raise DataError(f"psi shape {psi.shape} does not match K={self.partition.K}")
        psi = psi.copy()
        psi.setflags(write=False)
        object.__setattr__(self, "psi", psi)

    @property
    def n(self) -> int:
        return self.psi.shape[0]

    @property
    def K(self) -> int:
        return self.psi.shape[1]


def module_attributions(phi: AttributionMatrix, partition: Partition) -> ModuleAttributions:
    """Exact column-group sums; row sums equal the attribution row sums."""
    if partition.d != phi.d:
        raise DataError(f"partition covers {partition.d} features, matrix has {phi.d}")
    psi = np.zeros((phi.n, partition.K))
    for k, members in enumerate(partition.modules()):
        psi[:, k] = phi.values[:, members].sum(axis=1)
    return ModuleAttributions(psi, partition)


def redundancy_index(a, module) -> float:
    """Mean |pearson| over unordered feature pairs inside the module.

    Singletons score 0 by convention. Constant columns contribute 0.
    """
    x = a.values if isinstance(a, WorkingMatrix) else np.asarray(a, dtype=np.float64)
    members = np.asarray(sorted(int(i) for i in module), dtype=np.int64)
    if members.size == 0:
        raise DataError("module must be non-empty")
    if members.size == 1:
        return 0.0
    sub = x[:, members]
    centered = sub - sub.mean(axis=0)
    scale = np.sqrt((centered**2).sum(axis=0))
    z = centered / np.where(scale > 0, scale, 1.0)
    corr = z.T @ z
    corr[scale == 0, :] = 0.0
    corr[:, scale == 0] = 0.0
    iu = np.triu_indices(members.size, k=1)
    return float(np.mean(np.abs(np.clip(corr[iu], -1.0, 1.0))))


def _pooled_std(a: np.ndarray, b: np.ndarray) -> float:
    na, nb = a.size, b.size
    va = a.var(ddof=1)
    vb = b.var(ddof=1)
    return math.sqrt(((na - 1) * va + (nb - 1) * vb) / (na + nb - 2))


def _bei_single(psi_col: np.ndarray, group_rows: list[np.ndarray], eps: float) -> float:
    best = 0.0
    for gi in range(len(group_rows)):
        for gj in range(gi + 1, len(group_rows)):
            a = psi_col[group_rows[gi]]
            b = psi_col[group_rows[gj]]
            contrast = abs(float(a.mean() - b.mean())) / (_pooled_std(a, b) + eps)
            best = max(best, contrast)
    return best


@dataclass(frozen=True)
class BiasExposure:
    bei: np.ndarray
    ci_low: np.ndarray
    ci_high: np.ndarray


def bias_exposure(
    psi: ModuleAttributions,
    labels: LabelTable,
    eps: float = DEFAULT_BEI_EPS,
    bootstrap: int = DEFAULT_BOOTSTRAP,
    seed: int = 0,
) -> BiasExposure:
    """Max pairwise standardized group contrast of module attributions.

    Confidence intervals are percentile (2.5/97.5) over stratified
    bootstrap resamples of instances, preserving per-group counts so
    every resample keeps >= 2 instances per group.
    """
    groups = list(labels.group)
    if len(groups) != psi.n:
        raise DataError(f"labels cover {len(groups)} instances, psi has {psi.n}")
    distinct = sorted(set(groups))
    if len(distinct) < 2:
        raise DataError("bias exposure needs at least two groups")
    group_rows = [np.array([r for r, g in enumerate(groups) if g == name]) for name in distinct]
    for name, rows in zip(distinct, group_rows):
        if rows.size < 2:
            raise DataError(f"group {name}: needs at least 2 instances, has {rows.size}")
    k = psi.K
    bei = np.array([_bei_single(psi.psi[:, m], group_rows, eps) for m in range(k)])
    rng = np.random.default_rng(seed)
    samples = np.empty((bootstrap, k))
    for b in range(bootstrap):
        resampled = [rows[rng.integers(0, rows.size, rows.size)] for rows in group_rows]
        samples[b] = [_bei_single(psi.psi[:, m], resampled, eps) for m in range(k)]
    low = np.percentile(samples, 2.5, axis=0)
    high = np.percentile(samples, 97.5, axis=0)
    return BiasExposure(bei=bei, ci_low=low, ci_high=high)


@dataclass(frozen=True)
class ModuleMatch:
    pairs: tuple[tuple[int, int, float], ...]
    mean_iou: float


def _iou_matrix(p_ref: Partition, p_t: Partition) -> np.ndarray:
    ref_modules = p_ref.modules()
    t_modules = p_t.modules()
    iou = np.zeros((len(ref_modules), len(t_modules)))
    t_sets = [set(int(x) for x in m) for m in t_modules]
    for a, mod_a in enumerate(ref_modules):
        set_a = set(int(x) for x in mod_a)
        for b, set_b in enumerate(t_sets):
            inter = len(set_a & set_b)
            if inter:
                iou[a, b] = inter / len(set_a | set_b)
    return iou


def match_modules(p_ref: Partition, p_t: Partition) -> ModuleMatch:
    """Optimal one-to-one module matching minimizing total (1 - IoU).

    The rectangular case behaves as if padded with zero-IoU dummies:
    min(K_ref, K_t) real pairs are matched and averaged.
    """
    if p_ref.d != p_t.d:
        raise DataError("partitions must cover the same features")
    iou = _iou_matrix(p_ref, p_t)
    rows, cols = linear_sum_assignment(1.0 - iou)
    pairs = tuple((int(a), int(b), float(iou[a, b])) for a, b in zip(rows, cols))
    mean_iou = float(np.mean([p[2] for p in pairs])) if pairs else 0.0
    return ModuleMatch(pairs=pairs, mean_iou=mean_iou)


@dataclass(frozen=True)
class AgreementScores:
    ari: float
    nmi: float
    vi: float


def partition_agreement(p1: Partition, p2: Partition) -> AgreementScores:
    """ARI (pair counting, expected-index corrected), NMI (arithmetic-mean
    normalization, natural log), and variation of information.

    Identical degenerate partitions (single block or all singletons on
    both sides) score ARI = NMI = 1 by convention.
    """
    if p1.d != p2.d:
        raise DataError("partitions must cover the same features")
    n = p1.d
    k1, k2 = p1.K, p2.K
    contingency = np.zeros((k1, k2), dtype=np.int64)
    np.add.at(contingency, (p1.assignment, p2.assignment), 1)
    a = contingency.sum(axis=1)
    b = contingency.sum(axis=0)

    def comb2(x):
        return x * (x - 1) / 2.0

    index = comb2(contingency.astype(np.float64)).sum()
    sum_a = comb2(a.astype(np.float64)).sum()
    sum_b = comb2(b.astype(np.float64)).sum()
    total = comb2(float(n))
    expected = sum_a * sum_b / total if total > 0 else 0.0
    max_index = (sum_a + sum_b) / 2.0
    denom = max_index - expected
    identical = np.array_equal(normalize_labels(p1.assignment), normalize_labels(p2.assignment))
    if denom == 0:
        ari = 1.0 if identical else 0.0
    else:
        ari = float((index - expected) / denom)

    p = contingency / n
    pa = a / n
    pb = b / n
    h1 = float(-np.sum(pa[pa > 0] * np.log(pa[pa > 0])))
    h2 = float(-np.sum(pb[pb > 0] * np.log(pb[pb > 0])))
    mask = p > 0
    mi = float(np.sum(p[mask] * np.log(p[mask] / np.outer(pa, pb)[mask])))
    mi = max(mi, 0.0)
    mean_h = (h1 + h2) / 2.0
    if mean_h == 0:
        nmi = 1.0 if identical else 0.0
    else:
        nmi = float(mi / mean_h)
    vi = max(float(h1 + h2 - 2.0 * mi), 0.0)
    return AgreementScores(ari=ari, nmi=nmi, vi=vi)


@dataclass(frozen=True)
class FairnessGaps:
    dp_gap: float | None
    eo_tpr_gap: float | None
    eo_fpr_gap: float | None


def _max_pairwise_gap(rates: list[float | None]) -> float | None:
    present = [r for r in rates if r is not None]
    if len(present) < 2:
        return None
    return float(max(present) - min(present))


def fairness_gaps(labels: LabelTable) -> FairnessGaps:
    """Max pairwise demographic-parity and equalized-odds gaps.

    Pairs where a rate is undefined (a group without positives or
    negatives) are skipped with a warning; with fewer than two defined
    rates the gap is None.
    """
    if labels.yhat is None:
        raise DataError("fairness gaps need yhat labels")
    groups = sorted(set(labels.group))
    if len(groups) < 2:
        raise DataError("fairness gaps need at least two groups")
    yhat = np.asarray(labels.yhat) >= 0.5
    rows = {g: np.array([r for r, name in enumerate(labels.group) if name == g]) for g in groups}
    dp = [float(yhat[rows[g]].mean()) for g in groups]
    dp_gap = _max_pairwise_gap(dp)

    eo_tpr = eo_fpr = None
    if labels.y is not None:
        y = np.asarray(labels.y) >= 0.5
        tpr: list[float | None] = []
        fpr: list[float | None] = []
        for g in groups:
            pos = rows[g][y[rows[g]]]
            neg = rows[g][~y[rows[g]]]
            if pos.size == 0:
                warnings.warn(f"group {g}: no positives, TPR undefined; pair skipped", stacklevel=2)
                tpr.append(None)
            else:
                tpr.append(float(yhat[pos].mean()))
            if neg.size == 0:
                warnings.warn(f"group {g}: no negatives, FPR undefined; pair skipped", stacklevel=2)
                fpr.append(None)
            else:
                fpr.append(float(yhat[neg].mean()))
        eo_tpr = _max_pairwise_gap(tpr)
        eo_fpr = _max_pairwise_gap(fpr)
    return FairnessGaps(dp_gap=dp_gap, eo_tpr_gap=eo_tpr, eo_fpr_gap=eo_fpr)


def heatmap_order(partition: Partition, strengths: np.ndarray) -> list[int]:
    """Feature order for the reordered affinity heatmap: by module id,
    then by strength descending inside the module (ties by feature id)."""
    order: list[int] = []
    for members in partition.modules():
        ranked = sorted(members, key=lambda i: (-float(strengths[i]), int(i)))
        order.extend(int(i) for i in ranked)
    return order


def sankey_flows(phi: AttributionMatrix, partition: Partition):
    """Cohort-mean magnitude flows feature -> module and module -> output."""
    psi = module_attributions(phi, partition)
    feature_flows = np.abs(phi.values).mean(axis=0)
    module_flows = np.abs(psi.psi).mean(axis=0)
    feature_to_module = [
        {"feature": phi.feature_names[i], "module": int(partition.assignment[i]), "flow": float(feature_flows[i])}
        for i in range(phi.d)
    ]
    module_to_output = [{"module": k, "flow": float(module_flows[k])} for k in range(partition.K)]
    return feature_to_module, module_to_output


def build_report(
    graph,
    partition: Partition,
    phi: AttributionMatrix,
    working,
    labels: LabelTable | None = None,
    ablation_drops: dict[int, float] | None = None,
    msi_value: float | None = None,
    msi_ci: tuple[float, float] | None = None,
    quality: dict | None = None,
    consensus_path: str | None = None,
    bei_eps: float = DEFAULT_BEI_EPS,
    seed: int = 0,
) -> dict:
    """Assemble the serializable audit report (module summary table,
    global quality and fairness numbers, Sankey flows, heatmap order)."""
    psi = module_attributions(phi, partition)
    strengths = graph.strengths
    bias = None
    gaps = None
    if labels is not None:
        try:
            bias = bias_exposure(psi, labels, eps=bei_eps, seed=seed)
        except DataError:
            bias = None
        if labels.yhat is not None:
            gaps = fairness_gaps(labels)
    mean_abs_psi = np.abs(psi.psi).mean(axis=0)
    modules_payload = []
    for k, members in enumerate(partition.modules()):
        modules_payload.append(
            {
                "id": k,
                "size": int(members.size),
                "features": [phi.feature_names[i] for i in members],
                "avg_degree": float(strengths[members].mean()),
                "ri": redundancy_index(working, members),
                "bei": float(bias.bei[k]) if bias is not None else None,
                "bei_ci": [float(bias.ci_low[k]), float(bias.ci_high[k])] if bias is not None else None,
                "mean_abs_psi": float(mean_abs_psi[k]),
                "ablation_drop": (
                    float(ablation_drops[k]) if ablation_drops is not None and k in ablation_drops else None
                ),
            }
        )
    feature_to_module, module_to_output = sankey_flows(phi, partition)
    global_payload = {
        "Q": float(quality["Q"]) if quality and "Q" in quality else None,
        "mean_conductance": float(quality["mean_conductance"]) if quality and "mean_conductance" in quality else None,
        "msi": float(msi_value) if msi_value is not None else None,
        "msi_ci": [float(msi_ci[0]), float(msi_ci[1])] if msi_ci is not None else None,
        "dp_gap": gaps.dp_gap if gaps is not None else None,
        "eo_tpr_gap": gaps.eo_tpr_gap if gaps is not None else None,
        "eo_fpr_gap": gaps.eo_fpr_gap if gaps is not None else None,
    }
    return {
        "modules": modules_payload,
        "global": global_payload,
        "sankey": {"feature_to_module": feature_to_module, "module_to_output": module_to_output},
        "heatmap_order": heatmap_order(partition, strengths),
        "consensus_path": consensus_path,
        "bei_definition": "max pairwise |mean difference| / (pooled std + eps)",
        "nmi_normalization": "arithmetic mean of entropies",
    }
