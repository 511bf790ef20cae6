"""Composition of the stages: attributions -> working view -> dense
affinity -> sparse graph -> partition, all driven by one config.

Signed affinities keep their sign on graph edges and carry the
positive/negative layers along for reporting; detection itself always
runs on the unsigned projection.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import affinity as aff
from .communities import Partition, detect_modules, louvain
from .config import PipelineConfig, config_hash
from .errors import ConfigError
from .graph import ExplanationGraph, add_backbone, degree_normalize, sparsify
from .store import AttributionMatrix, WorkingMatrix, make_working_matrix

# backbone kicks in when more than this fraction of nodes end up isolated
FRAGMENTATION_THRESHOLD = 0.10
BACKBONE_K0 = 2
DETECT_RESTARTS = 3
# permutation significance filtering runs by default while the exact
# per-pair test stays affordable; above this pair count it must be
# requested explicitly
SIGNIFICANCE_AUTO_MAX_PAIRS = 5000
SIGNIFICANCE_PERMUTATIONS = 199
SIGNIFICANCE_FDR_Q = 0.05


def working_from_config(cfg: PipelineConfig, phi: AttributionMatrix) -> WorkingMatrix:
    view = "signed" if cfg.signed else "magnitude"
    return make_working_matrix(phi, view=view, column_scaling=cfg.column_scaling)


def affinity_from_config(cfg: PipelineConfig, working: WorkingMatrix) -> aff.AffinityMatrix:
    rule = cfg.edge_rule
    if rule == "cosine_mag":
        return aff.cosine_magnitude(working)
    if rule in ("pearson", "spearman"):
        return aff.corr_signed(working, rule)
    if rule == "coexceed_freq":
        return aff.coexceedance(aff.exceedance(working))
    if rule == "jaccard":
        return aff.jaccard(aff.exceedance(working))
    if rule == "mi_binned":
        return aff.mutual_info_binned(working)
    raise ConfigError(f"unknown edge rule {rule!r}")


def _significance_applies(cfg: PipelineConfig, d: int, significance: bool | None) -> bool:
    if significance is not None:
        return significance
    return d * (d - 1) // 2 <= SIGNIFICANCE_AUTO_MAX_PAIRS


def filtered_affinity(
    cfg: PipelineConfig, working: WorkingMatrix, significance: bool | None = None
) -> tuple[aff.AffinityMatrix, bool]:
    """Dense affinity plus the default significance filtering stage."""
    w = affinity_from_config(cfg, working)
    applied = _significance_applies(cfg, w.d, significance)
    if applied:
        w = aff.significance_filter(
            w, working, permutations=SIGNIFICANCE_PERMUTATIONS, fdr_q=SIGNIFICANCE_FDR_Q, seed=cfg.seeds.graph
        )
    return w, applied


def graph_from_config(cfg: PipelineConfig, w: aff.AffinityMatrix, significance_applied: bool = False) -> ExplanationGraph:
    """Sparsify, auto-backbone on fragmentation, then degree-normalize.

    Neighborhood sizes are clamped to d - 1 so a generic config still
    applies to small feature sets (the raw sparsify op stays strict).
    """
    layers = aff.split_signed(w) if w.signed else None
    k_or_theta = cfg.k
    if cfg.sparsifier in ("topk", "mutual_topk"):
        k_or_theta = min(int(cfg.k), w.d - 1)
    meta = {
        "edge_rule": cfg.edge_rule,
        "sparsifier": cfg.sparsifier,
        "k_or_theta": k_or_theta,
        "degree_norm": cfg.degree_norm,
        "seed_graph": cfg.seeds.graph,
        "significance_filter": significance_applied,
        "config_hash": config_hash(cfg),
    }
    g = sparsify(w, rule=cfg.sparsifier, k_or_theta=k_or_theta, min_degree=0, meta=meta)
    singletons = int((g.degrees == 0).sum())
    if singletons > FRAGMENTATION_THRESHOLD * g.d:
        g = add_backbone(g, w, k0=BACKBONE_K0)
    g = degree_normalize(g, cfg.degree_norm)
    if layers is not None:
        g = ExplanationGraph(g.d, g.src, g.dst, g.weight, signed_layers=layers, meta=dict(g.meta))
    return g


def unsigned_projection(g: ExplanationGraph) -> ExplanationGraph:
    if not g.has_negative_weights():
        return g
    meta = dict(g.meta)
    meta["projection"] = "abs"
    return ExplanationGraph(g.d, g.src, g.dst, np.abs(g.weight), signed_layers=g.signed_layers, meta=meta)


def partition_from_config(cfg: PipelineConfig, g: ExplanationGraph, seed: int | None = None) -> Partition:
    seed = cfg.seeds.comm if seed is None else seed
    projected = unsigned_projection(g)
    if cfg.community == "louvain":
        return louvain(projected, cfg.resolution, seed)
    return detect_modules(projected, cfg.resolution, seed, restarts=DETECT_RESTARTS)


@dataclass(frozen=True)
class PipelineRun:
    working: WorkingMatrix
    affinity: aff.AffinityMatrix
    graph: ExplanationGraph
    partition: Partition


def run_pipeline(
    cfg: PipelineConfig,
    phi: AttributionMatrix,
    comm_seed: int | None = None,
    significance: bool | None = None,
) -> PipelineRun:
    working = working_from_config(cfg, phi)
    w, applied = filtered_affinity(cfg, working, significance)
    g = graph_from_config(cfg, w, significance_applied=applied)
    partition = partition_from_config(cfg, g, comm_seed)
    return PipelineRun(working=working, affinity=w, graph=g, partition=partition)
