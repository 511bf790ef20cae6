"""Sparse explanation graphs built from dense affinities.

Construction order is fixed: sparsify -> optional backbone -> degree
normalization. Edges are stored once in canonical form (src < dst,
lexicographically sorted); finished graphs are immutable.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .affinity import AffinityMatrix, SignedLayers
from .errors import DataError


@dataclass(frozen=True, eq=False)
class ExplanationGraph:
    """Undirected weighted feature graph.

    src/dst/weight form a canonical upper-triangular edge list. Meta
    records how the graph was constructed (rule, sparsifier, k or
    theta, degree norm, seeds).
    """

    d: int
    src: np.ndarray
    dst: np.ndarray
    weight: np.ndarray
    signed_layers: SignedLayers | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        src = np.asarray(self.src, dtype=np.int64)
        dst = np.asarray(self.dst, dtype=np.int64)
        weight = np.asarray(self.weight, dtype=np.float64)
        if not (src.shape == dst.shape == weight.shape):
            raise DataError("edge arrays must have matching shapes")
        if src.size:
            if src.min() < 0 or dst.max() >= self.d:
                raise DataError("edge endpoint out of range")
            if np.any(src >= dst):
                raise DataError("edges must satisfy src < dst")
            order = np.lexsort((dst, src))
            src, dst, weight = src[order], dst[order], weight[order]
            if np.any((src[1:] == src[:-1]) & (dst[1:] == dst[:-1])):
                raise DataError("duplicate edge")
            if not np.all(np.isfinite(weight)) or np.any(weight == 0):
                raise DataError("edge weights must be finite and nonzero")
        for arr in (src, dst, weight):
            arr.setflags(write=False)
        object.__setattr__(self, "src", src)
        object.__setattr__(self, "dst", dst)
        object.__setattr__(self, "weight", weight)

    @property
    def edge_count(self) -> int:
        return int(self.src.size)

    @cached_property
    def adjacency(self):
        """CSR-style (indptr, indices, weights) with both edge directions.

        Neighbor lists come out sorted by node id.
        """
        both_src = np.concatenate([self.src, self.dst])
        both_dst = np.concatenate([self.dst, self.src])
        both_w = np.concatenate([self.weight, self.weight])
        order = np.lexsort((both_dst, both_src))
        both_src, both_dst, both_w = both_src[order], both_dst[order], both_w[order]
        indptr = np.zeros(self.d + 1, dtype=np.int64)
        np.add.at(indptr, both_src + 1, 1)
        np.cumsum(indptr, out=indptr)
        return indptr, both_dst, both_w

    def neighbors(self, i: int):
        indptr, indices, weights = self.adjacency
        return indices[indptr[i] : indptr[i + 1]], weights[indptr[i] : indptr[i + 1]]

    @cached_property
    def strengths(self) -> np.ndarray:
        s = np.zeros(self.d)
        np.add.at(s, self.src, np.abs(self.weight))
        np.add.at(s, self.dst, np.abs(self.weight))
        s.setflags(write=False)
        return s

    @cached_property
    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.d, dtype=np.int64)
        np.add.at(deg, self.src, 1)
        np.add.at(deg, self.dst, 1)
        deg.setflags(write=False)
        return deg

    def has_negative_weights(self) -> bool:
        return bool(self.weight.size and self.weight.min() < 0)

    def dense(self) -> np.ndarray:
        w = np.zeros((self.d, self.d))
        w[self.src, self.dst] = self.weight
        w[self.dst, self.src] = self.weight
        return w


def validate_graph(g: ExplanationGraph) -> None:
    """Re-run the structural invariants (constructor already enforces them)."""
    ExplanationGraph(g.d, g.src, g.dst, g.weight, g.signed_layers, dict(g.meta))


def _edges_from_mask(values: np.ndarray, mask: np.ndarray):
    iu, ju = np.nonzero(np.triu(mask, k=1))
    return iu, ju, values[iu, ju]


def _topk_columns(absvals: np.ndarray, k: int) -> np.ndarray:
    """Boolean pick[i, j]: j is among i's k strongest nonzero neighbors.

    Ties in |w| break toward the smaller neighbor id; zero affinities
    are never picked.
    """
    d = absvals.shape[0]
    vals = absvals.copy()
    np.fill_diagonal(vals, -1.0)
    ids = np.broadcast_to(np.arange(d), (d, d))
    order = np.lexsort((ids, -vals), axis=1)
    pick = np.zeros((d, d), dtype=bool)
    rows = np.repeat(np.arange(d), k)
    pick[rows, order[:, :k].ravel()] = True
    pick &= absvals > 0
    np.fill_diagonal(pick, False)
    return pick


def sparsify(
    w: AffinityMatrix,
    rule: str = "mutual_topk",
    k_or_theta: float = 20,
    min_degree: int = 0,
    meta: dict | None = None,
) -> ExplanationGraph:
    """Keep the reliable backbone of a dense affinity.

    topk unions each node's k strongest neighbors over both directions;
    mutual_topk keeps an edge only when each endpoint ranks the other;
    threshold keeps |w| >= theta. Nodes under min_degree then get their
    strongest missing neighbors added. Ranking is by |w| so strong
    negative ties survive on signed inputs; the sign itself is kept.
    """
    d = w.d
    absvals = np.abs(w.values)
    if rule in ("topk", "mutual_topk"):
        k = int(k_or_theta)
        if not (1 <= k < d):
            raise DataError(f"k must satisfy 1 <= k < d, got k={k}, d={d}")
        pick = _topk_columns(absvals, k)
        mask = (pick | pick.T) if rule == "topk" else (pick & pick.T)
    elif rule == "threshold":
        theta = float(k_or_theta)
        if theta <= 0:
            raise DataError("theta must be > 0")
        mask = absvals >= theta
        np.fill_diagonal(mask, False)
    else:
        raise DataError(f"unknown sparsifier {rule!r}")

    mask &= absvals > 0
    mask |= mask.T

    if min_degree > 0:
        degrees = mask.sum(axis=1)
        ids = np.arange(d)
        for i in range(d):
            if degrees[i] >= min_degree:
                continue
            row = absvals[i]
            order = np.lexsort((ids, -row))
            for j in order:
                if degrees[i] >= min_degree:
                    break
                if j == i or mask[i, j] or row[j] <= 0:
                    continue
                mask[i, j] = mask[j, i] = True
                degrees[i] += 1
                degrees[j] += 1

    src, dst, weight = _edges_from_mask(w.values, mask)
    if src.size == 0:
        warnings.warn("sparsified graph has no edges", stacklevel=2)
    info = {"rule": w.rule, "sparsifier": rule, "k_or_theta": k_or_theta, "min_degree": min_degree}
    if meta:
        info.update(meta)
    return ExplanationGraph(d, src, dst, weight, meta=info)


def connected_components(g: ExplanationGraph) -> list[list[int]]:
    """Node sets by connectivity, ordered by smallest member."""
    indptr, indices, _ = g.adjacency
    seen = np.zeros(g.d, dtype=bool)
    components = []
    for start in range(g.d):
        if seen[start]:
            continue
        stack = [start]
        seen[start] = True
        comp = []
        while stack:
            node = stack.pop()
            comp.append(node)
            for nbr in indices[indptr[node] : indptr[node + 1]]:
                if not seen[nbr]:
                    seen[nbr] = True
                    stack.append(int(nbr))
        components.append(sorted(comp))
    return components


def add_backbone(g: ExplanationGraph, w: AffinityMatrix, k0: int = 2) -> ExplanationGraph:
    """Union each node's top-k0 affinities into a fragmented graph.

    Applied only when the graph has more than one connected component;
    k0 = 0 is the identity.
    """
    if k0 == 0:
        return g
    if not (1 <= k0 <= 3):
        raise DataError("k0 must be in 1..3")
    if len(connected_components(g)) <= 1:
        return g
    pick = _topk_columns(np.abs(w.values), k0)
    mask = pick | pick.T
    existing = np.zeros((g.d, g.d), dtype=bool)
    existing[g.src, g.dst] = True
    existing[g.dst, g.src] = True
    mask |= existing
    src, dst, weight = _edges_from_mask(w.values, mask)
    # keep original weights where the edge already existed
    dense = np.array(w.values)
    dense[g.src, g.dst] = g.weight
    dense[g.dst, g.src] = g.weight
    weight = dense[src, dst]
    meta = dict(g.meta)
    meta["backbone_k0"] = k0
    return ExplanationGraph(g.d, src, dst, weight, signed_layers=g.signed_layers, meta=meta)


def degree_normalize(g: ExplanationGraph, beta: float = 0.5) -> ExplanationGraph:
    """Temper hubs: w_ij <- w_ij / (s_i^beta * s_j^beta), strengths taken
    before normalization. beta = 0 is the identity; isolated nodes are
    untouched (they have no weights to scale)."""
    if beta not in (0, 0.5, 1):
        raise DataError("beta must be one of 0, 0.5, 1")
    if beta == 0 or g.edge_count == 0:
        return g
    s = g.strengths
    scale = np.power(s[g.src], beta) * np.power(s[g.dst], beta)
    weight = g.weight / scale
    meta = dict(g.meta)
    meta["degree_norm"] = beta
    return ExplanationGraph(g.d, g.src, g.dst, weight, signed_layers=g.signed_layers, meta=meta)


def symmetrize(w: AffinityMatrix) -> AffinityMatrix:
    """(W + W^T) / 2; a no-op for matrices that are already symmetric."""
    vals = (w.values + w.values.T) / 2.0
    return AffinityMatrix(vals, rule=w.rule, signed=w.signed)


def symmetrize_raw(values: np.ndarray) -> np.ndarray:
    """Symmetrize an arbitrary square array (not yet an affinity)."""
    values = np.asarray(values, dtype=np.float64)
    return (values + values.T) / 2.0
