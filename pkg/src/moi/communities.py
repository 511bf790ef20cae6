"""Module detection on explanation graphs.

Greedy two-phase modularity maximization with a configurable resolution,
followed by a refinement pass that guarantees every module induces a
connected subgraph and never lowers modularity. Detection is
deterministic given (graph, resolution, seed). Signed graphs are
rejected here; project to |W| upstream (the negative layer is reported,
not optimized over).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .graph import ExplanationGraph

GAIN_TOL = 1e-12
MAX_OUTER_ITERATIONS = 100


@dataclass(frozen=True)
class Partition:
    """Disjoint cover of the d features by modules 0..K-1."""

    assignment: np.ndarray

    def __post_init__(self):
        assignment = np.asarray(self.assignment, dtype=np.int64)
        if assignment.ndim != 1 or assignment.size == 0:
            raise DataError("assignment must be a non-empty 1-d array")
        labels = np.unique(assignment)
        if labels[0] != 0 or labels[-1] != labels.size - 1:
            raise DataError("module ids must be contiguous from 0")
        assignment = assignment.copy()
        assignment.setflags(write=False)
        object.__setattr__(self, "assignment", assignment)

    @property
    def d(self) -> int:
        return int(self.assignment.size)

    @property
    def K(self) -> int:
        return int(self.assignment.max()) + 1

    def modules(self) -> list[np.ndarray]:
        return [np.nonzero(self.assignment == k)[0] for k in range(self.K)]

    @classmethod
    def from_modules(cls, modules, d: int) -> "Partition":
        assignment = np.full(d, -1, dtype=np.int64)
        for k, members in enumerate(modules):
            for i in members:
                if assignment[int(i)] != -1:
                    raise DataError(f"feature {i} assigned to two modules")
                assignment[int(i)] = k
        if (assignment < 0).any():
            missing = int(np.nonzero(assignment < 0)[0][0])
            raise DataError(f"feature {missing} not covered by any module")
        return cls(assignment)


def normalize_labels(assignment: np.ndarray) -> np.ndarray:
    """Relabel to contiguous ids ordered by first appearance."""
    mapping: dict[int, int] = {}
    out = np.empty(assignment.size, dtype=np.int64)
    for i, c in enumerate(assignment):
        c = int(c)
        if c not in mapping:
            mapping[c] = len(mapping)
        out[i] = mapping[c]
    return out


@dataclass(frozen=True)
class ConsensusMatrix:
    """Co-assignment frequencies across runs; symmetric, unit diagonal."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise DataError("consensus matrix must be square")
        if values.size:
            if values.min() < -1e-12 or values.max() > 1 + 1e-12:
                raise DataError("consensus entries must lie in [0, 1]")
            if np.max(np.abs(values - values.T)) > 1e-12:
                raise DataError("consensus matrix must be symmetric")
            if np.max(np.abs(np.diagonal(values) - 1.0)) > 1e-12:
                raise DataError("consensus diagonal must be 1")
        values = values.copy()
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def d(self) -> int:
        return self.values.shape[0]


class _Level:
    """Mutable working graph for one aggregation level."""

    __slots__ = ("n", "indptr", "indices", "weights", "loops", "strength", "m2")

    def __init__(self, n, indptr, indices, weights, loops):
        self.n = n
        self.indptr = indptr
        self.indices = indices
        self.weights = weights
        self.loops = loops
        self.strength = np.zeros(n)
        for i in range(n):
            self.strength[i] = weights[indptr[i] : indptr[i + 1]].sum() + 2.0 * loops[i]
        self.m2 = float(self.strength.sum())

    @classmethod
    def from_graph(cls, g: ExplanationGraph) -> "_Level":
        indptr, indices, weights = g.adjacency
        return cls(g.d, indptr.copy(), indices.copy(), weights.copy(), np.zeros(g.d))


def _local_moves(level: _Level, assignment, resolution, rng, neighbor_only, next_label, randomized=False):
    """Sweep nodes in shuffled order, reassigning for modularity gain.

    Returns (moved_any, next_label). With neighbor_only the candidate set
    is restricted to communities the node has an edge into plus a fresh
    singleton, which preserves module connectivity. With randomized the
    target is drawn uniformly among all positive-gain candidates instead
    of the argmax, which diversifies restarts; gains stay strictly
    positive either way.
    """
    tot = {}
    for i in range(level.n):
        c = int(assignment[i])
        tot[c] = tot.get(c, 0.0) + level.strength[i]
    m2 = level.m2
    moved_any = False
    while True:
        moved = False
        for i in rng.permutation(level.n):
            i = int(i)
            c_old = int(assignment[i])
            s_i = level.strength[i]
            links: dict[int, float] = {}
            lo, hi = level.indptr[i], level.indptr[i + 1]
            for j, w in zip(level.indices[lo:hi], level.weights[lo:hi]):
                cj = int(assignment[j])
                links[cj] = links.get(cj, 0.0) + float(w)
            tot[c_old] -= s_i
            stay_gain = links.get(c_old, 0.0) - resolution * s_i * tot[c_old] / m2
            best_c, best_gain = c_old, stay_gain
            improving: list[int] = []
            for c in sorted(links):
                if c == c_old:
                    continue
                gain = links[c] - resolution * s_i * tot.get(c, 0.0) / m2
                if gain > stay_gain + GAIN_TOL:
                    improving.append(c)
                if gain > best_gain + GAIN_TOL:
                    best_c, best_gain = c, gain
            if randomized and improving:
                best_c = improving[int(rng.integers(0, len(improving)))]
            if neighbor_only and tot[c_old] > 0 and 0.0 > best_gain + GAIN_TOL:
                # escape to a fresh singleton community
                best_c, best_gain = next_label, 0.0
                next_label += 1
            if best_c != c_old:
                assignment[i] = best_c
                tot[best_c] = tot.get(best_c, 0.0) + s_i
                moved = True
                moved_any = True
            else:
                tot[c_old] += s_i
        if not moved:
            break
    return moved_any, next_label


def _aggregate(level: _Level, assignment):
    """Collapse communities into super-nodes; returns (new level, mapping)."""
    labels = normalize_labels(assignment)
    k = int(labels.max()) + 1
    loops = np.zeros(k)
    edge_w: dict[tuple[int, int], float] = {}
    for i in range(level.n):
        ci = int(labels[i])
        loops[ci] += level.loops[i]
        lo, hi = level.indptr[i], level.indptr[i + 1]
        for j, w in zip(level.indices[lo:hi], level.weights[lo:hi]):
            if j < i:
                continue
            cj = int(labels[j])
            if ci == cj:
                loops[ci] += float(w)
            else:
                key = (min(ci, cj), max(ci, cj))
                edge_w[key] = edge_w.get(key, 0.0) + float(w)
    pairs = sorted(edge_w)
    src = np.array([p[0] for p in pairs], dtype=np.int64)
    dst = np.array([p[1] for p in pairs], dtype=np.int64)
    wts = np.array([edge_w[p] for p in pairs])
    both_src = np.concatenate([src, dst])
    both_dst = np.concatenate([dst, src])
    both_w = np.concatenate([wts, wts])
    order = np.lexsort((both_dst, both_src))
    indptr = np.zeros(k + 1, dtype=np.int64)
    np.add.at(indptr, both_src + 1, 1)
    np.cumsum(indptr, out=indptr)
    return _Level(k, indptr, both_dst[order], both_w[order], loops), labels


def _check_unsigned(g: ExplanationGraph) -> None:
    if g.has_negative_weights():
        raise DataError("signed graph: project to |W| or use two-layer analysis")


def louvain(g: ExplanationGraph, resolution: float = 1.0, seed: int = 0) -> Partition:
    """Two-phase greedy modularity maximization.

    Node visit order is shuffled by the seed; aggregation repeats until
    no move gains more than the tolerance. Edge-free graphs come back as
    singletons.
    """
    if resolution <= 0:
        raise DataError("resolution must be > 0")
    _check_unsigned(g)
    if g.edge_count == 0:
        return Partition(np.arange(g.d))
    rng = np.random.default_rng(seed)
    level = _Level.from_graph(g)
    assignment = np.arange(g.d, dtype=np.int64)
    full_map = np.arange(g.d, dtype=np.int64)
    for _ in range(MAX_OUTER_ITERATIONS):
        local = np.arange(level.n, dtype=np.int64)
        moved, _ = _local_moves(level, local, resolution, rng, neighbor_only=False, next_label=level.n)
        level, labels = _aggregate(level, local)
        full_map = labels[full_map]
        if not moved or level.n == 1:
            break
    return Partition(normalize_labels(full_map))


def _split_disconnected(g: ExplanationGraph, assignment: np.ndarray) -> tuple[np.ndarray, bool]:
    """Break every module into its connected components (never lowers Q)."""
    out = assignment.copy()
    next_label = int(assignment.max()) + 1
    changed = False
    indptr, indices, _ = g.adjacency
    for c in np.unique(assignment):
        members = np.nonzero(assignment == c)[0]
        if members.size <= 1:
            continue
        member_set = set(int(x) for x in members)
        seen: set[int] = set()
        parts: list[list[int]] = []
        for start in members:
            start = int(start)
            if start in seen:
                continue
            stack, comp = [start], []
            seen.add(start)
            while stack:
                node = stack.pop()
                comp.append(node)
                for nbr in indices[indptr[node] : indptr[node + 1]]:
                    nbr = int(nbr)
                    if nbr in member_set and nbr not in seen:
                        seen.add(nbr)
                        stack.append(nbr)
            parts.append(sorted(comp))
        if len(parts) > 1:
            changed = True
            for part in parts[1:]:
                out[part] = next_label
                next_label += 1
    return out, changed


def leiden_refine(g: ExplanationGraph, partition: Partition, resolution: float = 1.0, seed: int = 0) -> Partition:
    """Refinement pass: split internally-disconnected modules, re-run local
    moves (restricted to neighbor communities), and merge along the
    refined aggregate graph. Output modularity never drops below the
    input's, and every output module induces a connected subgraph."""
    if resolution <= 0:
        raise DataError("resolution must be > 0")
    _check_unsigned(g)
    if partition.d != g.d:
        raise DataError(f"partition covers {partition.d} features, graph has {g.d}")
    if g.edge_count == 0:
        return Partition(np.arange(g.d))
    rng = np.random.default_rng(seed)
    assignment = partition.assignment.copy()
    level = _Level.from_graph(g)
    for _ in range(MAX_OUTER_ITERATIONS):
        changed = False
        assignment, split_changed = _split_disconnected(g, assignment)
        changed |= split_changed
        next_label = int(assignment.max()) + 1
        moved, next_label = _local_moves(
            level, assignment, resolution, rng, neighbor_only=True, next_label=next_label, randomized=True
        )
        changed |= moved
        # merge whole refined modules along aggregate edges
        agg_level, labels = _aggregate(level, assignment)
        agg_assignment = np.arange(agg_level.n, dtype=np.int64)
        agg_moved, _ = _local_moves(agg_level, agg_assignment, resolution, rng, neighbor_only=True, next_label=agg_level.n)
        changed |= agg_moved
        assignment = agg_assignment[labels]
        if not changed:
            break
    assignment, _ = _split_disconnected(g, assignment)
    return Partition(normalize_labels(assignment))


def _kl_polish(g: ExplanationGraph, partition: Partition, resolution: float) -> Partition:
    """Tabu pass for small graphs: repeatedly apply the single best node
    move (neighbor community or fresh singleton) even when it lowers Q,
    each node at most once per sweep, and keep the best state seen.
    Escapes compound-move traps that greedy passes cannot leave."""
    indptr, indices, weights = g.adjacency
    m2 = float(g.strengths.sum())
    assignment = normalize_labels(partition.assignment)
    best_assignment = assignment.copy()
    best_q = modularity(g, Partition(assignment), resolution)
    for _ in range(2):
        current = best_assignment.copy()
        tot: dict[int, float] = {}
        for i in range(g.d):
            c = int(current[i])
            tot[c] = tot.get(c, 0.0) + float(g.strengths[i])
        next_label = int(current.max()) + 1
        tabu: set[int] = set()
        improved = False
        for _step in range(g.d):
            best_move = None  # (delta, node, target)
            for i in range(g.d):
                if i in tabu:
                    continue
                c_old = int(current[i])
                s_i = float(g.strengths[i])
                links: dict[int, float] = {}
                for j, w in zip(indices[indptr[i] : indptr[i + 1]], weights[indptr[i] : indptr[i + 1]]):
                    cj = int(current[j])
                    links[cj] = links.get(cj, 0.0) + float(w)
                base = links.get(c_old, 0.0) - resolution * s_i * (tot[c_old] - s_i) / m2
                candidates = sorted(links)
                if tot[c_old] - s_i > 0:
                    candidates.append(next_label)
                for c in candidates:
                    if c == c_old:
                        continue
                    gain = links.get(c, 0.0) - resolution * s_i * tot.get(c, 0.0) / m2 - base
                    if best_move is None or gain > best_move[0] + GAIN_TOL:
                        best_move = (gain, i, c)
            if best_move is None:
                break
            _, node, target = best_move
            c_old = int(current[node])
            s_i = float(g.strengths[node])
            tot[c_old] -= s_i
            tot[target] = tot.get(target, 0.0) + s_i
            current[node] = target
            if target == next_label:
                next_label += 1
            tabu.add(node)
            q = modularity(g, Partition(normalize_labels(current)), resolution)
            if q > best_q + GAIN_TOL:
                best_q = q
                best_assignment = normalize_labels(current)
                improved = True
        if not improved:
            break
    return Partition(normalize_labels(best_assignment))


KL_POLISH_MAX_NODES = 64


def detect_modules(g: ExplanationGraph, resolution: float = 1.0, seed: int = 0, restarts: int = 5) -> Partition:
    """Best-of-restarts detection around louvain + refinement.

    Odd restarts rerun the greedy pass under a derived seed; even
    restarts kick the best partition so far (random reassignment of a
    third of the nodes) and refine from there, escaping local optima the
    greedy basin cannot leave. Small graphs additionally get a tabu
    polish. Deterministic given the seed; keeps the highest-modularity
    partition seen.
    """
    if restarts < 1:
        raise DataError("restarts must be >= 1")
    if g.edge_count == 0:
        return Partition(np.arange(g.d))
    best = leiden_refine(g, louvain(g, resolution, seed), resolution, seed)
    best_q = modularity(g, best, resolution)
    for r in range(1, restarts):
        run_seed = seed ^ r
        if r % 2 == 1:
            cand = leiden_refine(g, louvain(g, resolution, run_seed), resolution, run_seed)
        else:
            rng = np.random.default_rng(run_seed)
            assignment = best.assignment.copy()
            for node in rng.choice(g.d, max(1, g.d // 3), replace=False):
                assignment[node] = rng.integers(0, assignment.max() + 2)
            start = Partition(normalize_labels(assignment))
            cand = leiden_refine(g, start, resolution, run_seed)
        q = modularity(g, cand, resolution)
        if q > best_q + GAIN_TOL:
            best, best_q = cand, q
    if g.d <= KL_POLISH_MAX_NODES:
        polished = _kl_polish(g, best, resolution)
        polished = leiden_refine(g, polished, resolution, seed)
        if modularity(g, polished, resolution) > best_q + GAIN_TOL:
            best = polished
    return best


def modularity(g: ExplanationGraph, partition: Partition, resolution: float = 1.0) -> float:
    """Q(gamma) = (1/2m) sum_ij (W_ij - gamma d_i d_j / 2m) [c_i = c_j]."""
    _check_unsigned(g)
    if partition.d != g.d:
        raise DataError(f"partition covers {partition.d} features, graph has {g.d}")
    if g.edge_count == 0:
        raise DataError("modularity undefined on a graph with zero total weight")
    assignment = partition.assignment
    m2 = float(g.strengths.sum())
    k = partition.K
    tot = np.zeros(k)
    np.add.at(tot, assignment, g.strengths)
    inside = np.zeros(k)
    same = assignment[g.src] == assignment[g.dst]
    np.add.at(inside, assignment[g.src[same]], 2.0 * g.weight[same])
    return float(np.sum(inside / m2 - resolution * (tot / m2) ** 2))


def conductance(g: ExplanationGraph, s) -> float:
    """cut(S, S-bar) over min(vol(S), vol(S-bar)); 0 when a side has no volume."""
    members = np.zeros(g.d, dtype=bool)
    idx = np.asarray(sorted(int(i) for i in s), dtype=np.int64)
    if idx.size == 0 or idx.size >= g.d:
        raise DataError("S must be a non-empty proper subset of the nodes")
    members[idx] = True
    in_s = members[g.src]
    in_t = members[g.dst]
    cut = float(np.abs(g.weight[in_s != in_t]).sum())
    vol_s = float(g.strengths[members].sum())
    vol_rest = float(g.strengths[~members].sum())
    if vol_s == 0 and vol_rest == 0:
        raise DataError("conductance undefined: both sides have zero volume")
    smallest = min(vol_s, vol_rest)
    if smallest == 0:
        return 0.0
    return cut / smallest


def mean_conductance(g: ExplanationGraph, partition: Partition) -> float:
    """Average conductance over modules (whole-graph module counts as 0)."""
    if partition.K == 1:
        return 0.0
    values = [conductance(g, np.nonzero(partition.assignment == k)[0]) for k in range(partition.K)]
    return float(np.mean(values))


def consensus_partition(c: ConsensusMatrix, threshold: float = 0.5, seed: int = 0) -> Partition:
    """Cluster the co-assignment graph: edges where C_ij >= threshold."""
    if not (0.0 < threshold < 1.0):
        raise DataError("threshold must be in (0, 1)")
    d = c.d
    iu, ju = np.nonzero(np.triu(c.values >= threshold, k=1))
    weight = c.values[iu, ju]
    keep = weight > 0
    g = ExplanationGraph(d, iu[keep], ju[keep], weight[keep], meta={"source": "consensus"})
    if g.edge_count == 0:
        return Partition(np.arange(d))
    return leiden_refine(g, louvain(g, 1.0, seed), 1.0, seed)
