"""Feature-feature co-influence matrices.

Every edge rule maps a working attribution matrix to a dense symmetric
d x d affinity with a zero diagonal (self-affinity is excluded by
convention; self-loops carry no information for community detection).
Shrinkage and a permutation/FDR significance filter clean up noisy
estimates before sparsification.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .store import SampleWeights, WorkingMatrix

SIGNED_RULES = frozenset({"pearson", "spearman", "pcorr"})
UNSIGNED_RULES = frozenset({"cosine_mag", "coexceed_freq", "jaccard", "mi_binned"})
RULES = SIGNED_RULES | UNSIGNED_RULES

SYMMETRY_TOL = 1e-12
DEFAULT_EXCEEDANCE_Q = 0.9
DEFAULT_MI_BINS = 16


@dataclass(frozen=True)
class AffinityMatrix:
    """Dense symmetric co-influence matrix with zero diagonal."""

    values: np.ndarray
    rule: str
    signed: bool

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise DataError(f"affinity must be square, got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise DataError("affinity contains non-finite entries")
        if np.max(np.abs(values - values.T), initial=0.0) > SYMMETRY_TOL:
            raise DataError("affinity is not symmetric")
        if np.max(np.abs(np.diagonal(values)), initial=0.0) > 0:
            raise DataError("affinity diagonal must be zero")
        if not self.signed and values.size and values.min() < 0:
            raise DataError("unsigned affinity has negative entries")
        values = values.copy()
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def d(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class ExceedanceIndicators:
    """Per-instance indicators of attributions above the row quantile."""

    z: np.ndarray
    q: float

    def __post_init__(self):
        z = np.asarray(self.z)
        if not np.isin(z, (0, 1)).all():
            raise DataError("exceedance indicators must be binary")
        if not (0.0 < self.q < 1.0):
            raise DataError("quantile level must be in (0, 1)")
        z = z.astype(np.int8)
        z.setflags(write=False)
        object.__setattr__(self, "z", z)


@dataclass(frozen=True)
class SignedLayers:
    positive: AffinityMatrix
    negative: AffinityMatrix


def _working_values(a) -> np.ndarray:
    if isinstance(a, WorkingMatrix):
        return a.values
    return np.asarray(a, dtype=np.float64)


def _zero_diag(values: np.ndarray) -> np.ndarray:
    np.fill_diagonal(values, 0.0)
    return values


def cosine_magnitude(a) -> AffinityMatrix:
    """Cosine of absolute attribution columns; co-activation regardless of sign."""
    x = np.abs(_working_values(a))
    if x.shape[1] < 2:
        raise DataError("need at least 2 columns")
    norms = np.linalg.norm(x, axis=0)
    w = x.T @ x
    denom = np.outer(norms, norms)
    with np.errstate(invalid="ignore", divide="ignore"):
        w = np.where(denom > 0, w / np.where(denom > 0, denom, 1.0), 0.0)
    np.clip(w, 0.0, 1.0, out=w)
    w = (w + w.T) / 2.0
    return AffinityMatrix(_zero_diag(w), rule="cosine_mag", signed=False)


def _rank_columns(x: np.ndarray) -> np.ndarray:
    """Average ranks per column (ties share the mean rank)."""
    n, d = x.shape
    out = np.empty_like(x)
    for j in range(d):
        order = np.argsort(x[:, j], kind="stable")
        ranks = np.empty(n, dtype=np.float64)
        ranks[order] = np.arange(1, n + 1, dtype=np.float64)
        sorted_vals = x[order, j]
        # collapse tied runs onto their mean rank
        start = 0
        for stop in range(1, n + 1):
            if stop == n or sorted_vals[stop] != sorted_vals[start]:
                if stop - start > 1:
                    ranks[order[start:stop]] = (start + 1 + stop) / 2.0
                start = stop
        out[:, j] = ranks
    return out


def corr_signed(a, method: str = "pearson") -> AffinityMatrix:
    """Column correlation matrix; Spearman is Pearson on average-tie ranks.

    Constant columns get zero affinity with a warning rather than NaN.
    """
    x = _working_values(a)
    if x.shape[0] < 3:
        raise DataError("need at least 3 rows for a correlation estimate")
    if method == "spearman":
        x = _rank_columns(x)
    elif method != "pearson":
        raise DataError(f"unknown correlation method {method!r}")
    centered = x - x.mean(axis=0)
    scale = np.sqrt((centered**2).sum(axis=0))
    # exact-constant columns plus columns whose spread is rounding noise
    col_norm = np.sqrt((x**2).sum(axis=0))
    constant = (x.max(axis=0) == x.min(axis=0)) | (scale <= 1e-12 * col_norm)
    if constant.any():
        warnings.warn(f"{int(constant.sum())} constant column(s): correlations set to 0", stacklevel=2)
    safe = np.where(constant, 1.0, scale)
    z = centered / safe
    w = z.T @ z
    w[constant, :] = 0.0
    w[:, constant] = 0.0
    np.clip(w, -1.0, 1.0, out=w)
    w = (w + w.T) / 2.0
    return AffinityMatrix(_zero_diag(w), rule=method, signed=True)


def exceedance(a, q: float = DEFAULT_EXCEEDANCE_Q) -> ExceedanceIndicators:
    """Indicators |A_si| > (q-quantile of row s), linear-interpolation quantile."""
    if not (0.0 < q < 1.0):
        raise DataError("quantile level must be in (0, 1)")
    x = np.abs(_working_values(a))
    tau = np.quantile(x, q, axis=1, keepdims=True)
    return ExceedanceIndicators((x > tau).astype(np.int8), q)


def coexceedance(z: ExceedanceIndicators, weights: SampleWeights | None = None) -> AffinityMatrix:
    """Weighted fraction of instances where both features exceed."""
    zb = z.z.astype(np.float64)
    n = zb.shape[0]
    w = (weights or SampleWeights.uniform(n)).w
    if w.shape[0] != n:
        raise DataError(f"weights: expected length {n}, got {w.shape[0]}")
    total = w.sum()
    counts = (zb * w[:, None]).T @ zb
    vals = counts / total
    vals = (vals + vals.T) / 2.0
    return AffinityMatrix(_zero_diag(vals), rule="coexceed_freq", signed=False)


def jaccard(z: ExceedanceIndicators, weights: SampleWeights | None = None) -> AffinityMatrix:
    """Weighted |i and j| / |i or j| over exceedance sets; 0/0 defined as 0."""
    zb = z.z.astype(np.float64)
    n = zb.shape[0]
    w = (weights or SampleWeights.uniform(n)).w
    if w.shape[0] != n:
        raise DataError(f"weights: expected length {n}, got {w.shape[0]}")
    inter = (zb * w[:, None]).T @ zb
    col = (zb * w[:, None]).sum(axis=0)
    union = col[:, None] + col[None, :] - inter
    with np.errstate(invalid="ignore", divide="ignore"):
        vals = np.where(union > 0, inter / np.where(union > 0, union, 1.0), 0.0)
    vals = (vals + vals.T) / 2.0
    return AffinityMatrix(_zero_diag(vals), rule="jaccard", signed=False)


def _equal_frequency_bins(col: np.ndarray, bins: int) -> np.ndarray:
    """Rank-based equal-frequency bin ids in [0, bins)."""
    n = col.shape[0]
    order = np.argsort(col, kind="stable")
    ids = np.empty(n, dtype=np.int64)
    ids[order] = (np.arange(n, dtype=np.int64) * bins) // n
    return ids


def mutual_info_binned(a, bins: int = DEFAULT_MI_BINS) -> AffinityMatrix:
    """Plugin mutual information (nats) on equal-frequency bins of |A| columns."""
    if bins < 2:
        raise DataError("bins must be >= 2")
    x = np.abs(_working_values(a))
    n, d = x.shape
    if n < bins:
        raise DataError(f"need n >= bins, got n={n}, bins={bins}")
    binned = np.stack([_equal_frequency_bins(x[:, j], bins) for j in range(d)], axis=1)
    marg = np.stack([np.bincount(binned[:, j], minlength=bins) for j in range(d)], axis=0) / n
    vals = np.zeros((d, d))
    for i in range(d):
        for j in range(i + 1, d):
            joint = np.bincount(binned[:, i] * bins + binned[:, j], minlength=bins * bins).reshape(bins, bins) / n
            prod = np.outer(marg[i], marg[j])
            mask = joint > 0
            mi = float(np.sum(joint[mask] * np.log(joint[mask] / prod[mask])))
            vals[i, j] = vals[j, i] = max(mi, 0.0)
    return AffinityMatrix(vals, rule="mi_binned", signed=False)


def partial_corr(a, i: int, j: int, control=()) -> float:
    """Correlation of columns i and j after regressing out the control columns.

    Singular control designs are handled by least squares on the
    pseudo-inverse; a zero-variance residual yields 0.
    """
    x = _working_values(a)
    control = sorted(set(int(c) for c in control))
    if i in control or j in control:
        raise DataError("control set must exclude i and j")
    if len(control) >= x.shape[0] - 2:
        raise DataError("control set too large for the sample size")
    design = np.column_stack([np.ones(x.shape[0])] + [x[:, c] for c in control])
    coef, *_ = np.linalg.lstsq(design, x[:, [i, j]], rcond=None)
    resid = x[:, [i, j]] - design @ coef
    ri, rj = resid[:, 0], resid[:, 1]
    si, sj = np.linalg.norm(ri - ri.mean()), np.linalg.norm(rj - rj.mean())
    # residuals at rounding-noise scale count as zero variance
    floor_i = 1e-8 * max(np.linalg.norm(x[:, i] - x[:, i].mean()), 1e-300)
    floor_j = 1e-8 * max(np.linalg.norm(x[:, j] - x[:, j].mean()), 1e-300)
    if si <= floor_i or sj <= floor_j:
        return 0.0
    r = float(np.dot(ri - ri.mean(), rj - rj.mean()) / (si * sj))
    return float(np.clip(r, -1.0, 1.0))


def pcorr_matrix(a, control=()) -> AffinityMatrix:
    """Pairwise partial correlations given one fixed small control set.

    For pairs intersecting the control set, the offending indices are
    dropped from the control for that pair.
    """
    x = _working_values(a)
    d = x.shape[1]
    control = sorted(set(int(c) for c in control))
    vals = np.zeros((d, d))
    for i in range(d):
        for j in range(i + 1, d):
            ctl = [c for c in control if c not in (i, j)]
            vals[i, j] = vals[j, i] = partial_corr(x, i, j, ctl)
    return AffinityMatrix(vals, rule="pcorr", signed=True)


def tfidf_rescale(a: WorkingMatrix, z: ExceedanceIndicators) -> WorkingMatrix:
    """Damp ubiquitous features: A_si <- A_si * log(n / exceedance count).

    Features that never exceed keep factor log(n / 1) with a warning.
    """
    x = np.array(_working_values(a))
    n = x.shape[0]
    counts = z.z.sum(axis=0).astype(np.float64)
    never = counts == 0
    if never.any():
        warnings.warn(f"{int(never.sum())} feature(s) never exceed; using factor log(n)", stacklevel=2)
        counts = np.where(never, 1.0, counts)
    x *= np.log(n / counts)
    if isinstance(a, WorkingMatrix):
        if a.view == "magnitude":
            x = np.abs(x)
        return WorkingMatrix(x, view=a.view, column_scaling=a.column_scaling, row_scaling=a.row_scaling, epsilon=a.epsilon)
    return WorkingMatrix(x)


def shrink(w: AffinityMatrix, alpha: float = 1.0, floor: float = 0.0) -> AffinityMatrix:
    """Linear shrinkage toward the mean off-diagonal entry, then floor at zero.

    alpha=1 is the identity; alpha=0 replaces every off-diagonal entry
    by the grand mean.
    """
    if not (0.0 <= alpha <= 1.0):
        raise DataError("alpha must be in [0, 1]")
    if floor < 0:
        raise DataError("floor must be >= 0")
    vals = np.array(w.values)
    d = vals.shape[0]
    off = ~np.eye(d, dtype=bool)
    mean = float(vals[off].mean()) if d > 1 else 0.0
    vals[off] = alpha * vals[off] + (1.0 - alpha) * mean
    vals[np.abs(vals) < floor] = 0.0
    np.fill_diagonal(vals, 0.0)
    return AffinityMatrix(vals, rule=w.rule, signed=w.signed)


def pair_index(i: int, j: int, d: int) -> int:
    """Condensed index of the unordered pair (i, j), i < j."""
    if i > j:
        i, j = j, i
    return i * d - (i * (i + 1)) // 2 + (j - i - 1)


def _mi_from_ids(x: np.ndarray, y: np.ndarray) -> float:
    bins = int(max(x.max(), y.max())) + 1
    n = x.shape[0]
    joint = np.bincount(x.astype(np.int64) * bins + y.astype(np.int64), minlength=bins * bins).reshape(bins, bins) / n
    pi = joint.sum(axis=1)
    pj = joint.sum(axis=0)
    mask = joint > 0
    return max(float(np.sum(joint[mask] * np.log(joint[mask] / np.outer(pi, pj)[mask]))), 0.0)


def _pair_statistic(rule: str, x: np.ndarray, y: np.ndarray) -> float:
    """|affinity| between two prepared column vectors (see _prepare_columns)."""
    if rule in ("pearson", "spearman", "pcorr", "cosine_mag"):
        return abs(float(np.dot(x, y)))
    if rule == "coexceed_freq":
        return float(np.sum(x * y)) / x.shape[0]
    if rule == "jaccard":
        inter = float(np.sum(x * y))
        union = float(np.sum(np.maximum(x, y)))
        return inter / union if union > 0 else 0.0
    if rule == "mi_binned":
        return _mi_from_ids(x, y)
    raise DataError(f"significance filter does not support rule {rule!r}")


def _prepare_columns(rule: str, a: np.ndarray) -> np.ndarray:
    """Per-column transform so the pair statistic is a simple reduction."""
    if rule in ("pearson", "pcorr"):
        c = a - a.mean(axis=0)
        s = np.sqrt((c**2).sum(axis=0))
        return c / np.where(s > 0, s, 1.0)
    if rule == "spearman":
        r = _rank_columns(a)
        c = r - r.mean(axis=0)
        s = np.sqrt((c**2).sum(axis=0))
        return c / np.where(s > 0, s, 1.0)
    if rule == "cosine_mag":
        x = np.abs(a)
        s = np.linalg.norm(x, axis=0)
        return x / np.where(s > 0, s, 1.0)
    if rule in ("coexceed_freq", "jaccard"):
        return exceedance(a).z.astype(np.float64)
    if rule == "mi_binned":
        return np.stack(
            [_equal_frequency_bins(np.abs(a[:, j]), DEFAULT_MI_BINS) for j in range(a.shape[1])], axis=1
        ).astype(np.float64)
    raise DataError(f"significance filter does not support rule {rule!r}")


def significance_filter(
    w: AffinityMatrix,
    a,
    permutations: int = 199,
    fdr_q: float = 0.05,
    seed: int = 0,
) -> AffinityMatrix:
    """Zero the entries whose permutation p-value fails Benjamini-Hochberg.

    Each pair gets its own derived RNG (seed XOR condensed pair index)
    that draws one uniform base permutation of the second column plus
    P uniform cyclic offsets of it; each draw therefore permutes the
    rows of one column, and the cyclic-group structure lets all P pair
    statistics come out of one FFT circular correlation instead of P
    explicit shuffles. The +1-corrected p-values feed one
    Benjamini-Hochberg pass across all d(d-1)/2 pairs. Parallel
    evaluation order cannot change the result.
    """
    if permutations < 19:
        raise DataError("permutations must be >= 19")
    if not (0.0 < fdr_q < 1.0):
        raise DataError("fdr_q must be in (0, 1)")
    x = _working_values(a)
    d = w.d
    if x.shape[1] != d:
        raise DataError(f"working matrix has {x.shape[1]} columns, affinity has {d}")
    cols = _prepare_columns(w.rule, x)
    n = cols.shape[0]
    m = d * (d - 1) // 2
    pvals = np.empty(m)
    dot_rule = w.rule in ("pearson", "spearman", "pcorr", "cosine_mag")
    binary_rule = w.rule in ("coexceed_freq", "jaccard")
    spectra = np.fft.rfft(cols, axis=0) if (dot_rule or binary_rule) else None
    for i in range(d):
        xi = cols[:, i]
        for j in range(i + 1, d):
            idx = pair_index(i, j, d)
            rng = np.random.default_rng(seed ^ idx)
            yj = cols[:, j]
            observed = _pair_statistic(w.rule, xi, yj)
            base = rng.permutation(n)
            offsets = rng.integers(0, n, size=permutations)
            if dot_rule or binary_rule:
                # dots against every cyclic shift of the permuted column
                shifted_spectrum = np.fft.rfft(yj[base])
                dots = np.fft.irfft(spectra[:, i] * np.conj(shifted_spectrum), n)[offsets]
                if dot_rule:
                    stats = np.abs(dots)
                elif w.rule == "coexceed_freq":
                    stats = dots / n
                else:
                    union = xi.sum() + yj.sum() - dots
                    stats = np.where(union > 0, dots / np.where(union > 0, union, 1.0), 0.0)
            else:
                permuted = yj[base]
                stats = np.array([_mi_from_ids(xi, np.roll(permuted, int(k))) for k in offsets])
            pvals[idx] = (1.0 + int(np.sum(stats >= observed))) / (permutations + 1.0)
    keep = benjamini_hochberg(pvals, fdr_q)
    vals = np.zeros_like(w.values)
    for i in range(d):
        for j in range(i + 1, d):
            if keep[pair_index(i, j, d)]:
                vals[i, j] = vals[j, i] = w.values[i, j]
    return AffinityMatrix(vals, rule=w.rule, signed=w.signed)


def benjamini_hochberg(pvals: np.ndarray, q: float) -> np.ndarray:
    """Boolean rejection mask at FDR level q."""
    pvals = np.asarray(pvals, dtype=np.float64)
    m = pvals.size
    if m == 0:
        return np.zeros(0, dtype=bool)
    order = np.argsort(pvals, kind="stable")
    ranked = pvals[order]
    thresholds = q * np.arange(1, m + 1) / m
    passing = np.nonzero(ranked <= thresholds)[0]
    keep = np.zeros(m, dtype=bool)
    if passing.size:
        keep[order[: passing[-1] + 1]] = True
    return keep


def split_signed(w: AffinityMatrix) -> SignedLayers:
    """Positive/negative layer decomposition: W = W+ - W-, both nonnegative."""
    if not w.signed:
        raise DataError("split_signed expects a signed affinity")
    pos = np.maximum(w.values, 0.0)
    neg = np.maximum(-w.values, 0.0)
    return SignedLayers(
        positive=AffinityMatrix(pos, rule=w.rule, signed=False),
        negative=AffinityMatrix(neg, rule=w.rule, signed=False),
    )
