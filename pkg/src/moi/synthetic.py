"""Synthetic families with planted feature modules, plus exact
attribution routines for the built-in models.

Families: additive block signals, logical XOR of two block AND gates,
additive plus sparse cross-block product interactions, and replicated
environments with mean shifts. Every generator is deterministic given
its seed, and the planted partition ships with the data so recovery is
checkable end-to-end.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .communities import Partition
from .errors import DataError
from .models import RidgeModel
from .store import AttributionMatrix

FAMILIES = ("additive", "logical_xor", "cross_module", "environments")
MAX_EXACT_FEATURES = 15


@dataclass(frozen=True)
class SyntheticSpec:
    family: str = "additive"
    sizes: tuple[int, ...] = (8, 8, 8, 8)
    rho: float = 0.0
    snr: float = 10.0
    n: int = 1000
    seed: int = 0
    interactions: tuple[tuple[int, int], ...] = ()
    interaction_scale: float = 1.0
    environments: int = 2
    shift: float = 0.0
    shift_module: int = 0
    group_shift: float = 0.0
    group_module: int = 0
    weight_scale: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise DataError(f"unknown family {self.family!r}")
        if not self.sizes or any(s < 1 for s in self.sizes):
            raise DataError("sizes must be positive")
        if not (0.0 <= self.rho <= 0.9):
            raise DataError("rho must be in [0, 0.9]")
        if not self.snr > 0:
            raise DataError("snr must be > 0")
        if self.n < 1:
            raise DataError("n must be >= 1")
        if self.weight_scale is not None and len(self.weight_scale) != len(self.sizes):
            raise DataError("weight_scale must have one entry per module")

    @property
    def d(self) -> int:
        return int(sum(self.sizes))


@dataclass(frozen=True)
class SyntheticDataset:
    x: np.ndarray
    y: np.ndarray
    truth: Partition
    feature_names: tuple[str, ...]
    truth_interactions: tuple[tuple[int, int], ...] = ()
    group: tuple[str, ...] | None = None
    environment: int | None = None


def _truth_partition(sizes) -> Partition:
    assignment = np.concatenate([np.full(s, k, dtype=np.int64) for k, s in enumerate(sizes)])
    return Partition(assignment)


def _block_gaussian(rng: np.random.Generator, n: int, sizes, rho: float) -> np.ndarray:
    """Blocks of equicorrelated Gaussians: cov = (1 - rho) I + rho 11^T."""
    cols = []
    for s in sizes:
        z = rng.standard_normal((n, s))
        if rho > 0 and s > 1:
            cov = (1.0 - rho) * np.eye(s) + rho * np.ones((s, s))
            cols.append(z @ np.linalg.cholesky(cov).T)
        else:
            cols.append(z)
    return np.concatenate(cols, axis=1)


def _block_weights(rng: np.random.Generator, sizes, weight_scale, aligned_block: int | None = None) -> np.ndarray:
    """Unit-norm random weights per block, optionally rescaled per module.

    The aligned block gets all-positive weights so a mean shift on its
    features translates into a systematic prediction shift (random signs
    would cancel it on some seeds).
    """
    parts = []
    for k, s in enumerate(sizes):
        w = rng.standard_normal(s)
        norm = np.linalg.norm(w)
        w = w / norm if norm > 0 else w
        if k == aligned_block:
            w = np.abs(w)
        if weight_scale is not None:
            w = w * weight_scale[k]
        parts.append(w)
    return np.concatenate(parts)


def _noise_for(rng: np.random.Generator, signal: np.ndarray, snr: float) -> np.ndarray:
    if not math.isfinite(snr):
        return np.zeros_like(signal)
    var_signal = float(signal.var())
    if var_signal == 0:
        return np.zeros_like(signal)
    return rng.standard_normal(signal.shape) * math.sqrt(var_signal / snr)


def _apply_group_shift(spec: SyntheticSpec, rng: np.random.Generator, x: np.ndarray):
    """Balanced binary groups; group 'b' gets a mean shift on one module."""
    if spec.group_shift == 0:
        return x, None
    n = x.shape[0]
    group = np.array(["a", "b"])[rng.integers(0, 2, n)]
    members = np.nonzero(_truth_partition(spec.sizes).assignment == spec.group_module)[0]
    x = x.copy()
    x[np.ix_(group == "b", members)] += spec.group_shift
    return x, tuple(group)


def gen_additive(spec: SyntheticSpec) -> SyntheticDataset:
    """y = sum_k g_k(X_block_k) + noise with linear unit-norm g_k."""
    rng = np.random.default_rng(spec.seed)
    x = _block_gaussian(rng, spec.n, spec.sizes, spec.rho)
    x, group = _apply_group_shift(spec, rng, x)
    aligned = spec.group_module if spec.group_shift else None
    weights = _block_weights(rng, spec.sizes, spec.weight_scale, aligned_block=aligned)
    signal = x @ weights
    y = signal + _noise_for(rng, signal, spec.snr)
    return SyntheticDataset(
        x=x,
        y=y,
        truth=_truth_partition(spec.sizes),
        feature_names=tuple(f"x{i}" for i in range(spec.d)),
        group=group,
    )


def _and_indicator(x: np.ndarray, members: np.ndarray) -> np.ndarray:
    return np.all(x[:, members] > 0, axis=1).astype(np.float64)


def gen_xor(spec: SyntheticSpec) -> SyntheticDataset:
    """y = 1{AND(block 1) XOR AND(block 2)} + noise.

    Blocks beyond the first two are inert noise modules.
    """
    if len(spec.sizes) < 2:
        raise DataError("logical_xor needs two planted blocks")
    rng = np.random.default_rng(spec.seed)
    x = _block_gaussian(rng, spec.n, spec.sizes, spec.rho)
    x, group = _apply_group_shift(spec, rng, x)
    truth = _truth_partition(spec.sizes)
    m1 = np.nonzero(truth.assignment == 0)[0]
    m2 = np.nonzero(truth.assignment == 1)[0]
    f1 = _and_indicator(x, m1)
    f2 = _and_indicator(x, m2)
    signal = np.logical_xor(f1 > 0.5, f2 > 0.5).astype(np.float64)
    y = signal + _noise_for(rng, signal, spec.snr)
    return SyntheticDataset(
        x=x,
        y=y,
        truth=truth,
        feature_names=tuple(f"x{i}" for i in range(spec.d)),
        truth_interactions=((0, 1),),
        group=group,
    )


def gen_cross_module(spec: SyntheticSpec) -> SyntheticDataset:
    """Additive block signals plus sparse products of block means."""
    k = len(spec.sizes)
    for a, b in spec.interactions:
        if not (0 <= a < k and 0 <= b < k) or a == b:
            raise DataError(f"bad interaction pair ({a}, {b})")
    rng = np.random.default_rng(spec.seed)
    x = _block_gaussian(rng, spec.n, spec.sizes, spec.rho)
    x, group = _apply_group_shift(spec, rng, x)
    truth = _truth_partition(spec.sizes)
    aligned = spec.group_module if spec.group_shift else None
    weights = _block_weights(rng, spec.sizes, spec.weight_scale, aligned_block=aligned)
    signal = x @ weights
    for a, b in spec.interactions:
        mean_a = x[:, truth.assignment == a].mean(axis=1)
        mean_b = x[:, truth.assignment == b].mean(axis=1)
        signal = signal + spec.interaction_scale * mean_a * mean_b
    y = signal + _noise_for(rng, signal, spec.snr)
    return SyntheticDataset(
        x=x,
        y=y,
        truth=truth,
        feature_names=tuple(f"x{i}" for i in range(spec.d)),
        truth_interactions=tuple((int(a), int(b)) for a, b in spec.interactions),
        group=group,
    )


def gen_environments(spec: SyntheticSpec, environments: int | None = None, shift: float | None = None) -> list[SyntheticDataset]:
    """Replicate the additive generator across environments with a mean
    shift of shift * e on the designated module (e = 0, 1, ...)."""
    e_count = environments if environments is not None else spec.environments
    magnitude = shift if shift is not None else spec.shift
    if e_count < 2:
        raise DataError("need at least 2 environments")
    truth = _truth_partition(spec.sizes)
    members = np.nonzero(truth.assignment == spec.shift_module)[0]
    children = np.random.SeedSequence(spec.seed).spawn(e_count + 1)
    # one weight vector shared by every environment
    weights = _block_weights(np.random.default_rng(children[0]), spec.sizes, spec.weight_scale)
    out = []
    for e in range(e_count):
        rng = np.random.default_rng(children[e + 1])
        x = _block_gaussian(rng, spec.n, spec.sizes, spec.rho)
        x[:, members] += magnitude * e
        signal = x @ weights
        y = signal + _noise_for(rng, signal, spec.snr)
        out.append(
            SyntheticDataset(
                x=x,
                y=y,
                truth=truth,
                feature_names=tuple(f"x{i}" for i in range(spec.d)),
                environment=e,
            )
        )
    return out


def generate(spec: SyntheticSpec):
    if spec.family == "additive":
        return gen_additive(spec)
    if spec.family == "logical_xor":
        return gen_xor(spec)
    if spec.family == "cross_module":
        return gen_cross_module(spec)
    return gen_environments(spec)


def linear_shap(model: RidgeModel, x, background) -> AttributionMatrix:
    """Exact attributions for a linear model with an independent-feature
    value function: phi_i = w_i * (x_i - mean background_i)."""
    x = np.asarray(x, dtype=np.float64)
    background = np.asarray(background, dtype=np.float64)
    if background.ndim != 2 or background.shape[1] != x.shape[1]:
        raise DataError("background must share the data's columns")
    mu = background.mean(axis=0)
    values = (x - mu) * model.weights
    return AttributionMatrix(values, tuple(f"x{i}" for i in range(x.shape[1])))


def exhaustive_shap(predict_fn, x, background, max_features: int = MAX_EXACT_FEATURES) -> np.ndarray:
    """Exact Shapley values for one instance by coalition enumeration.

    The value of a coalition S is the background mean of the prediction
    with S's columns fixed at x. Enumeration order is fixed so the
    weighted summation is deterministic.
    """
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    background = np.asarray(background, dtype=np.float64)
    d = x.shape[0]
    if d > max_features:
        raise DataError(f"exact enumeration limited to {max_features} features, got {d}")
    if background.ndim != 2 or background.shape[1] != d or background.shape[0] == 0:
        raise DataError("background must be a non-empty matrix matching x")

    fn = getattr(predict_fn, "predict", predict_fn)
    values = np.empty(1 << d)
    for mask in range(1 << d):
        rows = background.copy()
        for i in range(d):
            if mask >> i & 1:
                rows[:, i] = x[i]
        values[mask] = float(np.mean(np.asarray(fn(rows), dtype=np.float64)))

    fact = [math.factorial(i) for i in range(d + 1)]
    phi = np.zeros(d)
    denom = fact[d]
    for mask in range(1 << d):
        size = int(mask).bit_count()
        weight = fact[size] * fact[d - size - 1] / denom
        for i in range(d):
            if not (mask >> i & 1):
                phi[i] += weight * (values[mask | (1 << i)] - values[mask])
    return phi


def exhaustive_shap_matrix(predict_fn, x, background) -> AttributionMatrix:
    """Exact Shapley rows for every instance (small d only)."""
    x = np.asarray(x, dtype=np.float64)
    rows = np.stack([exhaustive_shap(predict_fn, xi, background) for xi in x])
    return AttributionMatrix(rows, tuple(f"x{i}" for i in range(x.shape[1])))
