"""Partition stability: repeated detection under data perturbations.

The stability index is the mean IoU of modules Hungarian-matched
between the unperturbed reference partition and each perturbed rerun;
the consensus matrix counts how often feature pairs co-cluster across
the reruns. Hyperparameter selection maximizes the index subject to a
modularity floor.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .communities import ConsensusMatrix, Partition, modularity
from .config import PipelineConfig
from .errors import DataError
from .metrics import match_modules
from .pipeline import (
    filtered_affinity,
    graph_from_config,
    partition_from_config,
    run_pipeline,
    unsigned_projection,
    working_from_config,
)
from .store import AttributionMatrix, WorkingMatrix

PERTURBATION_KINDS = ("identity", "bootstrap", "fresh_noise")
DEFAULT_REPETITIONS = 200


@dataclass(frozen=True)
class PerturbationScheme:
    """identity: rerun unchanged; bootstrap: resample rows with
    replacement (optionally subsampled to a rate, optionally with
    Gaussian noise added to the working matrix); fresh_noise: replace
    the working matrix with new i.i.d. noise each run."""

    kind: str = "bootstrap"
    noise_sigma: float = 0.0
    subsample: float | None = None

    def __post_init__(self):
        if self.kind not in PERTURBATION_KINDS:
            raise DataError(f"unknown perturbation kind {self.kind!r}")
        if self.noise_sigma < 0:
            raise DataError("noise_sigma must be >= 0")
        if self.subsample is not None and not (0.0 < self.subsample <= 1.0):
            raise DataError("subsample rate must be in (0, 1]")


@dataclass(frozen=True)
class MsiResult:
    msi: float
    ci_low: float
    ci_high: float
    per_run_iou: np.ndarray
    consensus: ConsensusMatrix
    reference: Partition


def _perturbed_partition(cfg: PipelineConfig, phi: AttributionMatrix, scheme: PerturbationScheme, run_seed: int) -> Partition:
    rng = np.random.default_rng(run_seed)
    values = phi.values
    if scheme.kind == "bootstrap":
        n = values.shape[0]
        size = int(round(scheme.subsample * n)) if scheme.subsample else n
        if size < 1:
            raise DataError("subsample rate leaves no rows")
        values = values[rng.integers(0, n, size)]
    phi_t = AttributionMatrix(values, phi.feature_names)
    working = working_from_config(cfg, phi_t)
    if scheme.kind == "fresh_noise":
        noise = rng.standard_normal(working.values.shape)
        vals = np.abs(noise) if working.view == "magnitude" else noise
        working = WorkingMatrix(vals, view=working.view, column_scaling=working.column_scaling,
                                row_scaling=working.row_scaling, epsilon=working.epsilon)
    elif scheme.noise_sigma > 0:
        vals = working.values + rng.normal(0.0, scheme.noise_sigma, working.values.shape)
        if working.view == "magnitude":
            vals = np.abs(vals)
        working = WorkingMatrix(vals, view=working.view, column_scaling=working.column_scaling,
                                row_scaling=working.row_scaling, epsilon=working.epsilon)
    w, applied = filtered_affinity(cfg, working)
    g = graph_from_config(cfg, w, significance_applied=applied)
    # detection seed stays fixed across runs so identity perturbation
    # reproduces the reference partition exactly
    return partition_from_config(cfg, g)


def msi(
    phi: AttributionMatrix,
    cfg: PipelineConfig,
    scheme: PerturbationScheme | None = None,
    repetitions: int = DEFAULT_REPETITIONS,
    seed: int = 0,
    jobs: int = 1,
) -> MsiResult:
    """Module stability index with consensus matrix and percentile CI.

    Per-run seeds derive as seed XOR run index, so parallel execution
    cannot change the result (runs are keyed by index).
    """
    if repetitions < 2:
        raise DataError("repetitions must be >= 2")
    scheme = scheme or PerturbationScheme()
    reference = run_pipeline(cfg, phi).partition
    d = phi.d

    def one_run(t: int):
        part = _perturbed_partition(cfg, phi, scheme, seed ^ t)
        return part, match_modules(reference, part).mean_iou

    results: list[tuple[Partition, float] | None] = [None] * repetitions
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            for t, res in zip(range(repetitions), pool.map(one_run, range(repetitions))):
                results[t] = res
    else:
        for t in range(repetitions):
            results[t] = one_run(t)

    co = np.zeros((d, d))
    ious = np.empty(repetitions)
    for t, res in enumerate(results):
        part, iou = res
        ious[t] = iou
        same = part.assignment[:, None] == part.assignment[None, :]
        co += same
    co /= repetitions
    np.fill_diagonal(co, 1.0)
    return MsiResult(
        msi=float(ious.mean()),
        ci_low=float(np.percentile(ious, 2.5)),
        ci_high=float(np.percentile(ious, 97.5)),
        per_run_iou=ious,
        consensus=ConsensusMatrix(co),
        reference=reference,
    )


@dataclass(frozen=True)
class SweepSetting:
    k: int
    resolution: float
    msi: float
    ci_low: float
    ci_high: float
    modularity: float
    modules: int


@dataclass(frozen=True)
class StabilityReport:
    settings: tuple[SweepSetting, ...]
    selected: int
    q_floor: float

    def selected_setting(self) -> SweepSetting:
        return self.settings[self.selected]

    def to_payload(self) -> dict:
        return {
            "q_floor": self.q_floor,
            "selected": self.selected,
            "settings": [
                {
                    "k": s.k,
                    "resolution": s.resolution,
                    "msi": s.msi,
                    "msi_ci": [s.ci_low, s.ci_high],
                    "Q": s.modularity,
                    "K": s.modules,
                }
                for s in self.settings
            ],
        }


def stability_sweep(
    phi: AttributionMatrix,
    cfg: PipelineConfig,
    k_grid=None,
    res_grid=None,
    repetitions: int | None = None,
    q_floor: float = 0.2,
    seed: int = 0,
    scheme: PerturbationScheme | None = None,
    jobs: int = 1,
) -> StabilityReport:
    """Grid search over (k, resolution) maximizing stability subject to a
    modularity floor; ties prefer larger Q, then smaller k."""
    ks = [int(k) for k in (k_grid if k_grid is not None else cfg.stability.k_sweep)]
    resolutions = [float(r) for r in (res_grid if res_grid is not None else cfg.stability.res_sweep)]
    reps = int(repetitions) if repetitions is not None else int(cfg.stability.bootstraps)
    if not ks or not resolutions:
        raise DataError("sweep grid must be non-empty")
    if reps < 10:
        raise DataError("stability sweep needs at least 10 resamples")
    settings = []
    for idx, (k, res) in enumerate((k, r) for k in ks for r in resolutions):
        run_cfg = cfg.with_updates(k=float(k), resolution=res)
        result = msi(phi, run_cfg, scheme, repetitions=reps, seed=seed ^ idx, jobs=jobs)
        ref_run = run_pipeline(run_cfg, phi)
        q = modularity(unsigned_projection(ref_run.graph), ref_run.partition, res)
        settings.append(
            SweepSetting(
                k=k,
                resolution=res,
                msi=result.msi,
                ci_low=result.ci_low,
                ci_high=result.ci_high,
                modularity=q,
                modules=ref_run.partition.K,
            )
        )
    eligible = [i for i, s in enumerate(settings) if s.modularity >= q_floor]
    if not eligible:
        best_q = max(s.modularity for s in settings)
        raise DataError(f"no sweep setting reaches the modularity floor {q_floor}; best Q = {best_q:.6f}")
    selected = min(eligible, key=lambda i: (-settings[i].msi, -settings[i].modularity, settings[i].k, settings[i].resolution))
    return StabilityReport(settings=tuple(settings), selected=selected, q_floor=q_floor)
