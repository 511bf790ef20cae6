"""Attribution storage: load, validate, normalize, and slice per-instance
feature attribution matrices.

The raw matrix holds one row per scored instance and one signed
contribution per feature. A working view of it (signed or magnitude,
optionally column- and row-scaled) is what the edge rules consume.
All containers are immutable after construction.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError, FormatError
from . import formats

VIEWS = ("signed", "magnitude")
COLUMN_SCALINGS = ("none", "l2", "mad")
ROW_SCALINGS = ("none", "l1")
DEFAULT_EPSILON = 1e-12


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class AttributionMatrix:
    """n instances by d features of model-output-scale attributions."""

    values: np.ndarray
    feature_names: tuple[str, ...]
    instance_ids: tuple[str, ...] = ()

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise DataError(f"attribution matrix must be 2-d, got shape {values.shape}")
        n, d = values.shape
        if n < 1 or d < 2:
            raise DataError(f"need n >= 1 and d >= 2, got n={n}, d={d}")
        if not np.all(np.isfinite(values)):
            bad = np.argwhere(~np.isfinite(values))[0]
            raise DataError(f"non-finite attribution at row {bad[0]}, column {bad[1]}")
        names = tuple(str(x) for x in self.feature_names)
        if len(names) != d:
            raise DataError(f"{len(names)} feature names for {d} columns")
        if len(set(names)) != d:
            seen = set()
            dup = next(x for x in names if x in seen or seen.add(x))
            raise DataError(f"duplicate feature name {dup!r}")
        ids = tuple(str(x) for x in self.instance_ids) if self.instance_ids else tuple(str(i) for i in range(n))
        if len(ids) != n:
            raise DataError(f"{len(ids)} instance ids for {n} rows")
        object.__setattr__(self, "values", _freeze(values))
        object.__setattr__(self, "feature_names", names)
        object.__setattr__(self, "instance_ids", ids)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class WorkingMatrix:
    """Normalized view of an attribution matrix used for edge construction."""

    values: np.ndarray
    view: str = "signed"
    column_scaling: str = "none"
    row_scaling: str = "none"
    epsilon: float = DEFAULT_EPSILON

    def __post_init__(self):
        if self.view not in VIEWS:
            raise DataError(f"unknown view {self.view!r}")
        if self.column_scaling not in COLUMN_SCALINGS:
            raise DataError(f"unknown column scaling {self.column_scaling!r}")
        if self.row_scaling not in ROW_SCALINGS:
            raise DataError(f"unknown row scaling {self.row_scaling!r}")
        if not self.epsilon > 0:
            raise DataError("epsilon must be > 0")
        values = np.asarray(self.values, dtype=np.float64)
        if self.view == "magnitude" and values.size and values.min() < 0:
            raise DataError("magnitude view requires nonnegative entries")
        object.__setattr__(self, "values", _freeze(values))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class SampleWeights:
    w: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.w, dtype=np.float64)
        if w.ndim != 1:
            raise DataError("sample weights must be 1-d")
        if w.size and w.min() < 0:
            raise DataError("sample weights must be nonnegative")
        if w.sum() <= 0:
            raise DataError("sample weights must have positive total mass")
        object.__setattr__(self, "w", _freeze(w))

    @classmethod
    def uniform(cls, n: int) -> "SampleWeights":
        return cls(np.ones(n))


@dataclass(frozen=True)
class CohortSelector:
    """Row selector: all rows, a label-table group/class, or explicit indices."""

    kind: str = "all"
    key: object = None

    def __post_init__(self):
        if self.kind not in ("all", "by_group", "by_class", "by_index"):
            raise DataError(f"unknown selector kind {self.kind!r}")


@dataclass(frozen=True)
class LabelTable:
    """Per-instance labels joined to attributions on instance_id."""

    instance_id: tuple[str, ...]
    group: tuple[str, ...]
    class_: tuple[str, ...] | None = None
    y: np.ndarray | None = None
    yhat: np.ndarray | None = None
    score: np.ndarray | None = None

    def __post_init__(self):
        n = len(self.instance_id)
        for name in ("group", "class_"):
            col = getattr(self, name)
            if col is not None and len(col) != n:
                raise DataError(f"label column {name}: length {len(col)} != {n}")
        for name in ("y", "yhat", "score"):
            col = getattr(self, name)
            if col is not None:
                arr = _freeze(np.asarray(col, dtype=np.float64))
                if arr.shape != (n,):
                    raise DataError(f"label column {name}: length {arr.shape} != {n}")
                object.__setattr__(self, name, arr)
        if len(set(self.instance_id)) != n:
            raise DataError("duplicate instance_id in label table")

    @classmethod
    def from_csv(cls, path) -> "LabelTable":
        table = formats.read_label_table(path)
        return cls(
            instance_id=tuple(table["instance_id"]),
            group=tuple(table["group"]),
            class_=tuple(table["class"]) if "class" in table else None,
            y=table.get("y"),
            yhat=table.get("yhat"),
            score=table.get("score"),
        )

    def aligned_to(self, instance_ids) -> "LabelTable":
        """Reorder the table to match the given instance ids."""
        index = {iid: r for r, iid in enumerate(self.instance_id)}
        try:
            rows = [index[iid] for iid in instance_ids]
        except KeyError as exc:
            raise DataError(f"instance {exc.args[0]!r} missing from label table") from None
        take = np.array(rows)
        return LabelTable(
            instance_id=tuple(self.instance_id[r] for r in rows),
            group=tuple(self.group[r] for r in rows),
            class_=tuple(self.class_[r] for r in rows) if self.class_ is not None else None,
            y=self.y[take] if self.y is not None else None,
            yhat=self.yhat[take] if self.yhat is not None else None,
            score=self.score[take] if self.score is not None else None,
        )


def load_attributions(path, format: str | None = None) -> AttributionMatrix:
    """Load an attribution matrix from CSV or MOIPHI.

    When ``format`` is None it is inferred from the file suffix
    (".csv" -> csv, anything else -> moiphi).
    """
    path = Path(path)
    if not path.exists():
        raise FormatError(f"{path}: no such file")
    if format is None:
        format = "csv" if path.suffix.lower() == ".csv" else "moiphi"
    if format == "csv":
        values, names, ids = formats.read_phi_csv(path)
        return AttributionMatrix(values, tuple(names), tuple(ids) if ids else ())
    if format == "moiphi":
        values, names = formats.read_moiphi(path)
        return AttributionMatrix(values, tuple(names))
    raise FormatError(f"unknown attribution format {format!r}")


def save_attributions(path, phi: AttributionMatrix, format: str | None = None) -> None:
    path = Path(path)
    if format is None:
        format = "csv" if path.suffix.lower() == ".csv" else "moiphi"
    if format == "csv":
        formats.write_phi_csv(path, phi.values, phi.feature_names, phi.instance_ids)
    elif format == "moiphi":
        formats.write_moiphi(path, phi.values, phi.feature_names)
    else:
        raise FormatError(f"unknown attribution format {format!r}")


def make_working_matrix(
    phi: AttributionMatrix,
    view: str = "signed",
    column_scaling: str = "none",
    row_scaling: str = "none",
    epsilon: float = DEFAULT_EPSILON,
) -> WorkingMatrix:
    """Build the working view: view transform, then column, then row scaling.

    The epsilon in every denominator keeps all-zero columns at zero
    instead of producing NaNs.
    """
    if not epsilon > 0:
        raise DataError("epsilon must be > 0")
    a = np.array(phi.values, dtype=np.float64)
    if view == "magnitude":
        a = np.abs(a)
    elif view != "signed":
        raise DataError(f"unknown view {view!r}")

    if column_scaling == "l2":
        norms = np.linalg.norm(a, axis=0)
        a = a / (norms + epsilon)
    elif column_scaling == "mad":
        med = np.median(a, axis=0)
        mad = np.median(np.abs(a - med), axis=0)
        a = a / (mad + epsilon)
    elif column_scaling != "none":
        raise DataError(f"unknown column scaling {column_scaling!r}")

    if row_scaling == "l1":
        norms = np.sum(np.abs(a), axis=1, keepdims=True)
        a = a / (norms + epsilon)
    elif row_scaling != "none":
        raise DataError(f"unknown row scaling {row_scaling!r}")

    return WorkingMatrix(a, view=view, column_scaling=column_scaling, row_scaling=row_scaling, epsilon=epsilon)


def slice_cohort(phi: AttributionMatrix, labels: LabelTable | None, selector: CohortSelector) -> AttributionMatrix:
    """Row-subset of the attribution matrix; column order and names kept."""
    if selector.kind == "all":
        rows = np.arange(phi.n)
    elif selector.kind == "by_index":
        rows = np.asarray(sorted(int(i) for i in selector.key), dtype=np.int64)
        if rows.size == 0:
            raise DataError("index selector: empty selection")
        if rows.min() < 0 or rows.max() >= phi.n:
            raise DataError(f"index selector: out of range for n={phi.n}")
    else:
        if labels is None:
            raise DataError(f"selector {selector.kind} requires a label table")
        aligned = labels.aligned_to(phi.instance_ids)
        if selector.kind == "by_group":
            column = aligned.group
            what = "group"
        else:
            if aligned.class_ is None:
                raise DataError("label table has no class column")
            column = aligned.class_
            what = "class"
        rows = np.array([r for r, v in enumerate(column) if v == selector.key], dtype=np.int64)
        if rows.size == 0:
            raise DataError(f"{what} {selector.key}: no instances")
    return AttributionMatrix(
        phi.values[rows],
        phi.feature_names,
        tuple(phi.instance_ids[r] for r in rows),
    )


@dataclass(frozen=True)
class AdditivityReport:
    max_abs_residual: float
    passed: bool
    tol: float


def check_additivity(phi: AttributionMatrix, predictions, base_value: float, tol: float) -> AdditivityReport:
    """Check that attribution rows sum to prediction minus base value."""
    predictions = np.asarray(predictions, dtype=np.float64)
    if predictions.shape != (phi.n,):
        raise DataError(f"predictions: expected length {phi.n}, got {predictions.shape}")
    residual = phi.values.sum(axis=1) - (predictions - base_value)
    worst = float(np.max(np.abs(residual))) if residual.size else 0.0
    return AdditivityReport(max_abs_residual=worst, passed=bool(worst <= tol), tol=float(tol))
