#!/usr/bin/env python3
"""Convert explainer outputs (SHAP/LIME/IG-style arrays) into the
attribution and label files the audit toolchain reads.

Deliberately standalone: numpy is the only dependency and nothing is
imported from the main package, so this can ride along inside ML
pipelines that must not link against the analysis code.

Library use:

    from export_attributions import export_phi, export_labels
    export_phi(shap_values, feature_names, "phi.moiphi")
    export_labels(ids, group, "labels.csv", y=y, yhat=yhat)

CLI use:

    python export_attributions.py phi --values shap.npy --names names.txt --out phi.moiphi
    python export_attributions.py labels --ids ids.txt --group groups.txt --out labels.csv
"""
from __future__ import annotations

import argparse
import csv
import struct
import sys
from pathlib import Path

import numpy as np

MOIPHI_MAGIC = b"MOIPHI1\0"


class ExportError(ValueError):
    pass


def _validated(values, feature_names):
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2:
        raise ExportError(f"attributions must be 2-d, got shape {values.shape}")
    if not np.all(np.isfinite(values)):
        bad = np.argwhere(~np.isfinite(values))[0]
        raise ExportError(f"non-finite attribution at row {bad[0]}, column {bad[1]}")
    names = [str(n) for n in feature_names]
    if len(names) != values.shape[1]:
        raise ExportError(f"{len(names)} names for {values.shape[1]} columns")
    if len(set(names)) != len(names):
        raise ExportError("duplicate feature names")
    return values, names


def export_phi(values, feature_names, out_path, format: str | None = None) -> Path:
    """Write a MOIPHI binary or attribution CSV; inferred from the suffix."""
    out_path = Path(out_path)
    values, names = _validated(values, feature_names)
    if format is None:
        format = "csv" if out_path.suffix.lower() == ".csv" else "moiphi"
    if format == "moiphi":
        n, d = values.shape
        block = "\n".join(names).encode("utf-8")
        with open(out_path, "wb") as fh:
            fh.write(MOIPHI_MAGIC)
            fh.write(struct.pack("<II", n, d))
            fh.write(struct.pack("<I", len(block)))
            fh.write(block)
            fh.write(np.ascontiguousarray(values, dtype="<f8").tobytes())
    elif format == "csv":
        with open(out_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(names)
            for row in values:
                writer.writerow([repr(float(v)) for v in row])
    else:
        raise ExportError(f"unknown format {format!r}")
    return out_path


def export_labels(instance_ids, group, out_path, y=None, yhat=None, score=None, class_=None) -> Path:
    """Write the label-table CSV: instance_id, group, and whichever of
    class/y/yhat/score are provided."""
    out_path = Path(out_path)
    ids = [str(i) for i in instance_ids]
    if len(set(ids)) != len(ids):
        raise ExportError("duplicate instance ids")
    groups = [str(g) for g in group]
    columns: dict[str, list] = {"instance_id": ids, "group": groups}
    for name, col in (("class", class_), ("y", y), ("yhat", yhat), ("score", score)):
        if col is not None:
            columns[name] = [float(v) for v in col] if name != "class" else [str(v) for v in col]
    length = len(ids)
    for name, col in columns.items():
        if len(col) != length:
            raise ExportError(f"column {name}: length {len(col)} != {length}")
    with open(out_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(list(columns))
        for r in range(length):
            writer.writerow([columns[name][r] for name in columns])
    return out_path


def _load_array(path: str, key: str | None):
    path = Path(path)
    if path.suffix == ".npz":
        bundle = np.load(path)
        if key is None:
            if len(bundle.files) != 1:
                raise ExportError(f"{path}: pick one of {bundle.files} with --key")
            key = bundle.files[0]
        return np.asarray(bundle[key])
    if path.suffix == ".npy":
        return np.load(path)
    # fall back to plain text / csv numbers
    return np.loadtxt(path, delimiter="," if path.suffix == ".csv" else None, ndmin=2)


def _read_lines(path: str) -> list[str]:
    return [line.rstrip("\n") for line in Path(path).read_text(encoding="utf-8").splitlines() if line.strip()]


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("phi", help="attribution array -> MOIPHI/CSV")
    p.add_argument("--values", required=True, help=".npy/.npz/.csv array of shape (n, d)")
    p.add_argument("--key", help="array key inside an .npz bundle")
    p.add_argument("--names", help="text file with one feature name per line")
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=["moiphi", "csv"])

    p = sub.add_parser("labels", help="id/group/outcome columns -> label CSV")
    p.add_argument("--ids", required=True, help="text file, one instance id per line")
    p.add_argument("--group", required=True, help="text file, one group label per line")
    p.add_argument("--y", help="text file of outcomes")
    p.add_argument("--yhat", help="text file of predictions")
    p.add_argument("--score", help="text file of raw scores")
    p.add_argument("--out", required=True)

    args = parser.parse_args(argv)
    try:
        if args.command == "phi":
            values = _load_array(args.values, args.key)
            names = _read_lines(args.names) if args.names else [f"x{i}" for i in range(values.shape[1])]
            export_phi(values, names, args.out, args.format)
        else:
            export_labels(
                _read_lines(args.ids),
                _read_lines(args.group),
                args.out,
                y=[float(v) for v in _read_lines(args.y)] if args.y else None,
                yhat=[float(v) for v in _read_lines(args.yhat)] if args.yhat else None,
                score=[float(v) for v in _read_lines(args.score)] if args.score else None,
            )
    except ExportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
