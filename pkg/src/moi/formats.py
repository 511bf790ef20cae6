"""On-disk formats: attribution matrices, dense/sparse weight matrices,
label tables, edge lists, and GraphML.

Binary layouts (all little-endian):

  MOIPHI  magic b"MOIPHI1\\0", u32 n, u32 d, u32 name-block length,
          UTF-8 newline-separated feature names, n*d float64 row-major.
  MOIWD   magic b"MOIWD1\\0", u32 d, d*d float64 row-major.
  MOIWS   magic b"MOIWS1\\0", u32 d, u64 nnz, nnz records of
          (u32 i, u32 j, float64 w) with i < j, sorted lexicographically.
"""
from __future__ import annotations

import csv
import io
import json
import struct
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .errors import FormatError

MOIPHI_MAGIC = b"MOIPHI1\0"
MOIWD_MAGIC = b"MOIWD1\0"
MOIWS_MAGIC = b"MOIWS1\0"

_SPARSE_DTYPE = np.dtype([("i", "<u4"), ("j", "<u4"), ("w", "<f8")])


def write_moiphi(path, values: np.ndarray, feature_names) -> None:
    values = np.ascontiguousarray(values, dtype="<f8")
    n, d = values.shape
    names = list(feature_names)
    if len(names) != d:
        raise FormatError(f"expected {d} feature names, got {len(names)}")
    block = "\n".join(names).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MOIPHI_MAGIC)
        fh.write(struct.pack("<II", n, d))
        fh.write(struct.pack("<I", len(block)))
        fh.write(block)
        fh.write(values.tobytes())


def read_moiphi(path):
    """Returns (values, feature_names)."""
    raw = Path(path).read_bytes()
    if not raw.startswith(MOIPHI_MAGIC):
        raise FormatError(f"{path}: bad magic, not a MOIPHI file")
    off = len(MOIPHI_MAGIC)
    n, d = struct.unpack_from("<II", raw, off)
    off += 8
    (block_len,) = struct.unpack_from("<I", raw, off)
    off += 4
    names = raw[off : off + block_len].decode("utf-8").split("\n") if block_len else []
    off += block_len
    expected = n * d * 8
    if len(raw) - off != expected:
        raise FormatError(f"{path}: expected {expected} value bytes, found {len(raw) - off}")
    values = np.frombuffer(raw[off:], dtype="<f8").reshape(n, d).copy()
    if len(names) != d:
        raise FormatError(f"{path}: {len(names)} names for {d} columns")
    return values, names


def write_moiwd(path, values: np.ndarray) -> None:
    values = np.ascontiguousarray(values, dtype="<f8")
    d0, d1 = values.shape
    if d0 != d1:
        raise FormatError(f"dense weight matrix must be square, got {values.shape}")
    with open(path, "wb") as fh:
        fh.write(MOIWD_MAGIC)
        fh.write(struct.pack("<I", d0))
        fh.write(values.tobytes())


def read_moiwd(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if not raw.startswith(MOIWD_MAGIC):
        raise FormatError(f"{path}: bad magic, not a MOIWD file")
    off = len(MOIWD_MAGIC)
    (d,) = struct.unpack_from("<I", raw, off)
    off += 4
    if len(raw) - off != d * d * 8:
        raise FormatError(f"{path}: truncated dense matrix (d={d})")
    return np.frombuffer(raw[off:], dtype="<f8").reshape(d, d).copy()


def write_moiws(path, d: int, src: np.ndarray, dst: np.ndarray, weight: np.ndarray) -> None:
    """Edges must already be canonical: src < dst, lexicographically sorted."""
    rec = np.empty(len(src), dtype=_SPARSE_DTYPE)
    rec["i"] = src
    rec["j"] = dst
    rec["w"] = weight
    with open(path, "wb") as fh:
        fh.write(MOIWS_MAGIC)
        fh.write(struct.pack("<I", d))
        fh.write(struct.pack("<Q", len(rec)))
        fh.write(rec.tobytes())


def read_moiws(path):
    """Returns (d, src, dst, weight)."""
    raw = Path(path).read_bytes()
    if not raw.startswith(MOIWS_MAGIC):
        raise FormatError(f"{path}: bad magic, not a MOIWS file")
    off = len(MOIWS_MAGIC)
    (d,) = struct.unpack_from("<I", raw, off)
    off += 4
    (nnz,) = struct.unpack_from("<Q", raw, off)
    off += 8
    if len(raw) - off != nnz * _SPARSE_DTYPE.itemsize:
        raise FormatError(f"{path}: truncated edge records (nnz={nnz})")
    rec = np.frombuffer(raw[off:], dtype=_SPARSE_DTYPE)
    return d, rec["i"].astype(np.int64), rec["j"].astype(np.int64), rec["w"].copy()


def read_phi_csv(path):
    """Parse an attribution CSV: header of feature names, numeric body.

    A leading ``instance_id`` column is detected by header name.
    Returns (values, feature_names, instance_ids) where instance_ids is
    None when the column is absent. Body rows are 1-indexed in errors.
    """
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError(f"{path}: empty file") from None
        has_ids = bool(header) and header[0] == "instance_id"
        names = header[1:] if has_ids else header
        ids: list[str] = []
        rows: list[list[float]] = []
        d = len(names)
        for r, row in enumerate(reader, start=1):
            if len(row) != len(header):
                raise FormatError(f"{path}: row {r}: expected {len(header)} fields, got {len(row)}")
            body = row[1:] if has_ids else row
            if has_ids:
                ids.append(row[0])
            parsed = []
            for name, cell in zip(names, body):
                try:
                    val = float(cell)
                except ValueError:
                    raise FormatError(f"{path}: row {r}, column {name}: not a number: {cell!r}") from None
                if not np.isfinite(val):
                    raise FormatError(f"{path}: row {r}, column {name}: non-finite value")
                parsed.append(val)
            rows.append(parsed)
    if not rows:
        raise FormatError(f"{path}: no data rows")
    values = np.array(rows, dtype=np.float64).reshape(len(rows), d)
    return values, names, (ids if has_ids else None)


def write_phi_csv(path, values: np.ndarray, feature_names, instance_ids=None) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        names = list(feature_names)
        if instance_ids is not None:
            writer.writerow(["instance_id"] + names)
            for rid, row in zip(instance_ids, values):
                writer.writerow([rid] + [repr(float(v)) for v in row])
        else:
            writer.writerow(names)
            for row in values:
                writer.writerow([repr(float(v)) for v in row])


def read_label_table(path):
    """Label table CSV keyed by instance_id.

    Required columns: instance_id, group. Optional: class, y, yhat, score.
    Returns a dict of column name -> list (strings for id/group/class,
    floats for y/yhat/score).
    """
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise FormatError(f"{path}: empty label table")
        fields = list(reader.fieldnames)
        for required in ("instance_id", "group"):
            if required not in fields:
                raise FormatError(f"{path}: label table missing column {required!r}")
        table: dict[str, list] = {name: [] for name in fields}
        for r, row in enumerate(reader, start=1):
            for name in fields:
                cell = row.get(name)
                if cell is None:
                    raise FormatError(f"{path}: row {r}: missing field {name!r}")
                if name in ("y", "yhat", "score"):
                    try:
                        table[name].append(float(cell))
                    except ValueError:
                        raise FormatError(f"{path}: row {r}, column {name}: not a number") from None
                else:
                    table[name].append(cell)
    if not table["instance_id"]:
        raise FormatError(f"{path}: no label rows")
    return table


def write_label_table(path, instance_ids, group, **optional) -> None:
    cols = {"instance_id": list(instance_ids), "group": list(group)}
    for name in ("class", "y", "yhat", "score"):
        if optional.get(name) is not None:
            cols[name] = list(optional[name])
    length = len(cols["instance_id"])
    for name, col in cols.items():
        if len(col) != length:
            raise FormatError(f"label column {name!r}: length {len(col)} != {length}")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(list(cols))
        for r in range(length):
            writer.writerow([cols[name][r] for name in cols])


def write_edge_tsv(path, src, dst, weight, feature_names) -> None:
    names = list(feature_names)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("src\tdst\tweight\n")
        for i, j, w in zip(src, dst, weight):
            fh.write(f"{names[int(i)]}\t{names[int(j)]}\t{float(w)!r}\n")


def write_graphml(path, d, src, dst, weight, feature_names, assignment=None) -> None:
    """GraphML export; nodes carry a "module" attribute when a partition is given."""
    names = list(feature_names)
    buf = io.StringIO()
    buf.write('<?xml version="1.0" encoding="UTF-8"?>\n')
    buf.write('<graphml xmlns="http://graphml.graphdrawing.org/xmlns">\n')
    buf.write('  <key id="name" for="node" attr.name="name" attr.type="string"/>\n')
    if assignment is not None:
        buf.write('  <key id="module" for="node" attr.name="module" attr.type="int"/>\n')
    buf.write('  <key id="weight" for="edge" attr.name="weight" attr.type="double"/>\n')
    buf.write('  <graph edgedefault="undirected">\n')
    for i in range(d):
        buf.write(f'    <node id="n{i}">\n')
        buf.write(f'      <data key="name">{escape(names[i])}</data>\n')
        if assignment is not None:
            buf.write(f'      <data key="module">{int(assignment[i])}</data>\n')
        buf.write("    </node>\n")
    for e, (i, j, w) in enumerate(zip(src, dst, weight)):
        buf.write(f'    <edge id="e{e}" source="n{int(i)}" target="n{int(j)}">\n')
        buf.write(f'      <data key="weight">{float(w)!r}</data>\n')
        buf.write("    </edge>\n")
    buf.write("  </graph>\n</graphml>\n")
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def dump_json(path, payload) -> None:
    """Canonical JSON writer: sorted keys, fixed separators, trailing newline.

    Keeps artifacts byte-stable across runs and platforms.
    """
    text = json.dumps(payload, sort_keys=True, separators=(",", ":"), allow_nan=False)
    Path(path).write_text(text + "\n", encoding="utf-8")


def load_json(path):
    return json.loads(Path(path).read_text(encoding="utf-8"))
