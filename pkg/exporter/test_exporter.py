"""Exporter round-trip tests: files written here must load bit-exactly
through the main toolchain's readers (the external surface)."""
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))
from export_attributions import ExportError, export_labels, export_phi, main  # noqa: E402

from moi.store import LabelTable, load_attributions  # noqa: E402


def test_moiphi_round_trip_bit_exact(tmp_path):
    values = np.array([[1.25, -2.5], [1e-12, 3.0]])
    path = export_phi(values, ["a", "b"], tmp_path / "phi.moiphi")
    phi = load_attributions(path)
    assert phi.values.tobytes() == values.tobytes()
    assert phi.feature_names == ("a", "b")


def test_csv_and_moiphi_agree(tmp_path):
    rng = np.random.default_rng(0)
    values = rng.standard_normal((7, 3))
    names = ["f0", "f1", "f2"]
    csv_phi = load_attributions(export_phi(values, names, tmp_path / "phi.csv"))
    bin_phi = load_attributions(export_phi(values, names, tmp_path / "phi.moiphi"))
    assert np.allclose(csv_phi.values, bin_phi.values, atol=1e-15)
    assert csv_phi.feature_names == bin_phi.feature_names


def test_nan_rejected(tmp_path):
    with pytest.raises(ExportError, match="non-finite"):
        export_phi(np.array([[1.0, np.nan]]), ["a", "b"], tmp_path / "phi.moiphi")


def test_shape_mismatch_rejected(tmp_path):
    with pytest.raises(ExportError, match="names"):
        export_phi(np.ones((2, 3)), ["a", "b"], tmp_path / "phi.moiphi")


def test_labels_round_trip(tmp_path):
    path = export_labels(["r0", "r1", "r2"], ["a", "b", "a"], tmp_path / "labels.csv", y=[1, 0, 1], yhat=[1, 1, 0])
    table = LabelTable.from_csv(path)
    assert table.instance_id == ("r0", "r1", "r2")
    assert table.group == ("a", "b", "a")
    assert list(table.y) == [1.0, 0.0, 1.0]
    assert table.score is None


def test_labels_header_shape(tmp_path):
    path = export_labels(["0", "1", "2"], ["x", "y", "z"], tmp_path / "labels.csv")
    lines = path.read_text().splitlines()
    assert lines[0] == "instance_id,group"
    assert len(lines) == 4


def test_duplicate_ids_rejected(tmp_path):
    with pytest.raises(ExportError, match="duplicate"):
        export_labels(["0", "0"], ["a", "b"], tmp_path / "labels.csv")


def test_cli_phi_from_npy(tmp_path):
    values = np.random.default_rng(1).standard_normal((4, 2))
    np.save(tmp_path / "arr.npy", values)
    (tmp_path / "names.txt").write_text("left\nright\n")
    out = tmp_path / "phi.moiphi"
    code = main(["phi", "--values", str(tmp_path / "arr.npy"), "--names", str(tmp_path / "names.txt"), "--out", str(out)])
    assert code == 0
    phi = load_attributions(out)
    assert phi.feature_names == ("left", "right")
    assert np.array_equal(phi.values, values)


def test_cli_reports_errors(tmp_path):
    bad = np.array([[np.inf, 1.0]])
    np.save(tmp_path / "arr.npy", bad)
    script = Path(__file__).parent / "export_attributions.py"
    proc = subprocess.run(
        [sys.executable, str(script), "phi", "--values", str(tmp_path / "arr.npy"), "--out", str(tmp_path / "o.moiphi")],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 3
    assert "non-finite" in proc.stderr


def test_exporter_has_no_package_dependency():
    source = (Path(__file__).parent / "export_attributions.py").read_text()
    assert "import moi" not in source and "from moi" not in source
