"""Read-only JSON API over a finished artifacts directory, plus a
what-if endpoint that soft-attenuates one module and reports the
fairness / performance trade-off.

GET  /api/report     exact bytes of report.json
GET  /api/graph      nodes (name, module, strength) and weighted edges
GET  /api/consensus  dense co-assignment matrix
GET  /api/stability  stability sweep payload
POST /api/whatif     {"module_id": int, "delta": float in [0, 1]}

What-if needs the stored dataset and a built-in model; externally
scored runs get a 409 explaining the two-pass limitation.
"""
from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import numpy as np

from . import formats
from .communities import Partition
from .errors import DataError
from .interventions import InterventionPolicy, evaluate_metric, intervene
from .models import RidgeModel, load_model
from .store import LabelTable

ARTIFACT_REPORT = "report.json"
ARTIFACT_GRAPH = "W.moiws"
ARTIFACT_GRAPH_META = "W.meta.json"
ARTIFACT_MODULES = "modules.json"
ARTIFACT_CONSENSUS = "consensus.moiwd"
ARTIFACT_STABILITY = "stability.json"
ARTIFACT_DATA = "X.csv"
ARTIFACT_MODEL = "model.json"
ARTIFACT_LABELS = "labels.csv"
ARTIFACT_META = "meta.json"


class ArtifactBundle:
    """Immutable view of an artifacts directory, loaded once at startup."""

    def __init__(self, root: Path):
        self.root = Path(root)
        if not self.root.is_dir():
            raise DataError(f"artifacts directory not found: {self.root}")
        self.report_bytes = self._raw(ARTIFACT_REPORT)
        self.stability_bytes = self._raw(ARTIFACT_STABILITY)
        self.graph_payload = self._build_graph_payload()
        self.consensus_payload = self._build_consensus_payload()
        self._whatif_state = self._load_whatif_state()
        self._whatif_lock = threading.Lock()

    def _raw(self, name: str) -> bytes | None:
        path = self.root / name
        return path.read_bytes() if path.exists() else None

    def _build_graph_payload(self) -> bytes | None:
        graph_path = self.root / ARTIFACT_GRAPH
        if not graph_path.exists():
            return None
        d, src, dst, weight = formats.read_moiws(graph_path)
        meta = {}
        if (self.root / ARTIFACT_GRAPH_META).exists():
            meta = formats.load_json(self.root / ARTIFACT_GRAPH_META)
        names = meta.get("feature_names", [f"x{i}" for i in range(d)])
        assignment = [None] * d
        if (self.root / ARTIFACT_MODULES).exists():
            modules = formats.load_json(self.root / ARTIFACT_MODULES)["modules"]
            for k, members in enumerate(modules):
                for i in members:
                    assignment[int(i)] = k
        strength = np.zeros(d)
        np.add.at(strength, src, np.abs(weight))
        np.add.at(strength, dst, np.abs(weight))
        payload = {
            "nodes": [
                {"id": i, "name": names[i], "module": assignment[i], "strength": float(strength[i])}
                for i in range(d)
            ],
            "edges": [
                {"source": int(i), "target": int(j), "weight": float(w)} for i, j, w in zip(src, dst, weight)
            ],
        }
        return _json_bytes(payload)

    def _build_consensus_payload(self) -> bytes | None:
        path = self.root / ARTIFACT_CONSENSUS
        if not path.exists():
            return None
        values = formats.read_moiwd(path)
        return _json_bytes({"d": values.shape[0], "values": [[float(v) for v in row] for row in values]})

    def _load_whatif_state(self):
        needed = (ARTIFACT_DATA, ARTIFACT_MODEL, ARTIFACT_MODULES, ARTIFACT_LABELS)
        if not all((self.root / name).exists() for name in needed):
            return None
        x, _, _ = formats.read_phi_csv(self.root / ARTIFACT_DATA)
        model = load_model(self.root / ARTIFACT_MODEL)
        modules_payload = formats.load_json(self.root / ARTIFACT_MODULES)
        partition = Partition.from_modules(modules_payload["modules"], len(modules_payload["feature_names"]))
        labels = LabelTable.from_csv(self.root / ARTIFACT_LABELS)
        meta = {}
        if (self.root / ARTIFACT_META).exists():
            meta = formats.load_json(self.root / ARTIFACT_META)
        threshold = float(meta.get("decision_threshold", float(np.median(model.predict(x)))))
        metric = meta.get("metric", "r2")
        return {
            "x": x,
            "model": model,
            "partition": partition,
            "labels": labels,
            "threshold": threshold,
            "metric": metric,
        }

    def whatif(self, module_id: int, delta: float) -> dict:
        state = self._whatif_state
        if state is None:
            raise WhatIfUnavailable(
                "what-if needs the stored dataset and a built-in model; "
                "externally scored runs only support the two-pass ablation files"
            )
        partition: Partition = state["partition"]
        if not (0 <= module_id < partition.K):
            raise DataError(f"module_id out of range: {module_id}")
        if not (0.0 <= delta <= 1.0):
            raise DataError("delta must be in [0, 1]")
        x = state["x"]
        model = state["model"]
        labels: LabelTable = state["labels"]
        members = np.nonzero(partition.assignment == module_id)[0]
        policy = InterventionPolicy(kind="soft_attenuate", delta=delta, seed=0)
        x_after = intervene(x, members, policy, reference=x)
        with self._whatif_lock:
            preds_before = model.predict(x)
            preds_after = model.predict(x_after)
        threshold = state["threshold"]
        groups = sorted(set(labels.group))
        rows = {g: np.array([r for r, name in enumerate(labels.group) if name == g]) for g in groups}

        def dp_gap(preds: np.ndarray) -> float:
            rates = [float((preds[rows[g]] >= threshold).mean()) for g in groups]
            return float(max(rates) - min(rates)) if len(rates) >= 2 else 0.0

        y = labels.y
        metric = state["metric"]
        metric_before = evaluate_metric(metric, preds_before, y) if y is not None else None
        metric_after = evaluate_metric(metric, preds_after, y) if y is not None else None
        psi_shift = None
        if isinstance(model, RidgeModel):
            delta_x = x_after - x
            contrib = delta_x * model.weights
            psi_shift = [
                float(contrib[:, np.nonzero(partition.assignment == k)[0]].sum(axis=1).mean())
                for k in range(partition.K)
            ]
        return {
            "module_id": module_id,
            "delta": delta,
            "dp_gap_before": dp_gap(preds_before),
            "dp_gap_after": dp_gap(preds_after),
            "metric": metric,
            "metric_before": metric_before,
            "metric_after": metric_after,
            "per_module_psi_shift": psi_shift,
        }


class WhatIfUnavailable(DataError):
    pass


def _json_bytes(payload) -> bytes:
    return (json.dumps(payload, sort_keys=True, separators=(",", ":")) + "\n").encode("utf-8")


_DEFAULT_INDEX = b"""<!doctype html>
<html><head><title>module audit API</title></head>
<body><h1>module audit API</h1>
<ul>
<li>GET /api/report</li>
<li>GET /api/graph</li>
<li>GET /api/consensus</li>
<li>GET /api/stability</li>
<li>POST /api/whatif {"module_id": 0, "delta": 0.5}</li>
</ul></body></html>
"""

_UI_TYPES = {
    ".html": "text/html; charset=utf-8",
    ".js": "text/javascript; charset=utf-8",
    ".mjs": "text/javascript; charset=utf-8",
    ".css": "text/css; charset=utf-8",
    ".json": "application/json",
    ".svg": "image/svg+xml",
    ".map": "application/json",
}


def make_handler(bundle: ArtifactBundle, ui_dir: Path | None):
    class Handler(BaseHTTPRequestHandler):
        server_version = "moi-serve/0.1"

        def log_message(self, *_args):
            pass

        def _send(self, code: int, body: bytes, content_type: str = "application/json") -> None:
            self.send_response(code)
            self.send_header("Content-Type", content_type)
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def _send_json(self, code: int, payload) -> None:
            self._send(code, _json_bytes(payload))

        def do_GET(self):  # noqa: N802 (stdlib casing)
            route = self.path.split("?", 1)[0]
            if route == "/api/report":
                if bundle.report_bytes is None:
                    return self._send_json(404, {"error": "report.json not found"})
                return self._send(200, bundle.report_bytes)
            if route == "/api/graph":
                if bundle.graph_payload is None:
                    return self._send_json(404, {"error": "graph artifact not found"})
                return self._send(200, bundle.graph_payload)
            if route == "/api/consensus":
                if bundle.consensus_payload is None:
                    return self._send_json(404, {"error": "consensus artifact not found"})
                return self._send(200, bundle.consensus_payload)
            if route == "/api/stability":
                if bundle.stability_bytes is None:
                    return self._send_json(404, {"error": "stability report not found"})
                return self._send(200, bundle.stability_bytes)
            return self._serve_static(route)

        def _serve_static(self, route: str) -> None:
            if ui_dir is None:
                if route in ("/", "/index.html"):
                    return self._send(200, _DEFAULT_INDEX, "text/html; charset=utf-8")
                return self._send_json(404, {"error": f"no route {route}"})
            rel = route.lstrip("/") or "index.html"
            target = (ui_dir / rel).resolve()
            if not str(target).startswith(str(ui_dir.resolve())) or not target.is_file():
                return self._send_json(404, {"error": f"no route {route}"})
            ctype = _UI_TYPES.get(target.suffix, "application/octet-stream")
            return self._send(200, target.read_bytes(), ctype)

        def do_POST(self):  # noqa: N802
            route = self.path.split("?", 1)[0]
            if route != "/api/whatif":
                return self._send_json(404, {"error": f"no route {route}"})
            length = int(self.headers.get("Content-Length", "0"))
            try:
                body = json.loads(self.rfile.read(length).decode("utf-8")) if length else {}
                module_id = int(body["module_id"])
                delta = float(body["delta"])
            except (KeyError, ValueError, json.JSONDecodeError):
                return self._send_json(400, {"error": "body must be {module_id: int, delta: float}"})
            try:
                payload = bundle.whatif(module_id, delta)
            except WhatIfUnavailable as exc:
                return self._send_json(409, {"error": str(exc)})
            except DataError as exc:
                return self._send_json(400, {"error": str(exc)})
            return self._send_json(200, payload)

    return Handler


def make_server(artifacts: Path, host: str = "127.0.0.1", port: int = 0, ui_dir=None) -> ThreadingHTTPServer:
    bundle = ArtifactBundle(Path(artifacts))
    ui = Path(ui_dir) if ui_dir else None
    return ThreadingHTTPServer((host, port), make_handler(bundle, ui))


def run_server(artifacts: Path, host: str = "127.0.0.1", port: int = 8180, ui_dir=None) -> None:
    server = make_server(artifacts, host, port, ui_dir)
    address = server.server_address
    print(f"serving artifacts on http://{address[0]}:{address[1]}/", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.shutdown()
