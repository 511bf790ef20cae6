"""Command-line surface.

Verbs: ingest, build-graph, communities, metrics, ablate, select,
synth, report, serve. Every command snapshots its configuration before
computing, stamps the snapshot hash into the artifacts it writes, and
is a pure function of (inputs, config, seeds): identical invocations
produce byte-identical artifacts.

Exit codes: 0 ok, 2 usage, 3 data error, 4 config error.
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import formats
from .communities import Partition, mean_conductance, modularity
from .config import PipelineConfig, canonical_text, config_hash, load_config
from .errors import ConfigError, DataError, FormatError, UsageError
from .interventions import (
    InterventionPolicy,
    ablation_drop,
    emit_counterfactuals,
    ingest_predictions,
    synergy,
)
from .metrics import build_report, heatmap_order
from .models import fit_ridge, fit_tree_ensemble, load_model, save_model
from .pipeline import partition_from_config, run_pipeline, unsigned_projection, working_from_config
from .stability import PerturbationScheme, msi, stability_sweep
from .store import AttributionMatrix, LabelTable, load_attributions, save_attributions
from .synthetic import (
    SyntheticSpec,
    exhaustive_shap_matrix,
    gen_environments,
    generate,
    linear_shap,
)
from .graph import ExplanationGraph

CONFIG_SNAPSHOT = "config.snapshot"
PHI_FILE = "phi.moiphi"
LABELS_FILE = "labels.csv"
GRAPH_FILE = "W.moiws"
GRAPH_META = "W.meta.json"
MODULES_FILE = "modules.json"
CONSENSUS_FILE = "consensus.moiwd"
STABILITY_FILE = "stability.json"
REPORT_FILE = "report.json"
GRAPHML_FILE = "graph.graphml"
EDGES_FILE = "edges.tsv"
HEATMAP_CSV = "heatmap.csv"
HEATMAP_SVG = "heatmap.svg"
DROPS_FILE = "drops.json"
SYNERGY_FILE = "synergy.json"
DATA_FILE = "X.csv"
TRUTH_FILE = "truth.json"
MODEL_FILE = "model.json"
META_FILE = "meta.json"
LOG_DIR = "logs"


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _log(out: Path, message: str) -> None:
    log_dir = out / LOG_DIR
    log_dir.mkdir(exist_ok=True)
    with open(log_dir / "run.log", "a", encoding="utf-8") as fh:
        fh.write(message + "\n")


def _resolve_config(args) -> PipelineConfig:
    if getattr(args, "config", None):
        cfg = load_config(args.config)
    else:
        snapshot = None
        candidates = []
        for attr in ("artifacts", "graph", "out"):
            value = getattr(args, attr, None)
            if value and Path(value).is_dir():
                candidates.append(Path(value) / CONFIG_SNAPSHOT)
        for cand in candidates:
            if cand.exists():
                snapshot = cand
                break
        cfg = load_config(snapshot) if snapshot else PipelineConfig()
    overrides = {}
    if getattr(args, "edge", None):
        overrides["edge_rule"] = args.edge
    if getattr(args, "sparsifier", None):
        overrides["sparsifier"] = args.sparsifier
    if getattr(args, "mutual", False):
        overrides["sparsifier"] = "mutual_topk"
    if getattr(args, "k", None) is not None:
        overrides["k"] = float(args.k)
    if getattr(args, "degree_norm", None) is not None:
        overrides["degree_norm"] = float(args.degree_norm)
    if getattr(args, "res", None) is not None:
        overrides["resolution"] = float(args.res)
    if getattr(args, "algo", None):
        overrides["community"] = args.algo
    if getattr(args, "signed", False):
        overrides["signed"] = True
    if getattr(args, "seed", None) is not None:
        overrides["seeds"] = replace(cfg.seeds, comm=int(args.seed), graph=int(args.seed))
    if overrides:
        cfg = cfg.with_updates(**overrides)
    return cfg


def _write_snapshot(out: Path, cfg: PipelineConfig) -> str:
    (out / CONFIG_SNAPSHOT).write_text(canonical_text(cfg), encoding="utf-8")
    return config_hash(cfg)


def _load_phi(args, out: Path | None = None) -> AttributionMatrix:
    if getattr(args, "phi", None):
        return load_attributions(args.phi)
    candidates = []
    if getattr(args, "artifacts", None):
        candidates.append(Path(args.artifacts) / PHI_FILE)
    if out is not None:
        candidates.append(out / PHI_FILE)
    for cand in candidates:
        if cand.exists():
            return load_attributions(cand)
    raise UsageError("no attribution matrix: pass --phi or an artifacts dir with phi.moiphi")


def _load_labels(args, out: Path | None = None) -> LabelTable | None:
    if getattr(args, "labels", None):
        return LabelTable.from_csv(args.labels)
    for base in (getattr(args, "artifacts", None), out):
        if base and (Path(base) / LABELS_FILE).exists():
            return LabelTable.from_csv(Path(base) / LABELS_FILE)
    return None


def _graph_paths(args) -> tuple[Path, Path]:
    raw = Path(args.graph if getattr(args, "graph", None) else Path(args.artifacts))
    if raw.is_dir():
        return raw / GRAPH_FILE, raw / GRAPH_META
    return raw, raw.with_name(raw.name.replace(".moiws", "") + ".meta.json")


def _load_graph(args) -> tuple[ExplanationGraph, dict]:
    graph_path, meta_path = _graph_paths(args)
    if not graph_path.exists():
        raise DataError(f"graph artifact not found: {graph_path}")
    d, src, dst, weight = formats.read_moiws(graph_path)
    meta = formats.load_json(meta_path) if meta_path.exists() else {}
    return ExplanationGraph(d, src, dst, weight, meta=meta), meta


def _load_partition(path: Path) -> tuple[Partition, dict]:
    payload = formats.load_json(path)
    d = len(payload["feature_names"])
    partition = Partition.from_modules(payload["modules"], d)
    return partition, payload


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_ingest(args) -> int:
    out = _out_dir(args)
    cfg = _resolve_config(args)
    _write_snapshot(out, cfg)
    phi = load_attributions(args.phi)
    save_attributions(out / PHI_FILE, phi, format="moiphi")
    if args.labels:
        labels = LabelTable.from_csv(args.labels)
        formats.write_label_table(
            out / LABELS_FILE,
            labels.instance_id,
            labels.group,
            **{"class": labels.class_, "y": labels.y, "yhat": labels.yhat, "score": labels.score},
        )
    _log(out, f"ingest n={phi.n} d={phi.d}")
    return 0


def _significance_arg(args):
    mode = getattr(args, "significance", "auto")
    return None if mode == "auto" else (mode == "on")


def cmd_build_graph(args) -> int:
    out = _out_dir(args)
    cfg = _resolve_config(args)
    chash = _write_snapshot(out, cfg)
    phi = _load_phi(args, out)
    run = run_pipeline(cfg, phi, significance=_significance_arg(args))
    g = run.graph
    formats.write_moiws(out / GRAPH_FILE, g.d, g.src, g.dst, g.weight)
    meta = dict(g.meta)
    meta.update(
        {
            "config_hash": chash,
            "feature_names": list(phi.feature_names),
            "n_instances": phi.n,
            "edges": g.edge_count,
            "signed": bool(cfg.signed),
        }
    )
    formats.dump_json(out / GRAPH_META, meta)
    formats.write_edge_tsv(out / EDGES_FILE, g.src, g.dst, g.weight, phi.feature_names)
    if not (out / PHI_FILE).exists():
        save_attributions(out / PHI_FILE, phi, format="moiphi")
    _log(out, f"build-graph edges={g.edge_count}")
    return 0


def cmd_communities(args) -> int:
    out = _out_dir(args)
    cfg = _resolve_config(args)
    chash = _write_snapshot(out, cfg)
    g, meta = _load_graph(args)
    if g.has_negative_weights() and not args.project_abs:
        raise DataError("graph carries signed weights: pass --project-abs to run on |W|")
    projected = unsigned_projection(g)
    partition = partition_from_config(cfg, projected)
    q = modularity(projected, partition, cfg.resolution)
    payload = {
        "feature_names": meta.get("feature_names", [f"x{i}" for i in range(g.d)]),
        "modules": [[int(i) for i in mod] for mod in partition.modules()],
        "resolution": cfg.resolution,
        "seed": cfg.seeds.comm,
        "quality": {"Q": q, "mean_conductance": mean_conductance(projected, partition)},
        "config_hash": chash,
    }
    formats.dump_json(out / MODULES_FILE, payload)
    _log(out, f"communities K={partition.K} Q={q:.6f}")
    return 0


def cmd_metrics(args) -> int:
    out = _out_dir(args)
    cfg = _resolve_config(args)
    chash = _write_snapshot(out, cfg)
    phi = _load_phi(args, out)
    labels = _load_labels(args, out)
    g, _ = _load_graph(args) if (getattr(args, "graph", None) or getattr(args, "artifacts", None)) else (None, {})
    partition, _ = _load_partition(Path(args.modules) if args.modules else Path(args.artifacts) / MODULES_FILE)
    run = run_pipeline(cfg, phi) if g is None else None
    graph = g if g is not None else run.graph
    working = working_from_config(cfg, phi)
    projected = unsigned_projection(graph)
    quality = {
        "Q": modularity(projected, partition, cfg.resolution),
        "mean_conductance": mean_conductance(projected, partition),
    }
    msi_value = msi_ci = None
    consensus_path = None
    if args.msi:
        result = msi(phi, cfg, PerturbationScheme(), repetitions=args.msi_reps, seed=cfg.seeds.comm, jobs=args.jobs)
        msi_value = result.msi
        msi_ci = (result.ci_low, result.ci_high)
        formats.write_moiwd(out / CONSENSUS_FILE, result.consensus.values)
        consensus_path = CONSENSUS_FILE
    drops = None
    if (out / DROPS_FILE).exists():
        stored = formats.load_json(out / DROPS_FILE)
        drops = {int(k): float(v) for k, v in stored.get("drops", {}).items()}
    report = build_report(
        graph,
        partition,
        phi,
        working,
        labels=labels,
        ablation_drops=drops,
        msi_value=msi_value,
        msi_ci=msi_ci,
        quality=quality,
        consensus_path=consensus_path,
        bei_eps=cfg.fairness.bei_eps,
        seed=cfg.seeds.comm,
    )
    report["config_hash"] = chash
    formats.dump_json(out / REPORT_FILE, report)
    _log(out, f"metrics K={partition.K}")
    return 0


def cmd_select(args) -> int:
    out = _out_dir(args)
    cfg = _resolve_config(args)
    chash = _write_snapshot(out, cfg)
    phi = _load_phi(args, out)
    report = stability_sweep(
        phi,
        cfg,
        repetitions=args.reps,
        q_floor=args.q_floor,
        seed=cfg.seeds.comm,
        jobs=args.jobs,
    )
    payload = report.to_payload()
    payload["config_hash"] = chash
    formats.dump_json(out / STABILITY_FILE, payload)
    best = report.selected_setting()
    chosen = cfg.with_updates(k=float(best.k), resolution=best.resolution)
    result = msi(phi, chosen, PerturbationScheme(), repetitions=max(args.reps or 10, 10), seed=cfg.seeds.comm, jobs=args.jobs)
    formats.write_moiwd(out / CONSENSUS_FILE, result.consensus.values)
    _log(out, f"select k={best.k} res={best.resolution} msi={best.msi:.4f}")
    return 0


def _policy_from_args(args) -> InterventionPolicy:
    return InterventionPolicy(
        kind=args.policy,
        delta=args.delta,
        donor_k=args.donor_k,
        draws=args.draws,
        seed=args.seed if args.seed is not None else 0,
    )


def cmd_ablate(args) -> int:
    out = _out_dir(args)
    policy = _policy_from_args(args)
    if args.emit_counterfactuals:
        if not args.data or not args.modules:
            raise UsageError("--emit-counterfactuals needs --data and --modules")
        x, names, _ = formats.read_phi_csv(args.data)
        partition, _ = _load_partition(Path(args.modules))
        emit_counterfactuals(x, partition, policy, out, feature_names=names)
        _log(out, f"ablate emit modules={partition.K}")
        return 0
    if args.ingest_predictions:
        manifest_path = Path(args.manifest) if args.manifest else Path(args.ingest_predictions) / "manifest.json"
        if not manifest_path.exists():
            raise DataError(f"manifest not found: {manifest_path}")
        y = _load_y(args)
        drops = ingest_predictions(manifest_path, args.ingest_predictions, metric=args.metric, y=y)
        formats.dump_json(out / DROPS_FILE, {"metric": args.metric, "drops": {str(k): v for k, v in drops.items()}})
        _log(out, "ablate ingest")
        return 0
    if not (args.data and args.model and args.modules):
        raise UsageError("built-in ablation needs --data, --model and --modules")
    x, names, _ = formats.read_phi_csv(args.data)
    model = load_model(args.model)
    partition, _ = _load_partition(Path(args.modules))
    y = _load_y(args)
    drops = {}
    for k, members in enumerate(partition.modules()):
        module_policy = replace(policy, seed=policy.seed ^ k)
        drops[k] = ablation_drop(model, x, y, members, metric=args.metric, policy=module_policy)
    formats.dump_json(out / DROPS_FILE, {"metric": args.metric, "drops": {str(k): v for k, v in drops.items()}})
    if args.synergy:
        pairs = {}
        for a in range(partition.K):
            for b in range(a + 1, partition.K):
                syn = synergy(
                    model,
                    x,
                    y,
                    np.nonzero(partition.assignment == a)[0],
                    np.nonzero(partition.assignment == b)[0],
                    metric=args.metric,
                    policy=policy,
                )
                pairs[f"{a}-{b}"] = syn
        formats.dump_json(out / SYNERGY_FILE, {"metric": args.metric, "synergy": pairs})
    _log(out, "ablate builtin")
    return 0


def _load_y(args):
    labels = _load_labels(args)
    if labels is not None and labels.y is not None:
        return labels.y
    return None


def cmd_synth(args) -> int:
    out = _out_dir(args)
    cfg = _resolve_config(args)
    _write_snapshot(out, cfg)
    sizes = tuple(int(s) for s in args.sizes.split(","))
    interactions = ()
    if args.interactions:
        interactions = tuple(tuple(int(v) for v in pair.split(":")) for pair in args.interactions.split(","))
    weight_scale = tuple(float(v) for v in args.weight_scale.split(",")) if args.weight_scale else None
    spec = SyntheticSpec(
        family=args.family,
        sizes=sizes,
        rho=args.rho,
        snr=args.snr if args.snr > 0 else float("inf"),
        n=args.n,
        seed=args.seed if args.seed is not None else 0,
        interactions=interactions,
        group_shift=args.group_shift,
        group_module=args.group_module,
        weight_scale=weight_scale,
    )
    if spec.family == "environments":
        datasets = gen_environments(spec, args.environments, args.shift)
        for ds in datasets:
            formats.write_phi_csv(out / f"X_env{ds.environment}.csv", ds.x, ds.feature_names)
        dataset = datasets[0]
    else:
        dataset = generate(spec)
    formats.write_phi_csv(out / DATA_FILE, dataset.x, dataset.feature_names)
    formats.dump_json(
        out / TRUTH_FILE,
        {
            "modules": [[int(i) for i in m] for m in dataset.truth.modules()],
            "interactions": [[int(a), int(b)] for a, b in dataset.truth_interactions],
        },
    )
    if args.model == "trees":
        model = fit_tree_ensemble(dataset.x, dataset.y, rounds=args.rounds)
    else:
        model = fit_ridge(dataset.x, dataset.y, lam=args.ridge_lambda)
    save_model(out / MODEL_FILE, model)
    preds = model.predict(dataset.x)
    threshold = float(np.median(preds))
    binary_target = bool(np.isin(dataset.y, (0.0, 1.0)).all())
    if args.model == "trees":
        if dataset.x.shape[1] <= 15:
            phi = exhaustive_shap_matrix(model, dataset.x, dataset.x[: min(64, dataset.x.shape[0])])
        else:
            raise DataError("tree attributions need d <= 15 (exact enumeration)")
    else:
        phi = linear_shap(model, dataset.x, dataset.x)
    save_attributions(out / PHI_FILE, phi, format="moiphi")
    group = dataset.group if dataset.group is not None else tuple("a" for _ in range(spec.n))
    formats.write_label_table(
        out / LABELS_FILE,
        [str(i) for i in range(spec.n)],
        group,
        y=[float(v) for v in dataset.y],
        yhat=[1.0 if p >= threshold else 0.0 for p in preds],
        score=[float(p) for p in preds],
    )
    formats.dump_json(
        out / META_FILE,
        {
            "family": spec.family,
            "decision_threshold": threshold,
            "target": "binary" if binary_target else "continuous",
            "metric": "auroc" if binary_target else "r2",
            "seed": spec.seed,
        },
    )
    _log(out, f"synth family={spec.family} n={spec.n} d={spec.d}")
    return 0


def _render_heatmap_svg(path: Path, values: np.ndarray) -> None:
    """Sequential-scale SVG heatmap; grids beyond 256 cells are block-pooled."""
    d = values.shape[0]
    if d > 256:
        factor = int(np.ceil(d / 256))
        pad = (-d) % factor
        padded = np.pad(values, ((0, pad), (0, pad)))
        m = padded.shape[0] // factor
        values = padded.reshape(m, factor, m, factor).mean(axis=(1, 3))
        d = m
    vmax = float(np.abs(values).max()) or 1.0
    cell = max(2, 512 // d)
    size = cell * d
    rows = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}">']
    for i in range(d):
        for j in range(d):
            frac = abs(float(values[i, j])) / vmax
            shade = int(255 - 255 * frac)
            rows.append(
                f'<rect x="{j * cell}" y="{i * cell}" width="{cell}" height="{cell}" '
                f'fill="rgb({shade},{shade},255)"/>'
            )
    rows.append("</svg>")
    path.write_text("\n".join(rows) + "\n", encoding="utf-8")


def cmd_report(args) -> int:
    out = _out_dir(args)
    args.artifacts = str(out)
    code = cmd_metrics(args)
    if code != 0:
        return code
    phi = _load_phi(args, out)
    g, _ = _load_graph(args)
    partition, _ = _load_partition(out / MODULES_FILE)
    formats.write_graphml(out / GRAPHML_FILE, g.d, g.src, g.dst, g.weight, phi.feature_names, partition.assignment)
    order = heatmap_order(partition, g.strengths)
    dense = g.dense()[np.ix_(order, order)]
    names = [phi.feature_names[i] for i in order]
    with open(out / HEATMAP_CSV, "w", encoding="utf-8") as fh:
        fh.write("feature," + ",".join(names) + "\n")
        for name, row in zip(names, dense):
            fh.write(name + "," + ",".join(repr(float(v)) for v in row) + "\n")
    _render_heatmap_svg(out / HEATMAP_SVG, dense)
    _log(out, "report")
    return 0


def cmd_serve(args) -> int:
    from .serve import run_server

    run_server(Path(args.artifacts), host=args.host, port=args.port, ui_dir=args.ui)
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="moi", description="Feature co-influence modules: build, audit, report.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common_out(p):
        p.add_argument("--out", required=True, help="artifacts directory")
        p.add_argument("--config", help="pipeline config file")

    p = sub.add_parser("ingest", help="validate and store an attribution matrix")
    p.add_argument("--phi", required=True)
    p.add_argument("--labels")
    common_out(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("build-graph", help="dense affinity -> sparse explanation graph")
    p.add_argument("--phi")
    p.add_argument("--artifacts")
    p.add_argument("--edge", choices=["cosine_mag", "pearson", "spearman", "coexceed_freq", "jaccard", "mi_binned"])
    p.add_argument("--sparsifier", choices=["topk", "mutual_topk", "threshold"])
    p.add_argument("--mutual", action="store_true", help="shorthand for --sparsifier mutual_topk")
    p.add_argument("--k", type=float)
    p.add_argument("--degree-norm", dest="degree_norm", type=float)
    p.add_argument("--signed", action="store_true")
    p.add_argument(
        "--significance",
        choices=["auto", "on", "off"],
        default="auto",
        help="permutation/FDR edge filter (auto = on while the pair count stays small)",
    )
    common_out(p)
    p.set_defaults(func=cmd_build_graph)

    p = sub.add_parser("communities", help="detect modules on a graph artifact")
    p.add_argument("--graph", help="W.moiws file or artifacts dir")
    p.add_argument("--artifacts")
    p.add_argument("--algo", choices=["louvain", "leiden"])
    p.add_argument("--res", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--project-abs", dest="project_abs", action="store_true")
    common_out(p)
    p.set_defaults(func=cmd_communities)

    p = sub.add_parser("metrics", help="module summary metrics -> report.json")
    p.add_argument("--phi")
    p.add_argument("--artifacts")
    p.add_argument("--graph")
    p.add_argument("--modules")
    p.add_argument("--labels")
    p.add_argument("--msi", action="store_true")
    p.add_argument("--msi-reps", dest="msi_reps", type=int, default=200)
    p.add_argument("--jobs", type=int, default=1)
    common_out(p)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("select", help="stability sweep over (k, resolution)")
    p.add_argument("--phi")
    p.add_argument("--artifacts")
    p.add_argument("--reps", type=int)
    p.add_argument("--q-floor", dest="q_floor", type=float, default=0.2)
    p.add_argument("--jobs", type=int, default=1)
    common_out(p)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("ablate", help="module ablations: built-in, emit, or ingest")
    p.add_argument("--data")
    p.add_argument("--model")
    p.add_argument("--modules")
    p.add_argument("--labels")
    p.add_argument("--artifacts")
    p.add_argument("--metric", choices=["mean_prediction", "r2", "auroc", "accuracy"], default="mean_prediction")
    p.add_argument("--policy", choices=["hard_marginal", "conditional_knn", "soft_attenuate"], default="hard_marginal")
    p.add_argument("--delta", type=float, default=1.0)
    p.add_argument("--donor-k", dest="donor_k", type=int, default=5)
    p.add_argument("--draws", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--synergy", action="store_true", help="also compute all pairwise synergies")
    p.add_argument("--emit-counterfactuals", dest="emit_counterfactuals", action="store_true")
    p.add_argument("--ingest-predictions", dest="ingest_predictions", help="directory of prediction files")
    p.add_argument("--manifest")
    common_out(p)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("synth", help="generate a planted-module dataset with attributions")
    p.add_argument("--family", choices=["additive", "logical_xor", "cross_module", "environments"], default="additive")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--sizes", default="8,8,8,8")
    p.add_argument("--rho", type=float, default=0.0)
    p.add_argument("--snr", type=float, default=10.0, help="<= 0 means noiseless")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--interactions", help="block pairs like 0:1,2:3")
    p.add_argument("--environments", type=int, default=2)
    p.add_argument("--shift", type=float, default=0.0)
    p.add_argument("--group-shift", dest="group_shift", type=float, default=0.0)
    p.add_argument("--group-module", dest="group_module", type=int, default=0)
    p.add_argument("--weight-scale", dest="weight_scale")
    p.add_argument("--model", choices=["ridge", "trees"], default="ridge")
    p.add_argument("--rounds", type=int, default=150)
    p.add_argument("--ridge-lambda", dest="ridge_lambda", type=float, default=1e-6)
    common_out(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("report", help="report.json + graphml + reordered heatmap")
    p.add_argument("--phi")
    p.add_argument("--graph")
    p.add_argument("--modules")
    p.add_argument("--labels")
    p.add_argument("--msi", action="store_true")
    p.add_argument("--msi-reps", dest="msi_reps", type=int, default=200)
    p.add_argument("--jobs", type=int, default=1)
    common_out(p)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("serve", help="read-only JSON API over an artifacts dir")
    p.add_argument("--artifacts", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8180)
    p.add_argument("--ui", help="static dashboard directory")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 4
    except (FormatError, DataError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
