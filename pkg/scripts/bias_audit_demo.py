"""End-to-end fairness audit on a synthetic with a planted proxy module.

Builds the artifacts directory (data, model, attributions, graph,
modules, report), prints the module summary with bias exposure, and
sweeps the soft-attenuation factor on the top-exposure module so the
disparity/performance trade-off is visible. Pass --serve to leave an
HTTP server running for the dashboard.

Usage: python scripts/bias_audit_demo.py --out artifacts/bias_demo [--serve]
"""
import argparse
import subprocess
import sys

import numpy as np

from moi import formats
from moi.serve import ArtifactBundle


def run(*args):
    proc = subprocess.run([sys.executable, "-m", "moi", *map(str, args)], capture_output=True, text=True)
    if proc.returncode != 0:
        sys.stderr.write(proc.stderr)
        raise SystemExit(proc.returncode)


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--out", default="artifacts/bias_demo")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--serve", action="store_true")
    parser.add_argument("--port", type=int, default=8180)
    args = parser.parse_args()

    run(
        "synth", "--family", "additive", "--n", "3000", "--sizes", "8,8,8,8",
        "--rho", "0.5", "--snr", "10", "--seed", args.seed,
        "--group-shift", "2.0", "--group-module", "2", "--weight-scale", "1.0,1.0,0.08,1.0",
        "--out", args.out,
    )
    run("build-graph", "--artifacts", args.out, "--out", args.out)
    run("communities", "--graph", args.out, "--out", args.out)
    run("metrics", "--artifacts", args.out, "--out", args.out)
    run("report", "--out", args.out)

    report = formats.load_json(f"{args.out}/report.json")
    print(f"{'module':>7} {'size':>5} {'avg str':>8} {'RI':>6} {'BEI':>7} {'mean|psi|':>10}")
    for record in report["modules"]:
        print(
            f"M{record['id']:<6} {record['size']:>5} {record['avg_degree']:>8.3f} "
            f"{record['ri']:>6.3f} {record['bei']:>7.3f} {record['mean_abs_psi']:>10.3f}"
        )
    print(f"\ndemographic parity gap: {report['global']['dp_gap']:.4f}")

    bundle = ArtifactBundle(args.out)
    top = max(report["modules"], key=lambda m: m["bei"] or 0.0)["id"]
    print(f"\nattenuating module M{top} (highest bias exposure):")
    print(f"{'delta':>6} {'dp gap':>8} {'metric':>8}")
    for delta in (1.0, 0.8, 0.5, 0.2, 0.0):
        payload = bundle.whatif(top, delta)
        print(f"{delta:>6.1f} {payload['dp_gap_after']:>8.4f} {payload['metric_after']:>8.4f}")

    if args.serve:
        from moi.serve import run_server

        run_server(args.out, port=args.port)


if __name__ == "__main__":
    main()
