"""Command line entry point: ``ota-consensus --algo compare --out results/``."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .harness import ALGORITHMS, ExperimentSpec, compare_algorithms, emit_csv, prepare, run_experiment
from .network import save_topology
from .pcss import save_pcss


def build_parser():
    p = argparse.ArgumentParser(
        prog="ota-consensus",
        description="Simulate average consensus over non-coherent over-the-air aggregation.",
    )
    p.add_argument("--config", type=Path, help="flat key = value file with ExperimentSpec fields")
    p.add_argument("--algo", choices=[*ALGORITHMS, "compare"], help="algorithm to run (default: compare)")
    p.add_argument("--seed", type=int)
    p.add_argument("--iters", type=int, dest="iterations")
    p.add_argument("--realizations", type=int)
    p.add_argument("--noise-var", type=float, dest="noise_variance")
    p.add_argument("--out", type=Path, default=Path("results"))
    p.add_argument("--topology", help="'generate' or path to a topology CSV written by a previous run")
    p.add_argument("--trajectories", choices=["none", "sampled", "full"])
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def run(args) -> Path:
    overrides = {
        "algorithm": args.algo,
        "seed": args.seed,
        "iterations": args.iterations,
        "realizations": args.realizations,
        "noise_variance": args.noise_variance,
        "topology": args.topology,
        "trajectories": args.trajectories,
    }
    if args.config is not None:
        spec = ExperimentSpec.from_file(args.config, **overrides)
    else:
        spec = ExperimentSpec(**{k: v for k, v in overrides.items() if v is not None})
    if args.algo is None and args.config is None:
        spec = replace(spec, algorithm="compare")

    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    setup = prepare(spec)
    if spec.algorithm == "compare":
        traces = compare_algorithms(spec, setup)
    else:
        traces = [run_experiment(spec, setup)]

    traj_path = out / "trajectories.csv" if spec.trajectories != "none" else None
    emit_csv(traces, out / "metrics.csv", traj_path)
    save_pcss(setup.pcss, out / "pcss.csv")
    save_topology(setup.topology, out / "topology.csv")
    return out


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        out = run(args)
    except Exception as exc:  # one-line diagnostic for any failure
        print(f"ota-consensus: error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote results to {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
