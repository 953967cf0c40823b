"""Command-line entry points.

Exit codes: 0 success, 1 configuration error, 2 data error, 3 every
sweep cell failed to solve.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .data import CsvSchema, DataError, export_csv, roundtrip_schema
from .harness import ConfigError, ExperimentConfig, emit_results, load_model, run_experiment
from .metrics import BenefitKind, benefit, disparity, group_mean_distance
from .synthgen import SynthConfig, gen_eop_dataset, gen_sp_dataset

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DATA = 2
EXIT_ALL_FAILED = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lossfair",
        description="Fairness-constrained logistic classifiers with loss-averse updates.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute a sweep described by a JSON config")
    run.add_argument("--config", required=True, help="path to the experiment config")
    run.add_argument("--output-dir", default=None, help="override the config's output directory")

    gen = sub.add_parser("gen", help="write a synthetic dataset to CSV")
    gen.add_argument("--dataset", required=True, choices=("sp", "eop"))
    gen.add_argument("--n", required=True, type=int)
    gen.add_argument("--seed", required=True, type=int)
    gen.add_argument("--out", required=True)
    gen.add_argument("--phi", type=float, default=None, help="rotation angle (sp only)")

    audit = sub.add_parser("audit", help="compare a trained model against a status quo")
    audit.add_argument("--model", required=True)
    audit.add_argument("--sqo", required=True)
    audit.add_argument("--data", required=True)
    audit.add_argument("--schema", required=True)
    return parser


def _cmd_run(args) -> int:
    cfg = ExperimentConfig.from_json(args.config)
    out_dir = args.output_dir or cfg.output_dir
    if out_dir is None:
        raise ConfigError("no output directory: set output_dir in the config or pass --output-dir")
    result = run_experiment(cfg)
    paths = emit_results(result, out_dir)
    n_optimal = sum(1 for r in result.records if r.counts_toward_aggregate())
    print(f"wrote {paths['records']}")
    print(f"wrote {paths['aggregates']}")
    print(f"wrote {paths['summary']}")
    print(f"{len(result.records)} cells, {n_optimal} aggregated")
    if not result.any_optimal():
        print("error: no cell reached an Optimal solve", file=sys.stderr)
        return EXIT_ALL_FAILED
    return EXIT_OK


def _cmd_gen(args) -> int:
    if args.n <= 0:
        raise ConfigError("--n must be positive")
    if args.dataset == "sp":
        cfg = (
            SynthConfig(args.n, args.seed)
            if args.phi is None
            else SynthConfig(args.n, args.seed, args.phi)
        )
        ds = gen_sp_dataset(cfg)
    else:
        if args.phi is not None:
            raise ConfigError("--phi only applies to the sp dataset")
        ds = gen_eop_dataset(SynthConfig(args.n, args.seed))
    out = Path(args.out)
    export_csv(ds, out)
    schema_path = out.with_suffix(".schema.json")
    roundtrip_schema(ds).to_file(schema_path)
    print(f"wrote {out}")
    print(f"wrote {schema_path}")
    return EXIT_OK


def _cmd_audit(args) -> int:
    from .data import load_csv

    model, model_tag = load_model(args.model)
    sqo, sqo_tag = load_model(args.sqo)
    schema = CsvSchema.from_file(args.schema)
    ds = load_csv(args.data, schema)
    if model.dim != ds.dim or sqo.dim != ds.dim:
        raise DataError(
            f"model dimensions ({model.dim}, {sqo.dim}) do not match data dimension {ds.dim}"
        )

    report: dict = {
        "data": str(args.data),
        "model_tag": model_tag,
        "sqo_tag": sqo_tag,
        "benefits": {},
        "loss_averse": {},
    }
    for kind in BenefitKind:
        entry: dict = {}
        for name, mdl in (("model", model), ("sqo", sqo)):
            b0 = benefit(mdl, ds, kind, 0)
            b1 = benefit(mdl, ds, kind, 1)
            entry[name] = {"z0": b0, "z1": b1, "disparity": abs(b0 - b1)}
        report["benefits"][kind.value] = entry
        gate = {}
        for group in (0, 1):
            new = group_mean_distance(model, ds, kind, group)
            old = group_mean_distance(sqo, ds, kind, group)
            gate[f"z{group}"] = {
                "mean_distance": new,
                "sqo_mean_distance": old,
                "gain": new - old,
            }
        report["loss_averse"][kind.value] = gate
    json.dump(report, sys.stdout, indent=2, sort_keys=True)
    print()
    return EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {"run": _cmd_run, "gen": _cmd_gen, "audit": _cmd_audit}
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
