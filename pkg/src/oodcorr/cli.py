"""Command-line interface.

Subcommands::

    oodcorr analyze   --input traces.csv --output-dir out/ [--regressor gam] [--heatmap] [--graph]
    oodcorr summarize --input traces.csv --output-dir out/
    oodcorr simulate  --config synth.json --output traces.csv [--seed N]
    oodcorr oracle    --config synth.json --output truth.csv
    oodcorr render    --result out/partial_corr.json --output-dir out/

Exit codes: 0 success, 1 usage error, 2 input or validation error,
3 numerical failure.  Errors are reported on stderr as ``ClassName: message``.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .errors import ConfigError, InputError, NumericalError
from .export import (RenderSpec, curves_to_csv, dump_result, load_result, matrix_to_csv,
                     matrix_to_dict, render_graph, render_heatmap)
from .ingest import AlignPolicy, align_checkpoints, parse_trace_csv, write_trace_csv
from .partial_corr import average_partial_corr, partial_corr_matrix
from .regressors import Gam, Linear, Ridge
from .summary import CHANCE, format_table_csv, format_table_text, summary_table
from .synth import config_from_dict, ground_truth_partial_corr, simulate

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2, 3
SEED_ENV = "OODCORR_SEED"

log = logging.getLogger("oodcorr")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="oodcorr", description="Partial OOD correlations over finetuning traces.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def traces_args(sp):
        sp.add_argument("--input", required=True, type=Path, help="trace CSV (run,step,dataset,accuracy)")
        sp.add_argument("--in-domain", help="in-domain dataset id (overrides sidecar metadata)")
        sp.add_argument("--label", help="run-set label (overrides sidecar metadata)")
        sp.add_argument("--output-dir", required=True, type=Path)
        sp.add_argument("--align", choices=[a.value for a in AlignPolicy], default="intersect")

    a = sub.add_parser("analyze", help="partial-correlation matrix of a trace file")
    traces_args(a)
    a.add_argument("--regressor", choices=["linear", "ridge", "gam"], default="gam")
    a.add_argument("--ridge-lambda", type=float)
    a.add_argument("--n-basis", type=int)
    a.add_argument("--lambda-min", type=float)
    a.add_argument("--lambda-max", type=float)
    a.add_argument("--lambda-steps", type=int)
    a.add_argument("--per-run", action="store_true",
                   help="fit and correlate each run separately, then average Fisher z")
    a.add_argument("--heatmap", action="store_true", help="also write heatmap.svg")
    a.add_argument("--graph", action="store_true", help="also write graph.dot")
    a.add_argument("--curve-points", type=int, default=101)
    a.add_argument("--seed", type=int, help="accepted for manifest symmetry; analysis is deterministic")

    s = sub.add_parser("summarize", help="mean ± std accuracy table at the best in-domain checkpoint")
    traces_args(s)
    s.add_argument("--chance", type=float, default=CHANCE)

    sim = sub.add_parser("simulate", help="generate a synthetic trace CSV from a config")
    sim.add_argument("--config", required=True, type=Path)
    sim.add_argument("--output", required=True, type=Path)
    sim.add_argument("--seed", type=int)

    o = sub.add_parser("oracle", help="analytic partial-correlation matrix of a config")
    o.add_argument("--config", required=True, type=Path)
    o.add_argument("--output", required=True, type=Path)
    o.add_argument("--format", choices=["csv", "json"], default="csv")
    o.add_argument("--seed", type=int)

    r = sub.add_parser("render", help="heatmap and graph from a saved analysis JSON")
    r.add_argument("--result", required=True, type=Path)
    r.add_argument("--output-dir", required=True, type=Path)
    r.add_argument("--title", default="")
    return p


def regressor_from_args(args):
    gam_flags = {"--n-basis": args.n_basis, "--lambda-min": args.lambda_min,
                 "--lambda-max": args.lambda_max, "--lambda-steps": args.lambda_steps}
    if args.regressor != "ridge" and args.ridge_lambda is not None:
        raise UsageError("--ridge-lambda requires --regressor ridge")
    given = [flag for flag, v in gam_flags.items() if v is not None]
    if args.regressor != "gam" and given:
        raise UsageError(f"{', '.join(given)} require(s) --regressor gam")
    try:
        if args.regressor == "linear":
            return Linear()
        if args.regressor == "ridge":
            return Ridge(1.0 if args.ridge_lambda is None else args.ridge_lambda)
        kwargs = {"n_basis": args.n_basis} if args.n_basis is not None else {}
        return Gam.log_grid(1e-4 if args.lambda_min is None else args.lambda_min,
                            1e6 if args.lambda_max is None else args.lambda_max,
                            40 if args.lambda_steps is None else args.lambda_steps, **kwargs)
    except InputError as e:
        raise UsageError(str(e)) from None


def _load(args):
    runset = parse_trace_csv(args.input, args.in_domain, args.label)
    runset, dropped = align_checkpoints(runset, AlignPolicy(args.align))
    for d in dropped:
        log.info("dropped run=%s step=%d dataset=%s", d.run, d.step, d.dataset)
    return runset


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    print(f"wrote {path}")


def cmd_analyze(args) -> int:
    kind = regressor_from_args(args)
    runset = _load(args)
    result = partial_corr_matrix(runset, kind, per_run=args.per_run)
    out = args.output_dir
    _write(out / "partial_corr.json", dump_result(result, "json"))
    _write(out / "partial_corr.csv", dump_result(result, "csv"))
    if result.per_dataset_models:
        _write(out / "curves.csv", curves_to_csv(result, args.curve_points))
    if args.heatmap:
        _write(out / "heatmap.svg", render_heatmap(result, RenderSpec(title=runset.label)))
    if args.graph:
        _write(out / "graph.dot", render_graph(result))
    avg = average_partial_corr(result)
    print(f"{runset.label}: {len(result.datasets)} OOD datasets, {result.n_points} points, "
          f"regressor={kind.name}, mean partial corr={'undefined' if avg is None else f'{avg:.3f}'}")
    return EXIT_OK


def cmd_summarize(args) -> int:
    table = summary_table(_load(args), chance=args.chance)
    text = format_table_text(table)
    _write(args.output_dir / "summary.txt", text)
    _write(args.output_dir / "summary.csv", format_table_csv(table))
    print(text, end="")
    return EXIT_OK


def _read_config(args):
    try:
        data = json.loads(args.config.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError(f"{args.config}: invalid JSON ({e})") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{args.config}: expected a JSON object")
    if args.seed is not None:
        data["seed"] = args.seed
    elif "seed" not in data and os.environ.get(SEED_ENV):
        try:
            data["seed"] = int(os.environ[SEED_ENV])
        except ValueError:
            raise ConfigError(f"{SEED_ENV} must be an integer") from None
    return config_from_dict(data)


def cmd_simulate(args) -> int:
    sim = simulate(_read_config(args))
    write_trace_csv(sim.runset, args.output)
    print(f"wrote {args.output} ({sim.runset.n_points} checkpoints x "
          f"{len(sim.runset.ood_datasets) + 1} datasets, {sim.n_clipped} clipped)")
    return EXIT_OK


def cmd_oracle(args) -> int:
    truth = ground_truth_partial_corr(_read_config(args))
    if args.format == "csv":
        text = matrix_to_csv(truth)
    else:
        text = json.dumps(matrix_to_dict(truth), sort_keys=True, indent=1) + "\n"
    _write(args.output, text)
    return EXIT_OK


def cmd_render(args) -> int:
    try:
        result = load_result(args.result.read_text(encoding="utf-8"))
    except (json.JSONDecodeError, KeyError, TypeError) as e:
        raise ConfigError(f"{args.result}: not an analysis result ({e})") from None
    _write(args.output_dir / "heatmap.svg", render_heatmap(result, RenderSpec(title=args.title)))
    _write(args.output_dir / "graph.dot", render_graph(result))
    return EXIT_OK


COMMANDS = {"analyze": cmd_analyze, "summarize": cmd_summarize, "simulate": cmd_simulate,
            "oracle": cmd_oracle, "render": cmd_render}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as e:
        print(f"UsageError: {e}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as e:
        print(f"{type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except (InputError, OSError) as e:
        print(f"{type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
