"""Command line entry point: ``lanegrid fit|compare|sweep|corpus``.

Exit status is 0 on success, 2 for unusable input or configuration and 3
when no reference candidate yields a feasible plan.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

from .cli_io import (
    InputError,
    ComparisonRow,
    compare_plans,
    emit_plan,
    emit_report_csv,
    emit_svg,
    emit_sweep_csv,
    load_field,
    report_csv,
    sweep_csv,
    write_field,
)
from .config import ConfigError, PlannerConfig
from .corpus import ShapeSpec, default_corpus, generate
from .freeform import fit_freeform
from .geometry import GeometryError
from .headland import FieldError, build_headlands
from .plan import InfeasibleError
from .straights import fit_straights, sweep_headlands

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_INFEASIBLE = 3

log = logging.getLogger("lanegrid")


def _planner_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--width", type=float, default=36.0, metavar="METERS", help="operating width w (default 36)")
    p.add_argument("--epsilon", type=float, default=0.99, metavar="FRAC", help="interpolation confidence (default 0.99)")
    p.add_argument("--max-turn", type=float, default=135.0, metavar="DEG", help="heading change limit (default 135)")
    p.add_argument("--block", type=int, default=20, metavar="N", help="self-proximity index gap (default 20)")
    p.add_argument("--angle-grid", type=float, default=1.0, metavar="DEG", help="straight-lane angle step (default 1)")
    p.add_argument("--workers", type=int, default=1, metavar="N", help="processes for candidate evaluation")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lanegrid",
        description="Fit interior lanes inside a field headland: freeform lanes versus straight lanes.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    fit = sub.add_parser("fit", help="plan one field with one planner")
    fit.add_argument("--input", required=True, metavar="PATH", help="GeoJSON field in planar metres")
    fit.add_argument("--mode", choices=("freeform", "straights", "both"), default="freeform")
    fit.add_argument("--plan", metavar="PATH", help="write the plan as JSON")
    fit.add_argument("--svg", metavar="PATH", help="draw the plan as SVG")
    _planner_flags(fit)

    cmp_ = sub.add_parser("compare", help="run both planners and emit a report row")
    cmp_.add_argument("--input", required=True, metavar="PATH")
    cmp_.add_argument("--mode", choices=("both",), default="both", help=argparse.SUPPRESS)
    cmp_.add_argument("--report", metavar="PATH", help="write the CSV report here instead of stdout")
    cmp_.add_argument("--plan", metavar="PATH", help="write the freeform plan as JSON")
    cmp_.add_argument("--svg", metavar="PATH", help="draw the freeform plan as SVG")
    _planner_flags(cmp_)

    sweep = sub.add_parser("sweep", help="straight-lane count for every rotation angle")
    sweep.add_argument("--input", required=True, metavar="PATH")
    sweep.add_argument("--report", metavar="PATH", help="write angle_deg,n_lanes CSV here instead of stdout")
    _planner_flags(sweep)

    corpus = sub.add_parser("corpus", help="generate the synthetic field corpus as GeoJSON")
    corpus.add_argument("--out", default="corpus", metavar="DIR", help="output directory (default ./corpus)")
    corpus.add_argument("--input", metavar="PATH", help="JSON list of shape specs instead of the built-in corpus")
    corpus.add_argument("--seed", type=int, metavar="N", help="override the jitter seed of every spec")
    corpus.add_argument("--jitter", type=float, metavar="METERS", help="override vertex jitter of every spec")
    corpus.add_argument("--report", metavar="PATH", help="also compare both planners on every field")
    _planner_flags(corpus)
    return parser


def config_from_args(args: argparse.Namespace) -> PlannerConfig:
    if not 0.0 <= args.max_turn <= 180.0:
        raise ConfigError("--max-turn must lie in [0, 180] degrees")
    return PlannerConfig(
        w=args.width,
        epsilon=args.epsilon,
        delta_theta_max=math.radians(args.max_turn),
        delta_k=args.block,
        angle_grid_deg=args.angle_grid,
    )


def _sibling(path: str, tag: str) -> Path:
    p = Path(path)
    return p.with_name(f"{p.stem}.{tag}{p.suffix}")


def _summary(plan) -> str:
    extra = f" at {plan.metadata['angle_deg']:g} deg" if "angle_deg" in plan.metadata else ""
    return f"{plan.planner}: {plan.n_lanes} lanes, {plan.total_length:.1f} m, reference {plan.reference.describe()}{extra}"


def cmd_fit(args, cfg: PlannerConfig) -> int:
    field = load_field(args.input)
    hs = build_headlands(field, cfg)
    plans = []
    if args.mode in ("freeform", "both"):
        plans.append(fit_freeform(field, cfg, workers=args.workers, hs=hs))
    if args.mode in ("straights", "both"):
        plans.append(fit_straights(field, cfg, hs=hs))
    for i, plan in enumerate(plans):
        print(_summary(plan))
        for w in plan.warnings:
            print(f"warning: {w}", file=sys.stderr)
        # with --mode both the straights outputs get a ".straights" tag
        tagged = args.mode == "both" and plan.planner == "straights"
        if args.plan:
            emit_plan(plan, _sibling(args.plan, "straights") if tagged else args.plan)
        if args.svg:
            emit_svg(field, hs, plan, _sibling(args.svg, "straights") if tagged else args.svg)
    return EXIT_OK


def cmd_compare(args, cfg: PlannerConfig) -> int:
    field = load_field(args.input)
    row, _, free = compare_plans(field, cfg, workers=args.workers)
    _emit_rows([row], args.report)
    if args.plan:
        emit_plan(free, args.plan)
    if args.svg:
        emit_svg(field, build_headlands(field, cfg), free, args.svg)
    return EXIT_OK


def _emit_rows(rows: list[ComparisonRow], report: str | None) -> None:
    if report:
        emit_report_csv(rows, report)
    else:
        sys.stdout.write(report_csv(rows))


def cmd_sweep(args, cfg: PlannerConfig) -> int:
    field = load_field(args.input)
    sweep = sweep_headlands(build_headlands(field, cfg), cfg)
    if args.report:
        emit_sweep_csv(sweep, args.report)
        angle, n = sweep.best()
        print(f"best: {n} lanes at {angle:g} deg")
    else:
        sys.stdout.write(sweep_csv(sweep))
    return EXIT_OK


def _load_specs(path: str) -> list[ShapeSpec]:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise InputError("file_not_found", f"{path}: no such file") from None
    except json.JSONDecodeError as exc:
        raise InputError("malformed_json", f"{path}: {exc}") from None
    if not isinstance(doc, list):
        raise InputError("invalid_geojson", f"{path}: expected a JSON list of shape specs")
    try:
        return [ShapeSpec.from_dict(d) for d in doc]
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError("invalid_geojson", f"{path}: bad shape spec ({exc})") from None


def cmd_corpus(args, cfg: PlannerConfig) -> int:
    specs = _load_specs(args.input) if args.input else default_corpus()
    out = Path(args.out)
    rows = []
    for spec in specs:
        d = spec.to_dict()
        if args.seed is not None:
            d["seed"] = args.seed
        if args.jitter is not None:
            d["jitter"] = args.jitter
        spec = ShapeSpec.from_dict(d)
        field = generate(spec)
        target = write_field(field, out / f"{field.name}.geojson")
        print(f"{target}: {field.area_ha:.2f} ha, {len(field.obstacles)} obstacles")
        if args.report:
            rows.append(compare_plans(field, cfg, workers=args.workers)[0])
    if args.report:
        emit_report_csv(rows, args.report)
    return EXIT_OK


COMMANDS = {"fit": cmd_fit, "compare": cmd_compare, "sweep": cmd_sweep, "corpus": cmd_corpus}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = config_from_args(args)
        return COMMANDS[args.command](args, cfg)
    except InputError as exc:
        print(f"input error [{exc.code}]: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ConfigError, FieldError, GeometryError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        for cand, reason in exc.log[:20]:
            print(f"  {cand.describe()}: {reason}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
