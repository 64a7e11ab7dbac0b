"""Command-line front end.

Subcommands: aggregate, generate-escsub, tune, synthesize, metrics,
evaluate, frontier.  Every sampling command takes an explicit --seed (no
wall-clock defaults), reports carry a provenance comment header, and a
plain-text ``key=value`` config file can preload any flag (flags win).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .errors import SatsynthError, ValidationError
from .evaluation import (
    frontier_point,
    mean_ci_overlap,
    trimmed_mean_pct_diff,
    within_p_percent,
)
from .generator import HistogramSpec, esc_like_spec, generate_table, scaled_spec
from .loglin import all_two_way_terms, fit_loglinear
from .models import CountModelSpec, Family
from .schema import CategoricalSchema
from .synthesis import Provenance, SynthesisJob, SyntheticTable, synthesize
from .table import aggregate_microdata_csv, read_table, write_table
from .taumetrics import tau2_of_table, tau_analytic, tau_empirical
from .tuning import TargetKind, TuningTarget, solve


def _load_config(path: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"config line {lineno}: expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def _apply_config(parser: argparse.ArgumentParser, config: dict[str, str]) -> None:
    for action in parser._actions:  # noqa: SLF001 - argparse has no public hook
        if action.dest in config:
            raw = config[action.dest]
            if isinstance(action, argparse._StoreTrueAction):
                action.default = raw.lower() in ("1", "true", "yes", "on")
            else:
                action.default = action.type(raw) if action.type else raw
            action.required = False


def _provenance_header(args: argparse.Namespace, extra: dict | None = None) -> list[str]:
    items = {"tool": f"satsynth {__version__}", "command": args.command}
    for key in ("family", "sigma", "alpha", "m", "seed", "threads", "k_max", "p_list", "level"):
        if hasattr(args, key) and getattr(args, key) is not None:
            items[key] = getattr(args, key)
    if extra:
        items.update(extra)
    return [f"{k}={v}" for k, v in items.items()]


def _write_report(path: str, header: list[str], rows: list[dict], columns: list[str]) -> None:
    buf = io.StringIO()
    for line in header:
        buf.write(f"# {line}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([row[c] for c in columns])
    Path(path).write_text(buf.getvalue(), encoding="utf-8")
    sidecar = Path(path).with_suffix(Path(path).suffix + ".json")
    sidecar.write_text(
        json.dumps({"provenance": header, "rows": rows}, indent=2), encoding="utf-8"
    )


def _sidecar_path(table_path: Path) -> Path:
    return table_path.with_suffix(table_path.suffix + ".provenance.json")


def _load_synthetic(path: str):
    """A synthetic table plus its provenance sidecar when one sits next to it."""
    table = read_table(path)
    sidecar = _sidecar_path(Path(path))
    if sidecar.exists():
        prov = Provenance.from_json(sidecar.read_text(encoding="utf-8"))
        return SyntheticTable(table, prov)
    return table


# -- commands ------------------------------------------------------------------


def cmd_aggregate(args) -> int:
    schema = CategoricalSchema.from_json(Path(args.schema).read_text(encoding="utf-8"))
    table = aggregate_microdata_csv(args.microdata, schema)
    write_table(table, args.out)
    print(f"aggregated {table.n} records into {table.num_nonzero} nonzero cells "
          f"of {table.num_cells} ({args.out})")
    return 0


def cmd_generate_escsub(args) -> int:
    if args.spec:
        spec = HistogramSpec.from_json(Path(args.spec).read_text(encoding="utf-8"))
    else:
        spec = esc_like_spec()
    if args.cells:
        spec = scaled_spec(spec, args.cells)
    t0 = time.perf_counter()
    table = generate_table(spec, args.seed)
    write_table(table, args.out)
    dt = time.perf_counter() - t0
    print(f"generated {table.num_cells}-cell table, n={table.n}, "
          f"nonzero={table.num_nonzero} in {dt:.1f}s ({args.out})")
    return 0


def cmd_tune(args) -> int:
    table = read_table(args.table)
    dist = tau2_of_table(table)
    kind = TargetKind.MATCH_ZEROS if args.target == "match-zeros" else TargetKind.TAU4_EQUALS
    target = TuningTarget(kind, sigma_star=args.sigma, p=args.p)
    result = solve(dist, args.family, target)
    print(result.to_json())
    return 0


def cmd_synthesize(args) -> int:
    table = read_table(args.table)
    spec = CountModelSpec(args.family, sigma=args.sigma, alpha=args.alpha)
    job = SynthesisJob(spec, master_seed=args.seed, m=args.m)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = Path(args.table).stem
    t0 = time.perf_counter()
    replicates = synthesize(table, job, threads=args.threads, chunk_cells=args.chunk_cells)
    dt = time.perf_counter() - t0
    for rep in replicates:
        path = out_dir / f"{stem}.synth.{args.family}.r{rep.provenance.replicate}.csv"
        write_table(rep.table, str(path))
        _sidecar_path(path).write_text(rep.provenance.to_json(), encoding="utf-8")
    totals = ", ".join(str(r.n_syn) for r in replicates)
    print(f"synthesized m={args.m} replicate(s) of {table.num_cells} cells "
          f"in {dt:.2f}s wall time; n_syn: {totals}")
    return 0


def cmd_metrics(args) -> int:
    table = read_table(args.table)
    synthetics = [_load_synthetic(p) for p in args.synthetic]
    emp = tau_empirical(table, synthetics, k_report=args.k_max)

    family, sigma, alpha = args.family, args.sigma, args.alpha
    if family is None and emp.family is not None:
        family, sigma, alpha = emp.family, emp.sigma, emp.alpha
    if family is None:
        raise ValidationError(
            "no provenance sidecar found; pass --family/--sigma/--alpha for the analytic table"
        )
    ana = tau_analytic(tau2_of_table(table), family, sigma or 0.0, alpha or 0.0, k_report=args.k_max)

    header = _provenance_header(args, {"replicates": len(synthetics)})
    Path(args.out_prefix + ".analytic.csv").write_text(
        ana.to_csv(header), encoding="utf-8"
    )
    Path(args.out_prefix + ".empirical.csv").write_text(
        emp.to_csv(header), encoding="utf-8"
    )
    Path(args.out_prefix + ".analytic.json").write_text(ana.to_json(), encoding="utf-8")
    Path(args.out_prefix + ".empirical.json").write_text(emp.to_json(), encoding="utf-8")
    print(f"wrote {args.out_prefix}.{{analytic,empirical}}.{{csv,json}}")
    return 0


def cmd_evaluate(args) -> int:
    table = read_table(args.table)
    p_list = [float(p) for p in args.p_list.split(",") if p]
    synthetics = [_load_synthetic(p) for p in args.synthetic]
    rows = []
    for block, nonzero_only in (("all", False), ("nonzero", True)):
        accum = {p: 0.0 for p in p_list}
        for syn in synthetics:
            res = within_p_percent(table, syn, p_list, nonzero_only=nonzero_only)
            for p, v in res.items():
                accum[p] += v
        for p in p_list:
            rows.append(
                {"block": block, "p": p, "proportion": accum[p] / len(synthetics)}
            )
    header = _provenance_header(args, {"replicates": len(synthetics)})
    _write_report(args.out, header, rows, ["block", "p", "proportion"])
    print(f"wrote {args.out}")
    return 0


def cmd_frontier(args) -> int:
    table = read_table(args.table)
    variables = args.variables.split(",") if args.variables else list(table.schema.names)
    proj = table.project(variables)
    terms = all_two_way_terms(proj.schema) if len(variables) > 1 else [(variables[0],)]
    base_fit = fit_loglinear(proj, terms, cap=args.cap)
    base_iv = base_fit.intervals(args.level)

    groups: dict[str, list] = {}
    for path in args.synthetic:
        syn = _load_synthetic(path)
        if isinstance(syn, SyntheticTable):
            key = f"{syn.provenance.family} sigma={syn.provenance.sigma:g} alpha={syn.provenance.alpha:g}"
        else:
            key = Path(path).stem
        groups.setdefault(key, []).append(syn)

    rows = []
    for label, group in groups.items():
        overlaps = []
        pct_diffs = []
        for syn in group:
            syn_table = syn.table if isinstance(syn, SyntheticTable) else syn
            fit = fit_loglinear(syn_table.project(variables), terms, cap=args.cap)
            skip = () if args.include_capped else tuple(base_fit.cap_hit | fit.cap_hit)
            overlaps.append(mean_ci_overlap(base_iv, fit.intervals(args.level), skip=skip))
            shared = [t for t in base_fit.coefficients if t not in skip]
            pct_diffs.append(
                trimmed_mean_pct_diff(
                    [base_fit.coefficients[t] for t in shared],
                    [fit.coefficients[t] for t in shared],
                    trim_fraction=args.trim,
                )
            )
        point = frontier_point(table, group, overlaps, label=label)
        row = point.as_row()
        row["trimmed_pct_diff"] = float(np.mean(pct_diffs))
        row["n_overlap_terms"] = len(base_iv)
        rows.append(row)

    header = _provenance_header(args, {"variables": ",".join(variables)})
    _write_report(
        args.out,
        header,
        rows,
        ["label", "utility", "privacy", "utility_raw", "trimmed_pct_diff", "n_overlap_terms"],
    )
    print(f"wrote {args.out} ({len(rows)} point(s))")
    return 0


# -- parser ---------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="satsynth",
        description="Saturated count-model synthesis of sparse categorical tables",
    )
    parser.add_argument("--version", action="version", version=f"satsynth {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_config(p):
        p.add_argument("--config", help="key=value config file; flags override it")

    p = sub.add_parser("aggregate", help="cross-tabulate a microdata CSV")
    add_config(p)
    p.add_argument("--microdata", required=True)
    p.add_argument("--schema", required=True, help="schema JSON file")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_aggregate)

    p = sub.add_parser("generate-escsub", help="generate a table with a target cell-size histogram")
    add_config(p)
    p.add_argument("--spec", help="histogram spec JSON; defaults to the built-in full-scale spec")
    p.add_argument("--cells", type=int, help="rescale the spec to this many cells")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate_escsub)

    p = sub.add_parser("tune", help="solve for the pseudocount hitting a target")
    add_config(p)
    p.add_argument("--table", required=True)
    p.add_argument("--family", required=True, choices=[f.value for f in Family])
    p.add_argument("--sigma", type=float, default=0.0)
    p.add_argument("--target", required=True, choices=["match-zeros", "tau4"])
    p.add_argument("--p", type=float, help="target tau4(1) for --target tau4")
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("synthesize", help="draw synthetic replicates of a table")
    add_config(p)
    p.add_argument("--table", required=True)
    p.add_argument("--family", required=True, choices=[f.value for f in Family])
    p.add_argument("--sigma", type=float, default=0.0)
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--m", type=int, default=1)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--chunk-cells", type=int, default=1 << 20)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("metrics", help="analytic and empirical tau tables")
    add_config(p)
    p.add_argument("--table", required=True)
    p.add_argument("--synthetic", required=True, nargs="+")
    p.add_argument("--family", choices=[f.value for f in Family])
    p.add_argument("--sigma", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--k-max", type=int, default=3)
    p.add_argument("--out-prefix", required=True)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("evaluate", help="within-p%% closeness report")
    add_config(p)
    p.add_argument("--table", required=True)
    p.add_argument("--synthetic", required=True, nargs="+")
    p.add_argument("--p-list", default="0.5,1,5,10,50")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("frontier", help="risk-utility frontier points")
    add_config(p)
    p.add_argument("--table", required=True)
    p.add_argument("--synthetic", required=True, nargs="+")
    p.add_argument("--variables", help="comma list of variables for the utility model")
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--cap", type=float, default=20.0)
    p.add_argument("--trim", type=float, default=0.1,
                   help="trim fraction for the mean percentage difference of estimates")
    p.add_argument("--include-capped", action="store_true",
                   help="keep capped terms in the overlap mean (each contributes 1/2)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_frontier)

    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    if "--config" in argv:
        config_path = argv[argv.index("--config") + 1]
        config = _load_config(config_path)
        for action in parser._subparsers._group_actions[0].choices.values():  # noqa: SLF001
            _apply_config(action, config)
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except SatsynthError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
