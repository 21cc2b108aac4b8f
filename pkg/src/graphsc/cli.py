"""Command line entry point: ``graphsc <command> ...``.

Exit status is 0 on success, 2 when a bound check fails and 1 on any error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .adversaries import ADVERSARY_KINDS, make_adversary, read_loss_table, write_loss_table
from .engine import run_game
from .errors import GraphscError
from .graphs import resolve_graphs
from .harness import check_bounds, emit_plots, game_config, load_specs, read_sweep_csv, run_sweep
from .measures import EXACT_LIMIT, measure_report

EXIT_OK, EXIT_ERROR, EXIT_BOUND_FAILED = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _emit(args, payload: dict, text: str) -> None:
    print(json.dumps(payload, indent=2, sort_keys=True) if args.json else text)


def cmd_measure(args) -> int:
    seq = resolve_graphs(args.graphs, args.T, args.seed)
    rep = measure_report(seq, exact=not args.approx, exact_limit=args.exact_limit)
    _emit(args, rep.to_dict(per_graph=args.per_graph), rep.format_text())
    return EXIT_OK


def cmd_adversary(args) -> int:
    seq = resolve_graphs(args.graphs, args.T, args.seed)
    table = read_loss_table(args.table) if args.kind == "file" else None
    tab = make_adversary(args.kind, seq, args.c, args.seed, table=table, exact_limit=args.exact_limit)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_loss_table(tab, out)
    info = {"path": str(out), "T": tab.T, "K": tab.K, "best_fixed_action": tab.best_fixed_action()}
    if tab.meta is not None:
        info.update(kind=tab.meta.kind, best_actions=tab.meta.best_actions, blocks=len(tab.meta.blocks))
    _emit(args, info, "\n".join(f"{k}: {v}" for k, v in info.items()))
    return EXIT_OK


def _specs(args):
    specs = load_specs(args.config)
    if args.seed is not None:
        specs = [replace(s, seed=args.seed) for s in specs]
    if args.out is not None:
        specs = [replace(s, out=args.out) for s in specs]
    return specs


def cmd_simulate(args) -> int:
    summary = []
    for spec in _specs(args):
        out = Path(spec.out)
        out.mkdir(parents=True, exist_ok=True)
        for K, c, T in spec.points():
            for pol in spec.policies:
                cfg = game_config(spec, K, c, T, pol)
                tr = run_game(cfg)
                path = out / f"{spec.name}_{pol}_K{cfg.K}_c{c}_T{T}_seed{spec.seed}.csv"
                tr.write_csv(path)
                summary.append({
                    "experiment": spec.name, "policy": pol, "K": cfg.K, "c": c, "T": T,
                    "regret": tr.realized_regret, "switches": tr.switch_count, "trace": str(path),
                })
    text = "\n".join(
        f"{s['experiment']} {s['policy']} K={s['K']} c={s['c']} T={s['T']}: "
        f"regret {s['regret']:.3f}, switches {s['switches']} -> {s['trace']}"
        for s in summary
    )
    _emit(args, {"runs": summary}, text)
    return EXIT_OK


def cmd_sweep(args) -> int:
    written = []
    n_errors = 0
    for spec in _specs(args):
        res = run_sweep(spec, n_seeds=args.seeds, workers=args.workers)
        path, tpath = res.write(Path(spec.out) / f"{spec.name}.csv")
        n_errors += sum(1 for r in res.rows if r.get("error"))
        written.append({"experiment": spec.name, "csv": str(path), "timings": str(tpath), "rows": res.rows})
    text = "\n".join(f"{w['experiment']}: {w['csv']} ({len(w['rows'])} rows)" for w in written)
    if n_errors:
        text += f"\n{n_errors} row(s) failed; see the error column"
    _emit(args, {"sweeps": written}, text)
    return EXIT_OK


def cmd_check_bounds(args) -> int:
    ok = True
    reports = {}
    texts = []
    for spec in _specs(args):
        rep = check_bounds(spec, n_seeds=args.seeds)
        ok &= rep.passed
        reports[spec.name] = rep.to_dict()
        texts.append(rep.format_text())
        if args.out is not None:
            out = Path(spec.out)
            out.mkdir(parents=True, exist_ok=True)
            (out / f"{spec.name}.bounds.json").write_text(json.dumps(reports[spec.name], indent=2), encoding="utf-8")
    _emit(args, {"passed": ok, "experiments": reports}, "\n".join(texts))
    return EXIT_OK if ok else EXIT_BOUND_FAILED


def cmd_plot(args) -> int:
    rows = read_sweep_csv(args.csv)
    out = Path(args.out) if args.out else Path(args.csv).parent
    paths = emit_plots(rows, out, prefix=Path(args.csv).stem + "_")
    _emit(args, {"svg": [str(p) for p in paths]}, "\n".join(map(str, paths)))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="machine-readable output")

    ap = _Parser(prog="graphsc", description="Online learning with feedback graphs and switching costs.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("measure", parents=[common], help="alpha, mas and beta of a graph sequence")
    p.add_argument("--graphs", nargs="+", required=True, help="graph files or generator specs like cliques:K=25,alpha=5")
    p.add_argument("--T", type=int, default=1)
    p.add_argument("--seed", type=int, default=0, help="seed for random graph generators")
    p.add_argument("--approx", action="store_true", help="greedy lower bounds instead of exact values")
    p.add_argument("--exact-limit", type=int, default=EXACT_LIMIT)
    p.add_argument("--per-graph", action="store_true", help="include per-graph lists in JSON output")
    p.set_defaults(func=cmd_measure)

    p = sub.add_parser("adversary", parents=[common], help="build a loss table")
    p.add_argument("--kind", choices=ADVERSARY_KINDS, default="walk")
    p.add_argument("--graphs", nargs="+", required=True)
    p.add_argument("--c", type=float, default=0.35)
    p.add_argument("--T", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--table", help="input loss table for --kind file")
    p.add_argument("--exact-limit", type=int, default=EXACT_LIMIT)
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=cmd_adversary)

    for name, func, help_ in (
        ("simulate", cmd_simulate, "one seeded game per point and policy, with trace CSVs"),
        ("sweep", cmd_sweep, "Monte Carlo sweep to a results CSV"),
        ("check-bounds", cmd_check_bounds, "compare Monte Carlo results with the theorem bounds"),
    ):
        p = sub.add_parser(name, parents=[common], help=help_)
        p.add_argument("config", help="TOML experiment file")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--out", help="override the output directory")
        if name != "simulate":
            p.add_argument("--seeds", type=int, help="override the number of Monte Carlo seeds")
        if name == "sweep":
            p.add_argument("--workers", type=int, help="parallel sweep points")
        p.set_defaults(func=func)

    p = sub.add_parser("plot", parents=[common], help="SVG charts from a sweep CSV")
    p.add_argument("csv")
    p.add_argument("--out", help="output directory (default: next to the CSV)")
    p.set_defaults(func=cmd_plot)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (GraphscError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
