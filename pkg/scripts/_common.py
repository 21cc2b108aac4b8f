from __future__ import annotations

import argparse
from dataclasses import replace
from pathlib import Path

from graphsc.harness import emit_plots, load_specs, run_sweep

ROOT = Path(__file__).resolve().parent.parent


def sweep_from_config(name: str, description: str):
    ap = argparse.ArgumentParser(description=description)
    ap.add_argument("--config", default=str(ROOT / "configs" / f"{name}.toml"))
    ap.add_argument("--seeds", type=int)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", default=str(ROOT / "results"))
    args = ap.parse_args()
    results = []
    for spec in load_specs(args.config):
        spec = replace(spec, out=args.out)
        res = run_sweep(spec, n_seeds=args.seeds, workers=args.workers)
        path, _ = res.write(Path(args.out) / f"{spec.name}.csv")
        emit_plots(res.rows, args.out, prefix=spec.name + "_")
        print(f"wrote {path}")
        results.append((spec, res))
    return results


def print_table(rows) -> None:
    print(f"{'policy':<16}{'T':>8}{'regret':>12}{'se':>9}{'switches':>11}")
    for r in rows:
        if r.get("error"):
            print(f"{r['policy']:<16}{r['T']:>8}  error: {r['error']}")
            continue
        print(f"{r['policy']:<16}{r['T']:>8}{r['mean_regret']:>12.2f}{r['se_regret']:>9.2f}{r['mean_switches']:>11.1f}")
