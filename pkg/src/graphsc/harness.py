"""Config-driven sweeps, theorem-bound checks, exponent fits and SVG charts.

Config files are TOML restricted to flat key/value sections. Each ``[section]``
is one experiment; keys above the first section are defaults shared by all of
them. Values are scalars or arrays of scalars::

    seeds = 20

    [figure1]
    graph = "cliques"     # any generator kind, or graphs = ["file.txt", ...]
    K = 25
    alpha = 5
    c = 0.35
    T = [20000]
    policies = ["threshold_exp3", "exp3set"]
    adversary = "walk"
    exact_limit = 32
"""

from __future__ import annotations

import csv
import io
import math
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Iterable, NamedTuple, Sequence

import numpy as np
import tomli

from .adversaries import ADVERSARY_KINDS, read_loss_table
from .engine import GameConfig, mean_se, monte_carlo
from .errors import EmptyInputError, FitError, FormatError, GraphscError, ParameterError, PreconditionError
from .graphs import GraphSequence, generate_graph, resolve_graphs
from .learners import POLICIES
from .measures import EXACT_LIMIT, MeasureReport, measure_report

SWEEP_COLUMNS = (
    "experiment", "policy", "K", "c", "T", "n_seeds",
    "mean_regret", "se_regret", "mean_switches", "se_switches", "error",
)
TIMING_COLUMNS = ("experiment", "policy", "K", "c", "T", "wall_time_s")

_KEYS = {
    "graph", "graphs", "K", "alpha", "p", "graph_seed", "c", "T", "policies", "seeds",
    "seed", "adversary", "table", "exact_limit", "exact", "workers", "out",
}


def _as_list(v) -> list:
    return list(v) if isinstance(v, list) else [v]


@dataclass(frozen=True)
class ExperimentSpec:
    name: str
    T: tuple[int, ...]
    policies: tuple[str, ...]
    c: tuple[float, ...] = (0.35,)
    K: tuple[int, ...] = (5,)
    graph: str = "mab"
    graphs: tuple[str, ...] = ()
    alpha: int | None = None
    p: float | None = None
    graph_seed: int = 0
    n_seeds: int = 20
    seed: int = 0
    adversary: str = "walk"
    table: str | None = None
    exact_limit: int = EXACT_LIMIT
    exact: bool = True
    workers: int = 1
    out: str = "results"

    def __post_init__(self):
        if not self.policies:
            raise ParameterError(f"{self.name}: empty policy list")
        for pol in self.policies:
            if pol not in POLICIES:
                raise ParameterError(f"{self.name}: unknown policy {pol!r}")
        if not self.T or not self.c or not self.K:
            raise ParameterError(f"{self.name}: sweep axes T, c and K must be non-empty")
        if any(b <= a for a, b in zip(self.T, self.T[1:])):
            raise ParameterError(f"{self.name}: T grid must be strictly increasing, got {list(self.T)}")
        if min(self.T) < 1:
            raise ParameterError(f"{self.name}: T values must be positive")
        if min(self.c) <= 0:
            raise ParameterError(f"{self.name}: switching costs must be positive")
        if self.n_seeds < 2:
            raise ParameterError(f"{self.name}: need at least 2 seeds for a standard error")
        if self.adversary not in ADVERSARY_KINDS:
            raise ParameterError(f"{self.name}: unknown adversary {self.adversary!r}")
        if self.adversary == "file" and not self.table:
            raise ParameterError(f"{self.name}: adversary 'file' needs a table path")

    @classmethod
    def from_mapping(cls, name: str, d: dict[str, Any]) -> ExperimentSpec:
        unknown = set(d) - _KEYS
        if unknown:
            raise FormatError(f"{name}: unknown keys {sorted(unknown)}")
        for key, v in d.items():
            if isinstance(v, dict) or (isinstance(v, list) and any(isinstance(x, (dict, list)) for x in v)):
                raise FormatError(f"{name}: key {key!r} is nested; only scalars and flat arrays are allowed")
        if "T" not in d or "policies" not in d:
            raise FormatError(f"{name}: keys 'T' and 'policies' are required")
        kw: dict[str, Any] = dict(
            name=name,
            T=tuple(int(x) for x in _as_list(d["T"])),
            policies=tuple(str(x) for x in _as_list(d["policies"])),
        )
        if "c" in d:
            kw["c"] = tuple(float(x) for x in _as_list(d["c"]))
        if "K" in d:
            kw["K"] = tuple(int(x) for x in _as_list(d["K"]))
        if "graphs" in d:
            kw["graphs"] = tuple(str(x) for x in _as_list(d["graphs"]))
        if "seeds" in d:
            kw["n_seeds"] = int(d["seeds"])
        for key in ("graph", "adversary", "table", "out"):
            if key in d:
                kw[key] = str(d[key])
        for key in ("alpha", "graph_seed", "seed", "exact_limit", "workers"):
            if key in d:
                kw[key] = int(d[key])
        if "p" in d:
            kw["p"] = float(d["p"])
        if "exact" in d:
            kw["exact"] = bool(d["exact"])
        return cls(**kw)

    def points(self) -> list[tuple[int, float, int]]:
        """Sweep points ``(K, c, T)`` in row order."""
        Ks = (None,) if self.graphs else self.K
        return [(K, c, T) for K in Ks for c in self.c for T in self.T]

    def graph_sequence(self, K: int | None, T: int) -> GraphSequence:
        if self.graphs:
            return resolve_graphs(list(self.graphs), T, self.graph_seed)
        params = {k: v for k, v in (("alpha", self.alpha), ("p", self.p)) if v is not None}
        return GraphSequence.fixed(generate_graph(self.graph, K, params, self.graph_seed), T)


def parse_specs(text: str, default_name: str = "experiment") -> list[ExperimentSpec]:
    try:
        doc = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise FormatError(f"bad config: {exc}") from exc
    defaults = {k: v for k, v in doc.items() if not isinstance(v, dict)}
    sections = {k: v for k, v in doc.items() if isinstance(v, dict)}
    if not sections:
        return [ExperimentSpec.from_mapping(default_name, defaults)]
    return [ExperimentSpec.from_mapping(name, {**defaults, **body}) for name, body in sections.items()]


def load_specs(path: str | Path) -> list[ExperimentSpec]:
    path = Path(path)
    return parse_specs(path.read_text(encoding="utf-8"), path.stem)


def game_config(spec: ExperimentSpec, K: int | None, c: float, T: int, policy: str, mas_hint: int | None = None) -> GameConfig:
    seq = spec.graph_sequence(K, T)
    table = read_loss_table(spec.table) if spec.adversary == "file" else None
    return GameConfig(
        c=c, T=T, graphs=seq, policy=policy, adversary=spec.adversary, seed=spec.seed,
        mas_hint=mas_hint, table=table, adversary_params={"exact_limit": spec.exact_limit},
    )


# ---------------------------------------------------------------------------
# sweep


@dataclass
class SweepResult:
    rows: list[dict]
    timings: list[dict]

    def to_csv(self) -> str:
        return _write_rows(SWEEP_COLUMNS, self.rows)

    def timings_csv(self) -> str:
        return _write_rows(TIMING_COLUMNS, self.timings)

    def write(self, path: str | Path) -> tuple[Path, Path]:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_csv(), encoding="utf-8")
        tpath = path.with_name(path.stem + ".timings.csv")
        tpath.write_text(self.timings_csv(), encoding="utf-8")
        return path, tpath


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write_rows(columns: Sequence[str], rows: Iterable[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r.get(k)) for k in columns])
    return buf.getvalue()


def _run_point(args) -> tuple[dict, float]:
    spec, K, c, T, policy, n_seeds = args
    start = time.perf_counter()
    row: dict[str, Any] = {"experiment": spec.name, "policy": policy, "K": K, "c": c, "T": T, "n_seeds": n_seeds}
    try:
        cfg = game_config(spec, K, c, T, policy)
        row["K"] = cfg.K
        traces = monte_carlo(cfg, n_seeds)
        row["mean_regret"], row["se_regret"] = mean_se([tr.realized_regret for tr in traces])
        row["mean_switches"], row["se_switches"] = mean_se([float(tr.switch_count) for tr in traces])
    except (GraphscError, OSError) as exc:
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row, time.perf_counter() - start


def run_sweep(spec: ExperimentSpec, n_seeds: int | None = None, workers: int | None = None) -> SweepResult:
    """One row per (K, c, T, policy), in that nesting order."""
    n = spec.n_seeds if n_seeds is None else int(n_seeds)
    if n < 2:
        raise ParameterError("a sweep needs at least 2 seeds")
    jobs = [(spec, K, c, T, pol, n) for K, c, T in spec.points() for pol in spec.policies]
    workers = spec.workers if workers is None else workers
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            out = list(ex.map(_run_point, jobs))
    else:
        out = [_run_point(j) for j in jobs]
    rows = [r for r, _ in out]
    timings = [
        {**{k: r[k] for k in TIMING_COLUMNS[:-1]}, "wall_time_s": round(dt, 6)} for r, dt in out
    ]
    return SweepResult(rows, timings)


def read_sweep_csv(path: str | Path) -> list[dict]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


# ---------------------------------------------------------------------------
# exponent fit


class FitResult(NamedTuple):
    slope: float
    intercept: float
    r2: float


def fit_regret_exponent(Ts: Sequence[float], regrets: Sequence[float]) -> FitResult:
    """Least-squares line through ``(log T, log regret)``."""
    Ts = np.asarray(Ts, dtype=float)
    regrets = np.asarray(regrets, dtype=float)
    if Ts.shape != regrets.shape:
        raise FitError(f"{len(Ts)} T values but {len(regrets)} regrets")
    keep = regrets > 0
    if not keep.all():
        warnings.warn(f"dropping {int((~keep).sum())} non-positive regret points from the fit", stacklevel=2)
    x, y = np.log(Ts[keep]), np.log(regrets[keep])
    if len(x) < 4:
        raise FitError(f"need at least 4 positive points, have {len(x)}")
    A = np.stack([x, np.ones_like(x)], axis=1)
    (slope, intercept), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - (slope * x + intercept)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - float((resid**2).sum()) / ss_tot if ss_tot > 0 else 1.0
    return FitResult(float(slope), float(intercept), r2)


# ---------------------------------------------------------------------------
# theorem bounds


def t_star(T: int, c: float, mas: int) -> int:
    return math.ceil(T ** (2 / 3) * c ** (-2 / 3) * mas ** (1 / 3))


def n_star(T: int, c: float, mas: int) -> float:
    return 0.5 * mas ** (1 / 3) * T ** (2 / 3) * c ** (1 / 3)


def top_sum(sorted_desc: Sequence[int], n: float) -> float:
    """Sum of the ``n`` largest values; a fractional ``n`` takes that share of the next one."""
    n = min(max(n, 0.0), len(sorted_desc))
    k = int(math.floor(n))
    s = float(sum(sorted_desc[:k]))
    if k < len(sorted_desc):
        s += (n - k) * sorted_desc[k]
    return s


def switch_bound(T: int, c: float, mas: int) -> float:
    return 2 * T ** (2 / 3) * c ** (-2 / 3) * mas ** (1 / 3)


def threshold_regret_bound(T: int, c: float, K: int, mas_sorted_desc: Sequence[int]) -> float:
    mas = mas_sorted_desc[-1]
    head = 3 * T ** (2 / 3) * c ** (1 / 3) * mas ** (1 / 3)
    e = math.e
    return head + e * c * math.log(K) / (2 * (e - 1) * mas) * top_sum(mas_sorted_desc, t_star(T, c, mas))


def symmetric_regret_bound(T: int, c: float, K: int, alpha: int) -> float:
    return 4 * T ** (2 / 3) * c ** (1 / 3) * alpha ** (1 / 3) * math.log(K)


def exp3sc_regret_bound(T: int, c: float, K: int, mas_sorted_desc: Sequence[int]) -> float:
    mas = mas_sorted_desc[-1]
    head = 1.5 * c ** (4 / 3) * mas ** (1 / 3) * T ** (2 / 3)
    return head + 2 * math.log(K) / mas ** (2 / 3) * top_sum(mas_sorted_desc, n_star(T, c, mas))


@dataclass
class BoundCheck:
    name: str
    empirical_mean: float
    empirical_se: float
    bound: float

    @property
    def upper_confidence(self) -> float:
        return self.empirical_mean + 3 * self.empirical_se

    @property
    def margin(self) -> float:
        return self.bound - self.upper_confidence

    @property
    def passed(self) -> bool:
        return self.upper_confidence <= self.bound


@dataclass
class BoundRow:
    experiment: str
    policy: str
    K: int
    c: float
    T: int
    n_seeds: int
    mas: int
    alpha: int
    t_star: int
    n_star: float
    switch_bound: float
    threshold_regret_bound: float
    symmetric_regret_bound: float | None
    exp3sc_regret_bound: float
    mean_regret: float
    se_regret: float
    mean_switches: float
    se_switches: float
    checks: list[BoundCheck] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(ch.passed for ch in self.checks)


@dataclass
class BoundReport:
    rows: list[BoundRow]

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    def to_dict(self) -> dict:
        out = []
        for r in self.rows:
            d = asdict(r)
            d["checks"] = [
                {**asdict(ch), "upper_confidence": ch.upper_confidence, "margin": ch.margin, "passed": ch.passed}
                for ch in r.checks
            ]
            d["passed"] = r.passed
            out.append(d)
        return {"passed": self.passed, "rows": out}

    def format_text(self) -> str:
        lines = []
        for r in self.rows:
            lines.append(f"[{r.experiment}] {r.policy} K={r.K} c={r.c} T={r.T} seeds={r.n_seeds} mas={r.mas} alpha={r.alpha}")
            lines.append(f"  t*={r.t_star} n*={r.n_star:.4f}")
            lines.append(f"  regret {r.mean_regret:.3f} +- {r.se_regret:.3f}, switches {r.mean_switches:.1f} +- {r.se_switches:.1f}")
            for ch in r.checks:
                verdict = "PASS" if ch.passed else "FAIL"
                lines.append(f"  {verdict} {ch.name}: {ch.upper_confidence:.3f} <= {ch.bound:.3f} (margin {ch.margin:.3f})")
            if not r.checks:
                lines.append("  no bound applies to this policy")
        return "\n".join(lines)


def bound_row(spec: ExperimentSpec, K: int | None, c: float, T: int, policy: str,
              report: MeasureReport, n_seeds: int) -> BoundRow:
    mas_desc = report.mas_sorted_desc
    mas = mas_desc[-1]
    alpha = report.alpha_per_graph[0]
    cfg = game_config(spec, K, c, T, policy, mas_hint=mas)
    symmetric = cfg.graphs.is_fixed and cfg.graphs.graphs[0].is_symmetric
    traces = monte_carlo(cfg, n_seeds)
    mr, sr = mean_se([tr.realized_regret for tr in traces])
    ms, ss = mean_se([float(tr.switch_count) for tr in traces])
    row = BoundRow(
        experiment=spec.name, policy=policy, K=cfg.K, c=c, T=T, n_seeds=n_seeds, mas=mas, alpha=alpha,
        t_star=t_star(T, c, mas), n_star=n_star(T, c, mas),
        switch_bound=switch_bound(T, c, mas),
        threshold_regret_bound=threshold_regret_bound(T, c, cfg.K, mas_desc),
        symmetric_regret_bound=symmetric_regret_bound(T, c, cfg.K, alpha) if symmetric else None,
        exp3sc_regret_bound=exp3sc_regret_bound(T, c, cfg.K, mas_desc),
        mean_regret=mr, se_regret=sr, mean_switches=ms, se_switches=ss,
    )
    if policy == "threshold_exp3":
        row.checks.append(BoundCheck("switches", ms, ss, row.switch_bound))
        row.checks.append(BoundCheck("regret", mr, sr, row.threshold_regret_bound))
        if row.symmetric_regret_bound is not None:
            row.checks.append(BoundCheck("regret (symmetric)", mr, sr, row.symmetric_regret_bound))
    elif policy == "exp3sc":
        row.checks.append(BoundCheck("regret", mr, sr, row.exp3sc_regret_bound))
    return row


def check_bounds(spec: ExperimentSpec, n_seeds: int | None = None) -> BoundReport:
    """Monte Carlo upper confidence bounds against the theorem values, one row per point and policy."""
    if not spec.exact:
        raise PreconditionError(f"{spec.name}: bound checks need exact measures; set exact = true")
    n = spec.n_seeds if n_seeds is None else int(n_seeds)
    rows = []
    for K, c, T in spec.points():
        report = measure_report(spec.graph_sequence(K, T), exact=True, exact_limit=spec.exact_limit)
        for pol in spec.policies:
            rows.append(bound_row(spec, K, c, T, pol, report, n))
    return BoundReport(rows)


# ---------------------------------------------------------------------------
# SVG charts

_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f")
PLOT_COLUMNS = ("policy", "T", "mean_regret", "mean_switches")


def axis_range(values: Sequence[float], margin: float = 0.05) -> tuple[float, float]:
    lo, hi = float(min(values)), float(max(values))
    span = hi - lo
    if span == 0:
        span = abs(lo) if lo else 1.0
    return lo - margin * span, hi + margin * span


def _series(rows: list[dict], column: str) -> dict[str, list[tuple[float, float]]]:
    multi = len({(r.get("experiment"), r.get("K"), r.get("c")) for r in rows}) > 1
    out: dict[str, list[tuple[float, float]]] = {}
    for r in rows:
        if r.get("error") or r.get(column) in (None, ""):
            continue
        label = r["policy"]
        if multi:
            label += f" ({r.get('experiment')}, K={r.get('K')}, c={r.get('c')})"
        out.setdefault(label, []).append((float(r["T"]), float(r[column])))
    return {k: sorted(v) for k, v in out.items()}


def render_svg(series: dict[str, list[tuple[float, float]]], title: str, ylabel: str,
               width: int = 640, height: int = 420) -> str:
    if not series:
        raise EmptyInputError("nothing to plot")
    xs = [x for pts in series.values() for x, _ in pts]
    ys = [y for pts in series.values() for _, y in pts]
    x0, x1 = axis_range(xs)
    y0, y1 = axis_range(ys)
    left, right, top, bottom = 70, 20, 40, 50
    pw, ph = width - left - right, height - top - bottom

    def sx(x):
        return left + (x - x0) / (x1 - x0) * pw

    def sy(y):
        return top + ph - (y - y0) / (y1 - y0) * ph

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" data-xmin="{x0!r}" data-xmax="{x1!r}" data-ymin="{y0!r}" data-ymax="{y1!r}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="22" text-anchor="middle" font-size="15">{title}</text>',
        f'<rect class="plot-area" x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for k in range(5):
        xv = x0 + (x1 - x0) * (k + 0.5) / 5
        yv = y0 + (y1 - y0) * (k + 0.5) / 5
        parts.append(f'<text x="{sx(xv):.1f}" y="{top + ph + 18}" text-anchor="middle" font-size="11">{xv:.4g}</text>')
        parts.append(f'<text x="{left - 6}" y="{sy(yv) + 4:.1f}" text-anchor="end" font-size="11">{yv:.4g}</text>')
    parts.append(f'<text x="{left + pw / 2:.1f}" y="{height - 10}" text-anchor="middle" font-size="12">T</text>')
    parts.append(
        f'<text x="16" y="{top + ph / 2:.1f}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 16 {top + ph / 2:.1f})">{ylabel}</text>'
    )
    legend = ['<g class="legend">']
    for n, (label, pts) in enumerate(series.items()):
        color = _PALETTE[n % len(_PALETTE)]
        coords = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in pts)
        parts.append(f'<polyline class="series" data-label="{label}" points="{coords}" fill="none" stroke="{color}" stroke-width="2"/>')
        for x, y in pts:
            parts.append(f'<circle cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="3" fill="{color}"/>')
        ly = top + 14 + 16 * n
        legend.append(f'<line x1="{left + 10}" y1="{ly}" x2="{left + 30}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        legend.append(f'<text x="{left + 36}" y="{ly + 4}" font-size="11">{label}</text>')
    legend.append("</g>")
    parts += legend
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def emit_plots(rows: list[dict], out_dir: str | Path, prefix: str = "") -> list[Path]:
    """Write ``regret_vs_T.svg`` and ``switches_vs_T.svg``; one series per policy."""
    if not rows:
        raise EmptyInputError("result table is empty")
    missing = [c for c in PLOT_COLUMNS if c not in rows[0]]
    if missing:
        raise FormatError(f"result table lacks columns {missing}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for column, name, ylabel in (
        ("mean_regret", "regret_vs_T", "mean regret"),
        ("mean_switches", "switches_vs_T", "mean switches"),
    ):
        path = out_dir / f"{prefix}{name}.svg"
        path.write_text(render_svg(_series(rows, column), name.replace("_", " "), ylabel), encoding="utf-8")
        written.append(path)
    return written
