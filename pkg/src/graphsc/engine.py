"""Play one game against a fixed loss table and account regret with switching costs.

    regret = sum_t loss_t(i_t) + c * #{t >= 2 : i_t != i_{t-1}} - min_k sum_t loss_t(k)

All sums run in ascending round order.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping

import numpy as np

from .adversaries import LossTable, make_adversary
from .errors import ParameterError, ProtocolError
from .graphs import GraphSequence
from .learners import Policy, Revealed, make_policy

RANDOMIZED_ADVERSARIES = ("walk", "split", "bernoulli")


@dataclass(frozen=True)
class GameConfig:
    c: float
    T: int
    graphs: GraphSequence
    policy: str = "threshold_exp3"
    adversary: str = "walk"
    seed: int = 0
    mas_hint: int | None = None
    policy_params: Mapping = field(default_factory=dict)
    adversary_params: Mapping = field(default_factory=dict)
    table: LossTable | None = None

    def __post_init__(self):
        if not self.c > 0:
            raise ParameterError(f"switching cost must be positive, got {self.c}")
        if self.T < 1:
            raise ParameterError(f"T must be at least 1, got {self.T}")
        if len(self.graphs) != self.T:
            raise ParameterError(f"graph sequence has {len(self.graphs)} rounds, expected T={self.T}")
        if self.table is not None and (self.table.T, self.table.K) != (self.T, self.graphs.K):
            raise ParameterError(
                f"loss table is {self.table.T}x{self.table.K}, graphs are {self.T}x{self.graphs.K}"
            )

    @property
    def K(self) -> int:
        return self.graphs.K


@dataclass
class GameTrace:
    actions: np.ndarray
    round_losses: np.ndarray
    switch_flags: np.ndarray
    realized_loss_sum: float
    switch_count: int
    best_fixed_loss: float
    realized_regret: float
    c: float

    @property
    def T(self) -> int:
        return len(self.actions)

    def cumulative(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-round cumulative loss and cumulative switching cost."""
        switched = np.concatenate([[False], self.switch_flags])
        return np.cumsum(self.round_losses), self.c * np.cumsum(switched)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "action", "loss", "switched", "cum_loss", "cum_switch_cost"])
        cum_loss, cum_sw = self.cumulative()
        switched = np.concatenate([[False], self.switch_flags])
        for t in range(self.T):
            w.writerow(
                [t + 1, int(self.actions[t]), repr(float(self.round_losses[t])), int(switched[t]),
                 repr(float(cum_loss[t])), repr(float(cum_sw[t]))]
            )
        return buf.getvalue()

    def write_csv(self, path: str | Path) -> None:
        Path(path).write_text(self.to_csv(), encoding="utf-8")


def account(actions: np.ndarray, losses: np.ndarray, c: float) -> GameTrace:
    T = len(actions)
    round_losses = losses[np.arange(T), actions]
    switch_flags = actions[1:] != actions[:-1]
    loss_sum = float(np.cumsum(round_losses)[-1])
    best = float(np.cumsum(losses, axis=0)[-1].min())
    M = int(switch_flags.sum())
    regret = loss_sum + c * M - best
    return GameTrace(actions, round_losses, switch_flags, loss_sum, M, best, regret, c)


def play(policy: Policy, table: LossTable, graphs: GraphSequence, c: float) -> GameTrace:
    """Run ``policy`` for ``T`` rounds; it only ever sees losses of ``S_t(i_t)``."""
    T, K = table.T, table.K
    if len(graphs) != T or graphs.K != K:
        raise ParameterError(f"graphs ({len(graphs)}x{graphs.K}) do not match loss table ({T}x{K})")
    losses = table.losses
    actions = np.empty(T, dtype=np.intp)
    act, observe = policy.act, policy.observe
    for t in range(1, T + 1):
        g = graphs.graphs[t - 1]
        i = act(t)
        if not 0 <= i < K:
            raise ProtocolError(f"policy {policy.name} chose invalid action {i} at round {t}")
        idx = g.out_arrays[i]
        observe(t, Revealed(idx, losses[t - 1, idx]), g)
        actions[t - 1] = i
    return account(actions, losses, c)


def _seeds(seed: int) -> tuple[int, int]:
    """Independent adversary and policy seeds derived from one run seed."""
    ss = np.random.SeedSequence(int(seed))
    a, p = ss.spawn(2)
    return int(a.generate_state(1)[0]), int(p.generate_state(1)[0])


def _mas_hint(config: GameConfig) -> int:
    if config.mas_hint is not None:
        return int(config.mas_hint)
    from .measures import EXACT_LIMIT, mas_size

    limit = int(config.adversary_params.get("exact_limit", EXACT_LIMIT))
    return min(mas_size(g, limit) for g in config.graphs.unique_graphs)


def build_table(config: GameConfig, seed: int | None = None) -> LossTable:
    adv_seed, _ = _seeds(config.seed if seed is None else seed)
    return make_adversary(
        config.adversary, config.graphs, config.c, adv_seed, table=config.table, **dict(config.adversary_params)
    )


def run_game(config: GameConfig, table: LossTable | None = None) -> GameTrace:
    table = build_table(config) if table is None else table
    _, pol_seed = _seeds(config.seed)
    policy = make_policy(
        config.policy, config.K, config.T, config.c, _mas_hint(config), seed=pol_seed, **dict(config.policy_params)
    )
    return play(policy, table, config.graphs, config.c)


def _run_one(args):
    config, table = args
    return run_game(config, table)


def monte_carlo(config: GameConfig, n_seeds: int, workers: int = 1) -> list[GameTrace]:
    """Traces for seeds ``seed+1 .. seed+n_seeds``.

    Randomized adversaries get a fresh table per seed; otherwise every run
    plays the same table and only the learner's randomness varies.
    """
    if n_seeds < 1:
        raise ParameterError(f"n_seeds must be positive, got {n_seeds}")
    if config.mas_hint is None:
        config = replace(config, mas_hint=_mas_hint(config))
    shared = None if config.adversary in RANDOMIZED_ADVERSARIES else build_table(config)
    jobs = [(replace(config, seed=config.seed + k), shared) for k in range(1, n_seeds + 1)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(_run_one, jobs))
    return [_run_one(j) for j in jobs]


def mean_se(values) -> tuple[float, float]:
    x = np.asarray(values, dtype=float)
    if len(x) < 2:
        raise ParameterError("standard error needs at least two samples")
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(len(x)))


def expected_regret(config: GameConfig, n_seeds: int, workers: int = 1) -> tuple[float, float]:
    """Monte Carlo mean and standard error of the realized regret."""
    if n_seeds < 2:
        raise ParameterError("expected_regret needs n_seeds >= 2 for a standard error")
    traces = monte_carlo(config, n_seeds, workers)
    return mean_se([tr.realized_regret for tr in traces])
