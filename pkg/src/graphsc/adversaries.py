"""Oblivious adversaries: fixed loss tables in [0, 1]^{T x K}.

The Gaussian-walk construction draws a hidden best action ``X`` from the
independence sequence set, then sets for every round ``t`` and action ``i``

    loss = clip(W_t + 0.5 - eps1 * [i == X] + eps2 * [i not in I])

where ``W_t = W_{rho(t)} + y_t`` and ``rho`` clears the lowest set bit of ``t``.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import FormatError, ParameterError, PreconditionError
from .graphs import GraphSequence
from .measures import EXACT_LIMIT, greedy_sequence_split, independence_sequence

ADVERSARY_KINDS = ("walk", "split", "bernoulli", "file")


class SmallHorizonWarning(UserWarning):
    pass


def delta(t: int) -> int:
    """Exponent of the largest power of two dividing ``t``."""
    if t < 1:
        raise ParameterError(f"delta is defined for t >= 1, got {t}")
    return (t & -t).bit_length() - 1


def rho(t: int) -> int:
    """``t - 2**delta(t)``: ``t`` with its lowest set bit cleared."""
    if t < 1:
        raise ParameterError(f"rho is defined for t >= 1, got {t}")
    return t & (t - 1)


def rho_chain(t: int) -> list[int]:
    chain = [t]
    while t:
        t = rho(t)
        chain.append(t)
    return chain


def multiscale_walk(increments: np.ndarray) -> np.ndarray:
    """``W[1..N]`` from ``y[1..N]`` (passed 0-based), with ``W_0 = 0``."""
    N = len(increments)
    W = np.zeros(N + 1)
    for t in range(1, N + 1):
        W[t] = W[t & (t - 1)] + increments[t - 1]
    return W[1:]


def clip(a):
    return np.minimum(np.maximum(a, 0.0), 1.0)


@dataclass
class WalkBlock:
    """One application of the walk construction to a set of rounds."""

    rounds: np.ndarray
    best_action: int
    independent_set: tuple[int, ...]
    eps1: float
    eps2: float
    sigma: float
    increments: np.ndarray
    walk: np.ndarray


@dataclass
class AdversaryMeta:
    kind: str
    preclip_losses: np.ndarray | None = None
    blocks: list[WalkBlock] = field(default_factory=list)
    best_action: int | None = None
    eps: float | None = None
    independent_set: tuple[int, ...] = ()

    @property
    def best_actions(self) -> list[int]:
        return [b.best_action for b in self.blocks] if self.blocks else [self.best_action]

    def to_json(self) -> dict:
        d = {"kind": self.kind, "best_actions": self.best_actions}
        if self.eps is not None:
            d["eps"] = self.eps
            d["independent_set"] = list(self.independent_set)
        d["blocks"] = [
            {
                "rounds": [int(r) + 1 for r in b.rounds],
                "best_action": b.best_action,
                "independent_set": list(b.independent_set),
                "eps1": b.eps1,
                "eps2": b.eps2,
                "sigma": b.sigma,
                "increments": b.increments.tolist(),
                "walk": b.walk.tolist(),
            }
            for b in self.blocks
        ]
        return d

    @classmethod
    def from_json(cls, d: dict, losses: np.ndarray) -> AdversaryMeta:
        T, K = losses.shape
        blocks = [
            WalkBlock(
                rounds=np.array(b["rounds"], dtype=np.intp) - 1,
                best_action=int(b["best_action"]),
                independent_set=tuple(b["independent_set"]),
                eps1=float(b["eps1"]),
                eps2=float(b["eps2"]),
                sigma=float(b["sigma"]),
                increments=np.array(b["increments"], dtype=float),
                walk=np.array(b["walk"], dtype=float),
            )
            for b in d.get("blocks", [])
        ]
        meta = cls(kind=d["kind"], blocks=blocks)
        if "eps" in d:
            meta.eps = float(d["eps"])
            meta.independent_set = tuple(d["independent_set"])
            meta.best_action = int(d["best_actions"][0])
        if blocks:
            meta.preclip_losses = np.empty((T, K))
            for b in blocks:
                meta.preclip_losses[b.rounds] = _walk_losses(K, b)
        return meta


@dataclass
class LossTable:
    losses: np.ndarray
    meta: AdversaryMeta | None = None

    def __post_init__(self):
        self.losses = np.asarray(self.losses, dtype=float)
        if self.losses.ndim != 2 or 0 in self.losses.shape:
            raise ParameterError(f"loss table must be a non-empty T x K array, got shape {self.losses.shape}")
        bad = ~((self.losses >= 0.0) & (self.losses <= 1.0))
        if bad.any():
            t, i = map(int, np.argwhere(bad)[0])
            raise ParameterError(f"loss at round {t + 1}, action {i} is {self.losses[t, i]!r}, outside [0, 1]")
        self.losses.setflags(write=False)

    @property
    def T(self) -> int:
        return self.losses.shape[0]

    @property
    def K(self) -> int:
        return self.losses.shape[1]

    def best_fixed_action(self) -> int:
        return int(np.argmin(np.cumsum(self.losses, axis=0)[-1]))


def _check_horizon(N: int, beta: int, c: float):
    if N < 27.0 * c * math.log2(N) ** 1.5 / beta**2:
        warnings.warn(
            f"horizon {N} is below 27 c log2(N)^1.5 / beta^2 for beta={beta}, c={c}; the gap may be clip-unsafe",
            SmallHorizonWarning,
            stacklevel=3,
        )


def _walk_losses(K: int, b: WalkBlock) -> np.ndarray:
    offsets = np.zeros(K)
    outside = np.ones(K, dtype=bool)
    outside[list(b.independent_set)] = False
    offsets[outside] = b.eps2
    offsets[b.best_action] = -b.eps1
    return (b.walk[:, None] + 0.5) + offsets[None, :]


def walk_parameters(beta: int, c: float, N: int) -> tuple[float, float]:
    """``(eps, sigma)`` of the walk construction, both using log2."""
    lg = math.log2(N)
    return c ** (1 / 3) * beta ** (1 / 3) * N ** (-1 / 3) / (9 * lg), 1 / (9 * lg)


def _block_rng(seed: int, m: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(m),)))


def _walk_block(seq: GraphSequence, rounds: np.ndarray, c: float, rng: np.random.Generator, label: str, exact_limit: int):
    N = len(rounds)
    if N < 2:
        raise PreconditionError(f"{label} has {N} round(s); the walk construction needs at least 2")
    sub = seq if N == len(seq) else seq.subsequence(rounds)
    beta, iset = independence_sequence(sub, exact_limit=exact_limit)
    if beta <= 1:
        raise PreconditionError(f"{label}: independence sequence number is {beta}; the construction requires beta > 1")
    _check_horizon(N, beta, c)
    eps, sigma = walk_parameters(beta, c, N)
    X = int(iset[rng.integers(len(iset))])
    y = rng.normal(0.0, sigma, N)
    return WalkBlock(rounds, X, iset, eps, eps, sigma, y, multiscale_walk(y))


def gaussian_walk_adversary(
    seq: GraphSequence, c: float, T: int | None = None, seed: int = 0, exact_limit: int = EXACT_LIMIT
) -> LossTable:
    T = len(seq) if T is None else T
    return split_adversary(seq, c, T, seed, [range(T)], exact_limit=exact_limit, kind="walk")


def split_adversary(
    seq: GraphSequence,
    c: float,
    T: int | None = None,
    seed: int = 0,
    split: Sequence[Sequence[int]] | None = None,
    exact_limit: int = EXACT_LIMIT,
    kind: str = "split",
) -> LossTable:
    """Apply the walk construction independently on each block of ``split``.

    Blocks are 0-based round index sets partitioning ``[0, T)``; by default the
    feasible greedy split is used. Block ``m`` draws from its own child seed.
    """
    T = len(seq) if T is None else T
    if T != len(seq):
        raise ParameterError(f"T={T} does not match the graph sequence length {len(seq)}")
    if c <= 0:
        raise ParameterError(f"switching cost must be positive, got {c}")
    if split is None:
        split = greedy_sequence_split(seq, c, feasible_only=True, exact_limit=exact_limit).blocks
    rows = [np.asarray(sorted(b), dtype=np.intp) for b in split]
    covered = np.concatenate(rows) if rows else np.array([], dtype=np.intp)
    if len(covered) != T or not np.array_equal(np.sort(covered), np.arange(T)):
        raise ParameterError("split must partition the rounds 0..T-1")
    K = seq.K
    preclip = np.empty((T, K))
    blocks = []
    for m, rounds in enumerate(rows):
        b = _walk_block(seq, rounds, c, _block_rng(seed, m), f"block {m}", exact_limit)
        preclip[rounds] = _walk_losses(K, b)
        blocks.append(b)
    return LossTable(clip(preclip), AdversaryMeta(kind=kind, preclip_losses=preclip, blocks=blocks))


def bernoulli_adversary(seq: GraphSequence, seed: int = 0, exact_limit: int = EXACT_LIMIT) -> LossTable:
    """Hidden arm ~ Bernoulli(0.5 - eps), eps = sqrt(beta / T); other independent arms ~ Bernoulli(0.5); the rest lose 1."""
    T, K = len(seq), seq.K
    beta, iset = independence_sequence(seq, exact_limit=exact_limit)
    eps = math.sqrt(beta / T)
    if eps > 0.5:
        raise ParameterError(f"eps = sqrt(beta/T) = {eps:.3f} exceeds 0.5; need T >= 4 beta")
    rng = np.random.default_rng(seed)
    j = int(iset[rng.integers(len(iset))])
    losses = np.ones((T, K))
    u = rng.random((T, len(iset)))
    for col, i in enumerate(iset):
        p = 0.5 - eps if i == j else 0.5
        losses[:, i] = (u[:, col] < p).astype(float)
    return LossTable(losses, AdversaryMeta(kind="bernoulli", best_action=j, eps=eps, independent_set=iset))


def fixed_table_adversary(losses) -> LossTable:
    return LossTable(np.array(losses, dtype=float))


def make_adversary(kind: str, seq: GraphSequence, c: float, seed: int, table: LossTable | None = None, **params) -> LossTable:
    exact_limit = int(params.get("exact_limit", EXACT_LIMIT))
    if kind == "walk":
        return gaussian_walk_adversary(seq, c, len(seq), seed, exact_limit=exact_limit)
    if kind == "split":
        return split_adversary(seq, c, len(seq), seed, params.get("split"), exact_limit=exact_limit)
    if kind == "bernoulli":
        return bernoulli_adversary(seq, seed, exact_limit=exact_limit)
    if kind == "file":
        if table is None:
            raise ParameterError("adversary kind 'file' needs a loss table")
        return table
    raise ParameterError(f"unknown adversary kind {kind!r}; expected one of {ADVERSARY_KINDS}")


# ---------------------------------------------------------------------------
# CSV / JSON


def meta_path(path: str | Path) -> Path:
    path = Path(path)
    return path.with_name(path.stem + ".meta.json")


def write_loss_table(table: LossTable, path: str | Path) -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "i", "loss"])
        for t, row in enumerate(table.losses, start=1):
            for i, v in enumerate(row.tolist()):
                w.writerow([t, i, repr(v)])
    if table.meta is not None:
        meta_path(path).write_text(json.dumps(table.meta.to_json()), encoding="utf-8")


def read_loss_table(path: str | Path) -> LossTable:
    path = Path(path)
    entries: dict[tuple[int, int], float] = {}
    with path.open(newline="", encoding="utf-8") as fh:
        r = csv.reader(fh)
        header = next(r, None)
        if header != ["t", "i", "loss"]:
            raise FormatError(f"{path}: expected header 't,i,loss', got {header}")
        for lineno, row in enumerate(r, start=2):
            if not row:
                continue
            try:
                t, i, v = int(row[0]), int(row[1]), float(row[2])
            except (ValueError, IndexError) as exc:
                raise FormatError(f"{path}:{lineno}: bad row {row}") from exc
            if t < 1 or i < 0:
                raise FormatError(f"{path}:{lineno}: bad indices t={t}, i={i}")
            entries[(t, i)] = v
    if not entries:
        raise FormatError(f"{path}: empty loss table")
    T = max(t for t, _ in entries)
    K = max(i for _, i in entries) + 1
    if len(entries) != T * K:
        raise FormatError(f"{path}: table is incomplete ({len(entries)} of {T * K} entries)")
    losses = np.empty((T, K))
    for (t, i), v in entries.items():
        losses[t - 1, i] = v
    mp = meta_path(path)
    meta = AdversaryMeta.from_json(json.loads(mp.read_text(encoding="utf-8")), losses) if mp.exists() else None
    return LossTable(losses, meta)
