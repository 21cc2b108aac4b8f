"""Feedback graphs over K actions and sequences of them.

A directed edge ``i -> j`` means that playing ``i`` reveals the loss of ``j``.
Self-loops are always present: constructors add them silently.
"""

from __future__ import annotations

import re
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import GraphParseError, ParameterError

SEQUENCE_KINDS = ("mab", "clique", "fixed-symmetric", "fixed-directed", "time-varying")


class MissingSelfLoopWarning(UserWarning):
    pass


@dataclass(frozen=True, eq=True)
class FeedbackGraph:
    num_actions: int
    out_neighbors: tuple[frozenset[int], ...]

    def __post_init__(self):
        K = self.num_actions
        if not isinstance(K, (int, np.integer)) or K < 1:
            raise ParameterError(f"number of actions must be a positive integer, got {K!r}")
        if len(self.out_neighbors) != K:
            raise ParameterError(f"expected {K} neighbor sets, got {len(self.out_neighbors)}")
        fixed = []
        for i, nbrs in enumerate(self.out_neighbors):
            nbrs = frozenset(int(j) for j in nbrs)
            bad = [j for j in nbrs if not 0 <= j < K]
            if bad:
                raise ParameterError(f"action {i} has out-neighbors outside [0, {K}): {sorted(bad)}")
            fixed.append(nbrs | {i})
        object.__setattr__(self, "num_actions", int(K))
        object.__setattr__(self, "out_neighbors", tuple(fixed))

    @classmethod
    def from_edges(cls, K: int, edges: Iterable[tuple[int, int]] = ()) -> FeedbackGraph:
        nbrs: list[set[int]] = [set() for _ in range(K)] if K >= 1 else []
        for u, v in edges:
            if not (0 <= u < K and 0 <= v < K):
                raise ParameterError(f"edge ({u}, {v}) out of range for K={K}")
            nbrs[u].add(v)
        return cls(K, tuple(frozenset(s) for s in nbrs))

    @property
    def K(self) -> int:
        return self.num_actions

    def edges(self) -> list[tuple[int, int]]:
        """Non-loop directed edges, sorted."""
        return sorted((i, j) for i, s in enumerate(self.out_neighbors) for j in s if j != i)

    def is_symmetric(self) -> bool:
        return all(i in self.out_neighbors[j] for i, s in enumerate(self.out_neighbors) for j in s)

    def is_mab(self) -> bool:
        return all(len(s) == 1 for s in self.out_neighbors)

    def is_clique(self) -> bool:
        return all(len(s) == self.num_actions for s in self.out_neighbors)

    @cached_property
    def adjacency(self) -> np.ndarray:
        """Float matrix with ``A[j, i] = 1`` iff ``i in S(j)``; ``p @ A`` gives observation probabilities."""
        A = np.zeros((self.num_actions, self.num_actions))
        for j, s in enumerate(self.out_neighbors):
            A[j, sorted(s)] = 1.0
        A.setflags(write=False)
        return A

    @cached_property
    def out_arrays(self) -> tuple[np.ndarray, ...]:
        return tuple(np.array(sorted(s), dtype=np.intp) for s in self.out_neighbors)

    @cached_property
    def out_masks(self) -> tuple[int, ...]:
        """Out-neighborhoods as bitmasks, self-loops removed."""
        return tuple(sum(1 << j for j in s if j != i) for i, s in enumerate(self.out_neighbors))


# ---------------------------------------------------------------------------
# generators


def _rng(seed) -> np.random.Generator:
    return np.random.default_rng(seed)


def generate_graph(kind: str, K: int, params: Mapping | None = None, seed: int | None = None) -> FeedbackGraph:
    """Build a feedback graph of the given ``kind``.

    Supported kinds: ``mab``, ``clique``, ``erdos`` (directed, parameter ``p``),
    ``erdos-symmetric``, ``cliques`` (disjoint union of ``alpha`` cliques),
    ``cycle`` (directed ring) and ``cycle-symmetric``.
    """
    params = dict(params or {})
    if not isinstance(K, (int, np.integer)) or K < 1:
        raise ParameterError(f"K must be a positive integer, got {K!r}")
    K = int(K)
    if kind == "mab":
        return FeedbackGraph.from_edges(K)
    if kind == "clique":
        return FeedbackGraph.from_edges(K, ((i, j) for i in range(K) for j in range(K)))
    if kind in ("erdos", "erdos-symmetric"):
        p = float(params.get("p", 0.5))
        if not 0.0 <= p <= 1.0:
            raise ParameterError(f"edge probability must lie in [0, 1], got {p}")
        rng = _rng(seed)
        if kind == "erdos":
            mask = rng.random((K, K)) < p
            edges = [(i, j) for i in range(K) for j in range(K) if i != j and mask[i, j]]
        else:
            iu, ju = np.triu_indices(K, k=1)
            keep = rng.random(len(iu)) < p
            edges = []
            for i, j in zip(iu[keep], ju[keep]):
                edges += [(int(i), int(j)), (int(j), int(i))]
        return FeedbackGraph.from_edges(K, edges)
    if kind == "cliques":
        alpha = int(params.get("alpha", 1))
        if not 1 <= alpha <= K:
            raise ParameterError(f"alpha must lie in [1, K], got {alpha}")
        return disjoint_cliques(K, alpha)
    if kind in ("cycle", "cycle-symmetric"):
        edges = [(i, (i + 1) % K) for i in range(K)]
        if kind == "cycle-symmetric":
            edges += [(v, u) for u, v in edges]
        return FeedbackGraph.from_edges(K, edges)
    raise ParameterError(f"unknown graph kind {kind!r}")


def disjoint_cliques(K: int, alpha: int) -> FeedbackGraph:
    """Disjoint union of ``alpha`` cliques of size at most ``ceil(K / alpha)``, independence number ``alpha``."""
    size = -(-K // alpha)
    groups = [list(range(s, min(s + size, K))) for s in range(0, K, size)]
    if len(groups) != alpha:
        raise ParameterError(f"cannot split K={K} into {alpha} cliques of size {size}")
    return FeedbackGraph.from_edges(K, ((i, j) for g in groups for i in g for j in g))


def parse_generator_spec(spec: str, seed: int | None = None) -> FeedbackGraph:
    """Parse ``kind:key=value,...``, e.g. ``cliques:K=25,alpha=5`` or ``erdos:K=10,p=0.3``."""
    kind, _, rest = spec.partition(":")
    params: dict[str, float] = {}
    for item in filter(None, (s.strip() for s in rest.split(","))):
        key, eq, value = item.partition("=")
        if not eq:
            raise ParameterError(f"bad generator parameter {item!r} in {spec!r}")
        params[key.strip()] = float(value)
    if "K" not in params:
        raise ParameterError(f"generator spec {spec!r} lacks K")
    K = int(params.pop("K"))
    if "seed" in params:
        seed = int(params.pop("seed"))
    if "alpha" in params:
        params["alpha"] = int(params["alpha"])
    return generate_graph(kind.strip(), K, params, seed)


# ---------------------------------------------------------------------------
# sequences


@dataclass(frozen=True)
class GraphSequence:
    graphs: tuple[FeedbackGraph, ...]
    kind: str
    _unique: tuple[FeedbackGraph, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        graphs = tuple(self.graphs)
        object.__setattr__(self, "graphs", graphs)
        if self.kind not in SEQUENCE_KINDS:
            raise ParameterError(f"unknown sequence kind {self.kind!r}")
        if not graphs:
            raise ParameterError("graph sequence must be non-empty")
        K = graphs[0].num_actions
        if any(g.num_actions != K for g in graphs):
            raise ParameterError("all graphs in a sequence must share the same K")
        unique: dict[FeedbackGraph, None] = {}
        for g in graphs:
            unique.setdefault(g, None)
        uniq = tuple(unique)
        object.__setattr__(self, "_unique", uniq)
        if self.kind != "time-varying" and len(uniq) != 1:
            raise ParameterError(f"kind {self.kind!r} requires identical graphs")
        g = uniq[0]
        if self.kind == "mab" and not g.is_mab():
            raise ParameterError("kind 'mab' requires self-loop-only graphs")
        if self.kind == "clique" and not g.is_clique():
            raise ParameterError("kind 'clique' requires complete graphs")
        if self.kind == "fixed-symmetric" and not g.is_symmetric():
            raise ParameterError("kind 'fixed-symmetric' requires an undirected graph")

    @classmethod
    def fixed(cls, g: FeedbackGraph, T: int) -> GraphSequence:
        """Repeat one graph ``T`` times, tagging the most specific kind."""
        if T < 1:
            raise ParameterError(f"T must be positive, got {T}")
        if g.is_mab():
            kind = "mab"
        elif g.is_clique():
            kind = "clique"
        elif g.is_symmetric():
            kind = "fixed-symmetric"
        else:
            kind = "fixed-directed"
        return cls((g,) * T, kind)

    @classmethod
    def time_varying(cls, graphs: Sequence[FeedbackGraph]) -> GraphSequence:
        return cls(tuple(graphs), "time-varying")

    @classmethod
    def blocks(cls, graphs: Sequence[FeedbackGraph], T: int) -> GraphSequence:
        """Spread ``graphs`` over ``T`` rounds in contiguous, near-equal blocks."""
        m = len(graphs)
        if m == 0:
            raise ParameterError("need at least one graph")
        if m == 1 or len(set(graphs)) == 1:
            return cls.fixed(graphs[0], T)
        if T < m:
            raise ParameterError(f"T={T} is shorter than the number of graphs ({m})")
        return cls.time_varying([graphs[(t * m) // T] for t in range(T)])

    def __len__(self) -> int:
        return len(self.graphs)

    def __getitem__(self, idx):
        return self.graphs[idx]

    def __iter__(self):
        return iter(self.graphs)

    @property
    def K(self) -> int:
        return self.graphs[0].num_actions

    @property
    def T(self) -> int:
        return len(self.graphs)

    @property
    def unique_graphs(self) -> tuple[FeedbackGraph, ...]:
        return self._unique

    def is_fixed(self) -> bool:
        return len(self._unique) == 1

    def subsequence(self, rounds: Iterable[int]) -> GraphSequence:
        """Sub-sequence at 0-based ``rounds``, keeping a fixed kind when it still applies."""
        gs = tuple(self.graphs[t] for t in rounds)
        if len(set(gs)) == 1:
            return GraphSequence.fixed(gs[0], len(gs))
        return GraphSequence.time_varying(gs)

    def measure_report(self, **kwargs):
        from .measures import measure_report

        return measure_report(self, **kwargs)


def union_graph(seq: GraphSequence | Sequence[FeedbackGraph]) -> FeedbackGraph:
    graphs = seq.unique_graphs if isinstance(seq, GraphSequence) else tuple(seq)
    if not graphs:
        raise ParameterError("union of an empty sequence is undefined")
    K = graphs[0].num_actions
    if any(g.num_actions != K for g in graphs):
        raise ParameterError("all graphs must share the same K")
    nbrs = [set() for _ in range(K)]
    for g in graphs:
        for i, s in enumerate(g.out_neighbors):
            nbrs[i] |= s
    return FeedbackGraph(K, tuple(frozenset(s) for s in nbrs))


# ---------------------------------------------------------------------------
# text format

_EDGE_RE = re.compile(r"^(\d+)\s*(->|--)\s*(\d+)$")
_HEADER_RE = re.compile(r"^K\s+(\d+)$")


def parse_graph_file(text: str) -> FeedbackGraph:
    """Parse the edge-list format: a ``K <int>`` header, then ``u -> v`` or ``u -- v`` lines."""
    K = None
    edges: list[tuple[int, int]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _HEADER_RE.match(line)
        if m:
            if K is not None:
                raise GraphParseError(lineno, "duplicate K header")
            K = int(m.group(1))
            if K < 1:
                raise GraphParseError(lineno, "K must be positive")
            continue
        m = _EDGE_RE.match(line)
        if not m:
            raise GraphParseError(lineno, f"malformed line {raw.strip()!r}")
        if K is None:
            raise GraphParseError(lineno, "edge before K header")
        u, op, v = int(m.group(1)), m.group(2), int(m.group(3))
        if u >= K or v >= K:
            raise GraphParseError(lineno, f"action index {max(u, v)} out of range for K={K}")
        edges.append((u, v))
        if op == "--":
            edges.append((v, u))
    if K is None:
        raise GraphParseError(0, "missing K header")
    missing = sorted(set(range(K)) - {u for u, v in edges if u == v})
    if missing:
        warnings.warn(f"inserted missing self-loops for actions {missing}", MissingSelfLoopWarning, stacklevel=2)
    return FeedbackGraph.from_edges(K, edges)


def serialize_graph(g: FeedbackGraph) -> str:
    lines = [f"K {g.num_actions}"]
    for i, s in enumerate(g.out_neighbors):
        lines += [f"{i} -> {j}" for j in sorted(s)]
    return "\n".join(lines) + "\n"


def load_graph(path: str | Path) -> FeedbackGraph:
    return parse_graph_file(Path(path).read_text(encoding="utf-8"))


def resolve_graphs(specs: str | Sequence[str], T: int, seed: int | None = None) -> GraphSequence:
    """Build a sequence from comma-free items that are files or generator specs.

    One item gives a fixed sequence; several are laid out as contiguous blocks.
    """
    if isinstance(specs, str):
        specs = [specs]
    graphs = []
    for s in specs:
        p = Path(s)
        graphs.append(load_graph(p) if p.is_file() else parse_generator_spec(s, seed))
    return GraphSequence.blocks(graphs, T)
