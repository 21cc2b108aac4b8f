"""Independence-type measures of feedback graphs and graph sequences.

Vertex sets are int bitmasks internally. For independence, actions ``i`` and
``j`` are adjacent when an edge exists in either direction. ``mas`` is the size
of the largest vertex subset whose induced subgraph (self-loops ignored) is
acyclic.

Exact routines use branch-and-bound that branches on the lowest-index
candidate, include-first, and only accepts strictly larger sets; the first
maximum found is therefore the lexicographically smallest one.
"""

from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass, field

from .errors import MeasureTimeout, ParameterError, UnsupportedSizeError
from .graphs import FeedbackGraph, GraphSequence, union_graph

EXACT_LIMIT = 24
TIME_BUDGET = 60.0


def _bits(mask: int) -> list[int]:
    out = []
    while mask:
        low = mask & -mask
        out.append(low.bit_length() - 1)
        mask ^= low
    return out


def _to_mask(s) -> int:
    m = 0
    for i in s:
        m |= 1 << i
    return m


def undirected_masks(g: FeedbackGraph) -> list[int]:
    out = list(g.out_masks)
    nb = out[:]
    for i, m in enumerate(out):
        for j in _bits(m):
            nb[j] |= 1 << i
    return nb


def mutual_masks(g: FeedbackGraph) -> list[int]:
    out = g.out_masks
    return [sum(1 << j for j in _bits(m) if out[j] >> i & 1) for i, m in enumerate(out)]


class _Budget:
    def __init__(self, seconds: float | None):
        self.deadline = None if seconds is None else time.monotonic() + seconds
        self.ticks = 0

    def tick(self):
        self.ticks += 1
        if self.deadline is not None and not self.ticks & 0x3FF and time.monotonic() > self.deadline:
            raise MeasureTimeout("exact measure exceeded its time budget; use the greedy variants")


def _check_size(g: FeedbackGraph, exact_limit: int):
    if g.num_actions > exact_limit:
        raise UnsupportedSizeError(
            f"K={g.num_actions} exceeds the exact-measure limit {exact_limit}; "
            "use greedy_independent_set / greedy_mas or raise exact_limit"
        )


def _clique_cover_bound(cand: int, nb: list[int]) -> int:
    """Number of cliques in a greedy clique cover of ``cand``; bounds any independent subset."""
    count = 0
    while cand:
        low = cand & -cand
        v = low.bit_length() - 1
        clique_cand = cand & nb[v]
        cand ^= low
        while clique_cand:
            lw = clique_cand & -clique_cand
            u = lw.bit_length() - 1
            cand &= ~lw
            clique_cand &= nb[u]
        count += 1
    return count


def _degree_bound(cand: int, nb: list[int]) -> int:
    n = cand.bit_count()
    degs = [(nb[v] & cand).bit_count() for v in _bits(cand)]
    dmax = max(degs, default=0)
    if dmax == 0:
        return n
    m = sum(degs) // 2
    return n - math.ceil(m / dmax)


# ---------------------------------------------------------------------------
# independence number


def _greedy_independent(nb: list[int], cand: int) -> int:
    chosen = 0
    while cand:
        v = min(_bits(cand), key=lambda u: ((nb[u] & cand).bit_count(), u))
        chosen |= 1 << v
        cand &= ~((1 << v) | nb[v])
    return chosen


def _max_independent(nb: list[int], K: int, budget: _Budget) -> int:
    full = (1 << K) - 1
    greedy_size = _greedy_independent(nb, full).bit_count()
    best_mask = 0
    best_size = greedy_size - 1

    def rec(chosen: int, size: int, cand: int):
        nonlocal best_mask, best_size
        budget.tick()
        if not cand:
            if size > best_size:
                best_mask, best_size = chosen, size
            return
        if size + cand.bit_count() <= best_size:
            return
        if size + min(_clique_cover_bound(cand, nb), _degree_bound(cand, nb)) <= best_size:
            return
        low = cand & -cand
        v = low.bit_length() - 1
        rec(chosen | low, size + 1, cand & ~low & ~nb[v])
        if nb[v] & cand:
            rec(chosen, size, cand & ~low)

    rec(0, 0, full)
    return best_mask


def maximum_independent_set(
    g: FeedbackGraph, exact_limit: int = EXACT_LIMIT, time_budget: float | None = TIME_BUDGET
) -> tuple[int, ...]:
    """Lexicographically smallest maximum independent set."""
    _check_size(g, exact_limit)
    mask = _max_independent(undirected_masks(g), g.num_actions, _Budget(time_budget))
    return tuple(_bits(mask))


def independence_number(g: FeedbackGraph, exact_limit: int = EXACT_LIMIT, time_budget: float | None = TIME_BUDGET) -> int:
    return len(maximum_independent_set(g, exact_limit, time_budget))


def greedy_independent_set(g: FeedbackGraph) -> tuple[int, ...]:
    """Minimum-degree greedy independent set; any K, size at most the exact value."""
    return tuple(_bits(_greedy_independent(undirected_masks(g), (1 << g.num_actions) - 1)))


# ---------------------------------------------------------------------------
# maximum acyclic subgraph


def _closes_cycle(out: list[int], inn: list[int], S: int, v: int) -> bool:
    """Whether adding ``v`` to the acyclic set ``S`` creates a directed cycle."""
    if not inn[v] & S:
        return False
    reached = frontier = out[v] & S
    while frontier:
        if inn[v] & reached:
            return True
        nxt = 0
        for u in _bits(frontier):
            nxt |= out[u]
        frontier = nxt & S & ~reached
        reached |= frontier
    return bool(inn[v] & reached)


def _in_masks(out: list[int]) -> list[int]:
    inn = [0] * len(out)
    for i, m in enumerate(out):
        for j in _bits(m):
            inn[j] |= 1 << i
    return inn


def _max_acyclic(g: FeedbackGraph, budget: _Budget) -> int:
    K = g.num_actions
    out = list(g.out_masks)
    inn = _in_masks(out)
    mutual = mutual_masks(g)
    full = (1 << K) - 1
    greedy_size = _greedy_acyclic(out, inn, K).bit_count()
    best_mask = 0
    best_size = greedy_size - 1
    memo: dict[tuple[int, int], bool] = {}

    def closes(S: int, v: int) -> bool:
        key = (S, v)
        hit = memo.get(key)
        if hit is None:
            if len(memo) > 1 << 20:
                memo.clear()
            hit = memo[key] = _closes_cycle(out, inn, S, v)
        return hit

    def rec(chosen: int, size: int, cand: int):
        nonlocal best_mask, best_size
        budget.tick()
        if not cand:
            if size > best_size:
                best_mask, best_size = chosen, size
            return
        if size + cand.bit_count() <= best_size:
            return
        if size + _clique_cover_bound(cand, mutual) <= best_size:
            return
        low = cand & -cand
        v = low.bit_length() - 1
        rest = cand & ~low
        new = chosen | low
        nxt = rest & ~mutual[v]
        for u in _bits(nxt):
            if closes(new, u):
                nxt &= ~(1 << u)
        rec(new, size + 1, nxt)
        rec(chosen, size, rest)

    rec(0, 0, full)
    return best_mask


def _greedy_acyclic(out: list[int], inn: list[int], K: int) -> int:
    order = sorted(range(K), key=lambda v: ((out[v] | inn[v]).bit_count(), v))
    S = 0
    for v in order:
        if not _closes_cycle(out, inn, S, v):
            S |= 1 << v
    return S


def maximum_acyclic_set(
    g: FeedbackGraph, exact_limit: int = EXACT_LIMIT, time_budget: float | None = TIME_BUDGET
) -> tuple[int, ...]:
    _check_size(g, exact_limit)
    return tuple(_bits(_max_acyclic(g, _Budget(time_budget))))


def mas_size(g: FeedbackGraph, exact_limit: int = EXACT_LIMIT, time_budget: float | None = TIME_BUDGET) -> int:
    return len(maximum_acyclic_set(g, exact_limit, time_budget))


def greedy_mas(g: FeedbackGraph) -> tuple[int, ...]:
    out = list(g.out_masks)
    return tuple(_bits(_greedy_acyclic(out, _in_masks(out), g.num_actions)))


def is_independent(g: FeedbackGraph, actions) -> bool:
    nb = undirected_masks(g)
    m = _to_mask(actions)
    return all(not nb[i] & m for i in _bits(m))


def is_acyclic(g: FeedbackGraph, actions) -> bool:
    out = list(g.out_masks)
    inn = _in_masks(out)
    S = 0
    for v in sorted(actions):
        if _closes_cycle(out, inn, S, v):
            return False
        S |= 1 << v
    return True


# ---------------------------------------------------------------------------
# sequences


def independence_sequence(
    seq: GraphSequence, exact_limit: int = EXACT_LIMIT, time_budget: float | None = TIME_BUDGET
) -> tuple[int, tuple[int, ...]]:
    """Independence sequence number and its lexicographically smallest witness.

    A set independent in every graph is exactly an independent set of the edge
    union, so this is one maximum-independent-set call on ``union_graph(seq)``.
    """
    if len(seq) == 0:
        raise ParameterError("empty graph sequence")
    witness = maximum_independent_set(union_graph(seq), exact_limit, time_budget)
    return len(witness), witness


@dataclass
class MeasureReport:
    K: int
    T: int
    alpha_per_graph: list[int]
    mas_per_graph: list[int]
    mas_sorted_desc: list[int]
    beta: int
    independence_sequence_set: tuple[int, ...]
    approximate: bool = False

    @property
    def mas_min(self) -> int:
        return self.mas_sorted_desc[-1]

    def to_dict(self, per_graph: bool = True) -> dict:
        d = {
            "K": self.K,
            "T": self.T,
            "beta": self.beta,
            "independence_sequence_set": list(self.independence_sequence_set),
            "approximate": self.approximate,
            "alpha_min": min(self.alpha_per_graph),
            "mas_max": self.mas_sorted_desc[0],
            "mas_min": self.mas_min,
        }
        if per_graph:
            d["alpha_per_graph"] = list(self.alpha_per_graph)
            d["mas_per_graph"] = list(self.mas_per_graph)
            d["mas_sorted_desc"] = list(self.mas_sorted_desc)
        return d

    def format_text(self) -> str:
        rows = [
            ("K", self.K),
            ("T", self.T),
            ("beta", self.beta),
            ("independence set", " ".join(map(str, self.independence_sequence_set))),
            ("alpha per graph", _compact(self.alpha_per_graph)),
            ("mas per graph", _compact(self.mas_per_graph)),
            ("mas sorted desc", _compact(self.mas_sorted_desc)),
            ("approximate", "yes" if self.approximate else "no"),
        ]
        width = max(len(k) for k, _ in rows)
        return "\n".join(f"{k:<{width}}  {v}" for k, v in rows)


def _compact(values: list[int]) -> str:
    if len(values) > 12 and len(set(values)) == 1:
        return f"{values[0]} (x{len(values)})"
    if len(values) > 12:
        return " ".join(map(str, values[:12])) + f" ... ({len(values)} values)"
    return " ".join(map(str, values))


def measure_report(
    seq: GraphSequence,
    exact: bool = True,
    exact_limit: int = EXACT_LIMIT,
    time_budget: float | None = TIME_BUDGET,
) -> MeasureReport:
    uniq = seq.unique_graphs
    if exact:
        alphas = {g: independence_number(g, exact_limit, time_budget) for g in uniq}
        mases = {g: mas_size(g, exact_limit, time_budget) for g in uniq}
        beta, witness = independence_sequence(seq, exact_limit, time_budget)
    else:
        alphas = {g: len(greedy_independent_set(g)) for g in uniq}
        mases = {g: len(greedy_mas(g)) for g in uniq}
        witness = greedy_independent_set(union_graph(seq))
        beta = len(witness)
    lookup = {id(g): g for g in uniq}
    per = [lookup.get(id(g), g) for g in seq.graphs]
    alpha_list = [alphas[g] for g in per]
    mas_list = [mases[g] for g in per]
    return MeasureReport(
        K=seq.K,
        T=len(seq),
        alpha_per_graph=alpha_list,
        mas_per_graph=mas_list,
        mas_sorted_desc=sorted(mas_list, reverse=True),
        beta=beta,
        independence_sequence_set=witness,
        approximate=not exact,
    )


# ---------------------------------------------------------------------------
# greedy split of a sequence into contiguous blocks


def lower_bound_length_ok(N: int, beta: int, c: float) -> bool:
    """Block-length condition for the lower-bound construction: N >= 27 c log2(N)^{3/2} / beta^2."""
    return N >= 2 and N >= 27.0 * c * math.log2(N) ** 1.5 / beta**2


@dataclass
class SplitResult:
    blocks: list[range]
    betas: list[int]
    objective: float
    c: float = field(repr=False, default=1.0)

    @property
    def sizes(self) -> list[int]:
        return [len(b) for b in self.blocks]


def split_objective(betas, sizes, c: float, T: int | None = None) -> float:
    """c^{1/3} * sum beta_m^{1/3} N_m^{2/3} / log T (the log divisor is dropped when T < 2)."""
    T = sum(sizes) if T is None else T
    total = sum(b ** (1 / 3) * n ** (2 / 3) for b, n in zip(betas, sizes))
    scale = c ** (1 / 3) / (math.log(T) if T >= 2 else 1.0)
    return scale * total


class _BlockBeta:
    """Cached beta of any block, keyed by the set of distinct graphs it contains."""

    def __init__(self, seq: GraphSequence, exact_limit: int, time_budget: float | None):
        uniq = seq.unique_graphs
        index = {g: k for k, g in enumerate(uniq)}
        by_id: dict[int, int] = {}
        ids = []
        for g in seq.graphs:
            k = by_id.get(id(g))
            if k is None:
                k = by_id[id(g)] = index[g]
            ids.append(k)
        self.ids = ids
        self.uniq = uniq
        self.cache: dict[frozenset, int] = {}
        self.exact_limit = exact_limit
        self.time_budget = time_budget

    def __call__(self, key: frozenset) -> int:
        b = self.cache.get(key)
        if b is None:
            g = union_graph([self.uniq[k] for k in sorted(key)])
            b = self.cache[key] = independence_number(g, self.exact_limit, self.time_budget)
        return b

    def block(self, a: int, b: int) -> int:
        return self(frozenset(self.ids[a:b]))


def greedy_sequence_split(
    seq: GraphSequence,
    c: float,
    feasible_only: bool = False,
    min_block: int = 1,
    exact_limit: int = EXACT_LIMIT,
    time_budget: float | None = TIME_BUDGET,
) -> SplitResult:
    """Greedy split-point insertion over contiguous time blocks.

    Starting from the single block ``[0, T)``, repeatedly insert the split
    point with the largest objective gain and stop when no insertion has a
    positive gain. The objective is additive over blocks, so each block keeps
    its own best candidate in a heap and only the two halves of a split block
    are rescanned.

    With ``feasible_only`` a split is admissible only if both halves satisfy
    the lower-bound construction's preconditions (beta > 1 and the block
    length condition); ``min_block`` bounds the half lengths from below.
    """
    if len(seq) == 0:
        raise ParameterError("empty graph sequence")
    if c <= 0:
        raise ParameterError(f"switching cost must be positive, got {c}")
    T = len(seq)
    bb = _BlockBeta(seq, exact_limit, time_budget)
    ids = bb.ids
    min_block = max(1, int(min_block), 2 if feasible_only else 1)

    def f(beta: int, n: int) -> float:
        return beta ** (1 / 3) * n ** (2 / 3)

    def admissible(beta: int, n: int) -> bool:
        if n < min_block:
            return False
        return not feasible_only or (beta > 1 and lower_bound_length_ok(n, beta, c))

    def best_split(a: int, b: int, beta_ab: int):
        n = b - a
        if n < 2 * min_block:
            return None
        right_keys = [None] * (n + 1)
        acc: set[int] = set()
        key = frozenset()
        for s in range(b - 1, a, -1):
            if ids[s] not in acc:
                acc.add(ids[s])
                key = frozenset(acc)
            right_keys[s - a] = key
        base = f(beta_ab, n)
        best = None
        acc = set()
        key = frozenset()
        for s in range(a + 1, b):
            if ids[s - 1] not in acc:
                acc.add(ids[s - 1])
                key = frozenset(acc)
            nl, nr = s - a, b - s
            if nl < min_block or nr < min_block:
                continue
            bl, br = bb(key), bb(right_keys[s - a])
            if not (admissible(bl, nl) and admissible(br, nr)):
                continue
            gain = f(bl, nl) + f(br, nr) - base
            if gain > 0 and (best is None or gain > best[0]):
                best = (gain, s, bl, br)
        return best

    blocks: dict[int, tuple[int, int]] = {0: (T, bb.block(0, T))}
    heap: list = []

    def push(a: int):
        b, beta = blocks[a]
        cand = best_split(a, b, beta)
        if cand is not None:
            gain, s, bl, br = cand
            heapq.heappush(heap, (-gain, s, a, bl, br))

    push(0)
    while heap:
        _, s, a, bl, br = heapq.heappop(heap)
        b, _ = blocks[a]
        blocks[a] = (s, bl)
        blocks[s] = (b, br)
        push(a)
        push(s)

    starts = sorted(blocks)
    ranges = [range(a, blocks[a][0]) for a in starts]
    betas = [blocks[a][1] for a in starts]
    return SplitResult(ranges, betas, split_objective(betas, [len(r) for r in ranges], c, T), c)
