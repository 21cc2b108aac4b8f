"""Numbered acceptance criteria; the terminal summary prints one PASS/FAIL line each."""

from __future__ import annotations

import math

import numpy as np
import pytest

from graphsc.adversaries import fixed_table_adversary, gaussian_walk_adversary, rho_chain
from graphsc.engine import GameConfig, account, run_game
from graphsc.graphs import FeedbackGraph, GraphSequence, generate_graph
from graphsc.harness import ExperimentSpec, exp3sc_regret_bound, fit_regret_exponent, n_star, run_sweep
from graphsc.learners import observation_probs, sample_index
from graphsc.measures import independence_number, independence_sequence, mas_size
from oracles import alpha_brute, beta_by_intersections, mas_brute

C = 0.35
SEEDS = 20


def criterion(n, label):
    return pytest.mark.criterion(n, label)


def pooled(se_a: float, se_b: float) -> float:
    return math.hypot(se_a, se_b)


def by_policy(result, T):
    rows = {r["policy"]: r for r in result.rows if r["T"] == T}
    for r in rows.values():
        assert "error" not in r, r["error"]
    return rows


@pytest.fixture(scope="module")
def figure1():
    spec = ExperimentSpec(
        name="figure1", graph="cliques", K=(25,), alpha=5, c=(C,), T=(20000,),
        policies=("threshold_exp3", "exp3set", "exp3sc"), exact_limit=32, n_seeds=SEEDS,
    )
    return by_policy(run_sweep(spec), 20000)


@pytest.fixture(scope="module")
def figure2():
    spec = ExperimentSpec(
        name="figure2", graph="mab", K=(5,), c=(C,), T=(20000,),
        policies=("threshold_exp3", "batch_exp3"), n_seeds=SEEDS,
    )
    return by_policy(run_sweep(spec), 20000)


# ---------------------------------------------------------------------------


@criterion(1, "beta equals the brute-force common independent set maximum")
def test_beta_oracle():
    rng = np.random.default_rng(20240601)
    for _ in range(200):
        K = int(rng.integers(1, 11))
        T = int(rng.integers(1, 6))
        p = float(rng.choice([0.2, 0.5]))
        gs = [generate_graph("erdos", K, {"p": p}, seed=int(rng.integers(2**31))) for _ in range(T)]
        seq = GraphSequence.time_varying(gs)
        assert independence_sequence(seq) == beta_by_intersections(seq)


@criterion(2, "alpha and mas match subset enumeration")
def test_exact_measures_oracle():
    rng = np.random.default_rng(7)
    for _ in range(100):
        K = int(rng.integers(1, 13))
        g = generate_graph("erdos", K, {"p": float(rng.uniform(0.05, 0.6))}, seed=int(rng.integers(2**31)))
        assert independence_number(g) == alpha_brute(g)
        assert mas_size(g) == mas_brute(g)


@criterion(3, "rho chain length and walk reconstruction")
def test_rho_chain_and_walk():
    for t in range(1, 2**16 + 1):
        assert len(rho_chain(t)) - 1 == bin(t).count("1")
    tab = gaussian_walk_adversary(GraphSequence.fixed(generate_graph("mab", 3), 4096), C, seed=3)
    (b,) = tab.meta.blocks
    W = [0.0] * 4097
    for t in range(1, 4097):
        W[t] = W[t & (t - 1)] + float(b.increments[t - 1])
    assert np.array_equal(np.array(W[1:]), b.walk)


@criterion(4, "walk adversary gaps and in-range frequency")
def test_walk_structure_and_event_frequency():
    seq = GraphSequence.fixed(generate_graph("cliques", 12, {"alpha": 4}), 2000)
    for seed in range(10):
        tab = gaussian_walk_adversary(seq, C, seed=seed)
        (b,) = tab.meta.blocks
        pre = tab.meta.preclip_losses
        X, I = b.best_action, set(b.independent_set)
        is_x = np.arange(12) == X
        outside = np.array([i not in I for i in range(12)])
        expected = b.walk[:, None] + 0.5 - b.eps1 * is_x[None, :] + b.eps2 * outside[None, :]
        assert np.array_equal(pre, expected)
        gap = pre - pre[:, [X]]
        rest = [i for i in I if i != X]
        assert np.allclose(gap[:, rest], b.eps1, rtol=0, atol=1e-12)
        assert np.allclose(gap[:, outside], b.eps1 + b.eps2, rtol=0, atol=1e-12)

    N, n = 2**14, 500
    walk_seq = GraphSequence.fixed(generate_graph("mab", 2), N)
    inside = []
    for seed in range(n):
        (b,) = gaussian_walk_adversary(walk_seq, C, seed=seed).meta.blocks
        level = 0.5 + b.walk
        inside.append(bool(np.all((level >= 1 / 6) & (level <= 5 / 6))))
    freq = float(np.mean(inside))
    se = math.sqrt(freq * (1 - freq) / n)
    assert freq >= 5 / 6 - 3 * se, f"in-range frequency {freq:.4f}, SE {se:.4f}"


@criterion(5, "importance-weighted estimates are unbiased")
@pytest.mark.parametrize(
    "graph",
    [generate_graph("mab", 4), generate_graph("clique", 4), generate_graph("cycle", 3)],
    ids=["mab", "clique", "cycle3"],
)
def test_estimate_unbiasedness(graph: FeedbackGraph):
    K, draws = graph.K, 100_000
    rng = np.random.default_rng(99)
    p = rng.dirichlet(np.ones(K)) * 0.8 + 0.2 / K
    loss = rng.random(K)
    q = observation_probs(p, graph)
    A = graph.adjacency.astype(bool)
    played = np.fromiter((sample_index(p, rng) for _ in range(draws)), dtype=np.intp, count=draws)
    est = np.where(A[played], loss[None, :] / q[None, :], 0.0)
    mean = est.mean(axis=0)
    se = est.std(axis=0, ddof=1) / math.sqrt(draws)
    # the clique estimator has zero variance; allow for summation rounding
    assert np.all(np.abs(mean - loss) <= 3 * se + 1e-10), (mean, loss, se)


@criterion(6, "threshold EXP3 switch count under its bound")
def test_threshold_switch_bound(figure1):
    T, mas = 20000, 5
    bound = 2 * T ** (2 / 3) * C ** (-2 / 3) * mas ** (1 / 3)
    assert bound == pytest.approx(5.1e3, rel=0.01)
    r = figure1["threshold_exp3"]
    assert r["mean_switches"] + 3 * r["se_switches"] <= bound


@criterion(7, "threshold EXP3 beats EXP3 SET; EXP3 SET switches linearly")
def test_figure1_ordering(figure1):
    th, st = figure1["threshold_exp3"], figure1["exp3set"]
    gap = st["mean_regret"] - th["mean_regret"]
    assert gap >= 3 * pooled(th["se_regret"], st["se_regret"]), (th["mean_regret"], st["mean_regret"])
    assert st["mean_switches"] >= 0.1 * 20000


@criterion(8, "threshold EXP3 beats batch EXP3 on MAB and switches more")
def test_figure2_ordering(figure2):
    th, ba = figure2["threshold_exp3"], figure2["batch_exp3"]
    assert th["mean_switches"] > ba["mean_switches"]
    gap = ba["mean_regret"] - th["mean_regret"]
    assert gap >= 3 * pooled(th["se_regret"], ba["se_regret"]), (
        f"threshold {th['mean_regret']:.1f}±{th['se_regret']:.1f}, "
        f"batch {ba['mean_regret']:.1f}±{ba['se_regret']:.1f}"
    )


@criterion(9, "regret exponent of threshold EXP3 near 2/3")
def test_scaling_exponent():
    Ts = (2000, 4000, 8000, 16000, 32000)
    spec = ExperimentSpec(name="scaling", graph="mab", K=(5,), c=(C,), T=Ts, policies=("threshold_exp3",), n_seeds=SEEDS)
    rows = run_sweep(spec).rows
    assert all("error" not in r for r in rows)
    fit = fit_regret_exponent([r["T"] for r in rows], [r["mean_regret"] for r in rows])
    assert 0.55 <= fit.slope <= 0.85, fit


@criterion(10, "EXP3.SC regret under its bound")
def test_exp3sc_bound(figure1):
    T, K, mas = 20000, 25, 5
    ns = 0.5 * mas ** (1 / 3) * T ** (2 / 3) * C ** (1 / 3)
    bound = 1.5 * C ** (4 / 3) * mas ** (1 / 3) * T ** (2 / 3) + 2 * math.log(K) * mas ** (1 / 3) * ns
    assert ns == pytest.approx(n_star(T, C, mas), rel=1e-12)
    assert bound == pytest.approx(exp3sc_regret_bound(T, C, K, [mas] * T), rel=1e-12)
    r = figure1["exp3sc"]
    assert r["mean_regret"] + 3 * r["se_regret"] <= bound


@criterion(11, "engine regret identities")
def test_engine_identities():
    rng = np.random.default_rng(11)
    kinds = ("mab", "clique", "cycle", "erdos", "cliques")
    policies = ("threshold_exp3", "exp3sc", "exp3set", "batch_exp3", "uniform")
    for k in range(50):
        K = int(rng.integers(2, 7))
        T = int(rng.integers(2, 300))
        c = float(rng.uniform(0.01, 2.0))
        kind = kinds[k % len(kinds)]
        g = generate_graph(kind, K, {"p": 0.4, "alpha": 2}, seed=k)
        seq = GraphSequence.fixed(g, T)
        pol = policies[k % len(policies)]
        tr = run_game(GameConfig(c, T, seq, pol, "file", seed=k, table=fixed_table_adversary(rng.random((T, K)))))
        assert tr.realized_regret == tr.realized_loss_sum + c * tr.switch_count - tr.best_fixed_loss
        acted = account(tr.actions, np.zeros((T, K)), c)
        assert acted.realized_regret == c * acted.switch_count
        zero = run_game(GameConfig(c, T, seq, pol, "file", seed=k, table=fixed_table_adversary(np.zeros((T, K)))))
        assert zero.realized_regret == c * zero.switch_count

