"""Learner policies for graph feedback with switching costs.

Every policy follows the same round protocol::

    i_t = policy.act(t)
    policy.observe(t, revealed, graph)   # revealed: losses of S_t(i_t) only

``graph`` is the round-``t`` feedback graph, handed over after the action
(uninformed setting). It is needed to form observation probabilities
``q_i = sum_{j : i in S_t(j)} p_j``.
"""

from __future__ import annotations

import math
from typing import Callable, NamedTuple

import numpy as np

from .errors import ParameterError, ProtocolError
from .graphs import FeedbackGraph

ESTIMATE_CAP = 1e300


class Revealed(NamedTuple):
    actions: np.ndarray
    losses: np.ndarray

    def pairs(self) -> list[tuple[int, float]]:
        return list(zip(self.actions.tolist(), self.losses.tolist()))


def softmax_from_log(logw: np.ndarray) -> np.ndarray:
    z = np.exp(logw - logw.max())
    return z / z.sum()


def sample_index(p: np.ndarray, rng: np.random.Generator) -> int:
    """Inverse-CDF draw over actions in ascending index order."""
    cdf = np.cumsum(p)
    i = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    return min(i, len(p) - 1)


def observation_probs(p: np.ndarray, graph: FeedbackGraph) -> np.ndarray:
    return p @ graph.adjacency


class Policy:
    """Round protocol bookkeeping shared by all learners."""

    name = "policy"

    def __init__(self, K: int, seed: int | None = 0):
        if K < 1:
            raise ParameterError(f"K must be positive, got {K}")
        self.K = int(K)
        self.reset(seed)

    def reset(self, seed: int | None = 0):
        self.rng = np.random.default_rng(seed)
        self._last_t = 0
        self._pending: int | None = None
        self.held_action: int | None = None
        self._reset_state()

    def _reset_state(self):
        pass

    def act(self, t: int) -> int:
        if self._pending is not None:
            raise ProtocolError(f"act({t}) called before observe({self._pending})")
        if t <= self._last_t:
            raise ProtocolError(f"act({t}) called twice or out of order (last round {self._last_t})")
        a = self._act(t)
        self._pending = t
        self._last_t = t
        self.held_action = a
        return a

    def observe(self, t: int, revealed: Revealed, graph: FeedbackGraph) -> None:
        if self._pending != t:
            raise ProtocolError(f"observe({t}) does not follow act({t})")
        a = self.held_action
        if not (revealed.actions == a).any():
            raise ProtocolError(f"revealed set at round {t} misses the played action {a}")
        self._observe(t, revealed, graph)
        self._pending = None

    def _act(self, t: int) -> int:
        raise NotImplementedError

    def _observe(self, t: int, revealed: Revealed, graph: FeedbackGraph) -> None:
        pass


def _check_cap(x: np.ndarray):
    if not np.all(np.abs(x) <= ESTIMATE_CAP):
        raise OverflowError("loss estimate overflowed 1e300")


def _saturating_add(est: np.ndarray, idx: np.ndarray, losses: np.ndarray, q: np.ndarray) -> int:
    """``est[idx] += losses / q`` clamped at ``ESTIMATE_CAP``; 0/0 counts as 0.

    Returns how many entries hit the cap this round.
    """
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        inc = losses / q
        inc[losses == 0] = 0.0
        new = est[idx] + inc
    hit = ~(new <= ESTIMATE_CAP)
    new[hit] = ESTIMATE_CAP
    est[idx] = new
    return int(hit.sum())


class _QCache:
    """``q = p @ A`` reused while both ``p`` and the graph are unchanged."""

    def __init__(self):
        self.key = None
        self.q = None

    def get(self, p: np.ndarray, version: int, graph: FeedbackGraph) -> np.ndarray:
        key = (version, id(graph))
        if key != self.key:
            self.key = key
            self.q = observation_probs(p, graph)
        return self.q


class ThresholdExp3(Policy):
    """Exponential weights that resample only when a threshold event fires.

    Events at round ``t`` (evaluated before drawing, with ``a`` the held action):

    * E1: first round;
    * E2: ``r > gamma`` with ``gamma = T^{1/3} c^{2/3} / mas^{1/3}``;
    * E3: every rival ``i`` has ``lhat(i) + lprime(i) > eps_t/eta + 1/q_a`` and
      some rival has ``lhat(i) + lprime(i) - lprime(a) <= eps_t/eta + 1/q_a``,
      where ``q_a`` is the observation probability of ``a`` in the previous round.

    On an event the pending estimates are committed, weights updated and a new
    action drawn; otherwise the action is held and ``r`` grows by one.
    """

    name = "threshold_exp3"

    def __init__(
        self,
        K: int,
        T: int,
        c: float,
        mas_hint: int,
        eta: float | None = None,
        eps_fn: Callable[[int], float] | None = None,
        seed: int | None = 0,
    ):
        if T < 1 or c <= 0 or mas_hint < 1:
            raise ParameterError(f"need T >= 1, c > 0, mas_hint >= 1; got T={T}, c={c}, mas_hint={mas_hint}")
        self.T, self.c, self.mas_hint = int(T), float(c), int(mas_hint)
        self.gamma = self.T ** (1 / 3) * self.c ** (2 / 3) / self.mas_hint ** (1 / 3)
        if eta is None:
            eta = math.log(K) / (self.T ** (2 / 3) * self.c ** (1 / 3) * self.mas_hint ** (1 / 3)) if K > 1 else 1.0
        if not eta > 0:
            raise ParameterError(f"eta must be positive, got {eta}")
        self.eta = min(float(eta), 1.0)
        self.eps_fn = eps_fn or self.default_eps
        super().__init__(K, seed)

    def default_eps(self, t: int) -> float:
        return max(0.0, math.log(t * self.c**2 / self.mas_hint) / 3)

    def _reset_state(self):
        K = self.K
        self.log_weights = np.zeros(K)
        self.p = np.full(K, 1.0 / K)
        self.lhat = np.zeros(K)
        self.lprime = np.zeros(K)
        self.q_last = np.ones(K)
        self.r = 1
        self.events = 0
        self.last_event: tuple[bool, bool, bool] = (False, False, False)
        self._pversion = 0
        self._q = _QCache()

    def e3(self, t: int, a: int) -> bool:
        thr = self.eps_fn(t) / self.eta + 1.0 / self.q_last[a]
        tot = self.lhat + self.lprime
        rivals = np.ones(self.K, dtype=bool)
        rivals[a] = False
        tr = tot[rivals]
        return bool(np.all(tr > thr) and np.any(tr - self.lprime[a] <= thr))

    def _act(self, t: int) -> int:
        a = self.held_action
        if a is None:
            self.last_event = (True, False, False)
            self.r = 1
            self.lprime[:] = 0.0
            self.events += 1
            return sample_index(self.p, self.rng)
        e2 = self.r > self.gamma
        e3 = self.e3(t, a)
        self.last_event = (False, e2, e3)
        if not (e2 or e3):
            self.r += 1
            return a
        self.lhat += self.lprime
        _check_cap(self.lhat)
        self.log_weights -= self.eta * self.lprime
        self.p = softmax_from_log(self.log_weights)
        self._pversion += 1
        self.r = 1
        self.lprime[:] = 0.0
        self.events += 1
        return sample_index(self.p, self.rng)

    def _observe(self, t, revealed, graph):
        q = self._q.get(self.p, self._pversion, graph)
        self.lprime[revealed.actions] += revealed.losses / q[revealed.actions]
        _check_cap(self.lprime)
        self.q_last = q


class Exp3SC(Policy):
    """Horizon-free variant: resample with probability ``eps_t`` from time-varying exponential weights.

    ``eps_t = 0.5 c^{1/3} mas^{1/3} / t^{1/3}`` (clamped to 1) and
    ``eta_t = log K / (t^{2/3} c^{1/3} mas^{1/3})``.

    The held action keeps being played while the weights move away from it, so
    its observation probability can underflow to zero. Estimates therefore
    saturate at ``ESTIMATE_CAP`` instead of raising; ``saturations`` counts
    how often that happened.
    """

    name = "exp3sc"

    def __init__(self, K: int, c: float, mas_hint: int, seed: int | None = 0):
        if c <= 0 or mas_hint < 1:
            raise ParameterError(f"need c > 0 and mas_hint >= 1; got c={c}, mas_hint={mas_hint}")
        self.c, self.mas_hint = float(c), int(mas_hint)
        super().__init__(K, seed)

    def eps(self, t: int) -> float:
        return min(1.0, 0.5 * self.c ** (1 / 3) * self.mas_hint ** (1 / 3) / t ** (1 / 3))

    def eta(self, t: int) -> float:
        return math.log(self.K) / (t ** (2 / 3) * self.c ** (1 / 3) * self.mas_hint ** (1 / 3))

    def _reset_state(self):
        self.cumulative_estimates = np.zeros(self.K)
        self.p = np.full(self.K, 1.0 / self.K)
        self.saturations = 0

    def _act(self, t):
        self.p = softmax_from_log(-self.eta(t) * self.cumulative_estimates)
        a = self.held_action
        if a is None or self.rng.random() < self.eps(t):
            return sample_index(self.p, self.rng)
        return a

    def _observe(self, t, revealed, graph):
        q = observation_probs(self.p, graph)
        self.saturations += _saturating_add(
            self.cumulative_estimates, revealed.actions, revealed.losses, q[revealed.actions]
        )


class Exp3Set(Policy):
    """Importance-weighted exponential weights, resampled every round."""

    name = "exp3set"

    def __init__(self, K: int, T: int, mas_hint: int = 1, eta: float | None = None, seed: int | None = 0):
        if eta is None:
            eta = math.sqrt(math.log(K) / (mas_hint * T)) if K > 1 else 1.0
        self.eta = float(eta)
        super().__init__(K, seed)

    def _reset_state(self):
        self.cumulative_estimates = np.zeros(self.K)
        self.p = np.full(self.K, 1.0 / self.K)

    def _act(self, t):
        self.p = softmax_from_log(-self.eta * self.cumulative_estimates)
        return sample_index(self.p, self.rng)

    def _observe(self, t, revealed, graph):
        q = observation_probs(self.p, graph)
        self.cumulative_estimates[revealed.actions] += revealed.losses / q[revealed.actions]
        _check_cap(self.cumulative_estimates)


def batch_size(T: int, K: int, c: float) -> int:
    """``max(1, ceil((2c)^{2/3} (T/K)^{1/3}))``, balancing batching regret against switching cost."""
    return max(1, math.ceil((2 * c) ** (2 / 3) * (T / K) ** (1 / 3)))


class BatchExp3(Policy):
    """EXP3 run over batches of ``tau`` rounds on the played action's loss only.

    Batch losses are normalized by ``tau`` so each batch is one EXP3 round with
    loss in [0, 1]; ``eta = sqrt(2 ln K / (n_batches K))``.
    """

    name = "batch_exp3"

    def __init__(self, K: int, T: int, c: float, tau: int | None = None, eta: float | None = None, seed: int | None = 0):
        self.T = int(T)
        self.tau = int(tau) if tau is not None else batch_size(T, K, c)
        if self.tau < 1:
            raise ParameterError(f"batch size must be positive, got {self.tau}")
        n_batches = math.ceil(self.T / self.tau)
        if eta is None:
            eta = math.sqrt(2 * math.log(K) / (n_batches * K)) if K > 1 else 1.0
        self.eta = float(eta)
        super().__init__(K, seed)

    def _reset_state(self):
        self.cumulative_estimates = np.zeros(self.K)
        self.p = np.full(self.K, 1.0 / self.K)
        self.batch_loss = 0.0
        self.pos = 0

    def _act(self, t):
        if self.held_action is not None and self.pos < self.tau:
            return self.held_action
        if self.held_action is not None:
            a = self.held_action
            self.cumulative_estimates[a] += self.batch_loss / self.tau / self.p[a]
            _check_cap(self.cumulative_estimates)
        self.p = softmax_from_log(-self.eta * self.cumulative_estimates)
        self.batch_loss = 0.0
        self.pos = 0
        return sample_index(self.p, self.rng)

    def _observe(self, t, revealed, graph):
        a = self.held_action
        self.batch_loss += float(revealed.losses[revealed.actions == a][0])
        self.pos += 1


class UniformRandom(Policy):
    name = "uniform"

    def _act(self, t):
        return int(self.rng.integers(self.K))


class ConstantAction(Policy):
    name = "constant"

    def __init__(self, K: int, action: int = 0, seed: int | None = 0):
        if not 0 <= action < K:
            raise ParameterError(f"action {action} out of range for K={K}")
        self.action = int(action)
        super().__init__(K, seed)

    def _act(self, t):
        return self.action


POLICIES = {
    "threshold_exp3": ThresholdExp3,
    "exp3sc": Exp3SC,
    "exp3set": Exp3Set,
    "batch_exp3": BatchExp3,
    "uniform": UniformRandom,
    "constant": ConstantAction,
}


def make_policy(name: str, K: int, T: int, c: float, mas_hint: int = 1, seed: int | None = 0, **params) -> Policy:
    if name == "threshold_exp3":
        return ThresholdExp3(K, T, c, mas_hint, seed=seed, **params)
    if name == "exp3sc":
        return Exp3SC(K, c, mas_hint, seed=seed)
    if name == "exp3set":
        return Exp3Set(K, T, mas_hint, seed=seed, **params)
    if name == "batch_exp3":
        return BatchExp3(K, T, c, seed=seed, **params)
    if name == "uniform":
        return UniformRandom(K, seed=seed)
    if name == "constant":
        return ConstantAction(K, seed=seed, **params)
    raise ParameterError(f"unknown policy {name!r}; expected one of {sorted(POLICIES)}")
