"""Bandit strategies behind a common choose/update interface.

Every policy exposes

* ``choose(t) -> arm``: pure function of internal state and the 1-based
  round index t,
* ``update(arm, reward, t) -> event``: consumes the chosen arm's reward and
  returns ``None``, the index of a locally restarted arm, or ``GLOBAL`` when
  all arms were reset.

Stable registry names (used in experiment configs and CSV output):
``klucb``, ``ts``, ``sw-klucb``, ``d-klucb``, ``dts``, ``oracle``,
``m-klucb``, ``cusum-klucb``, ``glr-klucb-local``, ``glr-klucb-global``.

Index policies share the klUCB index: the largest q in [0, 1] with
n_i * kl(mean_i, q) <= budget, where the budget is f(t - tau_i) by default
(f is the exploration function from klcore, tau_i the arm's last restart).
Unplayed arms have index 1 and ties break to the lowest arm index.
"""

from __future__ import annotations

import math
from collections import deque

import numpy as np

from .cpd import CusumDetector, GlrDetector, MTestDetector
from .environments import PiecewiseEnv
from .klcore import _f_explore_nb, _klucb_nb

GLOBAL = -1


def forced_arm(t: int, n_arms: int, alpha: float) -> int:
    """Deterministic round-robin slot for round t, or -1 when not forced.

    With period m = floor(K / alpha), rounds with t mod m in {1..K} play arm
    (t mod m) - 1.  Guarantees n_i(t) - n_i(s) >= floor(alpha/K * (t-s))
    between restarts.
    """
    if alpha <= 0.0:
        return -1
    m = int(n_arms / alpha)
    r = t % m
    if 1 <= r <= n_arms:
        return r - 1
    return -1


class Policy:
    name = "base"

    def choose(self, t: int) -> int:
        raise NotImplementedError

    def update(self, arm: int, reward: float, t: int):
        raise NotImplementedError


class _IndexPolicy(Policy):
    """klUCB state: per-arm pull counts, reward sums, and restart times."""

    def __init__(self, n_arms: int):
        self.n_arms = n_arms
        self.counts = np.zeros(n_arms, dtype=np.int64)
        self.sums = np.zeros(n_arms, dtype=np.float64)
        self.taus = np.zeros(n_arms, dtype=np.int64)

    def index(self, arm: int, t: int) -> float:
        n = self.counts[arm]
        if n == 0:
            return 1.0
        budget = _f_explore_nb(float(t - self.taus[arm]))
        return _klucb_nb(self.sums[arm] / n, n, budget)

    def _argmax_index(self, t: int) -> int:
        best_arm = 0
        best = -1.0
        for a in range(self.n_arms):
            v = self.index(a, t)
            if v > best:
                best = v
                best_arm = a
        return best_arm

    def choose(self, t: int) -> int:
        return self._argmax_index(t)

    def _record(self, arm: int, reward: float) -> None:
        self.counts[arm] += 1
        self.sums[arm] += reward

    def _reset_arm(self, arm: int, t: int) -> None:
        self.counts[arm] = 0
        self.sums[arm] = 0.0
        self.taus[arm] = t

    def _reset_all(self, t: int) -> None:
        self.counts[:] = 0
        self.sums[:] = 0.0
        self.taus[:] = t

    def update(self, arm: int, reward: float, t: int):
        self._record(arm, reward)
        return None


class KlUcb(_IndexPolicy):
    """Stationary klUCB: no restarts, no forced exploration."""

    name = "klucb"


class OracleRestart(_IndexPolicy):
    """klUCB restarted globally at every true breakpoint."""

    name = "oracle"

    def __init__(self, n_arms: int, breakpoints):
        super().__init__(n_arms)
        self._breakpoints = frozenset(int(b) for b in breakpoints)

    def update(self, arm: int, reward: float, t: int):
        self._record(arm, reward)
        if t in self._breakpoints:
            self._reset_all(t)
            return GLOBAL
        return None


class GlrKlUcb(_IndexPolicy):
    """klUCB with a per-arm GLR detector and local or global restarts.

    Forced exploration inserts deterministic round-robin plays at rate
    ``alpha``; every received reward feeds the played arm's detector, and a
    detection resets either that arm (local) or all arms (global).
    ``delta=0`` makes the threshold infinite, disabling detection.
    """

    def __init__(
        self,
        n_arms: int,
        mode: str = "local",
        alpha: float = 0.0,
        delta: float = 0.01,
        stride_n: int = 1,
        stride_s: int = 1,
        threshold_family: str = "practical",
        divergence: str = "bernoulli",
    ):
        super().__init__(n_arms)
        if mode not in ("local", "global"):
            raise ValueError(f"mode must be 'local' or 'global', got {mode!r}")
        self.mode = mode
        self.alpha = float(alpha)
        self.detectors = [
            GlrDetector(
                delta=delta,
                divergence=divergence,
                stride_n=stride_n,
                stride_s=stride_s,
                threshold_family=threshold_family,
            )
            for _ in range(n_arms)
        ]

    @property
    def name(self) -> str:  # type: ignore[override]
        return f"glr-klucb-{self.mode}"

    def choose(self, t: int) -> int:
        fa = forced_arm(t, self.n_arms, self.alpha)
        if fa >= 0:
            return fa
        return self._argmax_index(t)

    def update(self, arm: int, reward: float, t: int):
        self._record(arm, reward)
        if self.detectors[arm].step(reward):
            if self.mode == "global":
                self._reset_all(t)
                for det in self.detectors:
                    det.reset()
                return GLOBAL
            self._reset_arm(arm, t)
            self.detectors[arm].reset()
            return arm
        return None


class MKlUcb(_IndexPolicy):
    """klUCB with per-arm half-window mean-shift tests and global restarts."""

    name = "m-klucb"

    def __init__(self, n_arms: int, window: int, threshold: float, gamma: float):
        super().__init__(n_arms)
        self.gamma = float(gamma)
        self.detectors = [MTestDetector(window, threshold) for _ in range(n_arms)]

    def choose(self, t: int) -> int:
        fa = forced_arm(t, self.n_arms, self.gamma)
        if fa >= 0:
            return fa
        return self._argmax_index(t)

    def update(self, arm: int, reward: float, t: int):
        self._record(arm, reward)
        if self.detectors[arm].step(reward):
            self._reset_all(t)
            for det in self.detectors:
                det.reset()
            return GLOBAL
        return None


class CusumKlUcb(_IndexPolicy):
    """klUCB with per-arm CUSUM tests, randomized exploration, local restarts.

    The index budget is f(n_t) with n_t the pooled pull count since each
    arm's restart (switchable to the per-arm form via ``index_budget``).
    Exploration randomness is pre-drawn over the horizon so runs are
    reproducible and identical across execution modes.
    """

    name = "cusum-klucb"

    def __init__(
        self,
        n_arms: int,
        horizon: int,
        m_init: int,
        epsilon: float,
        threshold: float,
        alpha: float,
        rng: np.random.Generator,
        index_budget: str = "pooled",
    ):
        super().__init__(n_arms)
        if index_budget not in ("pooled", "per-arm"):
            raise ValueError(f"index_budget must be 'pooled' or 'per-arm', got {index_budget!r}")
        self.alpha = float(alpha)
        self.index_budget = index_budget
        self.detectors = [CusumDetector(m_init, epsilon, threshold) for _ in range(n_arms)]
        self._u_explore = rng.random(horizon)
        self._u_arm = rng.random(horizon)

    def index(self, arm: int, t: int) -> float:
        n = self.counts[arm]
        if n == 0:
            return 1.0
        if self.index_budget == "pooled":
            budget = _f_explore_nb(float(self.counts.sum()))
        else:
            budget = _f_explore_nb(float(t - self.taus[arm]))
        return _klucb_nb(self.sums[arm] / n, n, budget)

    def choose(self, t: int) -> int:
        if self._u_explore[t - 1] < self.alpha:
            return min(int(self._u_arm[t - 1] * self.n_arms), self.n_arms - 1)
        return self._argmax_index(t)

    def update(self, arm: int, reward: float, t: int):
        self._record(arm, reward)
        if self.detectors[arm].step(reward):
            self._reset_arm(arm, t)
            self.detectors[arm].reset()
            return arm
        return None


class SwKlUcb(Policy):
    """klUCB over each arm's rewards from the last ``window`` global rounds."""

    name = "sw-klucb"

    def __init__(self, n_arms: int, window: int):
        self.n_arms = n_arms
        self.window = int(window)
        self._obs = [deque() for _ in range(n_arms)]
        self._sums = np.zeros(n_arms, dtype=np.float64)

    def _evict(self, t: int) -> None:
        cutoff = t - self.window
        for a in range(self.n_arms):
            q = self._obs[a]
            while q and q[0][0] <= cutoff:
                self._sums[a] -= q.popleft()[1]

    def choose(self, t: int) -> int:
        self._evict(t)
        budget = _f_explore_nb(float(min(t, self.window)))
        best_arm = 0
        best = -1.0
        for a in range(self.n_arms):
            n = len(self._obs[a])
            v = 1.0 if n == 0 else _klucb_nb(self._sums[a] / n, n, budget)
            if v > best:
                best = v
                best_arm = a
        return best_arm

    def update(self, arm: int, reward: float, t: int):
        self._obs[arm].append((t, reward))
        self._sums[arm] += reward
        return None


class DKlUcb(Policy):
    """klUCB on geometrically discounted counts and reward sums.

    Each update multiplies every arm's statistics by the discount, then adds
    the new observation.  The index budget is f(1 + sum of discounted
    counts), which makes gamma = 1 coincide with klUCB exactly.
    """

    name = "d-klucb"

    def __init__(self, n_arms: int, gamma: float):
        self.n_arms = n_arms
        self.gamma = float(gamma)
        self.dcounts = np.zeros(n_arms, dtype=np.float64)
        self.dsums = np.zeros(n_arms, dtype=np.float64)

    def choose(self, t: int) -> int:
        budget = _f_explore_nb(1.0 + float(self.dcounts.sum()))
        best_arm = 0
        best = -1.0
        for a in range(self.n_arms):
            n = self.dcounts[a]
            v = 1.0 if n <= 0.0 else _klucb_nb(self.dsums[a] / n, n, budget)
            if v > best:
                best = v
                best_arm = a
        return best_arm

    def update(self, arm: int, reward: float, t: int):
        self.dcounts *= self.gamma
        self.dsums *= self.gamma
        self.dcounts[arm] += 1.0
        self.dsums[arm] += reward
        return None


class Thompson(Policy):
    """Thompson sampling with Beta(1, 1) priors on binary rewards."""

    name = "ts"

    def __init__(self, n_arms: int, rng: np.random.Generator):
        self.n_arms = n_arms
        self.rng = rng
        self.a = np.zeros(n_arms, dtype=np.float64)
        self.b = np.zeros(n_arms, dtype=np.float64)

    def choose(self, t: int) -> int:
        theta = self.rng.beta(self.a + 1.0, self.b + 1.0)
        return int(np.argmax(theta))

    def update(self, arm: int, reward: float, t: int):
        self.a[arm] += reward
        self.b[arm] += 1.0 - reward
        return None


class Dts(Thompson):
    """Discounted Thompson sampling: both Beta parameters decay every round."""

    name = "dts"

    def __init__(self, n_arms: int, rng: np.random.Generator, gamma: float):
        super().__init__(n_arms, rng)
        self.gamma = float(gamma)

    def update(self, arm: int, reward: float, t: int):
        self.a *= self.gamma
        self.b *= self.gamma
        self.a[arm] += reward
        self.b[arm] += 1.0 - reward
        return None


POLICY_NAMES = (
    "klucb",
    "ts",
    "sw-klucb",
    "d-klucb",
    "dts",
    "oracle",
    "m-klucb",
    "cusum-klucb",
    "glr-klucb-local",
    "glr-klucb-global",
)


def default_params(name: str, env: PiecewiseEnv, alpha0: float = 0.05) -> dict:
    """Benchmark tunings for a policy on a given environment (Upsilon known).

    These are the tunings used for the regret tables: every algorithm gets
    the knowledge of the number of breakpoints and the horizon.
    """
    meta = env.metadata()
    t_hor = env.horizon
    k = env.arms
    ups = max(meta.upsilon, 1)
    log_t = math.log(t_hor)
    if name == "glr-klucb-local":
        return {
            "mode": "local",
            "alpha": alpha0 * math.sqrt(k * ups * log_t / t_hor),
            "delta": 1.0 / math.sqrt(k * ups * t_hor),
            "stride_n": 1,
            "stride_s": 1,
            "threshold_family": "practical",
            "divergence": "bernoulli",
        }
    if name == "glr-klucb-global":
        return {
            "mode": "global",
            "alpha": alpha0 * math.sqrt(ups * log_t / t_hor),
            "delta": 1.0 / math.sqrt(ups * t_hor),
            "stride_n": 1,
            "stride_s": 1,
            "threshold_family": "practical",
            "divergence": "bernoulli",
        }
    if name == "cusum-klucb":
        return {
            "m_init": 150,
            "epsilon": 0.1,
            "threshold": math.log(t_hor / ups),
            "alpha": math.sqrt(ups * math.log(t_hor / ups) / t_hor),
            "index_budget": "pooled",
        }
    if name == "m-klucb":
        w = 150
        b_sum = math.sqrt(w * math.log(2 * k * t_hor))
        return {
            "window": w,
            "threshold": 2.0 * b_sum / w,
            "gamma": math.sqrt(ups * k * (2.0 * b_sum + 3.0 * math.sqrt(w)) / (2.0 * t_hor)),
        }
    if name == "sw-klucb":
        return {"window": int(math.ceil(2.0 * math.sqrt(t_hor * log_t / ups)))}
    if name == "d-klucb":
        return {"gamma": 1.0 - math.sqrt(ups / t_hor) / 4.0}
    if name == "dts":
        return {"gamma": 0.95}
    if name in ("klucb", "ts", "oracle"):
        return {}
    raise ValueError(f"unknown policy name {name!r}")


def resolve_params(name: str, env: PiecewiseEnv, overrides: dict | None = None) -> dict:
    if name not in POLICY_NAMES:
        raise ValueError(f"unknown policy name {name!r}")
    alpha0 = 0.05
    overrides = dict(overrides or {})
    if "alpha0" in overrides:
        alpha0 = float(overrides.pop("alpha0"))
    params = default_params(name, env, alpha0=alpha0)
    for key, val in overrides.items():
        if key not in params:
            raise ValueError(f"policy {name!r} does not accept parameter {key!r}")
        params[key] = val
    return params


def make_policy(
    name: str, env: PiecewiseEnv, params: dict | None = None, rng: np.random.Generator | None = None
) -> Policy:
    """Instantiate a policy by registry name with resolved tunings."""
    p = resolve_params(name, env, params)
    k = env.arms
    if name == "klucb":
        return KlUcb(k)
    if name == "oracle":
        return OracleRestart(k, env.breakpoints())
    if name in ("glr-klucb-local", "glr-klucb-global"):
        return GlrKlUcb(k, **p)
    if name == "m-klucb":
        return MKlUcb(k, **p)
    if name == "cusum-klucb":
        if rng is None:
            raise ValueError("cusum-klucb requires an rng")
        return CusumKlUcb(k, horizon=env.horizon, rng=rng, **p)
    if name == "sw-klucb":
        return SwKlUcb(k, **p)
    if name == "d-klucb":
        return DKlUcb(k, **p)
    if name == "ts":
        if rng is None:
            raise ValueError("ts requires an rng")
        return Thompson(k, rng)
    if name == "dts":
        if rng is None:
            raise ValueError("dts requires an rng")
        return Dts(k, rng, **p)
    raise ValueError(f"unknown policy name {name!r}")
