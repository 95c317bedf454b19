"""Streaming change-point detectors operating on one arm's reward history.

Three detectors behind a common ``step(reward) -> bool`` protocol:

* ``GlrDetector``: the generalized likelihood ratio test.  After the n-th
  sample it fires iff

      sup_s [ s * d(mean(1:s), mean(1:n)) + (n-s) * d(mean(s+1:n), mean(1:n)) ]
          >= beta(n, delta)

  over integer splits s in [1, n-1].  ``stride_n`` evaluates the test only
  when n is a multiple of it, ``stride_s`` restricts splits to multiples of
  it; both sub-sample a subset of (n, s) pairs so false-alarm control is
  unchanged.  The scan updates segment means in O(1) per split.
* ``CusumDetector``: two-sided CUSUM; the first ``m_init`` samples fix a
  reference mean, afterwards two drift-corrected random walks accumulate and
  a detection is reported when either crosses the threshold.
* ``MTestDetector``: fires when the empirical means of the first and second
  halves of the last ``window`` samples differ by at least the threshold.

Detectors are restart-agnostic: the owning policy calls ``reset()``.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .klcore import (
    FAMILY_FULL,
    FAMILY_PRACTICAL,
    _H_TILDE_CROSS,
    _beta_nb,
    _family_id,
    _kl_bern_nb,
    _kl_quad_nb,
)

DIV_BERNOULLI = 0
DIV_QUADRATIC = 1


@njit(cache=True)
def _div_nb(x: float, y: float, div_id: int) -> float:
    if div_id == DIV_BERNOULLI:
        return _kl_bern_nb(x, y)
    return _kl_quad_nb(x, y)


@njit(cache=True)
def _glr_split_stat_nb(buf: np.ndarray, n: int, s: int, div_id: int) -> float:
    tot = 0.0
    for i in range(n):
        tot += buf[i]
    left = 0.0
    for i in range(s):
        left += buf[i]
    mg = tot / n
    ml = left / s
    mr = (tot - left) / (n - s)
    return s * _div_nb(ml, mg, div_id) + (n - s) * _div_nb(mr, mg, div_id)


@njit(cache=True)
def _glr_max_stat_nb(buf: np.ndarray, n: int, ds: int, div_id: int) -> float:
    tot = 0.0
    for i in range(n):
        tot += buf[i]
    mg = tot / n
    best = 0.0
    left = 0.0
    prev = 0
    for s in range(ds, n, ds):
        for i in range(prev, s):
            left += buf[i]
        prev = s
        ml = left / s
        mr = (tot - left) / (n - s)
        stat = s * _div_nb(ml, mg, div_id) + (n - s) * _div_nb(mr, mg, div_id)
        if stat > best:
            best = stat
    return best


@njit(cache=True)
def _glr_fire_nb(buf: np.ndarray, n: int, ds: int, div_id: int, beta: float) -> bool:
    tot = 0.0
    for i in range(n):
        tot += buf[i]
    mg = tot / n
    left = 0.0
    prev = 0
    for s in range(ds, n, ds):
        for i in range(prev, s):
            left += buf[i]
        prev = s
        ml = left / s
        mr = (tot - left) / (n - s)
        stat = s * _div_nb(ml, mg, div_id) + (n - s) * _div_nb(mr, mg, div_id)
        if stat >= beta:
            return True
    return False


@njit(cache=True)
def _glr_first_fire_nb(
    z: np.ndarray, dn: int, ds: int, div_id: int, delta: float, family: int, cross: float
) -> int:
    """First n at which the detector fires on stream z, or 0 if it never does."""
    for n in range(1, z.shape[0] + 1):
        if n % dn != 0:
            continue
        beta = _beta_nb(n, delta, family, cross)
        if _glr_fire_nb(z[:n], n, ds, div_id, beta):
            return n
    return 0


@njit(cache=True)
def _cusum_update_nb(gp: float, gm: float, r: float, mean0: float, eps: float) -> tuple[float, float]:
    gp = gp + (r - mean0 - eps)
    if gp < 0.0:
        gp = 0.0
    gm = gm + (mean0 - r - eps)
    if gm < 0.0:
        gm = 0.0
    return gp, gm


@njit(cache=True)
def _mtest_stat_nb(ring: np.ndarray, pos: int, w: int) -> float:
    # ring holds the last w rewards; pos is the index of the oldest one
    half = w // 2
    s1 = 0.0
    for i in range(half):
        s1 += ring[(pos + i) % w]
    s2 = 0.0
    for i in range(half, w):
        s2 += ring[(pos + i) % w]
    return abs(s1 - s2) / half


def _div_id(divergence: str) -> int:
    if divergence == "bernoulli":
        return DIV_BERNOULLI
    if divergence in ("gaussian", "quadratic", "gaussian-quadratic"):
        return DIV_QUADRATIC
    raise ValueError(f"unknown divergence {divergence!r}")


def glr_statistic(samples, split: int, divergence: str = "bernoulli") -> float:
    """Two-segment weighted divergence to the pooled mean at one split point."""
    buf = np.ascontiguousarray(samples, dtype=np.float64)
    n = buf.shape[0]
    if not 1 <= split < n:
        raise ValueError(f"split must lie in [1, {n - 1}], got {split}")
    return float(_glr_split_stat_nb(buf, n, split, _div_id(divergence)))


class GlrDetector:
    """Bernoulli (or Gaussian-quadratic) GLR change point detector."""

    def __init__(
        self,
        delta: float,
        divergence: str = "bernoulli",
        stride_n: int = 1,
        stride_s: int = 1,
        threshold_family: str = "practical",
    ) -> None:
        if stride_n < 1 or stride_s < 1:
            raise ValueError("stride_n and stride_s must be positive integers")
        self.delta = float(delta)
        self.divergence = divergence
        self._div_id = _div_id(divergence)
        self.stride_n = int(stride_n)
        self.stride_s = int(stride_s)
        self.threshold_family = threshold_family
        self._family = _family_id(threshold_family)
        self._buf = np.empty(256, dtype=np.float64)
        self._n = 0

    @property
    def n(self) -> int:
        return self._n

    @property
    def samples(self) -> np.ndarray:
        return self._buf[: self._n].copy()

    def reset(self) -> None:
        self._n = 0

    def step(self, reward: float) -> bool:
        if not (0.0 <= reward <= 1.0):
            raise ValueError(f"reward must lie in [0, 1], got {reward}")
        if self._n == self._buf.shape[0]:
            grown = np.empty(2 * self._buf.shape[0], dtype=np.float64)
            grown[: self._n] = self._buf
            self._buf = grown
        self._buf[self._n] = reward
        self._n += 1
        n = self._n
        if n % self.stride_n != 0 or n < 2:
            return False
        beta = _beta_nb(n, self.delta, self._family, _H_TILDE_CROSS)
        return bool(_glr_fire_nb(self._buf[:n], n, self.stride_s, self._div_id, beta))


class CusumDetector:
    """Two-sided CUSUM with a reference mean estimated from the first M samples."""

    def __init__(self, m_init: int, epsilon: float, threshold: float) -> None:
        if m_init < 1:
            raise ValueError("m_init must be >= 1")
        self.m_init = int(m_init)
        self.epsilon = float(epsilon)
        self.threshold = float(threshold)
        self.reset()

    def reset(self) -> None:
        self._seen = 0
        self._init_sum = 0.0
        self.initial_mean = 0.0
        self.g_plus = 0.0
        self.g_minus = 0.0

    def step(self, reward: float) -> bool:
        if not (0.0 <= reward <= 1.0):
            raise ValueError(f"reward must lie in [0, 1], got {reward}")
        if self._seen < self.m_init:
            self._seen += 1
            self._init_sum += reward
            if self._seen == self.m_init:
                self.initial_mean = self._init_sum / self.m_init
            return False
        self._seen += 1
        self.g_plus, self.g_minus = _cusum_update_nb(
            self.g_plus, self.g_minus, reward, self.initial_mean, self.epsilon
        )
        return max(self.g_plus, self.g_minus) >= self.threshold


class MTestDetector:
    """Half-window mean-shift test over the last ``window`` rewards.

    ``threshold`` is on the mean-difference scale: the detector fires iff
    |mean(first half) - mean(second half)| >= threshold once the buffer is
    full.  Memory is bounded by the window size.
    """

    def __init__(self, window: int, threshold: float) -> None:
        if window < 2 or window % 2 != 0:
            raise ValueError("window must be a positive even integer")
        self.window = int(window)
        self.threshold = float(threshold)
        self._ring = np.zeros(self.window, dtype=np.float64)
        self.reset()

    def reset(self) -> None:
        self._count = 0
        self._pos = 0

    @property
    def n(self) -> int:
        return min(self._count, self.window)

    def step(self, reward: float) -> bool:
        if not (0.0 <= reward <= 1.0):
            raise ValueError(f"reward must lie in [0, 1], got {reward}")
        self._ring[self._pos] = reward
        self._pos = (self._pos + 1) % self.window
        self._count += 1
        if self._count < self.window:
            return False
        stat = _mtest_stat_nb(self._ring, self._pos, self.window)
        return stat >= self.threshold
