"""Scalar numerical kernels for Bernoulli bandits and GLR thresholds.

Everything here is a pure function of its arguments.  The heavy lifting is
done by numba-compiled scalars (prefixed ``_nb``) that are shared with the
simulation engine; the public wrappers add argument validation.

Divergences
-----------
``kl_bern(x, y)`` is the binary relative entropy

    kl(x, y) = x ln(x/y) + (1-x) ln((1-x)/(1-y))

with the conventions 0 ln 0 = 0 and a large finite sentinel (``KL_SENTINEL``)
when y is 0 or 1 while x is interior, so that scans over degenerate windows
never abort.  ``kl_quad(x, y) = 2 (x-y)^2`` is the quadratic (sub-Gaussian)
counterpart; Pinsker's inequality gives ``kl_bern >= kl_quad``.

Thresholds
----------
``beta_threshold(n, delta, family)`` is the GLR detection boundary.  The
"full" family is

    beta(n, delta) = 2 T(ln(3 n sqrt(n) / delta) / 2) + 6 ln(1 + ln n)

where ``T`` (``cal_t`` below) is built from h(u) = u - ln(u) and its inverse;
the "practical" family keeps only the leading term ln(3 n sqrt(n) / delta).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

KL_SENTINEL = 1e18

# full-precision constants used inside cal_t
_LN_2ZETA2 = math.log(math.pi * math.pi / 3.0)  # ln(2 * zeta(2)), zeta(2) = pi^2/6
_LN_LN_3_2 = math.log(math.log(1.5))


@njit(cache=True)
def _kl_bern_nb(x: float, y: float) -> float:
    if x == y:
        return 0.0
    if y <= 0.0 or y >= 1.0:
        # x differs from y, so the divergence is infinite; keep scans finite
        return KL_SENTINEL
    if x <= 0.0:
        return math.log(1.0 / (1.0 - y))
    if x >= 1.0:
        return math.log(1.0 / y)
    return x * math.log(x / y) + (1.0 - x) * math.log((1.0 - x) / (1.0 - y))


@njit(cache=True)
def _kl_quad_nb(x: float, y: float) -> float:
    d = x - y
    return 2.0 * d * d


@njit(cache=True)
def _klucb_nb(mean: float, count: int, budget: float) -> float:
    """Largest q in [mean, 1] with count * kl(mean, q) <= budget.

    Bracketing search: Newton steps clipped to the feasibility bracket with
    bisection fallback, exiting on the divergence residual so the returned
    point satisfies |count * kl(mean, q) - budget| <= 1e-10 whenever q < 1.
    """
    if budget <= 0.0:
        return mean
    if mean >= 1.0:
        return 1.0
    if budget == np.inf:
        return 1.0
    target = budget / count
    if _kl_bern_nb(mean, 1.0 - 1e-14) <= target:
        return 1.0
    lo = mean
    hi = 1.0
    q = mean + math.sqrt(0.5 * target * max(4.0 * mean * (1.0 - mean), 1e-2))
    if q <= lo or q >= hi:
        q = 0.5 * (lo + hi)
    tol = 1e-10 / count
    for _ in range(200):
        g = _kl_bern_nb(mean, q) - target
        if g <= 0.0:
            lo = q
            if -g <= tol:
                break
        else:
            hi = q
        if hi - lo < 1e-15:
            break
        deriv = (q - mean) / (q * (1.0 - q))
        if deriv > 0.0:
            qn = q - g / deriv
        else:
            qn = 0.5 * (lo + hi)
        if qn <= lo or qn >= hi:
            qn = 0.5 * (lo + hi)
        q = qn
    return lo


@njit(cache=True)
def _f_explore_nb(t: float) -> float:
    if t <= 1.0:
        return 0.0
    raw = math.log(t) + 3.0 * math.log(math.log(t))
    return raw if raw > 0.0 else 0.0


@njit(cache=True)
def _h_inv_nb(y: float) -> float:
    # unique u >= 1 with u - ln(u) = y; Newton from above with bracket safeguard
    if y <= 1.0:
        return 1.0
    lo = 1.0
    hi = y + math.log(y) + 2.0
    u = hi
    tol = 4e-15 * (y if y > 1.0 else 1.0)
    for _ in range(200):
        f = u - math.log(u) - y
        if abs(f) <= tol:
            break
        if f > 0.0:
            hi = u
        else:
            lo = u
        d = 1.0 - 1.0 / u
        if d > 0.0:
            un = u - f / d
        else:
            un = 0.5 * (lo + hi)
        if un <= lo or un >= hi:
            un = 0.5 * (lo + hi)
        if un == u or hi - lo < 4e-16 * hi:
            u = un
            break
        u = un
    return u


@njit(cache=True)
def _cal_t_nb(x: float, cross: float) -> float:
    arg = 0.5 * (_h_inv_nb(1.0 + x) + _LN_2ZETA2)
    if arg >= cross:
        hi = _h_inv_nb(arg)
        ht = math.exp(1.0 / hi) * hi
    else:
        ht = 1.5 * (arg - _LN_LN_3_2)
    return 2.0 * ht


# Crossover of the two-branch h-tilde, placed where the branches meet:
# h_inv(x) = 1/ln(3/2), i.e. x = 1/ln(3/2) + ln(ln(3/2)).  Both branches
# evaluate to (3/2)/ln(3/2) there, so h-tilde is continuous and the full
# threshold is monotone in n.
_H_TILDE_CROSS = 1.0 / math.log(1.5) + math.log(math.log(1.5))

FAMILY_FULL = 0
FAMILY_PRACTICAL = 1


@njit(cache=True)
def _beta_nb(n: int, delta: float, family: int, cross: float) -> float:
    lead = math.log(3.0 * n * math.sqrt(float(n)) / delta) if delta > 0.0 else np.inf
    if family == FAMILY_PRACTICAL:
        return lead
    if lead == np.inf:
        return np.inf
    return 2.0 * _cal_t_nb(0.5 * lead, cross) + 6.0 * math.log(1.0 + math.log(float(n)))


def kl_bern(x: float, y: float) -> float:
    """Binary relative entropy kl(x, y), in nats."""
    if not (0.0 <= x <= 1.0) or not (0.0 <= y <= 1.0):
        raise ValueError(f"kl_bern arguments must lie in [0, 1], got ({x}, {y})")
    return float(_kl_bern_nb(x, y))


def kl_quad(x: float, y: float) -> float:
    """Quadratic divergence 2 (x-y)^2, the sub-Gaussian counterpart of kl_bern."""
    if not (0.0 <= x <= 1.0) or not (0.0 <= y <= 1.0):
        raise ValueError(f"kl_quad arguments must lie in [0, 1], got ({x}, {y})")
    return float(_kl_quad_nb(x, y))


def klucb_upper(mean: float, count: int, budget: float) -> float:
    """Upper confidence bound: max q in [mean, 1] with count * kl(mean, q) <= budget."""
    if not (0.0 <= mean <= 1.0):
        raise ValueError(f"mean must lie in [0, 1], got {mean}")
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    if budget < 0.0:
        raise ValueError(f"budget must be >= 0, got {budget}")
    return float(_klucb_nb(mean, count, budget))


def f_explore(t: float) -> float:
    """Exploration budget ln(t) + 3 ln(ln(t)) for t > 1, else 0, clamped at 0.

    The raw value is negative for t = 2 (0.693 - 1.100); a negative budget is
    meaningless for the index, so it is clamped.
    """
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    return float(_f_explore_nb(float(t)))


def h_inv(y: float) -> float:
    """Inverse of h(u) = u - ln(u) on u >= 1."""
    if y < 1.0:
        raise ValueError(f"h_inv requires y >= 1, got {y}")
    return float(_h_inv_nb(y))


def cal_t(x: float) -> float:
    """The threshold function T(x) = 2 h-tilde((h_inv(1+x) + ln(2 zeta(2))) / 2)."""
    if x < 0.0:
        raise ValueError(f"cal_t requires x >= 0, got {x}")
    return float(_cal_t_nb(x, _H_TILDE_CROSS))


def beta_threshold(n: int, delta: float, family: str = "practical") -> float:
    """GLR detection threshold beta(n, delta) for the given family."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    fam = _family_id(family)
    return float(_beta_nb(n, delta, fam, _H_TILDE_CROSS))


def _family_id(family: str) -> int:
    if family == "full":
        return FAMILY_FULL
    if family == "practical":
        return FAMILY_PRACTICAL
    raise ValueError(f"unknown threshold family {family!r}")


@dataclass(frozen=True)
class ThresholdParams:
    """Confidence level and threshold family of a GLR detector."""

    delta: float
    family: str = "practical"

    def __post_init__(self) -> None:
        if not (0.0 < self.delta < 1.0):
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")
        _family_id(self.family)

    def beta(self, n: int) -> float:
        return beta_threshold(n, self.delta, self.family)
