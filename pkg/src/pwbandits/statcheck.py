"""Monte-Carlo verification of the detector's statistical guarantees.

Three suites:

* ``false_alarm_rate``: stream iid Bernoulli(mu0) through a GLR detector and
  estimate P(fires within n_max) with a Clopper-Pearson interval.  With the
  full threshold the rate must stay below delta.
* ``detection_delay``: mean shifts mu0 -> mu1 at a known round; reports the
  delay distribution (median, 95th percentile) and the miss rate.
* ``two_sample_tail``: empirical tail of the two-sample statistic
  (s r / (s + r)) (mean_a - mean_b - gap)^2 against the Chernoff bound
  2 exp(-u / (2 sigma^2)) with sigma^2 = 1/4 for bounded rewards.

Repetition r uses the same seeding scheme as the harness, so suites are
reproducible and embarrassingly parallel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .cpd import _div_id, _glr_first_fire_nb
from .harness import rep_seed
from .klcore import _H_TILDE_CROSS, _family_id


@dataclass(frozen=True)
class TrialConfig:
    """One detector trial setup for the Monte-Carlo suites."""

    mu0: float
    mu1: float = 0.0
    change_at: int = 0
    n_max: int = 5000
    repetitions: int = 1000
    delta: float = 0.05
    stride_n: int = 1
    stride_s: int = 1
    divergence: str = "bernoulli"
    threshold_family: str = "full"
    base_seed: int = 20240

    def __post_init__(self) -> None:
        if self.repetitions < 100:
            raise ValueError("repetitions must be >= 100 for rate estimates")
        if self.change_at and self.change_at >= self.n_max:
            raise ValueError("change_at must be < n_max for delay trials")


def clopper_pearson(k: int, n: int, confidence: float = 0.95) -> tuple[float, float]:
    """Exact binomial confidence interval for k successes out of n."""
    alpha = 1.0 - confidence
    lo = 0.0 if k == 0 else float(stats.beta.ppf(alpha / 2, k, n - k + 1))
    hi = 1.0 if k == n else float(stats.beta.ppf(1 - alpha / 2, k + 1, n - k))
    return lo, hi


def _first_fires(cfg: TrialConfig) -> np.ndarray:
    div = _div_id(cfg.divergence)
    fam = _family_id(cfg.threshold_family)
    fires = np.zeros(cfg.repetitions, dtype=np.int64)
    for r in range(cfg.repetitions):
        rng = np.random.default_rng(rep_seed(cfg.base_seed, r))
        u = rng.random(cfg.n_max)
        if cfg.change_at:
            z = np.empty(cfg.n_max, dtype=np.float64)
            z[: cfg.change_at] = u[: cfg.change_at] < cfg.mu0
            z[cfg.change_at :] = u[cfg.change_at :] < cfg.mu1
        else:
            z = (u < cfg.mu0).astype(np.float64)
        fires[r] = _glr_first_fire_nb(
            z, cfg.stride_n, cfg.stride_s, div, cfg.delta, fam, _H_TILDE_CROSS
        )
    return fires


@dataclass(frozen=True)
class FalseAlarmResult:
    rate: float
    fired: int
    repetitions: int
    ci_low: float
    ci_high: float
    delta: float

    def as_dict(self) -> dict:
        return {
            "rate": self.rate,
            "fired": self.fired,
            "repetitions": self.repetitions,
            "ci95_low": self.ci_low,
            "ci95_high": self.ci_high,
            "delta": self.delta,
        }


def false_alarm_rate(cfg: TrialConfig) -> FalseAlarmResult:
    """Fraction of iid-stream repetitions where the detector fires at all."""
    fires = _first_fires(cfg)
    fired = int((fires > 0).sum())
    lo, hi = clopper_pearson(fired, cfg.repetitions)
    return FalseAlarmResult(
        rate=fired / cfg.repetitions,
        fired=fired,
        repetitions=cfg.repetitions,
        ci_low=lo,
        ci_high=hi,
        delta=cfg.delta,
    )


@dataclass(frozen=True)
class DelayResult:
    delays: np.ndarray
    miss_rate: float
    early_rate: float
    median: float
    q95: float
    repetitions: int

    def as_dict(self) -> dict:
        return {
            "miss_rate": self.miss_rate,
            "early_fire_rate": self.early_rate,
            "median_delay": self.median,
            "q95_delay": self.q95,
            "detections": int(self.delays.size),
            "repetitions": self.repetitions,
        }


def detection_delay(cfg: TrialConfig) -> DelayResult:
    """Delay distribution of first detection after the change point.

    Repetitions that fire before the change count as early fires and are
    excluded from the delay quantiles; repetitions that never fire within
    n_max count as misses.
    """
    if not cfg.change_at:
        raise ValueError("detection_delay requires change_at > 0")
    fires = _first_fires(cfg)
    missed = int((fires == 0).sum())
    early = int(((fires > 0) & (fires <= cfg.change_at)).sum())
    delays = (fires[fires > cfg.change_at] - cfg.change_at).astype(np.float64)
    if delays.size:
        median = float(np.median(delays))
        q95 = float(np.quantile(delays, 0.95))
    else:
        median = q95 = float("inf")
    return DelayResult(
        delays=delays,
        miss_rate=missed / cfg.repetitions,
        early_rate=early / cfg.repetitions,
        median=median,
        q95=q95,
        repetitions=cfg.repetitions,
    )


@dataclass(frozen=True)
class TailPoint:
    u: float
    empirical: float
    bound: float
    stderr: float


def two_sample_tail(
    s: int,
    r: int,
    mu_a: float,
    mu_b: float,
    u_values,
    repetitions: int = 100_000,
    base_seed: int = 77,
    sigma2: float = 0.25,
) -> list[TailPoint]:
    """Empirical tail of the two-sample deviation statistic vs its bound."""
    rng = np.random.default_rng(base_seed)
    mean_a = rng.binomial(s, mu_a, size=repetitions) / s
    mean_b = rng.binomial(r, mu_b, size=repetitions) / r
    gap = mu_a - mu_b
    stat = (s * r / (s + r)) * (mean_a - mean_b - gap) ** 2
    out = []
    for u in u_values:
        p_hat = float((stat >= u).mean())
        out.append(
            TailPoint(
                u=float(u),
                empirical=p_hat,
                bound=float(2.0 * np.exp(-u / (2.0 * sigma2))),
                stderr=float(np.sqrt(max(p_hat * (1 - p_hat), 1e-12) / repetitions)),
            )
        )
    return out
