"""Piece-wise stationary Bernoulli environments with ground-truth metadata.

An environment is a table of per-arm means that is constant on segments.
Configs are JSON documents::

    {"arms": K, "horizon": T,
     "segments": [{"start": 1, "means": [...]}, {"start": 1001, "means": [...]}]}

Segment starts are 1-based round indices, strictly increasing, the first
being 1.  A breakpoint is a round t where some arm's mean differs between t
and t+1; with this schema the breakpoints are exactly ``start - 1`` for every
segment after the first.  Arms are 0-indexed throughout the code.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class EnvConfigError(ValueError):
    """Raised for malformed or invariant-violating environment configs."""


@dataclass(frozen=True)
class Segment:
    start: int
    means: tuple[float, ...]


@dataclass(frozen=True)
class EnvMetadata:
    """Exact combinatorial summary of an environment's change structure."""

    upsilon: int
    c_total: int
    breakpoints: tuple[int, ...]
    arm_change_times: tuple[tuple[int, ...], ...]
    bp_gaps: tuple[float, ...]
    arm_gaps: tuple[tuple[float, ...], ...]
    delta_change: float
    delta_opt: float


class PiecewiseEnv:
    def __init__(self, arms: int, horizon: int, segments: list[Segment]):
        self.arms = int(arms)
        self.horizon = int(horizon)
        self.segments = tuple(segments)
        self._validate()
        self._starts = np.array([s.start for s in self.segments], dtype=np.int64)
        self._seg_means = np.array([s.means for s in self.segments], dtype=np.float64)
        self._mean_table: np.ndarray | None = None
        self._opt_means: np.ndarray | None = None

    def _validate(self) -> None:
        if self.arms < 1:
            raise EnvConfigError(f"arms must be >= 1, got {self.arms}")
        if self.horizon < 1:
            raise EnvConfigError(f"horizon must be >= 1, got {self.horizon}")
        if not self.segments:
            raise EnvConfigError("at least one segment is required")
        if self.segments[0].start != 1:
            raise EnvConfigError(
                f"first segment must start at 1, got {self.segments[0].start}"
            )
        prev = 0
        for idx, seg in enumerate(self.segments):
            if len(seg.means) != self.arms:
                raise EnvConfigError(
                    f"segment {idx}: expected {self.arms} means, got {len(seg.means)}"
                )
            if seg.start <= prev:
                raise EnvConfigError(
                    f"segment {idx}: non-increasing segment start {seg.start}"
                )
            if seg.start > self.horizon:
                raise EnvConfigError(
                    f"segment {idx}: start {seg.start} exceeds horizon {self.horizon}"
                )
            for a, m in enumerate(seg.means):
                if not (0.0 <= m <= 1.0):
                    raise EnvConfigError(
                        f"segment {idx}, arm {a}: mean {m} outside [0, 1]"
                    )
            prev = seg.start
        for idx in range(1, len(self.segments)):
            if self.segments[idx].means == self.segments[idx - 1].means:
                raise EnvConfigError(
                    f"segment {idx} does not differ from segment {idx - 1} on any arm"
                )

    def _segment_index(self, t: int) -> int:
        return int(np.searchsorted(self._starts, t, side="right") - 1)

    def mean(self, arm: int, t: int) -> float:
        if not 0 <= arm < self.arms:
            raise IndexError(f"arm {arm} out of range [0, {self.arms})")
        if not 1 <= t <= self.horizon:
            raise IndexError(f"time {t} out of range [1, {self.horizon}]")
        return float(self._seg_means[self._segment_index(t), arm])

    def mean_table(self) -> np.ndarray:
        """(arms, horizon) array of true means; column t-1 holds round t."""
        if self._mean_table is None:
            table = np.empty((self.arms, self.horizon), dtype=np.float64)
            bounds = list(self._starts) + [self.horizon + 1]
            for i in range(len(self.segments)):
                table[:, bounds[i] - 1 : bounds[i + 1] - 1] = self._seg_means[i][:, None]
            self._mean_table = table
        return self._mean_table

    def opt_means(self) -> np.ndarray:
        """(horizon,) array of the best mean at each round."""
        if self._opt_means is None:
            self._opt_means = self.mean_table().max(axis=0)
        return self._opt_means

    def oracle_mean(self, t: int) -> tuple[int, float]:
        """Best arm at round t (lowest index on ties) and its mean."""
        if not 1 <= t <= self.horizon:
            raise IndexError(f"time {t} out of range [1, {self.horizon}]")
        row = self._seg_means[self._segment_index(t)]
        best = int(np.argmax(row))
        return best, float(row[best])

    def breakpoints(self) -> tuple[int, ...]:
        return tuple(int(s.start) - 1 for s in self.segments[1:])

    def metadata(self) -> EnvMetadata:
        return env_metadata(self)


def env_metadata(env: PiecewiseEnv) -> EnvMetadata:
    segs = env._seg_means
    n_seg = segs.shape[0]
    bps: list[int] = []
    bp_gaps: list[float] = []
    arm_times: list[list[int]] = [[] for _ in range(env.arms)]
    arm_gaps: list[list[float]] = [[] for _ in range(env.arms)]
    for k in range(1, n_seg):
        tau = int(env.segments[k].start) - 1
        diffs = np.abs(segs[k] - segs[k - 1])
        bps.append(tau)
        bp_gaps.append(float(diffs.max()))
        for a in range(env.arms):
            if diffs[a] > 0.0:
                arm_times[a].append(tau)
                arm_gaps[a].append(float(diffs[a]))
    c_total = sum(len(ts) for ts in arm_times)
    all_gaps = [g for gs in arm_gaps for g in gs]
    delta_change = min(all_gaps) if all_gaps else math.inf
    opt_gaps = []
    for k in range(n_seg):
        best = segs[k].max()
        below = segs[k][segs[k] < best]
        if below.size:
            opt_gaps.append(float(best - below.max()))
    delta_opt = min(opt_gaps) if opt_gaps else math.inf
    return EnvMetadata(
        upsilon=len(bps),
        c_total=c_total,
        breakpoints=tuple(bps),
        arm_change_times=tuple(tuple(ts) for ts in arm_times),
        bp_gaps=tuple(bp_gaps),
        arm_gaps=tuple(tuple(gs) for gs in arm_gaps),
        delta_change=delta_change,
        delta_opt=delta_opt,
    )


def sample_reward(env: PiecewiseEnv, arm: int, t: int, rng: np.random.Generator) -> float:
    """One Bernoulli draw with success probability mu_arm(t)."""
    mu = env.mean(arm, t)
    return float(rng.random() < mu)


def reward_matrix(env: PiecewiseEnv, rng: np.random.Generator) -> np.ndarray:
    """Pre-drawn (arms, horizon) reward table, one Bernoulli per (arm, round).

    Drawing the whole table up front makes reward streams identical across
    policies and parallelism degrees for a given generator seed.
    """
    u = rng.random((env.arms, env.horizon))
    return (u < env.mean_table()).astype(np.float64)


def load_env(source) -> PiecewiseEnv:
    """Build a validated environment from a config path, JSON string, or dict."""
    if isinstance(source, dict):
        doc = source
        where = "<dict>"
    else:
        path = Path(source)
        where = str(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise EnvConfigError(f"{where}: cannot read config: {exc}") from exc
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise EnvConfigError(
                f"{where}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}"
            ) from exc
    try:
        arms = int(doc["arms"])
        horizon = int(doc["horizon"])
        raw_segments = doc["segments"]
    except KeyError as exc:
        raise EnvConfigError(f"{where}: missing field {exc.args[0]!r}") from exc
    if not isinstance(raw_segments, list) or not raw_segments:
        raise EnvConfigError(f"{where}: 'segments' must be a non-empty list")
    segments = []
    for idx, raw in enumerate(raw_segments):
        try:
            seg = Segment(start=int(raw["start"]), means=tuple(float(m) for m in raw["means"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise EnvConfigError(f"{where}: segment {idx}: malformed entry ({exc})") from exc
        segments.append(seg)
    try:
        return PiecewiseEnv(arms=arms, horizon=horizon, segments=segments)
    except EnvConfigError as exc:
        raise EnvConfigError(f"{where}: {exc}") from exc
