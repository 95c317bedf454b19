#!/usr/bin/env python3
"""Regenerate the benchmark problem configs under problems/.

Problems 1, 2, and 4 are small hand-written tables; problems 3 and 5 are
larger click-rate-style instances with means in [0.01, 0.07] and small
changes, built deterministically so the shipped files are reproducible.
Run from the repository root:  python3 scripts/make_problems.py
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import numpy as np

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from pwbandits.environments import load_env  # noqa: E402


def write(name: str, arms: int, horizon: int, starts, mean_rows) -> None:
    doc = {
        "arms": arms,
        "horizon": horizon,
        "segments": [
            {"start": int(s), "means": [round(float(m), 4) for m in row]}
            for s, row in zip(starts, mean_rows)
        ],
    }
    path = ROOT / "problems" / name
    path.write_text(json.dumps(doc, indent=1) + "\n")
    env = load_env(path)  # validate what we just wrote
    meta = env.metadata()
    print(f"{name}: K={env.arms} T={env.horizon} segs={len(env.segments)} "
          f"upsilon={meta.upsilon} C={meta.c_total} "
          f"d_change={meta.delta_change:.4g} d_opt={meta.delta_opt:.4g}")


def pb1() -> None:
    # 3 arms, 4 evenly spaced breakpoints, one arm changing at a time.
    # The optimal arm changes once, at t=2000, where the exploited arm
    # drops by 0.6 (the largest change of the instance).
    rows = [
        [0.20, 0.05, 0.72],
        [0.58, 0.05, 0.72],
        [0.58, 0.05, 0.12],
        [0.90, 0.05, 0.12],
        [0.90, 0.15, 0.12],
    ]
    write("pb1", 3, 5000, [1, 1001, 2001, 3001, 4001], rows)


def pb2() -> None:
    # every arm moves by exactly 0.1 at every breakpoint; the initially
    # optimal arm decays while another rises past it; one arm stays worst
    rows = [
        [0.20, 0.90, 0.40],
        [0.10, 0.80, 0.50],
        [0.20, 0.70, 0.60],
        [0.10, 0.60, 0.70],
        [0.20, 0.50, 0.80],
    ]
    write("pb2", 3, 5000, [1, 1001, 2001, 3001, 4001], rows)


def pb4() -> None:
    # uneven spacing with a long first stationary phase of T/2
    rows = [
        [0.30, 0.70, 0.50],
        [0.40, 0.30, 0.60],
        [0.30, 0.40, 0.70],
        [0.40, 0.80, 0.30],
        [0.30, 0.50, 0.70],
    ]
    write("pb4", 3, 5000, [1, 2501, 3501, 4001, 4501], rows)


def pb3() -> None:
    # 6 arms, 8 breakpoints, 19 arm-level changes, means in [0.01, 0.07]
    rows = [
        [0.030, 0.055, 0.020, 0.045, 0.012, 0.065],
        [0.045, 0.055, 0.028, 0.045, 0.030, 0.065],
        [0.045, 0.043, 0.028, 0.045, 0.030, 0.055],
        [0.065, 0.043, 0.028, 0.030, 0.035, 0.055],
        [0.065, 0.043, 0.047, 0.030, 0.035, 0.067],
        [0.047, 0.059, 0.047, 0.030, 0.035, 0.067],
        [0.047, 0.059, 0.027, 0.048, 0.045, 0.067],
        [0.047, 0.050, 0.027, 0.048, 0.045, 0.053],
        [0.060, 0.050, 0.027, 0.037, 0.045, 0.053],
    ]
    starts = [1, 2223, 4445, 6668, 8890, 11112, 13334, 15556, 17778]
    write("pb3", 6, 20000, starts, rows)


def pb5() -> None:
    # 5 arms, 81 breakpoints, 179 arm-level changes over T=100000; arm 0
    # stays near the top of the range so the optimal arm rarely moves
    arms, horizon, n_bp = 5, 100_000, 81
    rng = np.random.default_rng(20190501)
    counts = np.array([3] * 17 + [2] * (n_bp - 17))
    rng.shuffle(counts)
    lo = np.array([0.058] + [0.010] * (arms - 1))
    hi = np.array([0.070] + [0.055] * (arms - 1))
    cur = np.array([0.064, 0.030, 0.045, 0.020, 0.050])
    rows = [cur.copy()]
    for c in counts:
        changed = rng.choice(arms, size=int(c), replace=False)
        nxt = cur.copy()
        for a in changed:
            up_room = hi[a] - cur[a]
            down_room = cur[a] - lo[a]
            if up_room < 0.004:
                sign = -1.0
            elif down_room < 0.004:
                sign = 1.0
            else:
                sign = 1.0 if rng.random() < 0.5 else -1.0
            room = up_room if sign > 0 else down_room
            step = rng.uniform(0.004, min(0.02, room))
            nxt[a] = round(cur[a] + sign * step, 4)
        cur = nxt
        rows.append(cur.copy())
    starts = [1] + [int(round(k * horizon / (n_bp + 1))) + 1 for k in range(1, n_bp + 1)]
    write("pb5", arms, horizon, starts, rows)
    env = load_env(ROOT / "problems" / "pb5")
    meta = env.metadata()
    assert meta.upsilon == 81 and meta.c_total == 179, (meta.upsilon, meta.c_total)
    best_always_0 = all(
        int(np.argmax(seg.means)) == 0 for seg in env.segments
    )
    assert best_always_0


if __name__ == "__main__":
    pb1()
    pb2()
    pb3()
    pb4()
    pb5()
