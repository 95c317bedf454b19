"""Compiled episode runner for the benchmark harness.

``run_index_episode`` simulates one full run of any index-family policy
(klucb, oracle, m-klucb, cusum-klucb, glr-klucb-local/global) over a
pre-drawn reward table.  It reuses the same numba scalars as the policy
classes in :mod:`pwbandits.policies`; decision-level equivalence between the
two drivers is pinned by tests.

The kernel also tracks the forced-exploration pull-count invariant: between
two restarts of an arm, n_i(t) - n_i(s) >= floor(alpha/K * (t - s)).  A
violation exists iff alpha/K * (t - s) - (n_i(t) - n_i(s)) >= 1 for some
pair, so the maximum of that margin over all pairs is tracked online with a
running minimum; the invariant holds iff the reported margin stays below 1.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .cpd import _cusum_update_nb, _glr_fire_nb, _mtest_stat_nb
from .klcore import _beta_nb, _f_explore_nb, _klucb_nb

DET_NONE = 0
DET_GLR = 1
DET_CUSUM = 2
DET_MTEST = 3

RESTART_NONE = 0
RESTART_LOCAL = 1
RESTART_GLOBAL = 2

EXPLORE_NONE = 0
EXPLORE_DETERMINISTIC = 1
EXPLORE_RANDOMIZED = 2

BUDGET_PER_ARM = 0
BUDGET_POOLED = 1


@njit(cache=True)
def run_index_episode(
    rewards: np.ndarray,
    mu: np.ndarray,
    opt_mu: np.ndarray,
    det_type: int,
    restart_mode: int,
    explore_kind: int,
    alpha: float,
    budget_kind: int,
    delta: float,
    dn: int,
    ds: int,
    div_id: int,
    family: int,
    cross: float,
    cusum_m: int,
    cusum_eps: float,
    cusum_h: float,
    mt_w: int,
    mt_b: float,
    breakpoints: np.ndarray,
    u_explore: np.ndarray,
    u_arm: np.ndarray,
    rec_ts: np.ndarray,
    out_regret: np.ndarray,
    out_choices: np.ndarray,
    out_ev_t: np.ndarray,
    out_ev_arm: np.ndarray,
):
    n_arms, horizon = rewards.shape
    counts = np.zeros(n_arms, dtype=np.int64)
    sums = np.zeros(n_arms, dtype=np.float64)
    taus = np.zeros(n_arms, dtype=np.int64)

    bufs = np.zeros((n_arms, horizon if det_type == DET_GLR else 1), dtype=np.float64)
    cs_seen = np.zeros(n_arms, dtype=np.int64)
    cs_isum = np.zeros(n_arms, dtype=np.float64)
    cs_imean = np.zeros(n_arms, dtype=np.float64)
    cs_gp = np.zeros(n_arms, dtype=np.float64)
    cs_gm = np.zeros(n_arms, dtype=np.float64)
    mt_ring = np.zeros((n_arms, mt_w if det_type == DET_MTEST else 1), dtype=np.float64)
    mt_pos = np.zeros(n_arms, dtype=np.int64)
    mt_cnt = np.zeros(n_arms, dtype=np.int64)

    track_prop1 = explore_kind == EXPLORE_DETERMINISTIC and alpha > 0.0
    rate = alpha / n_arms if track_prop1 else 0.0
    minv = np.full(n_arms, np.inf, dtype=np.float64)
    margin = 0.0

    n_events = 0
    bp_idx = 0
    rec_idx = 0
    cum = 0.0

    for t in range(1, horizon + 1):
        arm = -1
        if explore_kind == EXPLORE_DETERMINISTIC and alpha > 0.0:
            m = int(n_arms / alpha)
            r_slot = t % m
            if 1 <= r_slot <= n_arms:
                arm = r_slot - 1
        elif explore_kind == EXPLORE_RANDOMIZED:
            if u_explore[t - 1] < alpha:
                arm = min(int(u_arm[t - 1] * n_arms), n_arms - 1)
        if arm < 0:
            pooled_budget = 0.0
            if budget_kind == BUDGET_POOLED:
                ntot = 0
                for a in range(n_arms):
                    ntot += counts[a]
                pooled_budget = _f_explore_nb(float(ntot))
            best = -1.0
            arm = 0
            for a in range(n_arms):
                if counts[a] == 0:
                    v = 1.0
                else:
                    if budget_kind == BUDGET_POOLED:
                        budget = pooled_budget
                    else:
                        budget = _f_explore_nb(float(t - taus[a]))
                    v = _klucb_nb(sums[a] / counts[a], counts[a], budget)
                if v > best:
                    best = v
                    arm = a
        out_choices[t - 1] = arm

        rwd = rewards[arm, t - 1]
        cum += opt_mu[t - 1] - mu[arm, t - 1]
        counts[arm] += 1
        sums[arm] += rwd

        fired = False
        if det_type == DET_GLR:
            n = counts[arm]
            bufs[arm, n - 1] = rwd
            if n % dn == 0 and n >= 2:
                beta = _beta_nb(n, delta, family, cross)
                fired = _glr_fire_nb(bufs[arm, :n], n, ds, div_id, beta)
        elif det_type == DET_CUSUM:
            if cs_seen[arm] < cusum_m:
                cs_seen[arm] += 1
                cs_isum[arm] += rwd
                if cs_seen[arm] == cusum_m:
                    cs_imean[arm] = cs_isum[arm] / cusum_m
            else:
                cs_seen[arm] += 1
                cs_gp[arm], cs_gm[arm] = _cusum_update_nb(
                    cs_gp[arm], cs_gm[arm], rwd, cs_imean[arm], cusum_eps
                )
                fired = max(cs_gp[arm], cs_gm[arm]) >= cusum_h
        elif det_type == DET_MTEST:
            mt_ring[arm, mt_pos[arm]] = rwd
            mt_pos[arm] = (mt_pos[arm] + 1) % mt_w
            mt_cnt[arm] += 1
            if mt_cnt[arm] >= mt_w:
                fired = _mtest_stat_nb(mt_ring[arm], mt_pos[arm], mt_w) >= mt_b

        if fired:
            if restart_mode == RESTART_GLOBAL:
                for a in range(n_arms):
                    counts[a] = 0
                    sums[a] = 0.0
                    taus[a] = t
                    cs_seen[a] = 0
                    cs_isum[a] = 0.0
                    cs_gp[a] = 0.0
                    cs_gm[a] = 0.0
                    mt_pos[a] = 0
                    mt_cnt[a] = 0
                    minv[a] = np.inf
                out_ev_t[n_events] = t
                out_ev_arm[n_events] = -1
                n_events += 1
            elif restart_mode == RESTART_LOCAL:
                counts[arm] = 0
                sums[arm] = 0.0
                taus[arm] = t
                cs_seen[arm] = 0
                cs_isum[arm] = 0.0
                cs_gp[arm] = 0.0
                cs_gm[arm] = 0.0
                mt_pos[arm] = 0
                mt_cnt[arm] = 0
                minv[arm] = np.inf
                out_ev_t[n_events] = t
                out_ev_arm[n_events] = arm
                n_events += 1

        if bp_idx < breakpoints.shape[0] and t == breakpoints[bp_idx]:
            for a in range(n_arms):
                counts[a] = 0
                sums[a] = 0.0
                taus[a] = t
                minv[a] = np.inf
            out_ev_t[n_events] = t
            out_ev_arm[n_events] = -1
            n_events += 1
            bp_idx += 1

        if track_prop1:
            for a in range(n_arms):
                v = rate * t - counts[a]
                if minv[a] < np.inf:
                    d = v - minv[a]
                    if d > margin:
                        margin = d
                if v < minv[a]:
                    minv[a] = v

        if rec_idx < rec_ts.shape[0] and t == rec_ts[rec_idx]:
            out_regret[rec_idx] = cum
            rec_idx += 1

    return n_events, margin, cum
