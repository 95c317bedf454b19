"""Experiment orchestration: seeded repetitions, regret accounting, tunings.

Per-run cumulative pseudo-regret uses true means,

    R(t) = sum_{s <= t} (mu*_s - mu_{I_s}(s)),

so every recorded curve is non-decreasing and reward noise only enters
through the decisions.  Repetition r is seeded with base_seed XOR
splitmix64(r); aggregation reduces an ordered per-repetition vector, so
results are independent of the parallelism degree.  A failed repetition
aborts the whole experiment.
"""

from __future__ import annotations

import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import engine
from .cpd import DIV_BERNOULLI, DIV_QUADRATIC
from .environments import EnvConfigError, PiecewiseEnv, load_env, reward_matrix
from .klcore import FAMILY_FULL, FAMILY_PRACTICAL, _H_TILDE_CROSS, beta_threshold
from .policies import GLOBAL, POLICY_NAMES, make_policy, resolve_params

_MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def rep_seed(base_seed: int, rep: int) -> int:
    return (base_seed ^ splitmix64(rep)) & _MASK64


@dataclass(frozen=True)
class Tunings:
    alpha: float
    delta: float
    alpha0: float


def default_tunings(
    env: PiecewiseEnv, upsilon_known: bool = True, mode: str = "local", alpha0: float = 1.0
) -> Tunings:
    """Corollary-prescribed (alpha, delta), with alpha scaled by alpha0.

    Global restarts with Upsilon known use alpha = sqrt(Ups ln T / T),
    delta = 1 / sqrt(Ups T); local restarts use the same forms with an extra
    factor K under the square roots.  Without knowledge of Upsilon both modes
    fall back to alpha = sqrt(ln T / T), delta = 1 / sqrt(T).
    """
    if mode not in ("local", "global"):
        raise ValueError(f"mode must be 'local' or 'global', got {mode!r}")
    t_hor = env.horizon
    if t_hor < 2:
        raise ValueError("horizon must be >= 2")
    log_t = math.log(t_hor)
    if not upsilon_known:
        alpha = alpha0 * math.sqrt(log_t / t_hor)
        delta = 1.0 / math.sqrt(t_hor)
    else:
        ups = env.metadata().upsilon
        if ups < 1:
            raise ValueError("environment has no breakpoints; use upsilon_known=False")
        scale = ups * (env.arms if mode == "local" else 1)
        alpha = alpha0 * math.sqrt(scale * log_t / t_hor)
        delta = 1.0 / math.sqrt(scale * t_hor)
    alpha = min(alpha, 1.0 - 1e-9)
    return Tunings(alpha=alpha, delta=delta, alpha0=alpha0)


@dataclass(frozen=True)
class PolicySpec:
    name: str
    params: dict = field(default_factory=dict)


@dataclass
class ExperimentConfig:
    environment: str | dict
    roster: list[PolicySpec]
    repetitions: int = 100
    base_seed: int = 0
    stride: int = 10
    parallelism: int = 1
    out_dir: str = "out"
    output_format: str = "csv"

    def validate(self) -> None:
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if self.stride < 1:
            raise ValueError("stride must be >= 1")
        if self.parallelism < 1:
            raise ValueError("parallelism must be >= 1")
        if self.output_format not in ("csv", "json"):
            raise ValueError(f"format must be 'csv' or 'json', got {self.output_format!r}")
        for spec in self.roster:
            if spec.name not in POLICY_NAMES:
                raise ValueError(f"unknown policy {spec.name!r} in roster")


def load_experiment_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise EnvConfigError(f"{path}: cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise EnvConfigError(
            f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc
    try:
        env_ref = doc["environment"]
        algos = doc["algorithms"]
    except KeyError as exc:
        raise EnvConfigError(f"{path}: missing field {exc.args[0]!r}") from exc
    if isinstance(env_ref, str) and not Path(env_ref).is_absolute():
        env_ref = str((path.parent / env_ref).resolve())
    roster = []
    for entry in algos:
        if isinstance(entry, str):
            roster.append(PolicySpec(name=entry))
        else:
            roster.append(PolicySpec(name=entry["name"], params=dict(entry.get("params", {}))))
    cfg = ExperimentConfig(
        environment=env_ref,
        roster=roster,
        repetitions=int(doc.get("repetitions", 100)),
        base_seed=int(doc.get("base_seed", 0)),
        stride=int(doc.get("stride", 10)),
        parallelism=int(doc.get("parallelism", 1)),
        out_dir=str(doc.get("out_dir", "out")),
        output_format=str(doc.get("format", "csv")),
    )
    cfg.validate()
    return cfg


@dataclass
class RegretCurve:
    ts: np.ndarray
    cum_regret: np.ndarray
    events: list[tuple[int, int]]
    final_regret: float
    wall_ms: float
    prop1_margin: float
    choices: np.ndarray | None = None


def record_times(horizon: int, stride: int) -> np.ndarray:
    ts = np.arange(stride, horizon + 1, stride, dtype=np.int64)
    if ts.size == 0 or ts[-1] != horizon:
        ts = np.append(ts, horizon)
    return ts


# kernel dispatch: name -> (det_type, restart_mode, explore_kind, budget_kind)
_KERNEL_POLICIES = {
    "klucb": (engine.DET_NONE, engine.RESTART_NONE, engine.EXPLORE_NONE, engine.BUDGET_PER_ARM),
    "oracle": (engine.DET_NONE, engine.RESTART_NONE, engine.EXPLORE_NONE, engine.BUDGET_PER_ARM),
    "glr-klucb-local": (engine.DET_GLR, engine.RESTART_LOCAL, engine.EXPLORE_DETERMINISTIC, engine.BUDGET_PER_ARM),
    "glr-klucb-global": (engine.DET_GLR, engine.RESTART_GLOBAL, engine.EXPLORE_DETERMINISTIC, engine.BUDGET_PER_ARM),
    "cusum-klucb": (engine.DET_CUSUM, engine.RESTART_LOCAL, engine.EXPLORE_RANDOMIZED, engine.BUDGET_POOLED),
    "m-klucb": (engine.DET_MTEST, engine.RESTART_GLOBAL, engine.EXPLORE_DETERMINISTIC, engine.BUDGET_PER_ARM),
}

_EMPTY_F64 = np.empty(0, dtype=np.float64)
_EMPTY_I64 = np.empty(0, dtype=np.int64)


def run_single(
    env: PiecewiseEnv,
    name: str,
    params: dict | None,
    seed: int,
    stride: int = 10,
    record_choices: bool = False,
    engine_mode: str = "auto",
) -> RegretCurve:
    """Simulate one seeded repetition of a policy on an environment.

    ``engine_mode`` selects the driver: "auto" uses the compiled episode
    kernel where one exists, "generic" steps the policy object round by
    round.  Both consume the same reward table and policy random streams, so
    their decisions coincide.
    """
    t_start = time.perf_counter()
    params = resolve_params(name, env, params)
    rng = np.random.default_rng(seed)
    rewards = reward_matrix(env, rng)
    mu = env.mean_table()
    opt_mu = env.opt_means()
    rec_ts = record_times(env.horizon, stride)
    if engine_mode not in ("auto", "kernel", "generic"):
        raise ValueError(f"unknown engine_mode {engine_mode!r}")
    use_kernel = name in _KERNEL_POLICIES and engine_mode in ("auto", "kernel")
    if engine_mode == "kernel" and name not in _KERNEL_POLICIES:
        raise ValueError(f"policy {name!r} has no kernel episode")
    if use_kernel:
        curve = _run_kernel(env, name, params, rng, rewards, mu, opt_mu, rec_ts, record_choices)
    else:
        policy = make_policy(name, env, params, rng)
        curve = _run_generic(policy, rewards, mu, opt_mu, rec_ts, record_choices)
    curve.wall_ms = (time.perf_counter() - t_start) * 1000.0
    return curve


def _run_kernel(env, name, params, rng, rewards, mu, opt_mu, rec_ts, record_choices):
    det_type, restart_mode, explore_kind, budget_kind = _KERNEL_POLICIES[name]
    horizon = env.horizon
    alpha = 0.0
    delta, dn, ds, div_id, family = 0.0, 1, 1, DIV_BERNOULLI, FAMILY_PRACTICAL
    cusum_m, cusum_eps, cusum_h = 1, 0.0, np.inf
    mt_w, mt_b = 2, np.inf
    breakpoints = _EMPTY_I64
    u_explore, u_arm = _EMPTY_F64, _EMPTY_F64
    if name in ("glr-klucb-local", "glr-klucb-global"):
        alpha = float(params["alpha"])
        delta = float(params["delta"])
        dn = int(params["stride_n"])
        ds = int(params["stride_s"])
        div_id = DIV_BERNOULLI if params["divergence"] == "bernoulli" else DIV_QUADRATIC
        family = FAMILY_FULL if params["threshold_family"] == "full" else FAMILY_PRACTICAL
    elif name == "cusum-klucb":
        alpha = float(params["alpha"])
        cusum_m = int(params["m_init"])
        cusum_eps = float(params["epsilon"])
        cusum_h = float(params["threshold"])
        budget_kind = (
            engine.BUDGET_POOLED if params["index_budget"] == "pooled" else engine.BUDGET_PER_ARM
        )
        u_explore = rng.random(horizon)
        u_arm = rng.random(horizon)
    elif name == "m-klucb":
        alpha = float(params["gamma"])
        mt_w = int(params["window"])
        mt_b = float(params["threshold"])
    elif name == "oracle":
        breakpoints = np.asarray(env.breakpoints(), dtype=np.int64)

    out_regret = np.zeros(rec_ts.shape[0], dtype=np.float64)
    out_choices = np.zeros(horizon, dtype=np.int64)
    out_ev_t = np.zeros(horizon, dtype=np.int64)
    out_ev_arm = np.zeros(horizon, dtype=np.int64)
    n_events, margin, final = engine.run_index_episode(
        rewards, mu, opt_mu,
        det_type, restart_mode, explore_kind, alpha, budget_kind,
        delta, dn, ds, div_id, family, _H_TILDE_CROSS,
        cusum_m, cusum_eps, cusum_h, mt_w, mt_b,
        breakpoints, u_explore, u_arm,
        rec_ts, out_regret, out_choices, out_ev_t, out_ev_arm,
    )
    events = [(int(out_ev_t[i]), int(out_ev_arm[i])) for i in range(n_events)]
    return RegretCurve(
        ts=rec_ts,
        cum_regret=out_regret,
        events=events,
        final_regret=float(final),
        wall_ms=0.0,
        prop1_margin=float(margin),
        choices=out_choices if record_choices else None,
    )


def _run_generic(policy, rewards, mu, opt_mu, rec_ts, record_choices):
    """Step any Policy object through one episode (reference driver)."""
    horizon = rewards.shape[1]
    out_regret = np.zeros(rec_ts.shape[0], dtype=np.float64)
    choices = np.zeros(horizon, dtype=np.int64) if record_choices else None
    events: list[tuple[int, int]] = []
    cum = 0.0
    rec_idx = 0
    for t in range(1, horizon + 1):
        arm = policy.choose(t)
        if choices is not None:
            choices[t - 1] = arm
        cum += opt_mu[t - 1] - mu[arm, t - 1]
        ev = policy.update(arm, rewards[arm, t - 1], t)
        if ev is not None:
            events.append((t, int(ev)))
        if rec_idx < rec_ts.shape[0] and t == rec_ts[rec_idx]:
            out_regret[rec_idx] = cum
            rec_idx += 1
    return RegretCurve(
        ts=rec_ts,
        cum_regret=out_regret,
        events=events,
        final_regret=float(cum),
        wall_ms=0.0,
        prop1_margin=float("nan"),
        choices=choices,
    )


@dataclass
class AlgorithmResult:
    name: str
    params: dict
    ts: np.ndarray
    curves: np.ndarray  # (repetitions, len(ts))
    final_regrets: np.ndarray
    restart_counts: np.ndarray
    wall_ms: np.ndarray
    prop1_margin: float

    @property
    def mean_curve(self) -> np.ndarray:
        return self.curves.mean(axis=0)

    @property
    def final_mean(self) -> float:
        return float(self.final_regrets.mean())

    @property
    def final_std(self) -> float:
        return float(self.final_regrets.std(ddof=1)) if self.final_regrets.size > 1 else 0.0

    @property
    def mean_restarts(self) -> float:
        return float(self.restart_counts.mean())

    @property
    def mean_wall_ms(self) -> float:
        return float(self.wall_ms.mean())


@dataclass
class ExperimentResult:
    config: dict
    algorithms: list[AlgorithmResult]


def _worker_run(env_doc: dict, name: str, params: dict, seeds: list[int], stride: int):
    env = load_env(env_doc)
    out = []
    for seed in seeds:
        c = run_single(env, name, params, seed, stride)
        out.append(
            (c.cum_regret, c.final_regret, len(c.events), c.wall_ms, c.prop1_margin, c.ts)
        )
    return out


def _env_doc(env: PiecewiseEnv) -> dict:
    return {
        "arms": env.arms,
        "horizon": env.horizon,
        "segments": [{"start": s.start, "means": list(s.means)} for s in env.segments],
    }


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Run every roster policy for the configured repetitions and aggregate."""
    config.validate()
    env = config.environment if isinstance(config.environment, PiecewiseEnv) else load_env(config.environment)
    env_doc = _env_doc(env)
    resolved = [(spec.name, resolve_params(spec.name, env, spec.params)) for spec in config.roster]
    seeds = [rep_seed(config.base_seed, r) for r in range(config.repetitions)]
    rec_ts = record_times(env.horizon, config.stride)

    per_algo_chunks: dict[int, dict[int, list]] = {}
    if config.parallelism == 1:
        for ai, (name, params) in enumerate(resolved):
            per_algo_chunks[ai] = {0: _worker_run(env_doc, name, params, seeds, config.stride)}
    else:
        n_chunks = max(1, min(config.parallelism * 4, config.repetitions))
        chunk_bounds = np.array_split(np.arange(config.repetitions), n_chunks)
        with ProcessPoolExecutor(max_workers=config.parallelism) as pool:
            futures = {}
            for ai, (name, params) in enumerate(resolved):
                for ci, idxs in enumerate(chunk_bounds):
                    if idxs.size == 0:
                        continue
                    fut = pool.submit(
                        _worker_run, env_doc, name, params,
                        [seeds[i] for i in idxs], config.stride,
                    )
                    futures[fut] = (ai, ci)
            for fut, (ai, ci) in futures.items():
                per_algo_chunks.setdefault(ai, {})[ci] = fut.result()

    algorithms = []
    for ai, (name, params) in enumerate(resolved):
        rows = []
        for ci in sorted(per_algo_chunks[ai]):
            rows.extend(per_algo_chunks[ai][ci])
        curves = np.stack([r[0] for r in rows])
        margins = np.array([r[4] for r in rows])
        algorithms.append(
            AlgorithmResult(
                name=name,
                params=params,
                ts=rec_ts,
                curves=curves,
                final_regrets=np.array([r[1] for r in rows]),
                restart_counts=np.array([r[2] for r in rows], dtype=np.int64),
                wall_ms=np.array([r[3] for r in rows]),
                prop1_margin=(
                    float(np.max(margins[~np.isnan(margins)]))
                    if np.any(~np.isnan(margins))
                    else float("nan")
                ),
            )
        )
    echo = {
        "environment": env_doc,
        "algorithms": [{"name": n, "params": p} for n, p in resolved],
        "repetitions": config.repetitions,
        "base_seed": config.base_seed,
        "stride": config.stride,
        "parallelism": config.parallelism,
        "format": config.output_format,
    }
    return ExperimentResult(config=echo, algorithms=algorithms)


@dataclass(frozen=True)
class SpacingRecord:
    label: str
    tau: int
    gap: float
    horizon_needed: int
    spacing: int
    ok: bool


@dataclass
class AssumptionReport:
    checkable: bool
    alpha: float
    delta: float
    family: str
    beta_horizon: float
    global_records: list[SpacingRecord]
    local_records: list[SpacingRecord]

    @property
    def global_ok(self) -> bool:
        return self.checkable and all(r.ok for r in self.global_records)

    @property
    def local_ok(self) -> bool:
        return self.checkable and all(r.ok for r in self.local_records)


def check_assumptions(
    env: PiecewiseEnv, alpha: float, delta: float, family: str = "practical"
) -> AssumptionReport:
    """Spacing checks for the regret-bound assumptions.

    The required delay is d = ceil(4K / (alpha gap^2) * beta(T, delta) + K/alpha);
    consecutive breakpoints (globally, and per arm for the local variant) must
    be at least 2 max(d_k, d_{k-1}) apart, with d_0 = 0.
    """
    if not (0.0 < delta < 1.0):
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    meta = env.metadata()
    if alpha <= 0.0:
        return AssumptionReport(
            checkable=False, alpha=alpha, delta=delta, family=family,
            beta_horizon=float("nan"), global_records=[], local_records=[],
        )
    beta_t = beta_threshold(env.horizon, delta, family)
    k_arms = env.arms

    def d_of(gap: float) -> int:
        return math.ceil(4.0 * k_arms * beta_t / (alpha * gap * gap) + k_arms / alpha)

    def records(taus, gaps, label_fmt) -> list[SpacingRecord]:
        recs = []
        prev_tau, prev_d = 0, 0
        for i, (tau, gap) in enumerate(zip(taus, gaps), start=1):
            d = d_of(gap)
            spacing = tau - prev_tau
            need = 2 * max(d, prev_d)
            recs.append(
                SpacingRecord(
                    label=label_fmt.format(i),
                    tau=tau, gap=gap, horizon_needed=need, spacing=spacing,
                    ok=spacing >= need,
                )
            )
            prev_tau, prev_d = tau, d
        return recs

    glob = records(meta.breakpoints, meta.bp_gaps, "breakpoint {}")
    loc = []
    for arm in range(env.arms):
        loc.extend(
            records(
                meta.arm_change_times[arm], meta.arm_gaps[arm], f"arm {arm} change {{}}"
            )
        )
    return AssumptionReport(
        checkable=True, alpha=alpha, delta=delta, family=family,
        beta_horizon=beta_t, global_records=glob, local_records=loc,
    )


def emit_results(result: ExperimentResult, out_dir, output_format: str = "csv") -> list[Path]:
    """Write curve and summary documents; returns the paths written."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        if output_format == "csv":
            curves_path = out / "curves.csv"
            with curves_path.open("w") as fh:
                fh.write("algorithm,rep,t,cum_regret\n")
                for algo in result.algorithms:
                    for rep in range(algo.curves.shape[0]):
                        for j, t in enumerate(algo.ts):
                            fh.write(f"{algo.name},{rep},{t},{algo.curves[rep, j]:.10g}\n")
            summary_path = out / "summary.csv"
            with summary_path.open("w") as fh:
                fh.write("algorithm,mean_final_regret,std_final_regret,mean_restarts,mean_wall_ms\n")
                for algo in result.algorithms:
                    fh.write(
                        f"{algo.name},{algo.final_mean:.10g},{algo.final_std:.10g},"
                        f"{algo.mean_restarts:.10g},{algo.mean_wall_ms:.10g}\n"
                    )
            config_path = out / "config_echo.json"
            config_path.write_text(json.dumps(result.config, indent=2))
            return [curves_path, summary_path, config_path]
        doc = {"config": result.config, "algorithms": []}
        for algo in result.algorithms:
            doc["algorithms"].append(
                {
                    "name": algo.name,
                    "params": algo.params,
                    "mean_final_regret": algo.final_mean,
                    "std_final_regret": algo.final_std,
                    "mean_restarts": algo.mean_restarts,
                    "mean_wall_ms": algo.mean_wall_ms,
                    "t": [int(t) for t in algo.ts],
                    "curves": algo.curves.tolist(),
                }
            )
        path = out / "result.json"
        path.write_text(json.dumps(doc))
        return [path]
    except OSError as exc:
        raise OSError(f"failed writing results under {out}: {exc}") from exc
