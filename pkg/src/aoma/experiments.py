"""Experiment runners behind the command line: evaluation, search, sweeps and cross-checks.

Every runner takes an :class:`ExperimentConfig` and returns an
:class:`Outcome` holding CSV rows, summary lines and an overall pass flag.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Callable

import numpy as np
from scipy.optimize import minimize

from .analytic import (
    RandomizedPolicy,
    SwitchingPolicy,
    default_horizon,
    occupancy_rate,
    randomized_metrics,
    randomized_stationary,
    switching_metrics,
    switching_stationary,
    truncated_metrics,
    truncated_stationary,
    truncation_gap,
)
from .mdp import build_truncated_mdp, check_switching_structure, rvi_solve
from .model import FalseAlarm, MissedAlarm, ModelParams
from .oracle import oracle_solve
from .search import algorithm1, exhaustive_search, sigma_bound
from .simulator import SimConfig, kl_policy_distance, performance_gap, simulate

__all__ = [
    "ExperimentConfig",
    "Outcome",
    "CheckResult",
    "PRESETS",
    "MODES",
    "AXES",
    "best_age_agnostic",
    "run_evaluate",
    "run_search",
    "run_rvi",
    "run_simulate",
    "run_sweep",
    "run_crosscheck",
    "run",
    "to_csv",
]

MODES = ("evaluate", "search", "rvi", "sweep", "crosscheck", "simulate")
AXES = ("thresholds", "beta", "lambda", "p", "q", "ps")
GRID_CAP = 1_000_000


def _arange(start: float, stop: float, step: float) -> tuple[float, ...]:
    count = int(round((stop - start) / step)) + 1
    return tuple(round(start + i * step, 10) for i in range(count))


PRESETS: dict[str, dict] = {
    "fig5a": dict(p=0.2, q=0.3, beta=0.8, lam=8.0, ps=0.9, mode="sweep", axis="thresholds", grid=tuple(range(31))),
    "fig5b": dict(p=0.25, q=0.25, beta=0.5, lam=8.0, ps=0.9, mode="sweep", axis="thresholds", grid=tuple(range(31))),
    "fig5c": dict(p=0.25, q=0.25, beta=0.8, lam=8.0, ps=0.9, mode="sweep", axis="thresholds", grid=tuple(range(31))),
    "fig6": dict(p=0.25, q=0.25, lam=1.0, ps=0.9, mode="sweep", axis="beta", grid=_arange(0.1, 0.9, 0.05)),
    "fig7": dict(p=0.2, q=0.25, beta=0.5, ps=0.9, mode="sweep", axis="lambda", grid=_arange(0.01, 0.30, 0.01)),
    "fig7q": dict(p=0.2, beta=0.5, lam=1.0, ps=0.9, mode="sweep", axis="q", grid=_arange(0.05, 0.75, 0.05)),
}


@dataclass(frozen=True)
class ExperimentConfig:
    p: float = 0.2
    q: float = 0.3
    ps: float = 0.9
    beta: float = 0.5
    lam: float = 0.0
    mode: str = "evaluate"
    policy: tuple[int, int] | None = None
    rates: tuple[float, float] | None = None
    axis: str | None = None
    grid: tuple | None = None
    epsilon: float = 1e-10
    nmax: int = 5000
    n: int = 100
    horizon: int = 1_000_000
    seed: int = 0
    jobs: int = 1
    grid_cap: int = GRID_CAP

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {', '.join(MODES)}, got {self.mode!r}")
        if self.policy is not None and self.rates is not None:
            raise ValueError("give either threshold policy or rates, not both")
        if self.mode == "sweep":
            if self.axis not in AXES:
                raise ValueError(f"sweep axis must be one of {', '.join(AXES)}, got {self.axis!r}")
            if not self.grid:
                raise ValueError("sweep grid must be nonempty")
        if self.jobs < 1:
            raise ValueError("jobs must be at least 1")
        self.params()

    def params(self) -> ModelParams:
        return ModelParams(self.p, self.q, self.ps, self.beta, self.lam)

    @classmethod
    def from_mapping(cls, values: dict) -> "ExperimentConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(values) - names
        if unknown:
            raise ValueError(f"unknown configuration keys: {', '.join(sorted(unknown))}")
        cleaned = dict(values)
        for key in ("policy", "rates", "grid"):
            if cleaned.get(key) is not None:
                cleaned[key] = tuple(cleaned[key])
        return cls(**cleaned)

    def with_params(self, **changes) -> "ExperimentConfig":
        return replace(self, **changes)


@dataclass(frozen=True)
class CheckResult:
    name: str
    deviation: float
    tolerance: float
    passed: bool

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.name}: deviation {self.deviation:.3e} (tolerance {self.tolerance:.3e})"


@dataclass
class Outcome:
    rows: list[dict] = field(default_factory=list)
    summary: list[str] = field(default_factory=list)
    ok: bool = True


def to_csv(rows: list[dict]) -> str:
    """Rows as CSV text with a header, LF line endings and 17 significant digits."""
    if not rows:
        return ""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = list(rows[0])
    writer.writerow(header)
    for row in rows:
        writer.writerow([_cell(row[k]) for k in header])
    return buf.getvalue()


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


# --------------------------------------------------------------------------
# single evaluations


def _policy_record(params: ModelParams, policy) -> dict:
    if isinstance(policy, SwitchingPolicy):
        metrics = switching_metrics(params, policy)
        dist = switching_stationary(params, policy)
        desc = dict(kind="switching", ma_threshold=policy.ma_threshold, fa_threshold=policy.fa_threshold, f0=None, f1=None)
    else:
        metrics = randomized_metrics(params, policy)
        dist = randomized_stationary(params, policy)
        desc = dict(kind="randomized", ma_threshold=None, fa_threshold=None, f0=policy.f0, f1=policy.f1)
    return {
        **desc,
        "avg_cost": metrics.avg_cost,
        "frequency": metrics.frequency,
        "objective": metrics.objective,
        "occupancy_ma": occupancy_rate(dist, "MA"),
        "occupancy_fa": occupancy_rate(dist, "FA"),
    }


def _configured_policy(cfg: ExperimentConfig):
    if cfg.policy is not None:
        return SwitchingPolicy(*cfg.policy)
    if cfg.rates is not None:
        return RandomizedPolicy(*cfg.rates)
    raise ValueError("this mode needs a policy (thresholds or rates)")


def run_evaluate(cfg: ExperimentConfig) -> Outcome:
    params = cfg.params()
    policy = _configured_policy(cfg)
    record = _policy_record(params, policy)
    if isinstance(policy, SwitchingPolicy) and cfg.n > max(policy):
        record["truncated_objective"] = truncated_metrics(params, policy, cfg.n).objective
        record["truncation_gap"] = truncation_gap(params, policy, cfg.n)
    summary = [f"{record['kind']} policy: C={record['avg_cost']:.10g} F={record['frequency']:.10g} L={record['objective']:.10g}"]
    return Outcome([record], summary)


def run_search(cfg: ExperimentConfig) -> Outcome:
    params = cfg.params()
    result = algorithm1(params, cfg.epsilon, cfg.nmax)
    m = result.best_metrics
    row = {
        "ma_threshold": result.best_policy.ma_threshold,
        "fa_threshold": result.best_policy.fa_threshold,
        "avg_cost": m.avg_cost,
        "frequency": m.frequency,
        "objective": m.objective,
        "n": result.n,
        "evaluations": result.evaluations,
        "candidate_set_size": result.candidate_set_size,
        "sigma_bound": result.sigma_bound,
        "family_restricted": result.family_restricted,
    }
    summary = [f"optimal switching policy {tuple(result.best_policy)} with L={m.objective:.10g} ({result.evaluations} evaluations, N={result.n})"]
    if result.family_restricted:
        summary.append("source is negatively correlated: result is optimal within the switching family only")
    return Outcome([row], summary)


def run_rvi(cfg: ExperimentConfig) -> Outcome:
    mdp = build_truncated_mdp(cfg.params(), cfg.n)
    value, table = rvi_solve(mdp)
    report = check_switching_structure(table)
    row = {
        "n": cfg.n,
        "rho": value.rho,
        "rho_lower": value.rho_lower,
        "rho_upper": value.rho_upper,
        "iterations": value.iterations,
        "ma_threshold": report.ma_threshold,
        "fa_threshold": report.fa_threshold,
        "switching": report.is_switching,
    }
    summary = [
        f"relative value iteration: rho={value.rho:.10g} after {value.iterations} sweeps",
        f"thresholds ({report.ma_threshold}, {report.fa_threshold}), switching structure: {report.is_switching}",
    ]
    return Outcome([row], summary)


def run_simulate(cfg: ExperimentConfig) -> Outcome:
    params = cfg.params()
    policy = _configured_policy(cfg)
    rep = simulate(params, policy, SimConfig(horizon=cfg.horizon, seed=cfg.seed, burn_in=min(10_000, cfg.horizon // 10)))
    rows = []
    for name in ("avg_cost", "frequency", "objective"):
        rows.append({"metric": name, "estimate": getattr(rep.metrics, name), "standard_error": rep.standard_errors[name]})
    summary = [f"simulated {rep.slots} slots: L={rep.metrics.objective:.10g} +/- {rep.standard_errors['objective']:.3g}"]
    return Outcome(rows, summary)


# --------------------------------------------------------------------------
# sweeps


def best_age_agnostic(params: ModelParams, grid_points: int = 40) -> tuple[RandomizedPolicy, float]:
    """Cheapest age-agnostic policy with ``f0 + f1 <= 1``: coarse grid, then a constrained polish."""
    lo = 1e-9
    axis = np.linspace(lo, 1.0, grid_points)

    def objective(f) -> float:
        return randomized_metrics(params, RandomizedPolicy(float(f[0]), float(f[1]))).objective

    start = min(((a, b) for a in axis for b in axis if a + b <= 1.0), key=objective)
    res = minimize(
        objective,
        np.array(start),
        method="SLSQP",
        bounds=[(lo, 1.0), (lo, 1.0)],
        constraints=[{"type": "ineq", "fun": lambda f: 1.0 - f[0] - f[1]}],
        options={"ftol": 1e-14, "maxiter": 500},
    )
    best = np.clip(res.x, lo, 1.0)
    if best.sum() > 1.0:
        best = best / best.sum()
    if objective(best) > objective(start):
        best = np.array(start)
    policy = RandomizedPolicy(float(best[0]), float(best[1]))
    return policy, objective(best)


def _regime(policy: SwitchingPolicy) -> str:
    zeros = (policy.ma_threshold == 0) + (policy.fa_threshold == 0)
    return ("threshold", "synced", "always")[zeros]


def _threshold_grid_row(args) -> dict:
    params, x, y = args
    m = switching_metrics(params, SwitchingPolicy(x, y))
    return {"ma_threshold": x, "fa_threshold": y, "avg_cost": m.avg_cost, "frequency": m.frequency, "objective": m.objective}


def _scalar_row(args) -> dict:
    cfg, value = args
    name = {"lambda": "lam"}.get(cfg.axis, cfg.axis)
    params = cfg.with_params(**{name: value}).params()

    opt = algorithm1(params, cfg.epsilon, cfg.nmax)
    diag = exhaustive_search(params, opt.n, diagonal=True)
    agn_policy, _ = best_age_agnostic(params)
    agn = randomized_metrics(params, agn_policy)

    opt_pol, diag_pol = opt.best_policy, diag.best_policy
    h = max(
        default_horizon(params.q_bar * params.p_f, max(opt_pol.ma_threshold, diag_pol.ma_threshold)),
        default_horizon(params.p_bar * params.p_f, max(opt_pol.fa_threshold, diag_pol.fa_threshold)),
        default_horizon(params.q_bar * (1.0 - params.p_s * agn_policy.f1)),
        default_horizon(params.p_bar * (1.0 - params.p_s * agn_policy.f0)),
    )
    d_opt = switching_stationary(params, opt_pol, horizon=h)
    d_diag = switching_stationary(params, diag_pol, horizon=h)
    d_agn = randomized_stationary(params, agn_policy, horizon=h)

    return {
        cfg.axis: value,
        "opt_ma_threshold": opt_pol.ma_threshold,
        "opt_fa_threshold": opt_pol.fa_threshold,
        "opt_regime": _regime(opt_pol),
        "opt_objective": opt.best_metrics.objective,
        "opt_frequency": opt.best_metrics.frequency,
        "opt_avg_cost": opt.best_metrics.avg_cost,
        "diag_threshold": diag_pol.ma_threshold,
        "diag_objective": diag.best_metrics.objective,
        "diag_frequency": diag.best_metrics.frequency,
        "diag_avg_cost": diag.best_metrics.avg_cost,
        "agn_f0": agn_policy.f0,
        "agn_f1": agn_policy.f1,
        "agn_objective": agn.objective,
        "agn_frequency": agn.frequency,
        "agn_avg_cost": agn.avg_cost,
        "gap_diag": performance_gap(diag.best_metrics, opt.best_metrics),
        "gap_agn": performance_gap(agn, opt.best_metrics),
        "kl_diag": kl_policy_distance(d_diag, d_opt),
        "kl_agn": kl_policy_distance(d_agn, d_opt),
        "occupancy_ma_opt": occupancy_rate(d_opt, "MA"),
        "occupancy_ma_diag": occupancy_rate(d_diag, "MA"),
        "occupancy_ma_agn": occupancy_rate(d_agn, "MA"),
        "family_restricted": opt.family_restricted,
    }


def _map(func, items: list, jobs: int) -> list:
    if jobs == 1 or len(items) < 2:
        return [func(item) for item in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(func, items, chunksize=max(1, len(items) // (4 * jobs))))


def run_sweep(cfg: ExperimentConfig) -> Outcome:
    """One row per grid point, in grid order.

    The ``thresholds`` axis evaluates every pair in ``grid x grid``; scalar
    axes rerun the optimal, diagonal and age-agnostic comparisons per value.
    """
    params = cfg.params()
    if cfg.axis == "thresholds":
        values = sorted({int(v) for v in cfg.grid})
        if min(values) < 0:
            raise ValueError("threshold grid must be nonnegative")
        size = len(values) ** 2
        if size > cfg.grid_cap:
            raise ValueError(f"grid has {size} points, above the cap of {cfg.grid_cap}")
        rows = _map(_threshold_grid_row, [(params, x, y) for y in values for x in values], cfg.jobs)
        best = min(rows, key=lambda r: (r["objective"], r["ma_threshold"], r["fa_threshold"]))
        for r in rows:
            r["is_minimum"] = r is best
        summary = [f"grid minimum at ({best['ma_threshold']}, {best['fa_threshold']}) with L={best['objective']:.10g}"]
        return Outcome(rows, summary)

    if len(cfg.grid) > cfg.grid_cap:
        raise ValueError(f"grid has {len(cfg.grid)} points, above the cap of {cfg.grid_cap}")
    # validate every grid point before doing any work
    name = {"lambda": "lam"}.get(cfg.axis, cfg.axis)
    for v in cfg.grid:
        cfg.with_params(**{name: float(v)})
    rows = _map(_scalar_row, [(cfg, float(v)) for v in cfg.grid], cfg.jobs)
    summary = [f"{cfg.axis} sweep over {len(rows)} points"]
    for prev, cur in zip(rows, rows[1:]):
        if prev["opt_regime"] != cur["opt_regime"]:
            summary.append(f"optimal regime changes {prev['opt_regime']} -> {cur['opt_regime']} at {cfg.axis}={cur[cfg.axis]:g}")
        if (prev["diag_threshold"] == 0) != (cur["diag_threshold"] == 0):
            summary.append(f"diagonal policy leaves always-transmit at {cfg.axis}={cur[cfg.axis]:g}")
    return Outcome(rows, summary)


# --------------------------------------------------------------------------
# cross-checks


def run_crosscheck(cfg: ExperimentConfig, sigma_fn: Callable | None = None) -> Outcome:
    """Compare closed forms, the linear-solve oracle, the MDP solver and simulation.

    ``sigma_fn`` replaces :func:`truncation_gap` and exists so a corrupted
    gap can be injected as a negative control.
    """
    sigma_fn = truncation_gap if sigma_fn is None else sigma_fn
    params = cfg.params()
    search = algorithm1(params, cfg.epsilon, cfg.nmax)
    policy = SwitchingPolicy(*cfg.policy) if cfg.policy is not None else search.best_policy
    n = max(cfg.n, max(policy) + 2)
    checks: list[CheckResult] = []

    def check(name: str, deviation: float, tolerance: float):
        checks.append(CheckResult(name, float(deviation), float(tolerance), bool(deviation <= tolerance)))

    # closed-form truncated law against the brute-force chain
    oracle = oracle_solve(params, policy, n)
    dist = truncated_stationary(params, policy, n)
    check("truncated masses vs linear solve", max(abs(dist.mass(s) - oracle.mass(s)) for s in oracle.mdp.states), 1e-8)

    # exact truncation gap
    exact = switching_metrics(params, policy).objective
    truncated = oracle.metrics().objective
    check("objective minus truncated objective vs gap", abs(exact - truncated - sigma_fn(params, policy, n)), 1e-10)

    # analytic search against relative value iteration
    value, table = rvi_solve(build_truncated_mdp(params, n))
    check("search optimum vs value iteration", abs(search.best_metrics.objective - value.rho), 1e-6 + sigma_bound(params, n))
    report = check_switching_structure(table)
    if not search.family_restricted:
        same = report.is_switching and report.as_policy() == search.best_policy
        checks.append(CheckResult("value iteration thresholds match search", 0.0 if same else 1.0, 0.0, same))

    # model-free simulation
    sim = simulate(params, policy, SimConfig(horizon=cfg.horizon, seed=cfg.seed, burn_in=min(10_000, cfg.horizon // 10)))
    se = sim.standard_errors["objective"]
    check("simulated vs analytic objective", abs(sim.metrics.objective - exact), max(3.0 * se, 1e-12))

    rows = [asdict(c) for c in checks]
    ok = all(c.passed for c in checks)
    summary = [f"crosscheck of policy {tuple(policy)} at N={n}"] + [c.line() for c in checks]
    return Outcome(rows, summary, ok)


RUNNERS = {
    "evaluate": run_evaluate,
    "search": run_search,
    "rvi": run_rvi,
    "sweep": run_sweep,
    "crosscheck": run_crosscheck,
    "simulate": run_simulate,
}


def run(cfg: ExperimentConfig) -> Outcome:
    return RUNNERS[cfg.mode](cfg)
