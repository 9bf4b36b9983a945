"""Monte-Carlo experiment orchestration: regret traces over seeds and variants,
mean/std aggregation, diagnostics suites, scaling studies, and file output."""

from __future__ import annotations

import hashlib
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import binom

from .controller import EpisodeResult, MultiSourceSummary, run_episode
from .errors import ConfigError
from .lqr import (
    ConstraintSetP,
    ConstraintSetQ,
    CostMatrices,
    ThetaParams,
    in_set_p,
    in_set_q,
)
from .offline import Assumption2Report, OfflineConfig, OfflineSummary, check_assumption2, simulate_offline
from .rng import RngStream, hash64
from .sim import make_true_theta, sample_theta_delta
from .svgplot import render_regret_svg
from .traces import EpisodeDiagnostics, RegretTrace, write_aggregate_csv, write_run_csv

logger = logging.getLogger(__name__)

STREAM_OFFLINE = 0
STREAM_EPISODE = 1
STREAM_DELTA = 2

_DELTA_RESAMPLE_ATTEMPTS = 100


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    """Fully resolved experiment description.

    `s_values` always holds at least one offline trajectory length; labels in
    the outputs carry the length only when more than one is configured.
    """

    n: int
    m: int
    a_sim: np.ndarray
    b_sim: np.ndarray
    a_star: Optional[np.ndarray]
    b_star: Optional[np.ndarray]
    sample_delta: bool
    m_delta: float
    q_matrix: np.ndarray
    r_matrix: np.ndarray
    s_values: Tuple[int, ...]
    t_horizon: int
    delta: float
    num_runs: int
    base_seed: int
    variants: Tuple[str, ...]
    set_q: ConstraintSetQ
    set_p: ConstraintSetP
    offline: OfflineConfig
    beta_mdelta_scale: float = 1.0
    max_attempts: int = 100
    share_offline: bool = False
    workers: int = 1
    output_dir: str = "out"
    state_ceiling: float = 1e6
    diag_runs: int = 200
    diag_delta1: Optional[float] = None
    diag_delta2: Optional[float] = None
    sweep_s_values: Optional[Tuple[int, ...]] = None
    sweep_t_values: Optional[Tuple[int, ...]] = None
    raw: dict = field(default_factory=dict, repr=False)

    @property
    def costs(self) -> CostMatrices:
        return CostMatrices(self.q_matrix, self.r_matrix)

    @property
    def theta_sim(self) -> ThetaParams:
        return ThetaParams(self.a_sim, self.b_sim)

    @property
    def theta_star_explicit(self) -> Optional[ThetaParams]:
        if self.a_star is None or self.b_star is None:
            return None
        return ThetaParams(self.a_star, self.b_star)

    def fingerprint(self) -> str:
        canonical = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


@dataclass(frozen=True, eq=False)
class RunRecord:
    """One episode's trace plus the side diagnostics used by the test suites."""

    variant: str
    s_len: int
    run_id: int
    seed: int
    trace: RegretTrace
    diagnostics: EpisodeDiagnostics
    assumption2: Optional[Assumption2Report]
    delta_norm: float


@dataclass(frozen=True, eq=False)
class AggregateResult:
    """Per-step mean and sample standard deviation of cumulative regret."""

    label: str
    t: np.ndarray
    mean_cum_regret: np.ndarray
    std_cum_regret: np.ndarray
    n_runs: int
    fingerprint: str


@dataclass(frozen=True, eq=False)
class ExperimentResult:
    aggregates: Dict[str, AggregateResult]
    runs: List[RunRecord]
    out_dir: Optional[Path]


def delta1_for(cfg_delta: float, s_len: int, t_horizon: int) -> float:
    """Offline confidence split; uses max(S, T + 1) so the schedule stays valid
    when the offline trajectory is not longer than the horizon."""
    return cfg_delta / (16.0 * max(s_len, t_horizon + 1))


def run_label(variant: str, s_len: int, multiple_s: bool) -> str:
    return f"{variant}_S{s_len}" if multiple_s else variant


def _resolve_theta_star(
    cfg: ExperimentConfig, rng: RngStream
) -> Tuple[ThetaParams, float]:
    explicit = cfg.theta_star_explicit
    if explicit is not None and not cfg.sample_delta:
        delta_norm = float(
            np.linalg.norm(explicit.stacked - cfg.theta_sim.stacked)
        )
        return explicit, delta_norm
    costs = cfg.costs
    for _ in range(_DELTA_RESAMPLE_ATTEMPTS):
        delta = sample_theta_delta(cfg.m_delta, cfg.n, cfg.m, rng)
        theta_star, delta_norm = make_true_theta(cfg.theta_sim, delta)
        if in_set_q(theta_star, costs, cfg.set_q):
            return theta_star, delta_norm
    raise ConfigError(
        "could not draw an admissible true system within the dissimilarity ball; "
        "check m_delta against set_q"
    )


def _synthetic_prior_summary(cfg: ExperimentConfig, s_len: int, delta1: float) -> OfflineSummary:
    # Placeholder for variants that ignore the offline data entirely.
    d = cfg.n + cfg.m
    lam0 = cfg.offline.regularizer
    return OfflineSummary(
        u_matrix=lam0 * np.eye(d),
        theta_hat_sim=ThetaParams.zeros(cfg.n, cfg.m),
        alpha=0.0,
        s_len=s_len,
        m_delta=0.0,
        delta1=delta1,
        regularizer=lam0,
    )


def execute_single_run(
    cfg: ExperimentConfig,
    variant: str,
    s_len: int,
    run_id: int,
    shared_summary: Optional[OfflineSummary] = None,
    delta1_override: Optional[float] = None,
    delta2_override: Optional[float] = None,
    seed_tag: str = "",
) -> RunRecord:
    """Run one (variant, S, run_id) cell: offline data, then the episode."""
    seed = hash64(cfg.base_seed, seed_tag + variant, run_id, s_len)
    costs = cfg.costs
    delta1 = delta1_override if delta1_override is not None else delta1_for(
        cfg.delta, s_len, cfg.t_horizon
    )
    theta_star, delta_norm = _resolve_theta_star(cfg, RngStream(seed, STREAM_DELTA))

    assumption2 = None
    if variant == "ts_no_offline":
        summary = _synthetic_prior_summary(cfg, s_len, delta1)
    elif shared_summary is not None:
        summary = shared_summary
        assumption2 = check_assumption2(summary, cfg.theta_sim, cfg.n, cfg.m)
    else:
        summary, _, _ = simulate_offline(
            cfg.theta_sim,
            costs,
            s_len,
            cfg.offline,
            delta1,
            cfg.m_delta,
            RngStream(seed, STREAM_OFFLINE),
        )
        assumption2 = check_assumption2(summary, cfg.theta_sim, cfg.n, cfg.m)

    result: EpisodeResult = run_episode(
        theta_star,
        MultiSourceSummary((summary,)),
        costs,
        cfg.set_q,
        cfg.t_horizon,
        cfg.delta,
        variant,
        RngStream(seed, STREAM_EPISODE),
        max_attempts=cfg.max_attempts,
        beta_mdelta_scale=cfg.beta_mdelta_scale,
        state_ceiling=cfg.state_ceiling,
        delta2_override=delta2_override,
        run_id=run_id,
        seed=seed,
    )
    return RunRecord(
        variant=variant,
        s_len=s_len,
        run_id=run_id,
        seed=seed,
        trace=result.trace,
        diagnostics=result.diagnostics,
        assumption2=assumption2,
        delta_norm=delta_norm,
    )


def _execute_run_spec(args) -> RunRecord:
    cfg, variant, s_len, run_id, shared = args
    return execute_single_run(cfg, variant, s_len, run_id, shared_summary=shared)


def _aggregate(label: str, traces: Sequence[RegretTrace], fingerprint: str) -> AggregateResult:
    stack = np.vstack([tr.cum_regret for tr in traces])
    mean = stack.mean(axis=0)
    std = stack.std(axis=0, ddof=1) if len(traces) > 1 else np.zeros_like(mean)
    return AggregateResult(
        label=label,
        t=traces[0].t.copy(),
        mean_cum_regret=mean,
        std_cum_regret=std,
        n_runs=len(traces),
        fingerprint=fingerprint,
    )


def _validate_for_run(cfg: ExperimentConfig) -> None:
    explicit = cfg.theta_star_explicit
    if explicit is not None and not in_set_q(explicit, cfg.costs, cfg.set_q):
        raise ConfigError("the configured true system lies outside the admissible set (set_q)")
    if cfg.offline.controller_mode == "ce_dither" and not in_set_p(
        cfg.theta_sim, cfg.costs, cfg.set_p
    ):
        raise ConfigError("the auxiliary system lies outside set_p required by ce_dither mode")
    if min(cfg.s_values) <= cfg.t_horizon:
        logger.warning(
            "offline length S=%d does not exceed the horizon T=%d; the confidence "
            "schedule falls back to max(S, T + 1)",
            min(cfg.s_values),
            cfg.t_horizon,
        )


def run_experiment(cfg: ExperimentConfig, out_dir=None) -> ExperimentResult:
    """Run every (variant, S, run) cell, write per-run CSVs, the aggregate CSV,
    and the SVG plot.  Deterministic for a fixed config and base seed."""
    _validate_for_run(cfg)
    out = Path(out_dir) if out_dir is not None else Path(cfg.output_dir)
    runs_dir = out / "runs"
    runs_dir.mkdir(parents=True, exist_ok=True)
    fingerprint = cfg.fingerprint()
    multiple_s = len(cfg.s_values) > 1

    shared: Dict[Tuple[str, int], Optional[OfflineSummary]] = {}
    if cfg.share_offline:
        for variant in cfg.variants:
            for s_len in cfg.s_values:
                if variant == "ts_no_offline":
                    shared[(variant, s_len)] = None
                    continue
                seed = hash64(cfg.base_seed, variant, 0, s_len)
                delta1 = delta1_for(cfg.delta, s_len, cfg.t_horizon)
                summary, _, _ = simulate_offline(
                    cfg.theta_sim,
                    cfg.costs,
                    s_len,
                    cfg.offline,
                    delta1,
                    cfg.m_delta,
                    RngStream(seed, STREAM_OFFLINE),
                )
                shared[(variant, s_len)] = summary

    specs = [
        (cfg, variant, s_len, run_id, shared.get((variant, s_len)))
        for variant in cfg.variants
        for s_len in cfg.s_values
        for run_id in range(cfg.num_runs)
    ]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            records = list(pool.map(_execute_run_spec, specs))
    else:
        records = [_execute_run_spec(spec) for spec in specs]

    aggregates: Dict[str, AggregateResult] = {}
    agg_rows = []
    for variant in cfg.variants:
        for s_len in cfg.s_values:
            label = run_label(variant, s_len, multiple_s)
            cell = [r for r in records if r.variant == variant and r.s_len == s_len]
            for rec in cell:
                write_run_csv(runs_dir / f"{label}_run{rec.run_id:03d}.csv", rec.trace)
            agg = _aggregate(label, [r.trace for r in cell], fingerprint)
            aggregates[label] = agg
            for i in range(len(agg.t)):
                agg_rows.append(
                    (agg.t[i], agg.mean_cum_regret[i], agg.std_cum_regret[i], label, agg.n_runs)
                )
    write_aggregate_csv(out / "aggregate.csv", agg_rows)
    render_regret_svg(
        {label: (agg.mean_cum_regret, agg.std_cum_regret) for label, agg in aggregates.items()},
        out / "regret.svg",
    )
    with open(out / "experiment.json", "w", encoding="utf-8") as fh:
        json.dump({"fingerprint": fingerprint, "config": cfg.raw}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return ExperimentResult(aggregates=aggregates, runs=records, out_dir=out)


def _logt_fit_r2(traces: Sequence[RegretTrace]) -> Optional[float]:
    """R-squared of a c0 + c1 log(t) fit to the mean cumulative regret over the
    second half of the horizon.  Purely advisory."""
    if not traces or len(traces[0]) < 8:
        return None
    mean_curve = np.vstack([tr.cum_regret for tr in traces]).mean(axis=0)
    t = np.arange(1, len(mean_curve) + 1)
    lo = len(mean_curve) // 4
    x = np.log(t[lo:])
    y = mean_curve[lo:]
    coef = np.polyfit(x, y, 1)
    residuals = y - np.polyval(coef, x)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot <= 0:
        return None
    return float(1.0 - np.sum(residuals**2) / ss_tot)


def binomial_lower_test(successes: int, trials: int, target: float, confidence: float = 0.99) -> bool:
    """One-sided test: accept the claim that the true success probability is at
    least `target` unless the observed count is improbably low."""
    if target <= 0:
        return True
    return float(binom.cdf(successes, trials, target)) >= 1.0 - confidence


@dataclass(frozen=True, eq=False)
class DiagnosticsReport:
    n_runs: int
    delta1: float
    delta2: float
    coverage_target: float
    coverage_fraction: float
    coverage_pass: bool
    lemma_checked_runs: int
    zt_violations: int
    polylog_violations: int
    assumption2_s_ok: int
    assumption2_lambda_ok: int
    assumption2_coverage_ok: int
    assumption2_runs: int
    true_closed_loop_max: float
    true_closed_loop_violation_steps: int
    fallback_steps: int
    accepted_steps: int
    logt_fit_r2: Optional[float]
    lines: Tuple[str, ...]

    def text(self) -> str:
        return "\n".join(self.lines) + "\n"


def run_diagnostics(
    cfg: ExperimentConfig, num_runs: Optional[int] = None, out_dir=None
) -> DiagnosticsReport:
    """Monte-Carlo property checks: estimation-error coverage at the trace
    checkpoints, the two information inequalities, the offline-interface
    checks, and the true-system closed-loop predicate."""
    _validate_for_run(cfg)
    runs = num_runs if num_runs is not None else cfg.diag_runs
    s_len = cfg.s_values[0]
    delta1 = cfg.diag_delta1 if cfg.diag_delta1 is not None else delta1_for(
        cfg.delta, s_len, cfg.t_horizon
    )
    delta2 = cfg.diag_delta2 if cfg.diag_delta2 is not None else cfg.delta / (
        16.0 * cfg.t_horizon
    )
    records = [
        execute_single_run(
            cfg,
            "tsod",
            s_len,
            run_id,
            delta1_override=delta1,
            delta2_override=delta2,
            seed_tag="diag:",
        )
        for run_id in range(runs)
    ]

    covered = sum(1 for r in records if r.diagnostics.coverage_ok)
    coverage_fraction = covered / runs if runs else 1.0
    target = max(0.0, 1.0 - delta1 - delta2)
    coverage_pass = binomial_lower_test(covered, runs, target)

    lemma_runs = [r for r in records if r.diagnostics.prior_lambda_ok]
    zt_viol = sum(r.diagnostics.zt_violations for r in lemma_runs)
    polylog_viol = sum(0 if r.diagnostics.polylog_ok else 1 for r in lemma_runs)

    a2 = [r.assumption2 for r in records if r.assumption2 is not None]
    true_cl_max = max((r.diagnostics.true_closed_loop_max for r in records), default=0.0)
    true_cl_viol = sum(r.diagnostics.true_closed_loop_violations for r in records)
    fallback_steps = sum(r.diagnostics.fallback_steps for r in records)
    accepted_steps = sum(r.diagnostics.accepted_steps for r in records)
    logt_fit_r2 = _logt_fit_r2([r.trace for r in records])

    lines = [
        "# diagnostics report",
        f"RUNS={runs}",
        f"S={s_len}",
        f"T={cfg.t_horizon}",
        f"DELTA1={delta1:.17g}",
        f"DELTA2={delta2:.17g}",
        f"THM1_COVERAGE={coverage_fraction:.17g}",
        f"THM1_TARGET={target:.17g}",
        f"THM1_BINOMIAL_PASS={int(coverage_pass)}",
        f"LEMMA_CHECKED_RUNS={len(lemma_runs)}",
        f"BOUND_ZT_VIOLATIONS={zt_viol}",
        f"POLYLOG_BETA_VIOLATIONS={polylog_viol}",
        f"ASSUMPTION2_RUNS={len(a2)}",
        f"ASSUMPTION2_S_OK={sum(1 for rep in a2 if rep.s_ok)}",
        f"ASSUMPTION2_LAMBDA_OK={sum(1 for rep in a2 if rep.lambda_ok)}",
        f"ASSUMPTION2_COVERAGE_OK={sum(1 for rep in a2 if rep.coverage_ok)}",
        f"TRUE_CLOSED_LOOP_MAX={true_cl_max:.17g}",
        f"TRUE_CLOSED_LOOP_VIOLATION_STEPS={true_cl_viol}",
        f"FALLBACK_STEPS={fallback_steps}",
        f"ACCEPTED_STEPS={accepted_steps}",
    ]
    if logt_fit_r2 is not None:
        # Advisory: goodness of a c0 + c1*log(t) fit to the mean regret curve.
        lines.append(f"LOGT_FIT_R2={logt_fit_r2:.17g}")
    report = DiagnosticsReport(
        n_runs=runs,
        delta1=delta1,
        delta2=delta2,
        coverage_target=target,
        coverage_fraction=coverage_fraction,
        coverage_pass=coverage_pass,
        lemma_checked_runs=len(lemma_runs),
        zt_violations=zt_viol,
        polylog_violations=polylog_viol,
        assumption2_s_ok=sum(1 for rep in a2 if rep.s_ok),
        assumption2_lambda_ok=sum(1 for rep in a2 if rep.lambda_ok),
        assumption2_coverage_ok=sum(1 for rep in a2 if rep.coverage_ok),
        assumption2_runs=len(a2),
        true_closed_loop_max=true_cl_max,
        true_closed_loop_violation_steps=true_cl_viol,
        fallback_steps=fallback_steps,
        accepted_steps=accepted_steps,
        logt_fit_r2=logt_fit_r2,
        lines=tuple(lines),
    )
    if out_dir is not None or cfg.output_dir:
        out = Path(out_dir) if out_dir is not None else Path(cfg.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "diagnostics.txt", "w", encoding="utf-8") as fh:
            fh.write(report.text())
    return report


@dataclass(frozen=True)
class ScalingCell:
    s_len: int
    t_horizon: int
    mean_final_regret: float
    std_final_regret: float
    n_runs: int


@dataclass(frozen=True, eq=False)
class ScalingResult:
    cells: Tuple[ScalingCell, ...]
    slope: Optional[float]


def scaling_study(
    cfg: ExperimentConfig,
    s_values: Sequence[int],
    t_values: Sequence[int],
    out_dir=None,
) -> ScalingResult:
    """Mean final regret over an (S, T) grid plus the fitted log-log exponent
    of regret against T/S."""
    cells = []
    for s_len in s_values:
        for t_horizon in t_values:
            if s_len <= t_horizon:
                logger.warning("cell S=%d, T=%d violates S > T", s_len, t_horizon)
            cell_cfg = _with_overrides(cfg, s_values=(int(s_len),), t_horizon=int(t_horizon))
            finals = []
            for run_id in range(cfg.num_runs):
                rec = execute_single_run(cell_cfg, "tsod", int(s_len), run_id)
                finals.append(rec.trace.final_cum_regret)
            finals = np.asarray(finals)
            std = float(finals.std(ddof=1)) if len(finals) > 1 else 0.0
            cells.append(
                ScalingCell(
                    s_len=int(s_len),
                    t_horizon=int(t_horizon),
                    mean_final_regret=float(finals.mean()),
                    std_final_regret=std,
                    n_runs=cfg.num_runs,
                )
            )
    usable = [c for c in cells if c.mean_final_regret > 0]
    slope = None
    if len(usable) >= 2:
        x = np.log([c.t_horizon / c.s_len for c in usable])
        y = np.log([c.mean_final_regret for c in usable])
        if float(np.ptp(x)) > 0:
            slope = float(np.polyfit(x, y, 1)[0])
    if out_dir is not None or cfg.output_dir:
        out = Path(out_dir) if out_dir is not None else Path(cfg.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "scaling.csv", "w", newline="", encoding="utf-8") as fh:
            fh.write("s,t,mean_final_regret,std_final_regret,n_runs\n")
            for c in cells:
                fh.write(
                    f"{c.s_len},{c.t_horizon},{c.mean_final_regret:.17g},"
                    f"{c.std_final_regret:.17g},{c.n_runs}\n"
                )
            if slope is not None:
                fh.write(f"# fitted log-log slope of regret vs T/S: {slope:.17g}\n")
    return ScalingResult(cells=tuple(cells), slope=slope)


def _with_overrides(cfg: ExperimentConfig, **kwargs) -> ExperimentConfig:
    from dataclasses import replace

    return replace(cfg, **kwargs)
