"""Offline-informed Thompson sampling for LQR: belief updates, confidence
width, constrained sampling with rejection, and the per-episode loop."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import (
    DimensionMismatch,
    DomainError,
    NonStabilizable,
    SingularPrecision,
    UnstableRollout,
)
from .lqr import ConstraintSetQ, CostMatrices, ThetaParams, q_membership, solve_dare
from .offline import OfflineSummary
from .rng import RngStream
from .sim import SimState, advance, step_system
from .traces import CheckpointRecord, EpisodeDiagnostics, RegretTrace

VARIANTS = ("tsod", "ts_no_offline", "offline_estimate_only", "oracle")

DEFAULT_MAX_ATTEMPTS = 100
DEFAULT_STATE_CEILING = 1e6
DEFAULT_CHECKPOINT_FRACTIONS = (0.25, 0.5, 1.0)


@dataclass(frozen=True, eq=False)
class BeliefState:
    """Online precision matrix, least-squares estimate, and cached log-dets.

    cross_term accumulates the regressor/next-state products plus the offline
    contribution, so theta_hat is always the solution of
    v_matrix @ theta = cross_term.
    """

    v_matrix: np.ndarray
    theta_hat: ThetaParams
    logdet_v: float
    logdet_u: float
    t: int
    cross_term: np.ndarray

    @property
    def n(self) -> int:
        return self.theta_hat.n

    @property
    def m(self) -> int:
        return self.theta_hat.m

    @property
    def dim(self) -> int:
        return self.v_matrix.shape[0]


@dataclass(frozen=True, eq=False)
class SampleOutcome:
    """A sampled (or fallback) parameter with its gain and sampling metadata."""

    theta_tilde: ThetaParams
    gain: np.ndarray
    rejections: int
    beta_value: float
    fallback_used: bool


@dataclass(frozen=True, eq=False)
class MultiSourceSummary:
    """An ordered collection of offline summaries sharing (n, m)."""

    summaries: Tuple[OfflineSummary, ...]

    def __post_init__(self):
        summaries = tuple(self.summaries)
        if len(summaries) < 1:
            raise ValueError("at least one offline summary is required")
        n, m = summaries[0].n, summaries[0].m
        for s in summaries[1:]:
            if (s.n, s.m) != (n, m):
                raise DimensionMismatch("offline summaries have mismatched dimensions")
        object.__setattr__(self, "summaries", summaries)
        alpha_sum = float(sum(s.alpha for s in summaries))
        mdelta_sum = float(
            sum(
                math.sqrt(max(float(np.linalg.eigvalsh(s.u_matrix)[-1]), 0.0)) * s.m_delta
                for s in summaries
            )
        )
        object.__setattr__(self, "_alpha_sum", alpha_sum)
        object.__setattr__(self, "_mdelta_sum", mdelta_sum)

    @property
    def n(self) -> int:
        return self.summaries[0].n

    @property
    def m(self) -> int:
        return self.summaries[0].m

    @property
    def n_sources(self) -> int:
        return len(self.summaries)

    @property
    def alpha_sum(self) -> float:
        return self._alpha_sum

    @property
    def mdelta_sum(self) -> float:
        """Sum over sources of sqrt(lambda_max(U)) times the dissimilarity bound."""
        return self._mdelta_sum

    @property
    def s_total(self) -> int:
        return int(sum(s.s_len for s in self.summaries))


SourcesLike = Union[MultiSourceSummary, OfflineSummary, Sequence[OfflineSummary]]


def as_sources(sources: SourcesLike) -> MultiSourceSummary:
    if isinstance(sources, MultiSourceSummary):
        return sources
    if isinstance(sources, OfflineSummary):
        return MultiSourceSummary((sources,))
    return MultiSourceSummary(tuple(sources))


def init_belief(sources: SourcesLike) -> BeliefState:
    """Fuse the offline summaries into the initial belief.

    The initial precision is the sum of the source precisions; the initial
    estimate solves the combined normal equations (for a single source this is
    the offline estimate itself).
    """
    src = as_sources(sources)
    d = src.n + src.m
    v0 = np.zeros((d, d))
    cross = np.zeros((d, src.n))
    for s in src.summaries:
        v0 += s.u_matrix
        cross += s.u_matrix @ s.theta_hat_sim.stacked
    v0 = 0.5 * (v0 + v0.T)
    sign, logdet = np.linalg.slogdet(v0)
    if sign <= 0 or not np.isfinite(logdet):
        raise SingularPrecision("combined offline precision is not positive definite")
    if src.n_sources == 1:
        theta0 = src.summaries[0].theta_hat_sim
    else:
        theta0 = ThetaParams.from_stacked(np.linalg.solve(v0, cross), src.n, src.m)
    return BeliefState(
        v_matrix=v0,
        theta_hat=theta0,
        logdet_v=float(logdet),
        logdet_u=float(logdet),
        t=0,
        cross_term=cross,
    )


def compute_beta(
    belief: BeliefState,
    sources: SourcesLike,
    delta2: float,
    m_delta_scale: float = 1.0,
) -> float:
    """Confidence width: online log-det growth plus the offline radii plus the
    dissimilarity terms.  Nondecreasing in t for fixed delta2."""
    if not 0.0 < delta2 < 1.0:
        raise DomainError("delta2 must lie in (0, 1)")
    src = as_sources(sources)
    half_ratio = 0.5 * (belief.logdet_v - belief.logdet_u)
    if half_ratio < -1e-6 * max(1.0, abs(belief.logdet_u)):
        raise DomainError("log-det ratio fell below one; belief caches are inconsistent")
    inner = max(half_ratio, 0.0) + math.log(1.0 / delta2)
    return belief.n * math.sqrt(2.0 * inner) + src.alpha_sum + m_delta_scale * src.mdelta_sum


def _fallback_candidates(
    theta_hat: ThetaParams,
    anchor: Optional[ThetaParams],
    last_accepted: Optional[ThetaParams],
) -> Iterable[ThetaParams]:
    if last_accepted is not None:
        yield last_accepted
    yield theta_hat
    target = anchor if anchor is not None else theta_hat
    if anchor is not None:
        for lam in (0.25, 0.5, 0.75, 1.0):
            yield theta_hat.scale(1.0 - lam).add(anchor.scale(lam))
    for scale in (0.75, 0.5, 0.25, 0.0):
        yield target.scale(scale)


def sample_constrained(
    belief: BeliefState,
    beta: float,
    set_q: ConstraintSetQ,
    costs: CostMatrices,
    rng: RngStream,
    max_attempts: int = DEFAULT_MAX_ATTEMPTS,
    *,
    anchor: Optional[ThetaParams] = None,
    last_accepted: Optional[ThetaParams] = None,
) -> SampleOutcome:
    """Rejection-sample theta_hat + beta * V^{-1/2} eta onto the admissible set.

    V^{-1/2} is the symmetric inverse square root.  On exhaustion the sampler
    falls back, in order, to the last accepted sample, the current mean,
    interpolations from the mean toward `anchor`, and scalings of the anchor
    toward zero; fallback_used marks that path.
    """
    if beta < 0:
        raise DomainError("beta must be nonnegative")
    if max_attempts < 1:
        raise ValueError("max_attempts must be at least 1")
    n, m = belief.n, belief.m
    eigvals, eigvecs = np.linalg.eigh(belief.v_matrix)
    if eigvals[0] <= 0:
        raise SingularPrecision("belief precision is not positive definite")
    inv_half = (eigvecs / np.sqrt(eigvals)) @ eigvecs.T
    mean = belief.theta_hat.stacked
    gen = rng.generator
    for attempt in range(max_attempts):
        eta = gen.standard_normal((n + m, n))
        candidate = ThetaParams.from_stacked(mean + beta * (inv_half @ eta), n, m)
        sol = q_membership(candidate, costs, set_q)
        if sol is not None:
            return SampleOutcome(
                theta_tilde=candidate,
                gain=sol.gain,
                rejections=attempt,
                beta_value=beta,
                fallback_used=False,
            )
    for candidate in _fallback_candidates(belief.theta_hat, anchor, last_accepted):
        sol = q_membership(candidate, costs, set_q)
        if sol is not None:
            return SampleOutcome(
                theta_tilde=candidate,
                gain=sol.gain,
                rejections=max_attempts,
                beta_value=beta,
                fallback_used=True,
            )
    raise NonStabilizable("no admissible fallback parameter found")


def update_belief(belief: BeliefState, z_vector, next_state) -> BeliefState:
    """Rank-one information update with one observed transition.

    The log-determinant cache uses log det(V + z z^T) = log det V + log(1 + z^T V^{-1} z).
    """
    z = np.asarray(z_vector, dtype=np.float64).reshape(-1)
    x_next = np.asarray(next_state, dtype=np.float64).reshape(-1)
    if z.shape != (belief.dim,):
        raise DimensionMismatch(f"z_vector must have length {belief.dim}, got {z.shape}")
    if x_next.shape != (belief.n,):
        raise DimensionMismatch(f"next_state must have length {belief.n}, got {x_next.shape}")
    quad = float(z @ np.linalg.solve(belief.v_matrix, z))
    v_next = belief.v_matrix + np.outer(z, z)
    v_next = 0.5 * (v_next + v_next.T)
    cross_next = belief.cross_term + np.outer(z, x_next)
    theta_next = ThetaParams.from_stacked(
        np.linalg.solve(v_next, cross_next), belief.n, belief.m
    )
    return BeliefState(
        v_matrix=v_next,
        theta_hat=theta_next,
        logdet_v=belief.logdet_v + math.log1p(quad),
        logdet_u=belief.logdet_u,
        t=belief.t + 1,
        cross_term=cross_next,
    )


def effective_sources(sources: SourcesLike, variant: str) -> MultiSourceSummary:
    """Transform the offline summaries according to the algorithm variant.

    ts_no_offline keeps only the regularizer as prior precision and zeroes the
    estimate and width terms; offline_estimate_only keeps the estimate but
    drops the precision, radius, and dissimilarity terms.
    """
    src = as_sources(sources)
    if variant in ("tsod", "oracle"):
        return src
    if variant == "ts_no_offline":
        transformed = tuple(
            replace(
                s,
                u_matrix=s.regularizer * np.eye(s.n + s.m),
                theta_hat_sim=ThetaParams.zeros(s.n, s.m),
                alpha=0.0,
                m_delta=0.0,
            )
            for s in src.summaries
        )
        return MultiSourceSummary(transformed)
    if variant == "offline_estimate_only":
        transformed = tuple(
            replace(s, u_matrix=s.regularizer * np.eye(s.n + s.m), alpha=0.0, m_delta=0.0)
            for s in src.summaries
        )
        return MultiSourceSummary(transformed)
    raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")


@dataclass(frozen=True, eq=False)
class EpisodeResult:
    trace: RegretTrace
    belief: BeliefState
    diagnostics: EpisodeDiagnostics


def run_episode(
    theta_star_hidden: ThetaParams,
    sources: SourcesLike,
    costs: CostMatrices,
    set_q: ConstraintSetQ,
    horizon: int,
    delta: float,
    variant: str,
    rng: RngStream,
    *,
    max_attempts: int = DEFAULT_MAX_ATTEMPTS,
    beta_mdelta_scale: float = 1.0,
    state_ceiling: float = DEFAULT_STATE_CEILING,
    checkpoint_fractions: Sequence[float] = DEFAULT_CHECKPOINT_FRACTIONS,
    delta2_override: Optional[float] = None,
    run_id: int = 0,
    seed: int = 0,
) -> EpisodeResult:
    """Run one online episode of the given variant against the hidden system.

    Per step: sample an admissible parameter, apply its gain, observe the
    transition and stage cost, and apply the rank-one belief update.  The
    oracle variant plays the hidden parameters directly and serves as a
    policy-level sanity check.
    """
    if horizon < 0:
        raise ValueError("horizon must be nonnegative")
    if not 0.0 < delta < 1.0:
        raise DomainError("delta must lie in (0, 1)")
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")

    src_raw = as_sources(sources)
    src = effective_sources(src_raw, variant)
    n, m = src.n, src.m
    if (theta_star_hidden.n, theta_star_hidden.m) != (n, m):
        raise DimensionMismatch("hidden parameters do not match the offline summaries")

    star_sol = solve_dare(theta_star_hidden, costs)
    j_star = star_sol.avg_cost
    a_star, b_star = theta_star_hidden.a_matrix, theta_star_hidden.b_matrix
    s_total = src_raw.s_total
    # The information inequalities assume the warm-start precision actually
    # used grows like S/40; variants that replace it are excluded.
    prior_lambda_ok = all(
        float(np.linalg.eigvalsh(s.u_matrix)[0]) - s.regularizer >= s.s_len / 40.0
        for s in src.summaries
    )

    belief = init_belief(src)
    anchor = belief.theta_hat
    delta2 = delta2_override if delta2_override is not None else delta / (16.0 * max(horizon, 1))

    checkpoint_ts = sorted({max(1, int(round(horizon * f))) for f in checkpoint_fractions if horizon >= 1})

    t_arr = np.arange(1, horizon + 1, dtype=np.int64)
    cost_arr = np.zeros(horizon)
    beta_arr = np.zeros(horizon)
    rej_arr = np.zeros(horizon, dtype=np.int64)
    norm_arr = np.zeros(horizon)

    oracle_sol = star_sol if variant == "oracle" else None
    last_accepted: Optional[ThetaParams] = None
    state = SimState.zero(n)
    checkpoints = []
    coverage_ok = True
    zt_lhs = 0.0
    zt_rhs = 0.0
    zt_violations = 0
    z_max = 0.0
    fallback_steps = 0
    accepted_steps = 0
    true_cl_max = 0.0
    true_cl_violations = 0
    max_gain_norm = 0.0

    for idx in range(horizon):
        step_t = idx + 1
        beta_t = compute_beta(belief, src, delta2, beta_mdelta_scale)
        if variant == "oracle":
            outcome = SampleOutcome(
                theta_tilde=theta_star_hidden,
                gain=oracle_sol.gain,
                rejections=0,
                beta_value=beta_t,
                fallback_used=False,
            )
        else:
            outcome = sample_constrained(
                belief,
                beta_t,
                set_q,
                costs,
                rng,
                max_attempts,
                anchor=anchor,
                last_accepted=last_accepted,
            )
        if outcome.fallback_used:
            fallback_steps += 1
        else:
            accepted_steps += 1
            last_accepted = outcome.theta_tilde

        if step_t in checkpoint_ts:
            diff = belief.theta_hat.stacked - theta_star_hidden.stacked
            err = math.sqrt(max(float(np.trace(diff.T @ belief.v_matrix @ diff)), 0.0))
            ok = err <= beta_t
            checkpoints.append(CheckpointRecord(t=step_t, error=err, beta=beta_t, ok=ok))
            coverage_ok = coverage_ok and ok

        true_cl = float(np.linalg.norm(a_star + b_star @ outcome.gain, 2))
        true_cl_max = max(true_cl_max, true_cl)
        if true_cl > set_q.rho:
            true_cl_violations += 1
        max_gain_norm = max(max_gain_norm, float(np.linalg.norm(outcome.gain, 2)))

        control = outcome.gain @ state.state
        record = step_system(theta_star_hidden, state, control, costs, rng)

        z = record.z_vector
        z_norm = float(np.linalg.norm(z))
        z_max = max(z_max, z_norm)
        zt_lhs += float(z @ np.linalg.solve(belief.v_matrix, z))
        belief = update_belief(belief, z, record.next_state)
        zt_rhs = 2.0 * max(1.0, 40.0 * z_max**2 / s_total) * (belief.logdet_v - belief.logdet_u)
        if zt_lhs > zt_rhs * (1.0 + 1e-9) + 1e-9:
            zt_violations += 1

        cost_arr[idx] = record.cost
        beta_arr[idx] = beta_t
        rej_arr[idx] = outcome.rejections
        norm_arr[idx] = float(np.linalg.norm(state.state))

        state = advance(state, record)
        if float(np.linalg.norm(state.state)) > state_ceiling:
            raise UnstableRollout(
                f"online state norm exceeded {state_ceiling:g} at step {step_t}"
            )

    d = n + m
    polylog_lhs = belief.logdet_v - belief.logdet_u
    polylog_rhs = d * math.log1p(40.0 * horizon * z_max**2 / (d * s_total)) if horizon else 0.0
    instant = cost_arr - j_star
    trace = RegretTrace(
        t=t_arr,
        cost=cost_arr,
        instant_regret=instant,
        cum_regret=np.cumsum(instant),
        beta=beta_arr,
        rejections=rej_arr,
        state_norm=norm_arr,
        j_star=j_star,
        run_id=run_id,
        variant=variant,
        seed=seed,
    )
    diagnostics = EpisodeDiagnostics(
        checkpoints=tuple(checkpoints),
        coverage_ok=coverage_ok,
        zt_lhs=zt_lhs,
        zt_rhs=zt_rhs,
        zt_violations=zt_violations,
        polylog_lhs=polylog_lhs,
        polylog_rhs=polylog_rhs,
        polylog_ok=polylog_lhs <= polylog_rhs * (1.0 + 1e-9) + 1e-9,
        z_max=z_max,
        s_total=s_total,
        prior_lambda_ok=prior_lambda_ok,
        fallback_steps=fallback_steps,
        accepted_steps=accepted_steps,
        true_closed_loop_max=true_cl_max,
        true_closed_loop_violations=true_cl_violations,
        max_gain_norm=max_gain_norm,
    )
    return EpisodeResult(trace=trace, belief=belief, diagnostics=diagnostics)
