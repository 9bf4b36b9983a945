"""Ground-truth simulation of the discrete-time linear systems with i.i.d.
standard-normal noise, plus construction of offset true parameters."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .errors import DimensionMismatch, DomainError
from .lqr import CostMatrices, ThetaParams
from .rng import RngStream


@dataclass(frozen=True, eq=False)
class SimState:
    """State vector and step counter of a single rollout."""

    state: np.ndarray
    step: int = 0

    def __post_init__(self):
        x = np.array(self.state, dtype=np.float64).reshape(-1)
        if not np.all(np.isfinite(x)):
            raise ValueError("state has non-finite entries")
        x.setflags(write=False)
        object.__setattr__(self, "state", x)

    @classmethod
    def zero(cls, n: int) -> "SimState":
        return cls(state=np.zeros(n), step=0)


@dataclass(frozen=True, eq=False)
class StepRecord:
    """One transition: regressor z = [x; u], successor state, and stage cost."""

    z_vector: np.ndarray
    next_state: np.ndarray
    cost: float


def step_system(
    theta: ThetaParams,
    state: SimState,
    control,
    costs: CostMatrices,
    rng: RngStream,
    noise: Optional[np.ndarray] = None,
) -> StepRecord:
    """Advance one step: next state is theta^T z + w with w standard normal.

    The stage cost is computed from the current (x, u).  `noise` overrides the
    Gaussian draw, which lets tests pin transitions exactly.
    """
    x = state.state
    u = np.asarray(control, dtype=np.float64).reshape(-1)
    if x.shape != (theta.n,):
        raise DimensionMismatch(f"state must have length {theta.n}, got {x.shape}")
    if u.shape != (theta.m,):
        raise DimensionMismatch(f"control must have length {theta.m}, got {u.shape}")
    if costs.n != theta.n or costs.m != theta.m:
        raise DimensionMismatch("cost matrices do not match the system dimensions")
    if noise is None:
        w = rng.standard_normal(theta.n)
    else:
        w = np.asarray(noise, dtype=np.float64).reshape(-1)
        if w.shape != (theta.n,):
            raise DimensionMismatch(f"noise must have length {theta.n}, got {w.shape}")
    z = np.concatenate([x, u])
    next_state = theta.stacked.T @ z + w
    cost = float(x @ costs.q_matrix @ x + u @ costs.r_matrix @ u)
    return StepRecord(z_vector=z, next_state=next_state, cost=cost)


def advance(state: SimState, record: StepRecord) -> SimState:
    return SimState(state=record.next_state, step=state.step + 1)


def make_true_theta(theta_sim: ThetaParams, theta_delta: ThetaParams) -> Tuple[ThetaParams, float]:
    """Elementwise sum of the auxiliary parameters and an offset.

    Returns the combined parameters together with the Frobenius norm of the
    offset, for dissimilarity-bound bookkeeping.
    """
    return theta_sim.add(theta_delta), theta_delta.frobenius_norm()


def sample_theta_delta(m_delta: float, n: int, m: int, rng: RngStream) -> ThetaParams:
    """Random offset: uniform direction on the Frobenius sphere, radius uniform
    in [0, m_delta].  The result always satisfies ||delta||_F <= m_delta."""
    if m_delta < 0:
        raise DomainError("m_delta must be nonnegative")
    direction = rng.standard_normal((n + m, n))
    norm = float(np.linalg.norm(direction))
    radius = rng.uniform(0.0, m_delta)
    scale = radius / norm if norm > 0.0 else 0.0
    return ThetaParams.from_stacked(direction * scale, n, m)
