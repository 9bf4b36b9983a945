"""Discrete-time LQR core: Riccati fixed point, optimal gain, and the
membership predicates for the admissible parameter sets.

All operations are pure functions of immutable value types and are safe to
share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DimensionMismatch, NonStabilizable

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITERS = 10_000
DEFAULT_NORM_CEILING = 1e8


def _as_matrix(value, name: str) -> np.ndarray:
    mat = np.array(value, dtype=np.float64)
    if mat.ndim != 2:
        raise DimensionMismatch(f"{name} must be a 2-d matrix, got shape {mat.shape}")
    if not np.all(np.isfinite(mat)):
        raise ValueError(f"{name} has non-finite entries")
    return mat


def _check_spd(mat: np.ndarray, name: str) -> None:
    if mat.shape[0] != mat.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got shape {mat.shape}")
    residual = np.linalg.norm(mat - mat.T)
    if residual > 1e-12 * np.linalg.norm(mat):
        raise ValueError(f"{name} is not symmetric (residual {residual:.3e})")
    if mat.shape[0] == 0 or float(np.linalg.eigvalsh(mat)[0]) <= 0.0:
        raise ValueError(f"{name} is not positive definite")


@dataclass(frozen=True, eq=False)
class ThetaParams:
    """System parameters (A, B), also viewable as the stacked (n+m) x n matrix
    whose transpose is [A B]."""

    a_matrix: np.ndarray
    b_matrix: np.ndarray

    def __post_init__(self):
        a = _as_matrix(self.a_matrix, "a_matrix")
        b = _as_matrix(self.b_matrix, "b_matrix")
        if a.shape[0] != a.shape[1]:
            raise DimensionMismatch(f"a_matrix must be square, got shape {a.shape}")
        if a.shape[0] < 1:
            raise DimensionMismatch("state dimension must be at least 1")
        if b.shape[0] != a.shape[0]:
            raise DimensionMismatch(
                f"b_matrix has {b.shape[0]} rows but the state dimension is {a.shape[0]}"
            )
        if b.shape[1] < 1:
            raise DimensionMismatch("input dimension must be at least 1")
        a.setflags(write=False)
        b.setflags(write=False)
        stacked = np.vstack([a.T, b.T])
        stacked.setflags(write=False)
        object.__setattr__(self, "a_matrix", a)
        object.__setattr__(self, "b_matrix", b)
        object.__setattr__(self, "_stacked", stacked)

    @property
    def n(self) -> int:
        return self.a_matrix.shape[0]

    @property
    def m(self) -> int:
        return self.b_matrix.shape[1]

    @property
    def stacked(self) -> np.ndarray:
        return self._stacked

    @classmethod
    def from_stacked(cls, stacked, n: int, m: int) -> "ThetaParams":
        arr = _as_matrix(stacked, "stacked parameter")
        if arr.shape != (n + m, n):
            raise DimensionMismatch(f"stacked parameter must be {(n + m, n)}, got {arr.shape}")
        return cls(a_matrix=arr[:n].T.copy(), b_matrix=arr[n:].T.copy())

    @classmethod
    def zeros(cls, n: int, m: int) -> "ThetaParams":
        return cls(np.zeros((n, n)), np.zeros((n, m)))

    def frobenius_norm(self) -> float:
        return float(np.linalg.norm(self._stacked))

    def add(self, other: "ThetaParams") -> "ThetaParams":
        if (self.n, self.m) != (other.n, other.m):
            raise DimensionMismatch("parameter dimensions do not match")
        return ThetaParams(self.a_matrix + other.a_matrix, self.b_matrix + other.b_matrix)

    def scale(self, factor: float) -> "ThetaParams":
        return ThetaParams(factor * self.a_matrix, factor * self.b_matrix)


@dataclass(frozen=True, eq=False)
class CostMatrices:
    """Positive-definite state and input cost weights."""

    q_matrix: np.ndarray
    r_matrix: np.ndarray

    def __post_init__(self):
        q = _as_matrix(self.q_matrix, "q_matrix")
        r = _as_matrix(self.r_matrix, "r_matrix")
        _check_spd(q, "q_matrix")
        _check_spd(r, "r_matrix")
        q.setflags(write=False)
        r.setflags(write=False)
        object.__setattr__(self, "q_matrix", q)
        object.__setattr__(self, "r_matrix", r)

    @property
    def n(self) -> int:
        return self.q_matrix.shape[0]

    @property
    def m(self) -> int:
        return self.r_matrix.shape[0]

    @classmethod
    def identity(cls, n: int, m: int) -> "CostMatrices":
        return cls(np.eye(n), np.eye(m))


@dataclass(frozen=True, eq=False)
class RiccatiSolution:
    """Fixed point P, optimal gain K, and average cost J = trace(P)."""

    p_matrix: np.ndarray
    gain: np.ndarray
    avg_cost: float


@dataclass(frozen=True)
class ConstraintSetQ:
    """Admissible set: trace(P) <= m_p and contractive closed loop (norm <= rho)."""

    m_p: float
    rho: float
    m_k_cache: Optional[float] = None

    def __post_init__(self):
        if self.m_p <= 0:
            raise ValueError("m_p must be positive")
        if not 0.0 < self.rho < 1.0:
            raise ValueError("rho must lie in (0, 1)")


@dataclass(frozen=True)
class ConstraintSetP:
    """Admissible set for the auxiliary system: bounded trace, Frobenius norm,
    and contractive closed loop."""

    m_sim: float
    phi: float
    rho_sim: float

    def __post_init__(self):
        if self.m_sim <= 0:
            raise ValueError("m_sim must be positive")
        if self.phi <= 0:
            raise ValueError("phi must be positive")
        if not 0.0 < self.rho_sim < 1.0:
            raise ValueError("rho_sim must lie in (0, 1)")


def riccati_map(p: np.ndarray, theta: ThetaParams, costs: CostMatrices) -> np.ndarray:
    """One step of the Riccati value iteration applied to p."""
    a, b = theta.a_matrix, theta.b_matrix
    bp = b.T @ p
    gain = -np.linalg.solve(costs.r_matrix + bp @ b, bp @ a)
    return costs.q_matrix + a.T @ p @ a + (bp @ a).T @ gain


def solve_dare(
    theta: ThetaParams,
    costs: CostMatrices,
    tol: float = DEFAULT_TOL,
    max_iters: int = DEFAULT_MAX_ITERS,
    *,
    norm_ceiling: float = DEFAULT_NORM_CEILING,
    trace_cap: Optional[float] = None,
) -> RiccatiSolution:
    """Solve the discrete algebraic Riccati equation by value iteration from P0 = Q.

    Convergence doubles as a stabilizability certificate: divergence (Frobenius
    norm above `norm_ceiling`) or failure to converge within `max_iters` raises
    NonStabilizable.  `trace_cap`, when given, aborts as soon as trace(P_k)
    exceeds it; the iterates are monotone nondecreasing from P0 = Q, so this is
    a sound early exit for trace-bounded membership tests.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if max_iters < 1:
        raise ValueError("max_iters must be at least 1")
    if costs.n != theta.n or costs.m != theta.m:
        raise DimensionMismatch(
            f"cost matrices sized ({costs.n}, {costs.m}) do not match theta ({theta.n}, {theta.m})"
        )
    a, b = theta.a_matrix, theta.b_matrix
    q, r = costs.q_matrix, costs.r_matrix

    p = q.copy()
    converged = False
    for _ in range(max_iters):
        bp = b.T @ p
        gain = -np.linalg.solve(r + bp @ b, bp @ a)
        p_next = q + a.T @ p @ a + (bp @ a).T @ gain
        p_next = 0.5 * (p_next + p_next.T)
        if not np.all(np.isfinite(p_next)) or np.linalg.norm(p_next) > norm_ceiling:
            raise NonStabilizable("riccati iteration diverged")
        if trace_cap is not None and float(np.trace(p_next)) > trace_cap:
            raise NonStabilizable(f"riccati trace exceeded cap {trace_cap:g}")
        if np.linalg.norm(p_next - p) <= tol:
            p = p_next
            converged = True
            break
        p = p_next
    if not converged:
        raise NonStabilizable(f"riccati iteration did not converge within {max_iters} steps")

    bp = b.T @ p
    gain = -np.linalg.solve(r + bp @ b, bp @ a)
    return RiccatiSolution(p_matrix=p, gain=gain, avg_cost=float(np.trace(p)))


def closed_loop_norm(theta: ThetaParams, gain: np.ndarray) -> float:
    """Spectral norm (largest singular value) of A + B K."""
    gain = np.asarray(gain, dtype=np.float64)
    if gain.shape != (theta.m, theta.n):
        raise DimensionMismatch(f"gain must be {(theta.m, theta.n)}, got {gain.shape}")
    return float(np.linalg.norm(theta.a_matrix + theta.b_matrix @ gain, 2))


def q_membership(
    theta: ThetaParams, costs: CostMatrices, set_q: ConstraintSetQ
) -> Optional[RiccatiSolution]:
    """Riccati solution when theta is admissible, else None.

    The closed loop is evaluated with the candidate's own (A, B); solver
    failure means non-membership.
    """
    try:
        sol = solve_dare(theta, costs, trace_cap=set_q.m_p * (1.0 + 1e-9))
    except NonStabilizable:
        return None
    if sol.avg_cost > set_q.m_p:
        return None
    if closed_loop_norm(theta, sol.gain) > set_q.rho:
        return None
    return sol


def in_set_q(theta: ThetaParams, costs: CostMatrices, set_q: ConstraintSetQ) -> bool:
    return q_membership(theta, costs, set_q) is not None


def p_membership(
    theta: ThetaParams, costs: CostMatrices, set_p: ConstraintSetP
) -> Optional[RiccatiSolution]:
    """Riccati solution when theta lies in the auxiliary-system set, else None."""
    if theta.frobenius_norm() > set_p.phi:
        return None
    try:
        sol = solve_dare(theta, costs, trace_cap=set_p.m_sim * (1.0 + 1e-9))
    except NonStabilizable:
        return None
    if sol.avg_cost > set_p.m_sim:
        return None
    if closed_loop_norm(theta, sol.gain) > set_p.rho_sim:
        return None
    return sol


def in_set_p(theta: ThetaParams, costs: CostMatrices, set_p: ConstraintSetP) -> bool:
    return p_membership(theta, costs, set_p) is not None
