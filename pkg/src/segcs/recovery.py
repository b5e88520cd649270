"""Sparse recovery: basis pursuit, noise-constrained l1, and the empirical-risk
minimization (iterative bound optimization) solver.

Basis pursuit is posed as a linear program over x = u - v and handed to
HiGHS; the noisy l1 problem is a second-order cone program solved by
Clarabel. The ERM solver is a majorize-minimize hard-thresholding loop:

    x <- H_tau(x + A^T (y - A x) / lam)

which never increases ||y - A x||^2 + lam tau^2 ||x||_0 when lam is at least
the largest eigenvalue of A^T A.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import clarabel
import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .errors import DimensionError, InfeasibleError, NonConvergenceError
from .sensing import Signal

__all__ = [
    "RecoveryResult",
    "ErmConfig",
    "basis_pursuit",
    "bpdn",
    "erm_recover",
    "erm_objective",
    "largest_eigenvalue",
    "hard_threshold",
    "empirical_risk",
    "risk",
    "risk_gap_terms",
    "DEFAULT_THRESHOLDS",
]

# Thresholds used for the ERM experiments, per sampling scheme.
DEFAULT_THRESHOLDS = {"extended": 0.035, "original": 0.05, "enlarged": 0.05}


@dataclass
class RecoveryResult:
    x_hat: np.ndarray
    iterations: int
    converged: bool
    objective: float
    solver_tag: str
    history: list = field(default_factory=list, repr=False)
    residual_norm: float = float("nan")
    dual_objective: Optional[float] = None


def _check(A, y):
    A = np.asarray(A, dtype=float)
    y = np.asarray(y, dtype=float)
    if A.ndim != 2 or y.shape != (A.shape[0],):
        raise DimensionError(f"A of shape {A.shape} incompatible with y of shape {y.shape}")
    return A, y


def basis_pursuit(A_prime, y, eq_tol: float = 1e-8, gap_tol: float = 1e-6, max_iter: int = 100_000) -> RecoveryResult:
    """min ||x||_1 subject to A' x = y."""
    A, y = _check(A_prime, y)
    K, N = A.shape
    if not np.any(y):
        return RecoveryResult(np.zeros(N), 0, True, 0.0, "highs-lp", residual_norm=0.0, dual_objective=0.0)
    c = np.ones(2 * N)
    A_eq = np.hstack([A, -A])
    res = linprog(
        c,
        A_eq=A_eq,
        b_eq=y,
        bounds=(0, None),
        method="highs",
        options={
            "primal_feasibility_tolerance": 1e-10,
            "dual_feasibility_tolerance": 1e-10,
            "maxiter": max_iter,
        },
    )
    if res.status == 2:
        raise InfeasibleError("A' x = y has no solution")
    if res.x is None:
        raise NonConvergenceError(f"HiGHS stopped: {res.message}")
    x = res.x[:N] - res.x[N:]
    primal = float(np.abs(x).sum())
    resid = float(np.linalg.norm(A @ x - y, np.inf))
    dual = float(y @ res.eqlin.marginals) if res.eqlin is not None else None
    out = RecoveryResult(x, int(res.nit), True, primal, "highs-lp", residual_norm=resid, dual_objective=dual)
    scale = max(1.0, float(np.abs(y).max()))
    gap_ok = dual is None or abs(primal - dual) <= gap_tol * max(1.0, primal)
    if res.status != 0 or resid > eq_tol * scale or not gap_ok:
        out.converged = False
        raise NonConvergenceError(
            f"basis pursuit missed tolerances (status={res.status}, residual={resid:.3e}, gap={abs(primal - (dual or primal)):.3e})",
            best=out,
        )
    return out


_CLARABEL_SETTINGS = dict(tol_gap_abs=1e-10, tol_gap_rel=1e-10, tol_feas=1e-10, max_iter=200)


def bpdn(A_prime, y, gamma: float, feas_tol: float = 1e-6) -> RecoveryResult:
    """min ||x||_1 subject to ||A' x - y||_2 <= gamma."""
    A, y = _check(A_prime, y)
    if gamma < 0:
        raise ValueError(f"gamma must be non-negative, got {gamma}")
    K, N = A.shape
    if gamma == 0:
        out = basis_pursuit(A, y)
        out.solver_tag = "highs-lp"
        return out
    ynorm = float(np.linalg.norm(y))
    if gamma >= ynorm:
        return RecoveryResult(np.zeros(N), 0, True, 0.0, "trivial", residual_norm=ynorm)

    # z = [x, t]; minimize sum(t); x - t <= 0, -x - t <= 0, (gamma, y - A x) in SOC
    I = sparse.identity(N, format="csc")
    G = sparse.vstack(
        [
            sparse.hstack([I, -I]),
            sparse.hstack([-I, -I]),
            sparse.hstack([sparse.csc_matrix((1, N)), sparse.csc_matrix((1, N))]),
            sparse.hstack([sparse.csc_matrix(A), sparse.csc_matrix((K, N))]),
        ],
        format="csc",
    )
    h = np.concatenate([np.zeros(2 * N), [gamma], y])
    q = np.concatenate([np.zeros(N), np.ones(N)])
    P = sparse.csc_matrix((2 * N, 2 * N))
    settings = clarabel.DefaultSettings()
    settings.verbose = False
    for k, v in _CLARABEL_SETTINGS.items():
        setattr(settings, k, v)
    cones = [clarabel.NonnegativeConeT(2 * N), clarabel.SecondOrderConeT(K + 1)]
    sol = clarabel.DefaultSolver(P, q, G, h, cones, settings).solve()
    status = str(sol.status)
    x = np.asarray(sol.x[:N])
    resid = float(np.linalg.norm(A @ x - y))
    out = RecoveryResult(x, int(sol.iterations), True, float(np.abs(x).sum()), "clarabel-socp", residual_norm=resid)
    if "Infeasible" in status:
        raise InfeasibleError(f"noise ball infeasible: {status}")
    if resid > gamma * (1 + feas_tol) or status not in ("Solved", "AlmostSolved"):
        out.converged = False
        raise NonConvergenceError(f"bpdn stopped with status {status}, residual {resid:.6g} vs gamma {gamma:.6g}", best=out)
    return out


def largest_eigenvalue(A, tol: float = 1e-8, max_iter: int = 10_000, seed: int = 0) -> float:
    """Largest eigenvalue of A^T A by power iteration."""
    A = np.asarray(A, dtype=float)
    N = A.shape[1]
    if not np.any(A):
        return 0.0
    v = np.random.default_rng(seed).standard_normal(N)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        w = A.T @ (A @ v)
        new = float(v @ w)
        nw = np.linalg.norm(w)
        if nw == 0:
            return 0.0
        v = w / nw
        if abs(new - lam) <= tol * abs(new):
            lam = new
            break
        lam = new
    # Rayleigh quotients approach from below; report the quotient of the final vector
    return float(v @ (A.T @ (A @ v)))


def hard_threshold(z: np.ndarray, tau: float) -> np.ndarray:
    out = np.where(np.abs(z) > tau, z, 0.0)
    return out


@dataclass
class ErmConfig:
    """Settings for :func:`erm_recover`.

    The threshold defaults to the theoretical value sqrt(2 log2 log N / (lam eps))
    when only ``epsilon`` is given. ``step`` defaults to 1 / lam.
    """

    threshold: Optional[float] = None
    step: Optional[float] = None
    theta: float = 1e-3
    max_iter: int = 10_000
    epsilon: Optional[float] = None
    x0: Optional[np.ndarray] = None
    record_history: bool = False

    def __post_init__(self):
        if self.threshold is None and self.epsilon is None:
            raise ValueError("ErmConfig needs a threshold or an epsilon")
        if self.threshold is not None and self.threshold <= 0:
            raise ValueError(f"threshold must be positive, got {self.threshold}")
        if self.epsilon is not None and self.epsilon <= 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if self.theta <= 0:
            raise ValueError(f"theta must be positive, got {self.theta}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be >= 1, got {self.max_iter}")
        if self.step is not None and self.step <= 0:
            raise ValueError(f"step must be positive, got {self.step}")

    @staticmethod
    def theoretical_threshold(lam: float, N: int, epsilon: float) -> float:
        return math.sqrt(2 * math.log(2) * math.log(N) / (lam * epsilon))

    def resolve(self, lam: float, N: int):
        step = self.step if self.step is not None else 1.0 / lam
        tau = self.threshold if self.threshold is not None else self.theoretical_threshold(lam, N, self.epsilon)
        return tau, step


def erm_objective(A, y, x, penalty: float) -> float:
    r = y - A @ x
    return float(r @ r + penalty * np.count_nonzero(x))


def erm_recover(A_prime, y, cfg: ErmConfig, lam: Optional[float] = None) -> RecoveryResult:
    """Iterative hard thresholding for ||y - A x||^2 + pen ||x||_0, pen = tau^2 / step.

    With step = 1/lam and tau set from epsilon this pen equals 2 log2 log N / eps.
    Stops when ||x_new - x||_inf <= theta or after max_iter iterations.
    """
    A, y = _check(A_prime, y)
    N = A.shape[1]
    lam = largest_eigenvalue(A) if lam is None else float(lam)
    if lam <= 0:
        return RecoveryResult(np.zeros(N), 0, True, float(y @ y), "erm-iht")
    tau, step = cfg.resolve(lam, N)
    penalty = tau**2 / step
    x = np.zeros(N) if cfg.x0 is None else np.asarray(cfg.x0, dtype=float).copy()
    At = A.T
    history = [erm_objective(A, y, x, penalty)] if cfg.record_history else []
    converged = False
    it = 0
    for it in range(1, cfg.max_iter + 1):
        x_new = hard_threshold(x + step * (At @ (y - A @ x)), tau)
        delta = float(np.max(np.abs(x_new - x))) if N else 0.0
        x = x_new
        if cfg.record_history:
            history.append(erm_objective(A, y, x, penalty))
        if delta <= cfg.theta:
            converged = True
            break
    return RecoveryResult(
        x_hat=x,
        iterations=it,
        converged=converged,
        objective=erm_objective(A, y, x, penalty),
        solver_tag="erm-iht",
        history=history,
        residual_norm=float(np.linalg.norm(y - A @ x)),
    )


def _vec(f):
    return f.samples if isinstance(f, Signal) else np.asarray(f, dtype=float)


def empirical_risk(f_hat, y, phi_rows) -> float:
    """Mean squared residual (1/K) sum_j (y_j - phi_j f_hat)^2."""
    A, y = _check(phi_rows, y)
    fh = _vec(f_hat)
    if fh.shape != (A.shape[1],):
        raise DimensionError(f"candidate of length {fh.shape} vs matrix width {A.shape[1]}")
    r = y - A @ fh
    return float(r @ r / A.shape[0])


def risk(f_hat, f, sigma2: float) -> float:
    g = _vec(f_hat) - _vec(f)
    return float(g @ g / g.size + sigma2)


def risk_gap_terms(f, f_hat, y, phi_rows) -> np.ndarray:
    """U_j = (y_j - phi_j f)^2 - (y_j - phi_j f_hat)^2."""
    A, y = _check(phi_rows, y)
    a = y - A @ _vec(f)
    b = y - A @ _vec(f_hat)
    return a * a - b * b
