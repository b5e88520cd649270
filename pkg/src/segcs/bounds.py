"""Closed-form constants of the recovery-error analysis.

Notation: B bounds the signal amplitude (||f||^2 <= N B^2), sigma is the
noise standard deviation, K_e = K + K_a rows are split into
n_p = ceil(K_e / K) groups, the last of size K_np, and

    D = 2 K (1 + 2 + ... + (n_p - 2)) + 2 K_np (n_p - 1)

counts the dependent row pairs. With zeta = eps * h, h = 16 e B^2 + 8 sqrt(2) B sigma,

    a = (8 B^2 (1 + D/K_e) + 4 sigma^2 (1 + D/(M K_e))) eps / (2 (1 - zeta))
    C_1e = (1 + a) / (1 - a).
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .errors import UndefinedConstantError

__all__ = [
    "BoundParams",
    "ConstantReport",
    "c0",
    "c1",
    "craig_bernstein_h",
    "dependency_count",
    "epsilon_default",
    "epsilon_bound",
    "coefficient_a",
    "c1e",
    "variance_bound",
    "eval_constants",
    "sweep_c1e_vs_2c1",
    "excess_risk_sum_variance",
    "sparse_rate",
    "compressible_rate",
]

E = math.e
SQ2 = math.sqrt(2.0)


def c0(delta: float) -> float:
    """Concentration constant C0(delta/2) = delta^2/16 - delta^3/48."""
    return delta**2 / 16 - delta**3 / 48


def c1(snr_ratio: float) -> float:
    """Closed-form error-bound constant for K i.i.d. samples as a function of B / sigma.

    This fixed rational form is not the K_a = 0 case of
    :func:`c1e` under the default eps (see ``c1e(B, sigma, K, 0, M)`` for that).
    """
    r = snr_ratio
    num = (27 - 4 * E) * r**2 + (50 - 4 * SQ2) * r + 26
    den = (23 - 4 * E) * r**2 + (50 - 4 * SQ2) * r + 24
    return num / den


def craig_bernstein_h(B: float, sigma: float) -> float:
    return 16 * B**2 * E + 8 * SQ2 * B * sigma


def dependency_count(K: int, K_a: int) -> int:
    if K_a == 0:
        return 0
    K_e = K + K_a
    n_p = -(-K_e // K)
    K_np = K_e - (n_p - 1) * K
    return 2 * K * ((n_p - 2) * (n_p - 1) // 2) + 2 * K_np * (n_p - 1)


def epsilon_default(B: float, sigma: float) -> float:
    return 1.0 / (60.0 * (B + sigma) ** 2)


def _ratios(K, K_a, M):
    K_e = K + K_a
    D = dependency_count(K, K_a)
    return D, D / K_e, D / (M * K_e)


def epsilon_bound(B: float, sigma: float, K: int, K_a: int, M: int) -> float:
    """Supremum of admissible eps, i.e. a < 1 when zeta = eps h."""
    _, dk, dmk = _ratios(K, K_a, M)
    return 1.0 / ((4 * (1 + dk) + 16 * E) * B**2 + 8 * SQ2 * B * sigma + 2 * sigma**2 * (1 + dmk))


def coefficient_a(B: float, sigma: float, K: int, K_a: int, M: int, epsilon: Optional[float] = None, zeta: Optional[float] = None) -> float:
    eps = epsilon_default(B, sigma) if epsilon is None else epsilon
    z = eps * craig_bernstein_h(B, sigma) if zeta is None else zeta
    if not 0 < z < 1:
        raise UndefinedConstantError(f"zeta={z} outside (0, 1)")
    _, dk, dmk = _ratios(K, K_a, M)
    return (8 * B**2 * (1 + dk) + 4 * sigma**2 * (1 + dmk)) * eps / (2 * (1 - z))


def c1e(B: float, sigma: float, K: int, K_a: int, M: int, epsilon: Optional[float] = None, zeta: Optional[float] = None) -> float:
    a = coefficient_a(B, sigma, K, K_a, M, epsilon, zeta)
    if a >= 1:
        raise UndefinedConstantError(f"C_1e undefined for a={a} >= 1", a=a)
    return (1 + a) / (1 - a)


def variance_bound(B: float, sigma: float, K: int, K_a: int, M: int, excess_risk: float) -> float:
    """Upper bound on var(sum_j U_j) for candidate excess risk ||g||^2 / N."""
    K_e = K + K_a
    _, dk, dmk = _ratios(K, K_a, M)
    return K_e * (8 * B**2 * (1 + dk) + 4 * sigma**2 * (1 + dmk)) * excess_risk


@dataclass
class BoundParams:
    B: float
    sigma: float
    K: int
    K_a: int = 0
    M: int = 1
    epsilon: Optional[float] = None
    zeta: Optional[float] = None

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if self.B < 0:
            raise ValueError(f"B must be non-negative, got {self.B}")
        if self.K < 1 or self.K_a < 0 or self.M < 1:
            raise ValueError(f"invalid sizes K={self.K}, K_a={self.K_a}, M={self.M}")

    @property
    def K_e(self) -> int:
        return self.K + self.K_a

    @property
    def n_p(self) -> int:
        return -(-self.K_e // self.K)

    @property
    def eps(self) -> float:
        return epsilon_default(self.B, self.sigma) if self.epsilon is None else self.epsilon

    @property
    def h(self) -> float:
        return craig_bernstein_h(self.B, self.sigma)

    @property
    def zeta_value(self) -> float:
        return self.eps * self.h if self.zeta is None else self.zeta


@dataclass
class ConstantReport:
    B_over_sigma: float
    C1: float
    epsilon_default: float
    epsilon_used: float
    epsilon_bound: float
    h: float
    zeta: float
    D: int
    D_over_Ke: float
    n_p: int
    a: float
    C1e: float
    variance_coefficient: float
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def eval_constants(p: BoundParams) -> ConstantReport:
    """Evaluate every constant for ``p``; raises if a >= 1."""
    if p.zeta is not None and p.zeta < p.eps * p.h:
        raise ValueError(f"zeta={p.zeta} below eps*h={p.eps * p.h}")
    D, dk, dmk = _ratios(p.K, p.K_a, p.M)
    a = coefficient_a(p.B, p.sigma, p.K, p.K_a, p.M, p.eps, p.zeta_value)
    if a >= 1:
        raise UndefinedConstantError(f"C_1e undefined for a={a} >= 1", a=a)
    return ConstantReport(
        B_over_sigma=p.B / p.sigma,
        C1=c1(p.B / p.sigma),
        epsilon_default=epsilon_default(p.B, p.sigma),
        epsilon_used=p.eps,
        epsilon_bound=epsilon_bound(p.B, p.sigma, p.K, p.K_a, p.M),
        h=p.h,
        zeta=p.zeta_value,
        D=D,
        D_over_Ke=dk,
        n_p=p.n_p,
        a=a,
        C1e=(1 + a) / (1 - a),
        variance_coefficient=p.K_e * (8 * p.B**2 * (1 + dk) + 4 * p.sigma**2 * (1 + dmk)),
    )


def sweep_c1e_vs_2c1(snr_db_grid, K_a: int, K: int, M: int) -> list:
    """Rows (snr_db, C_1e, 2 C_1) with B^2/sigma^2 = 10^(snr/10).

    Both constants use eps = 1/(60 (B + sigma)^2); C_1 is the K_a = 0 case.
    """
    rows = []
    for snr in snr_db_grid:
        ratio = 10.0 ** (float(snr) / 20.0)
        B, sigma = ratio, 1.0
        rows.append((float(snr), c1e(B, sigma, K, K_a, M), 2.0 * c1e(B, sigma, K, 0, M)))
    return rows


def excess_risk_sum_variance(sources: np.ndarray, g: np.ndarray, sigma2: float, ensemble: str = "bernoulli") -> float:
    """Exact var(sum_j U_j) for extended-matrix rows sharing blocks per ``sources``.

    ``sources`` is the K_e x M provenance array of the extended matrix and
    ``g = f_hat - f``. Entries have variance 1/N; noise is built from
    sub-samples of variance sigma2 / M.
    """
    g = np.asarray(g, dtype=float)
    K_e, M = sources.shape
    N = g.size
    L = N // M
    blocks = g.reshape(M, L)
    e2 = (blocks**2).sum(axis=1) / N          # per-block E{A^2}
    s4 = (blocks**4).sum(axis=1) / N**2        # per-block sum g^4 / N^2
    bern = str(ensemble).lower().startswith("bern")

    def fourth_excess(a2, a4):
        # E{A^4} - (E{A^2})^2
        return 2 * a2**2 - (2 * a4 if bern else 0.0)

    q = e2.sum()
    total = K_e * (4 * sigma2 * q + fourth_excess(q, s4.sum()))
    for i in range(K_e):
        shared = sources[i + 1:] == sources[i]
        for row in np.flatnonzero(shared.any(axis=1)):
            mask = shared[row]
            n = int(mask.sum())
            a2 = e2[mask].sum()
            a4 = s4[mask].sum()
            total += 2 * (4 * n * sigma2 / M * a2 + fourth_excess(a2, a4))
    return float(total)


def sparse_rate(K: int, S: int, N: int, constant: float = 1.0) -> float:
    """Shape constant * (K / (S log N))^-1 for sparse targets; the constant is caller-supplied."""
    return constant * (K / (S * math.log(N))) ** -1


def compressible_rate(K: int, N: int, alpha: float, constant: float = 1.0) -> float:
    return constant * (K / math.log(N)) ** (-2 * alpha / (2 * alpha + 1))
