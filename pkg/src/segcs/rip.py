"""Restricted isometry constants, independent-row partitions and RIP bounds.

The isometry constant is normalized by the row count of the matrix under
test: for a subset T of columns,

    delta(T) = max((N / K_norm) s_max(A_T)^2 - 1, 1 - (N / K_norm) s_min(A_T)^2)

and delta_S is the maximum over |T| = S. Squared singular values are taken
as eigenvalues of the principal S x S blocks of the Gram matrix A^T A.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .errors import BudgetError, DimensionError
from .sampler import ExtendedMatrix, _entries, ext_sources
from .sensing import make_rng

__all__ = [
    "RipEstimate",
    "PartitionPlan",
    "BoundReport",
    "CheckReport",
    "restricted_isometry_constant",
    "partition_extended",
    "partition_sizes",
    "rip_probability_bounds",
    "null_space_containment",
    "DEFAULT_SUBSET_CAP",
]

DEFAULT_SUBSET_CAP = 2_000_000
_CHUNK = 20_000


@dataclass(frozen=True)
class RipEstimate:
    delta_S: float
    S: int
    mode: str
    subsets_checked: int
    K_norm: int
    worst_subset: tuple = ()


def _subset_deltas(gram: np.ndarray, subsets: np.ndarray, scale: float, rows: int) -> np.ndarray:
    S = subsets.shape[1]
    blocks = gram[subsets[:, :, None], subsets[:, None, :]]
    ev = np.linalg.eigvalsh(blocks)
    ev = np.clip(ev, 0.0, None)
    lo = np.zeros(len(subsets)) if S > rows else ev[:, 0]
    hi = ev[:, -1]
    return np.maximum(scale * hi - 1.0, 1.0 - scale * lo)


def restricted_isometry_constant(
    A,
    S: int,
    K_norm: Optional[int] = None,
    mode: str = "exhaustive",
    budget: int = 1000,
    seed: int = 0,
    cap: int = DEFAULT_SUBSET_CAP,
) -> RipEstimate:
    """Empirical delta_S of ``A``.

    ``exhaustive`` sweeps all C(N, S) column subsets. ``monte_carlo`` examines
    ``budget`` distinct uniformly drawn subsets and is only a lower bound.
    """
    a = _entries(A)
    K, N = a.shape
    if not 1 <= S <= N:
        raise DimensionError(f"need 1 <= S <= N, got S={S}, N={N}")
    K_norm = K if K_norm is None else int(K_norm)
    scale = N / K_norm
    gram = a.T @ a

    if mode == "exhaustive":
        total = math.comb(N, S)
        if total > cap:
            raise BudgetError(f"C({N},{S})={total} subsets exceeds cap {cap}; use mode='monte_carlo'")
        it = itertools.combinations(range(N), S)
        best, worst, checked = -np.inf, (), 0
        while True:
            chunk = np.array(list(itertools.islice(it, _CHUNK)), dtype=np.int64)
            if chunk.size == 0:
                break
            d = _subset_deltas(gram, chunk.reshape(-1, S), scale, K)
            j = int(np.argmax(d))
            if d[j] > best:
                best, worst = float(d[j]), tuple(int(v) for v in chunk[j])
            checked += len(chunk)
        return RipEstimate(best, S, mode, checked, K_norm, worst)

    if mode == "monte_carlo":
        rng = make_rng(seed)
        total = math.comb(N, S)
        want = min(int(budget), total)
        seen = set()
        # distinct subsets; rejection is cheap unless budget approaches C(N, S)
        while len(seen) < want:
            for _ in range(want - len(seen)):
                seen.add(tuple(sorted(int(v) for v in rng.choice(N, size=S, replace=False))))
        subsets = np.array(sorted(seen), dtype=np.int64).reshape(-1, S)
        d = _subset_deltas(gram, subsets, scale, K)
        j = int(np.argmax(d))
        return RipEstimate(float(d[j]), S, mode, len(subsets), K_norm, tuple(int(v) for v in subsets[j]))

    raise ValueError(f"unknown mode {mode!r}")


@dataclass
class PartitionPlan:
    """Split of the extended rows into groups of mutually independent entries.

    ``sets`` holds 0-based row indices of the extended matrix;
    ``independent[i]`` is the structural check that no two rows of group i
    share a sub-sample. ``halves_feasible`` is None when K_a > K.
    """

    sizes: list
    n_p: int
    unused_rows_moved: int
    sets: list = field(default_factory=list)
    independent: list = field(default_factory=list)
    rule: str = ""
    halves_feasible: Optional[bool] = None
    rebalanced: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


def partition_sizes(K: int, K_a: int) -> list:
    """Group sizes K, ..., K, K_e - (n_p - 1) K with n_p = ceil(K_e / K)."""
    K_e = K + K_a
    n_p = -(-K_e // K)
    return [K] * (n_p - 1) + [K_e - (n_p - 1) * K]


def _independent(sources: np.ndarray, rows) -> bool:
    rows = list(rows)
    if not rows:
        return True
    sub = sources[rows]
    M = sub.shape[1]
    for j in range(M):
        if len(np.unique(sub[:, j])) != len(rows):
            return False
    return True


def _sources(ext):
    if isinstance(ext, ExtendedMatrix):
        return ext.K, ext.K_a, ext.M, ext.sources
    raise TypeError("partition_extended needs an ExtendedMatrix with provenance")


def partition_extended(ext: ExtendedMatrix, rebalance: bool = False) -> PartitionPlan:
    K, K_a, M, sources = _sources(ext)
    K_e = K + K_a

    if K_a <= K:
        half_up, half_down = -(-K_e // 2), K_e // 2
        feasible = min(K, K_a + M - 1) <= half_up
        if feasible and K_a > 0:
            # original rows beyond the first ceil(K_e/2) feed no additional row
            first = list(range(half_up))
            second = list(range(half_up, K_e))
            plan = PartitionPlan(
                sizes=[half_up, half_down],
                n_p=2,
                unused_rows_moved=max(0, K - half_up),
                sets=[first, second],
                rule="halves",
                halves_feasible=True,
            )
            plan.independent = [_independent(sources, s) for s in plan.sets]
            return plan
        plan = _blocks_plan(K, K_a, sources, "blocks")
        plan.halves_feasible = feasible
        return plan

    plan = _blocks_plan(K, K_a, sources, "blocks")
    if rebalance and plan.n_p >= 2 and plan.sizes[-1] < plan.sizes[-2]:
        plan = _rebalance(plan, K, sources)
    return plan


def _blocks_plan(K: int, K_a: int, sources, rule) -> PartitionPlan:
    sizes = partition_sizes(K, K_a) if K_a > 0 else [K]
    sets, start = [], 0
    for s in sizes:
        sets.append(list(range(start, start + s)))
        start += s
    plan = PartitionPlan(sizes=sizes, n_p=len(sizes), unused_rows_moved=0, sets=sets, rule=rule)
    plan.independent = [_independent(sources, s) for s in sets]
    return plan


def _rebalance(plan: PartitionPlan, K: int, sources) -> PartitionPlan:
    prev, last = list(plan.sets[-2]), list(plan.sets[-1])
    target_last = (K + len(last)) // 2
    n_move = target_last - len(last)
    # prefer rows of the previous group that share no sub-sample with the last group
    taken = {(int(sources[r, j]), j) for r in last for j in range(sources.shape[1])}
    clean = [r for r in reversed(prev) if not any((int(sources[r, j]), j) in taken for j in range(sources.shape[1]))]
    rest = [r for r in reversed(prev) if r not in clean]
    moved = (clean + rest)[:n_move]
    new_prev = [r for r in prev if r not in moved]
    new_last = sorted(last + moved)
    sets = plan.sets[:-2] + [new_prev, new_last]
    sizes = [len(s) for s in sets]
    out = PartitionPlan(
        sizes=sizes,
        n_p=plan.n_p,
        unused_rows_moved=0,
        sets=sets,
        rule="blocks_rebalanced",
        rebalanced=True,
    )
    out.independent = [_independent(sources, s) for s in sets]
    return out


@dataclass
class BoundReport:
    K: int
    K_a: int
    K_e: int
    M: int
    N: int
    S: int
    delta_S: float
    C0: float
    n_p: int
    K_np: int
    halves_condition: bool
    single_subset: float
    two_group: float
    multi_group: float
    c3: Optional[float] = None
    C4: Optional[float] = None
    C4_prime: Optional[float] = None
    two_group_uniform: Optional[float] = None
    multi_group_uniform: Optional[float] = None
    c3_max_C4: float = 0.0
    c3_max_C4_prime: float = 0.0
    sparsity_limit_two_group: Optional[float] = None
    sparsity_limit_multi_group: Optional[float] = None

    def to_dict(self) -> dict:
        return asdict(self)


def rip_probability_bounds(K: int, K_a: int, M: int, N: int, S: int, delta_S: float, c3: Optional[float] = None) -> BoundReport:
    """Raw (unclamped) lower bounds on the probability that the RIP holds."""
    if not 0 < delta_S < 1:
        raise ValueError(f"delta_S must lie in (0, 1), got {delta_S}")
    d = float(delta_S)
    K_e = K + K_a
    C0 = d**2 / 16 - d**3 / 48
    cover = (12.0 / d) ** S
    n_p = -(-K_e // K)
    K_np = K_e - (n_p - 1) * K
    half_down = K_e // 2

    single = 1 - 2 * cover * math.exp(-C0 * K)
    two_group = 1 - 4 * cover * math.exp(-C0 * half_down)
    multi_group = 1 - 2 * (n_p - 1) * cover * math.exp(-C0 * K) - 2 * cover * math.exp(-C0 * K_np)
    bracket = 1 + (1 + math.log(12.0 / d)) / math.log(N / S) if N > S else math.inf

    rep = BoundReport(
        K=K, K_a=K_a, K_e=K_e, M=M, N=N, S=S, delta_S=d, C0=C0, n_p=n_p, K_np=K_np,
        halves_condition=min(K, K_a + M - 1) <= -(-K_e // 2),
        single_subset=single, two_group=two_group, multi_group=multi_group,
        c3_max_C4=C0 / bracket,
        c3_max_C4_prime=C0 * K / (K_np * bracket),
    )
    if c3 is not None:
        rep.c3 = float(c3)
        rep.C4 = C0 - c3 * bracket
        rep.C4_prime = C0 - (c3 * K_np / K) * bracket
        rep.two_group_uniform = 1 - 4 * math.exp(-rep.C4 * half_down)
        rep.multi_group_uniform = 1 - 2 * (n_p - 1) * math.exp(-rep.C4_prime * K) - 2 * math.exp(-rep.C4 * K_np)
        if N > S:
            rep.sparsity_limit_two_group = c3 * half_down / math.log(N / S)
            rep.sparsity_limit_multi_group = c3 * K_np / math.log(N / S)
    return rep


@dataclass
class CheckReport:
    containment: bool
    max_violation: float
    tol: float
    null_dim_ext: int
    null_dim_orig: int
    expected_null_dim_ext: int
    rank_deficient: bool
    ratio_ext: float
    ratio_orig: float
    ratio_samples: int

    def to_dict(self) -> dict:
        return asdict(self)


def _null_basis(a: np.ndarray, tol: float) -> np.ndarray:
    _, s, vt = np.linalg.svd(a, full_matrices=True)
    rank = int(np.sum(s > tol * s[0])) if s.size and s[0] > 0 else 0
    return vt[rank:]


def _ratio_surrogate(basis: np.ndarray, rng, n_samples: int) -> float:
    """min of 0.5 ||v||_1 / ||v||_2 over basis vectors and random null-space draws."""
    if basis.shape[0] == 0:
        return math.inf
    cand = [basis]
    if n_samples:
        cand.append(rng.standard_normal((n_samples, basis.shape[0])) @ basis)
    v = np.vstack(cand)
    return float(np.min(0.5 * np.abs(v).sum(axis=1) / np.linalg.norm(v, axis=1)))


def null_space_containment(phi, ext, tol: float = 1e-8, n_samples: int = 200, seed: int = 0) -> CheckReport:
    """Check that every null-space direction of the extended matrix is annihilated by Phi."""
    a = _entries(phi)
    e = _entries(ext)
    K, N = a.shape
    if e.shape[1] != N:
        raise DimensionError(f"column mismatch: {a.shape} vs {e.shape}")
    K_e = e.shape[0]
    basis = _null_basis(e, tol)
    if basis.shape[0]:
        viol = np.linalg.norm(basis @ a.T, axis=1) / np.linalg.norm(basis, axis=1)
        worst = float(viol.max())
    else:
        worst = 0.0
    orig_basis = _null_basis(a, tol)
    rng = make_rng(seed)
    return CheckReport(
        containment=worst <= tol,
        max_violation=worst,
        tol=tol,
        null_dim_ext=int(basis.shape[0]),
        null_dim_orig=int(orig_basis.shape[0]),
        expected_null_dim_ext=max(N - K_e, 0),
        rank_deficient=basis.shape[0] != max(N - K_e, 0),
        ratio_ext=_ratio_surrogate(basis, rng, n_samples),
        ratio_orig=_ratio_surrogate(orig_basis, rng, n_samples),
        ratio_samples=n_samples,
    )
