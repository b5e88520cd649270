"""Column-permutation families that mint additional samples from sub-samples.

Internally permutations are 0-indexed integer arrays; ``mapping[k]`` is the
source row for output row ``k``. Serialized forms (shift tags, explicit
mappings) are 1-indexed.

The generator is the cyclic construction: ``pi_s(k) = ((s + k - 2) mod K) + 1``
and set ``i`` uses shifts ``[i (j - 1) mod K] + 1`` for columns ``j = 1..M``.
Sets whose shift sequence repeats within M columns (``K / gcd(i, K) < M``)
are skipped.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from math import gcd
from typing import Optional, Sequence

import numpy as np

__all__ = [
    "Permutation",
    "PermutationSet",
    "PermutationFamily",
    "ValidationReport",
    "cyclic_permutation",
    "build_family",
    "validate_family",
    "max_admissible_sets",
    "family_from_json",
    "family_to_json",
]


@dataclass(frozen=True)
class Permutation:
    mapping: np.ndarray
    shift: Optional[int] = None

    def __post_init__(self):
        m = np.asarray(self.mapping, dtype=np.int64)
        if m.ndim != 1 or not np.array_equal(np.sort(m), np.arange(m.size)):
            raise ValueError(f"mapping is not a bijection on 0..{m.size - 1}: {m.tolist()}")
        m.setflags(write=False)
        object.__setattr__(self, "mapping", m)

    @property
    def K(self) -> int:
        return self.mapping.size

    def one_based(self) -> tuple:
        return tuple(int(v) + 1 for v in self.mapping)

    def __eq__(self, other):
        return isinstance(other, Permutation) and np.array_equal(self.mapping, other.mapping)

    def __hash__(self):
        return hash(self.mapping.tobytes())


def cyclic_permutation(s: int, K: int) -> Permutation:
    """pi_s for 1 <= s <= K; pi_1 is the identity."""
    if K < 1 or not 1 <= s <= K:
        raise ValueError(f"shift must satisfy 1 <= s <= K, got s={s}, K={K}")
    k = np.arange(K)
    return Permutation((s - 1 + k) % K, shift=int(s))


@dataclass(frozen=True)
class PermutationSet:
    """One permutation per column of the K x M sub-sample matrix."""

    columns: tuple

    def __post_init__(self):
        cols = tuple(self.columns)
        if not cols:
            raise ValueError("a permutation set needs at least one column")
        if len({p.K for p in cols}) != 1:
            raise ValueError("all column permutations must act on the same K")
        object.__setattr__(self, "columns", cols)

    @classmethod
    def from_shifts(cls, shifts: Sequence[int], K: int) -> "PermutationSet":
        return cls(tuple(cyclic_permutation(int(s), K) for s in shifts))

    @property
    def K(self) -> int:
        return self.columns[0].K

    @property
    def M(self) -> int:
        return len(self.columns)

    @property
    def table(self) -> np.ndarray:
        """K x M array; ``table[k, j]`` is the source row of sub-sample (k, j)."""
        return np.stack([p.mapping for p in self.columns], axis=1)

    @property
    def shifts(self) -> Optional[tuple]:
        s = tuple(p.shift for p in self.columns)
        return None if any(v is None for v in s) else s


@dataclass(frozen=True)
class PermutationFamily:
    sets: tuple
    K: int
    M: int
    generators: tuple = ()
    shortfall: bool = False
    requested: Optional[int] = None

    def __post_init__(self):
        sets = tuple(self.sets)
        for s in sets:
            if s.K != self.K or s.M != self.M:
                raise ValueError(f"set of shape (K={s.K}, M={s.M}) in family of shape (K={self.K}, M={self.M})")
        object.__setattr__(self, "sets", sets)

    def __len__(self):
        return len(self.sets)

    @property
    def I(self) -> int:
        return len(self.sets)

    def tables(self) -> np.ndarray:
        """I x K x M array of source rows."""
        if not self.sets:
            return np.zeros((0, self.K, self.M), dtype=np.int64)
        return np.stack([s.table for s in self.sets])

    def shift_rows(self) -> list:
        return [list(s.shifts) if s.shifts is not None else None for s in self.sets]


def _admissible(i: int, K: int, M: int) -> bool:
    return K // gcd(i, K) >= M


def _check_km(K, M):
    if K < 2 or not 2 <= M <= K:
        raise ValueError(f"need 2 <= M <= K, got K={K}, M={M}")


def max_admissible_sets(K: int, M: int) -> int:
    _check_km(K, M)
    return sum(1 for i in range(1, K) if _admissible(i, K, M))


def build_family(K: int, M: int, I_requested: int, strict: bool = False) -> PermutationFamily:
    """Cyclic family, admissible generators i = 1, 2, ... truncated to I_requested.

    With ``strict=True`` a generator is also skipped when it would share more
    than one column with an already accepted set (``K / gcd(i - l, K) < M``),
    which the plain gcd filter does not guarantee.
    """
    _check_km(K, M)
    if I_requested < 1:
        raise ValueError(f"I_requested must be >= 1, got {I_requested}")
    chosen = []
    for i in range(1, K):
        if len(chosen) == I_requested:
            break
        if not _admissible(i, K, M):
            continue
        if strict and any(K // gcd(abs(i - l), K) < M for l in chosen):
            continue
        chosen.append(i)
    sets = tuple(PermutationSet.from_shifts([(i * j) % K + 1 for j in range(M)], K) for i in chosen)
    return PermutationFamily(
        sets=sets,
        K=K,
        M=M,
        generators=tuple(chosen),
        shortfall=len(chosen) < I_requested,
        requested=int(I_requested),
    )


@dataclass
class ValidationReport:
    """Violations found by :func:`validate_family`; all indices are 1-based.

    within_set:  (set, row k, column j, column r) with pi_j(k) == pi_r(k)
    cross_set:   (set i, set l, row k, row h, collisions) with collisions > 1
    vs_original: (set, row k, original row h, collisions) with collisions > 1
    duplicates:  (set i, set l) pairs with identical tables
    """

    K: int
    M: int
    I: int
    within_set: list = field(default_factory=list)
    cross_set: list = field(default_factory=list)
    vs_original: list = field(default_factory=list)
    duplicates: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not (self.within_set or self.cross_set or self.vs_original or self.duplicates)

    @property
    def n_violations(self) -> int:
        return len(self.within_set) + len(self.cross_set) + len(self.vs_original) + len(self.duplicates)

    def to_dict(self) -> dict:
        return {
            "K": self.K,
            "M": self.M,
            "I": self.I,
            "ok": self.ok,
            "within_set": [list(v) for v in self.within_set],
            "cross_set": [list(v) for v in self.cross_set],
            "vs_original": [list(v) for v in self.vs_original],
            "duplicates": [list(v) for v in self.duplicates],
        }


def _collision_counts(ta: np.ndarray, tb: np.ndarray) -> np.ndarray:
    # counts[k, h] = #{j : ta[k, j] == tb[h, j]}
    return (ta[:, None, :] == tb[None, :, :]).sum(axis=2)


def validate_family(family: PermutationFamily) -> ValidationReport:
    K, M = family.K, family.M
    tables = family.tables()
    report = ValidationReport(K=K, M=M, I=family.I)
    identity = np.repeat(np.arange(K)[:, None], M, axis=1)

    for i, t in enumerate(tables):
        for j in range(M):
            for r in range(j + 1, M):
                for k in np.flatnonzero(t[:, j] == t[:, r]):
                    report.within_set.append((i + 1, int(k) + 1, j + 1, r + 1))
        counts = _collision_counts(t, identity)
        for k, h in zip(*np.nonzero(counts > 1)):
            report.vs_original.append((i + 1, int(k) + 1, int(h) + 1, int(counts[k, h])))

    for i in range(family.I):
        for l in range(i + 1, family.I):
            if np.array_equal(tables[i], tables[l]):
                report.duplicates.append((i + 1, l + 1))
            counts = _collision_counts(tables[i], tables[l])
            for k, h in zip(*np.nonzero(counts > 1)):
                report.cross_set.append((i + 1, l + 1, int(k) + 1, int(h) + 1, int(counts[k, h])))
    return report


def family_to_json(family: PermutationFamily) -> str:
    """Array of sets; cyclic sets as M shift tags, others as M explicit 1-based mappings."""
    out = []
    for s in family.sets:
        if s.shifts is not None:
            out.append(list(s.shifts))
        else:
            out.append([list(p.one_based()) for p in s.columns])
    return json.dumps(out)


def family_from_json(text: str, K: int) -> PermutationFamily:
    raw = json.loads(text)
    if not isinstance(raw, list):
        raise ValueError("family JSON must be an array of sets")
    sets = []
    for entry in raw:
        if not isinstance(entry, list) or not entry:
            raise ValueError(f"malformed permutation set {entry!r}")
        if all(isinstance(v, int) for v in entry):
            sets.append(PermutationSet.from_shifts(entry, K))
        else:
            cols = []
            for m in entry:
                if len(m) != K:
                    raise ValueError(f"explicit mapping of length {len(m)} for K={K}")
                cols.append(Permutation(np.asarray(m, dtype=np.int64) - 1))
            sets.append(PermutationSet(tuple(cols)))
    M = sets[0].M if sets else 0
    return PermutationFamily(sets=tuple(sets), K=K, M=M)
