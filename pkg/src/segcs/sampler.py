"""Discrete emulation of the M-segment analog-to-information converter.

Each integration period is split into M equal blocks of length L = N / M.
The K x M sub-sample matrix holds the blockwise inner products of every
sampling waveform with the signal; original samples are its row sums and
additional samples are row sums of its column-permuted copies. The same
reuse is expressed on the matrix side by :func:`extend_matrix`.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DimensionError, InsufficientFamilyError, SegmentationError
from .permutations import PermutationFamily, PermutationSet
from .sensing import MeasurementMatrix, Signal, make_rng

__all__ = [
    "SubSampleMatrix",
    "ExtendedMatrix",
    "NoisySampleVector",
    "subsample",
    "aggregate_original",
    "aggregate_permuted",
    "extend_matrix",
    "ext_sources",
    "correlated_noise",
    "sample_noisy",
    "shared_subsamples",
    "save_csv",
    "load_csv",
]


def _entries(phi) -> np.ndarray:
    a = phi.entries if isinstance(phi, (MeasurementMatrix, ExtendedMatrix)) else np.asarray(phi, dtype=float)
    if a.ndim != 2:
        raise DimensionError(f"expected a matrix, got shape {a.shape}")
    return a


def _samples(f) -> np.ndarray:
    return f.samples if isinstance(f, Signal) else np.asarray(f, dtype=float)


def _block_length(N: int, M: int) -> int:
    if M < 1 or N % M:
        raise SegmentationError(f"M={M} segments do not divide N={N}")
    return N // M


@dataclass(frozen=True)
class SubSampleMatrix:
    entries: np.ndarray
    segment_length: int

    @property
    def K(self) -> int:
        return self.entries.shape[0]

    @property
    def M(self) -> int:
        return self.entries.shape[1]


def subsample(f, phi, M: int) -> SubSampleMatrix:
    """y[k, j] = <block j of phi_k, block j of f>."""
    a = _entries(phi)
    x = _samples(f)
    K, N = a.shape
    if x.shape != (N,):
        raise DimensionError(f"signal length {x.shape} does not match matrix width {N}")
    L = _block_length(N, M)
    Y = (a.reshape(K, M, L) * x.reshape(1, M, L)).sum(axis=2)
    return SubSampleMatrix(entries=Y, segment_length=L)


def _sub_entries(Y) -> np.ndarray:
    return Y.entries if isinstance(Y, SubSampleMatrix) else np.asarray(Y, dtype=float)


def aggregate_original(Y) -> np.ndarray:
    return _sub_entries(Y).sum(axis=1)


def aggregate_permuted(Y, pset: PermutationSet) -> np.ndarray:
    """y_k = sum_m Y[pi_m(k), m]."""
    y = _sub_entries(Y)
    K, M = y.shape
    if pset.K != K or pset.M != M:
        raise DimensionError(f"permutation set (K={pset.K}, M={pset.M}) does not match Y of shape {y.shape}")
    return y[pset.table, np.arange(M)].sum(axis=1)


@dataclass(frozen=True)
class ExtendedMatrix:
    """Original rows followed by K_a permuted-block rows.

    set_index[r] is 0 for original rows and the 1-based family position
    otherwise; row_index[r] is the 0-based row k inside that block;
    sources[r, j] is the original row that supplies block j of row r.
    """

    entries: np.ndarray
    set_index: np.ndarray
    row_index: np.ndarray
    sources: np.ndarray
    K: int
    K_a: int
    M: int

    @property
    def K_e(self) -> int:
        return self.K + self.K_a

    @property
    def N(self) -> int:
        return self.entries.shape[1]

    @property
    def segment_length(self) -> int:
        return self.N // self.M

    def provenance(self) -> list:
        return [{"set_index": int(i), "row_index": int(k)} for i, k in zip(self.set_index, self.row_index)]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.entries, dtype=dtype)


def ext_sources(K: int, M: int, family: PermutationFamily, K_a: int):
    """Row provenance of the extended matrix without touching any entries."""
    if K_a < 0:
        raise ValueError(f"K_a must be non-negative, got {K_a}")
    if family.K != K or (family.I and family.M != M):
        raise DimensionError(f"family (K={family.K}, M={family.M}) does not match (K={K}, M={M})")
    if K_a > K * family.I:
        raise InsufficientFamilyError(
            f"K_a={K_a} additional rows need {-(-K_a // K)} permutation sets, family has {family.I}"
        )
    n_full, rest = divmod(K_a, K)
    tables = family.tables()
    blocks = [np.repeat(np.arange(K)[:, None], M, axis=1)]
    set_index = [np.zeros(K, dtype=np.int64)]
    row_index = [np.arange(K)]
    for i in range(n_full + (1 if rest else 0)):
        rows = K if i < n_full else rest
        blocks.append(tables[i][:rows])
        set_index.append(np.full(rows, i + 1, dtype=np.int64))
        row_index.append(np.arange(rows))
    return np.concatenate(set_index), np.concatenate(row_index), np.concatenate(blocks, axis=0)


def extend_matrix(phi, family: PermutationFamily, K_a: int) -> ExtendedMatrix:
    """Stack Phi with the first K_a rows of Phi^P(1), Phi^P(2), ... in family order."""
    a = _entries(phi)
    K, N = a.shape
    M = family.M
    L = _block_length(N, M)
    set_index, row_index, sources = ext_sources(K, M, family, K_a)
    blocks = a.reshape(K, M, L)
    entries = blocks[sources, np.arange(M)[None, :], :].reshape(sources.shape[0], N)
    entries.setflags(write=False)
    return ExtendedMatrix(
        entries=entries,
        set_index=set_index,
        row_index=row_index,
        sources=sources,
        K=K,
        K_a=int(K_a),
        M=M,
    )


def shared_subsamples(sources: np.ndarray) -> np.ndarray:
    """K_e x K_e count of sub-samples (row, block) shared by each pair of rows."""
    return (sources[:, None, :] == sources[None, :, :]).sum(axis=2)


@dataclass(frozen=True)
class NoisySampleVector:
    values: np.ndarray
    sigma2: float
    seed: Optional[int]


def correlated_noise(sources: np.ndarray, K: int, sigma2: float, rng: np.random.Generator, size=None) -> np.ndarray:
    """Aggregate i.i.d. sub-sample noise of variance sigma2 / M along ``sources``.

    Returns shape (K_e,) or (size, K_e). Rows sharing n sub-samples have noise
    covariance n * sigma2 / M; each row has variance sigma2.
    """
    if sigma2 < 0:
        raise ValueError(f"noise variance must be non-negative, got {sigma2}")
    M = sources.shape[1]
    lead = () if size is None else (int(size),)
    W = rng.standard_normal(lead + (K, M)) * np.sqrt(sigma2 / M)
    return W[..., sources, np.arange(M)].sum(axis=-1)


def sample_noisy(f, phi, family: PermutationFamily, K_a: int, sigma2: float, seed: int) -> NoisySampleVector:
    """Extended-scheme samples built from noisy sub-samples.

    The K x M matrix of sub-samples receives i.i.d. Gaussian noise of
    variance sigma2 / M, then original and permuted row sums are formed.
    """
    if sigma2 < 0:
        raise ValueError(f"noise variance must be non-negative, got {sigma2}")
    a = _entries(phi)
    K, N = a.shape
    M = family.M
    Y = subsample(f, a, M).entries
    if sigma2 > 0:
        Y = Y + make_rng(seed).standard_normal((K, M)) * np.sqrt(sigma2 / M)
    _, _, sources = ext_sources(K, M, family, K_a)
    values = Y[sources, np.arange(M)].sum(axis=1)
    return NoisySampleVector(values=values, sigma2=float(sigma2), seed=int(seed))


def save_csv(path, array) -> None:
    """Row-major, headerless CSV at full double precision."""
    a = np.atleast_2d(np.asarray(array, dtype=float))
    np.savetxt(path, a, delimiter=",", fmt="%.17g")


def load_csv(path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", ndmin=2)
