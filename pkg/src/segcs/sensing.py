"""Random sensing ensembles, sparse signals and noise/SNR arithmetic.

All generators are pure functions of their dimensions and an integer seed.
Per-trial seeds are derived with :func:`derive_seed`, which hashes a tuple of
integer keys through :class:`numpy.random.SeedSequence`, so streams for
``(master_seed, cell, trial)`` never overlap.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.fft import dct

from .errors import DimensionError, UndefinedSNRError

__all__ = [
    "Ensemble",
    "MeasurementMatrix",
    "SparseCoefficients",
    "SparsityBasis",
    "Signal",
    "derive_seed",
    "make_rng",
    "generate_measurement_matrix",
    "generate_sparse_signal",
    "synthesize",
    "snr_to_noise_variance",
    "noise_variance_to_snr",
]


class Ensemble(str, Enum):
    GAUSSIAN = "gaussian"
    BERNOULLI = "bernoulli"

    @classmethod
    def parse(cls, value) -> "Ensemble":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown ensemble {value!r}; expected 'gaussian' or 'bernoulli'") from None


def derive_seed(*keys: int) -> int:
    """Collapse integer keys into one 64-bit seed."""
    ss = np.random.SeedSequence([int(k) for k in keys])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed))))


@dataclass(frozen=True)
class MeasurementMatrix:
    entries: np.ndarray
    ensemble: Ensemble
    seed: int

    @property
    def shape(self):
        return self.entries.shape

    @property
    def K(self) -> int:
        return self.entries.shape[0]

    @property
    def N(self) -> int:
        return self.entries.shape[1]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.entries, dtype=dtype)


def _random_entries(rng, K, N, ensemble):
    if ensemble is Ensemble.GAUSSIAN:
        return rng.standard_normal((K, N)) / np.sqrt(N)
    signs = rng.integers(0, 2, size=(K, N)) * 2 - 1
    return signs / np.sqrt(N)


def generate_measurement_matrix(K: int, N: int, ensemble="gaussian", seed: int = 0) -> MeasurementMatrix:
    """Draw a K x N sampling-waveform matrix with entry variance 1/N."""
    if K < 1 or N < 1:
        raise DimensionError(f"matrix dimensions must be positive, got K={K}, N={N}")
    ensemble = Ensemble.parse(ensemble)
    entries = _random_entries(make_rng(seed), int(K), int(N), ensemble)
    entries.setflags(write=False)
    return MeasurementMatrix(entries=entries, ensemble=ensemble, seed=int(seed))


@dataclass(frozen=True)
class SparseCoefficients:
    values: np.ndarray
    support: tuple
    sparsity: int

    @property
    def N(self) -> int:
        return self.values.shape[0]


def generate_sparse_signal(N: int, S: int, amplitude: str = "pm_one", seed: int = 0) -> SparseCoefficients:
    """Place S equiprobable +/-1 values on a uniformly drawn support."""
    if N < 1:
        raise DimensionError(f"N must be positive, got {N}")
    if S < 0 or S > N:
        raise DimensionError(f"sparsity must satisfy 0 <= S <= N, got S={S}, N={N}")
    if amplitude != "pm_one":
        raise ValueError(f"unsupported amplitude law {amplitude!r}")
    rng = make_rng(seed)
    support = np.sort(rng.choice(N, size=S, replace=False))
    values = np.zeros(N)
    values[support] = rng.integers(0, 2, size=S) * 2.0 - 1.0
    values.setflags(write=False)
    return SparseCoefficients(values=values, support=tuple(int(i) for i in support), sparsity=int(S))


@dataclass(frozen=True)
class SparsityBasis:
    """Orthonormal basis whose rows are the basis vectors."""

    basis: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.basis, dtype=float)
        if b.ndim != 2 or b.shape[0] != b.shape[1]:
            raise DimensionError(f"basis must be square, got shape {b.shape}")
        if not np.allclose(b.T @ b, np.eye(b.shape[0]), atol=1e-10, rtol=0):
            raise ValueError("basis is not orthonormal to 1e-10")
        object.__setattr__(self, "basis", b)

    @classmethod
    def identity(cls, N: int) -> "SparsityBasis":
        return cls(np.eye(N))

    @classmethod
    def dct(cls, N: int) -> "SparsityBasis":
        return cls(dct(np.eye(N), norm="ortho", axis=0))

    @property
    def N(self) -> int:
        return self.basis.shape[0]


@dataclass(frozen=True)
class Signal:
    samples: np.ndarray
    norm2: float = field(init=False)

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float)
        object.__setattr__(self, "samples", s)
        object.__setattr__(self, "norm2", float(s @ s))

    @property
    def N(self) -> int:
        return self.samples.shape[0]


def synthesize(basis: SparsityBasis, x) -> Signal:
    """Return f = Psi^H x."""
    values = x.values if isinstance(x, SparseCoefficients) else np.asarray(x, dtype=float)
    if values.shape != (basis.N,):
        raise DimensionError(f"coefficient length {values.shape} does not match basis size {basis.N}")
    return Signal(basis.basis.conj().T @ values)


def _norm2(f) -> float:
    if isinstance(f, Signal):
        return f.norm2
    f = np.asarray(f, dtype=float)
    return float(f @ f)


def snr_to_noise_variance(f, N: int, snr_db: float) -> float:
    """Per-sample noise variance for a target SNR, sigma^2 = ||f||^2 / (N 10^(snr/10))."""
    energy = _norm2(f)
    if energy <= 0:
        raise UndefinedSNRError("SNR is undefined for a zero signal")
    if np.isinf(snr_db) and snr_db > 0:
        return 0.0
    return energy / (N * 10.0 ** (snr_db / 10.0))


def noise_variance_to_snr(f, N: int, sigma2: float) -> float:
    energy = _norm2(f)
    if energy <= 0:
        raise UndefinedSNRError("SNR is undefined for a zero signal")
    if sigma2 == 0:
        return float("inf")
    return 10.0 * np.log10(energy / (N * sigma2))
