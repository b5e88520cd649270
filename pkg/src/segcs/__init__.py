"""Segmented compressed sampling: sub-sample reuse, recovery and analysis tools."""
from .errors import *  # noqa: F401,F403
from .sensing import (
    Ensemble,
    MeasurementMatrix,
    Signal,
    SparseCoefficients,
    SparsityBasis,
    derive_seed,
    generate_measurement_matrix,
    generate_sparse_signal,
    make_rng,
    snr_to_noise_variance,
    synthesize,
)
from .permutations import build_family, cyclic_permutation, max_admissible_sets, validate_family
from .sampler import extend_matrix, sample_noisy, subsample
from .rip import null_space_containment, partition_extended, restricted_isometry_constant, rip_probability_bounds
from .recovery import ErmConfig, basis_pursuit, bpdn, erm_recover
from .bounds import BoundParams, eval_constants, sweep_c1e_vs_2c1

__version__ = "0.1.0"
