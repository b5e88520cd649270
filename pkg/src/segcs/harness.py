"""Seeded Monte-Carlo experiments over the original, extended and enlarged schemes.

Every trial seed is derived from (master_seed, snr index, ratio index, trial),
so schemes inside one cell see the same first K rows of the measurement
matrix, the same signal and the same sub-sample noise (common random numbers).
Aggregates are computed in trial order, which makes tables independent of
worker count and scheduling.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
import os
import subprocess
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Optional

import numpy as np

from . import bounds
from .errors import BudgetError, ConfigError, InfeasibleError, NonConvergenceError
from .permutations import build_family, max_admissible_sets
from .recovery import DEFAULT_THRESHOLDS, ErmConfig, basis_pursuit, bpdn, erm_recover
from .rip import null_space_containment, partition_extended, restricted_isometry_constant, rip_probability_bounds
from .sampler import extend_matrix, sample_noisy
from .sensing import (
    Ensemble,
    SparsityBasis,
    derive_seed,
    generate_measurement_matrix,
    generate_sparse_signal,
    make_rng,
    snr_to_noise_variance,
    synthesize,
)

log = logging.getLogger(__name__)

__all__ = [
    "SCHEMES",
    "ExperimentConfig",
    "ResultTable",
    "TrialOutcome",
    "run_trial",
    "run_mse_experiment",
    "run_fig3_sweep",
    "RipScanConfig",
    "rip_scan",
    "write_manifest",
    "config_hash",
    "load_json",
    "FIG3_HEADER",
    "read_fig3_csv",
]

SCHEMES = ("original", "extended", "enlarged")
SEED_ENV = "SEGCS_SEED"
FIG3_HEADER = ("snr_db", "c1e", "two_c1")


def _ratio(v) -> Fraction:
    try:
        return Fraction(str(v)) if not isinstance(v, Fraction) else v
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"bad K_a/K ratio {v!r}") from exc


@dataclass
class ExperimentConfig:
    N: int = 128
    S: int = 3
    K: int = 16
    M: int = 8
    ka_over_k_grid: list = field(default_factory=lambda: [0.5, 1])
    snr_db_list: list = field(default_factory=lambda: [15.0, 25.0])
    trials: int = 200
    scheme_list: list = field(default_factory=lambda: list(SCHEMES))
    recovery: str = "l1"
    ensemble: str = "gaussian"
    basis: str = "identity"
    master_seed: int = 0
    eq_tol: float = 1e-8
    feas_tol: float = 1e-6
    erm_thresholds: dict = field(default_factory=lambda: dict(DEFAULT_THRESHOLDS))
    erm_theta: float = 1e-3
    erm_max_iter: int = 10_000
    exact_tol: float = 1e-4
    failure_budget: float = 0.01
    workers: int = 1
    output_dir: str = "results"

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        try:
            for name in ("N", "S", "K", "M", "trials"):
                if int(getattr(self, name)) < 1:
                    raise ConfigError(f"{name} must be a positive integer, got {getattr(self, name)}")
            if self.N % self.M:
                raise ConfigError(f"M={self.M} must divide N={self.N}")
            if self.S > self.N:
                raise ConfigError(f"S={self.S} exceeds N={self.N}")
            if self.recovery not in ("l1", "erm"):
                raise ConfigError(f"recovery must be 'l1' or 'erm', got {self.recovery!r}")
            bad = [s for s in self.scheme_list if s not in SCHEMES]
            if bad or not self.scheme_list:
                raise ConfigError(f"unknown schemes {bad}; choose from {SCHEMES}")
            if self.basis not in ("identity", "dct"):
                raise ConfigError(f"basis must be 'identity' or 'dct', got {self.basis!r}")
            Ensemble.parse(self.ensemble)
            if not self.snr_db_list:
                raise ConfigError("snr_db_list is empty")
            if not self.ka_over_k_grid:
                raise ConfigError("ka_over_k_grid is empty")
            if not 0 <= self.failure_budget < 1:
                raise ConfigError(f"failure_budget must lie in [0, 1), got {self.failure_budget}")
            if self.workers < 1:
                raise ConfigError(f"workers must be >= 1, got {self.workers}")
            for s in self.scheme_list:
                if self.recovery == "erm" and s not in self.erm_thresholds:
                    raise ConfigError(f"no ERM threshold for scheme {s!r}")
            needs_family = any(s == "extended" for s in self.scheme_list)
            cap = max_admissible_sets(self.K, self.M) if needs_family else None
            for r in self.ka_over_k_grid:
                ka = _ratio(r) * self.K
                if ka.denominator != 1 or ka < 0:
                    raise ConfigError(f"K_a = {r} * {self.K} is not a non-negative integer")
                if cap is not None and ka > self.K * cap:
                    raise ConfigError(f"K_a={ka} exceeds K * max_admissible_sets = {self.K * cap}")
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from exc

    def ka_values(self) -> list:
        return [int(_ratio(r) * self.K) for r in self.ka_over_k_grid]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["ka_over_k_grid"] = [str(_ratio(r)) for r in self.ka_over_k_grid]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config keys {sorted(extra)}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_json(cls, path, seed_override: Optional[int] = None) -> "ExperimentConfig":
        d = load_json(path)
        seed = _env_seed(seed_override)
        if seed is not None:
            d["master_seed"] = seed
        return cls.from_dict(d)


def _env_seed(explicit: Optional[int]) -> Optional[int]:
    if explicit is not None:
        return int(explicit)
    v = os.environ.get(SEED_ENV)
    if v is None or v == "":
        return None
    try:
        return int(v)
    except ValueError as exc:
        raise ConfigError(f"{SEED_ENV}={v!r} is not an integer") from exc


def load_json(path) -> dict:
    try:
        with open(path) as fh:
            d = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(d, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    return d


def config_hash(d: dict) -> str:
    return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()


@dataclass(frozen=True)
class TrialOutcome:
    mse: float
    exact: bool
    iterations: int
    converged: bool
    failed: bool


def _cell_seed(master: int, i_snr: int, i_ka: int, trial: int) -> int:
    return derive_seed(master, i_snr, i_ka, trial)


def run_trial(cfg: ExperimentConfig, scheme: str, snr_db: float, K_a: int, seed: int) -> TrialOutcome:
    """One draw of matrix, signal and noise followed by recovery for ``scheme``."""
    K, N, M = cfg.K, cfg.N, cfg.M
    K_e = K + K_a
    big = generate_measurement_matrix(K_e, N, cfg.ensemble, derive_seed(seed, 1)).entries
    phi = big[:K]
    coeffs = generate_sparse_signal(N, cfg.S, seed=derive_seed(seed, 2))
    basis = SparsityBasis.identity(N) if cfg.basis == "identity" else SparsityBasis.dct(N)
    f = synthesize(basis, coeffs.values).samples
    sigma2 = snr_to_noise_variance(f, N, snr_db)

    if scheme == "enlarged":
        A = big
        y = big @ f + make_rng(derive_seed(seed, 4)).standard_normal(K_e) * math.sqrt(sigma2)
        k_prime = K_e
    else:
        # original samples are the unpermuted row sums of the same noisy sub-samples
        n_sets = -(-K_a // K)
        family = build_family(K, M, max(n_sets, 1))
        ka = K_a if scheme == "extended" else 0
        y = sample_noisy(f, phi, family, ka, sigma2, derive_seed(seed, 3)).values
        A = extend_matrix(phi, family, ka).entries if ka else phi
        k_prime = K + ka

    A_prime = A @ basis.basis.conj().T
    try:
        if cfg.recovery == "l1":
            gamma = math.sqrt(k_prime * sigma2)
            res = bpdn(A_prime, y, gamma, feas_tol=cfg.feas_tol) if gamma > 0 else basis_pursuit(A_prime, y, eq_tol=cfg.eq_tol)
        else:
            res = erm_recover(
                A_prime, y, ErmConfig(threshold=cfg.erm_thresholds[scheme], theta=cfg.erm_theta, max_iter=cfg.erm_max_iter)
            )
    except (NonConvergenceError, InfeasibleError) as exc:
        log.debug("trial failed: %s", exc)
        return TrialOutcome(math.nan, False, 0, False, True)
    x_hat = res.x_hat
    f_hat = basis.basis.conj().T @ x_hat
    mse = float(np.sum((f_hat - f) ** 2))
    err = float(np.linalg.norm(x_hat - coeffs.values) / np.linalg.norm(coeffs.values))
    return TrialOutcome(mse, err <= cfg.exact_tol, int(res.iterations), bool(res.converged), False)


RESULT_COLUMNS = (
    "scheme",
    "snr_db",
    "ka_over_k",
    "trials",
    "mse_mean",
    "mse_stderr",
    "exact_recovery_rate",
    "mean_iterations",
    "wall_time",
    "failures",
    "nonconverged",
)
_DETERMINISTIC = tuple(c for c in RESULT_COLUMNS if c != "wall_time")
CSV_VERSION = "segcs-results-v1"


@dataclass
class ResultTable:
    rows: list = field(default_factory=list)

    def __len__(self):
        return len(self.rows)

    def lookup(self, scheme: str, snr_db: float, ka_over_k) -> dict:
        r = _ratio(ka_over_k)
        for row in self.rows:
            if row["scheme"] == scheme and row["snr_db"] == float(snr_db) and _ratio(row["ka_over_k"]) == r:
                return row
        raise KeyError((scheme, snr_db, str(r)))

    def deterministic(self) -> list:
        """Rows without the wall-clock column, for reproducibility checks."""
        return [{c: row[c] for c in _DETERMINISTIC} for row in self.rows]

    def over_budget(self, budget: float) -> list:
        return [row for row in self.rows if row["failures"] > budget * row["trials"]]

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(RESULT_COLUMNS)
        for row in self.rows:
            w.writerow([repr(row[c]) if isinstance(row[c], float) else row[c] for c in RESULT_COLUMNS])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, source) -> "ResultTable":
        text = Path(source).read_text() if not isinstance(source, str) or "\n" not in source else source
        reader = csv.DictReader(io.StringIO(text))
        if tuple(reader.fieldnames or ()) != RESULT_COLUMNS:
            raise ValueError(f"unexpected header {reader.fieldnames}")
        rows = []
        for r in reader:
            rows.append(
                {
                    "scheme": r["scheme"],
                    "snr_db": float(r["snr_db"]),
                    "ka_over_k": r["ka_over_k"],
                    "trials": int(r["trials"]),
                    "mse_mean": float(r["mse_mean"]),
                    "mse_stderr": float(r["mse_stderr"]),
                    "exact_recovery_rate": float(r["exact_recovery_rate"]),
                    "mean_iterations": float(r["mean_iterations"]),
                    "wall_time": float(r["wall_time"]),
                    "failures": int(r["failures"]),
                    "nonconverged": int(r["nonconverged"]),
                }
            )
        return cls(rows)


def _run_cell(args):
    cfg_dict, scheme, snr, ka, seeds = args
    cfg = ExperimentConfig.from_dict(cfg_dict)
    t0 = time.perf_counter()
    out = [run_trial(cfg, scheme, snr, ka, s) for s in seeds]
    return out, time.perf_counter() - t0


def _aggregate(scheme, snr, ratio, outcomes, wall) -> dict:
    ok = [o for o in outcomes if not o.failed]
    mse = np.array([o.mse for o in ok])
    n = len(ok)
    return {
        "scheme": scheme,
        "snr_db": float(snr),
        "ka_over_k": str(ratio),
        "trials": len(outcomes),
        "mse_mean": float(mse.mean()) if n else math.nan,
        "mse_stderr": float(mse.std(ddof=1) / math.sqrt(n)) if n > 1 else math.nan,
        "exact_recovery_rate": float(np.mean([o.exact for o in ok])) if n else 0.0,
        "mean_iterations": float(np.mean([o.iterations for o in ok])) if n else math.nan,
        "wall_time": float(wall),
        "failures": len(outcomes) - n,
        "nonconverged": sum(1 for o in ok if not o.converged),
    }


def run_mse_experiment(cfg: ExperimentConfig, trial_order: Optional[list] = None) -> ResultTable:
    """MSE table over every (scheme, snr, K_a/K) cell.

    ``trial_order`` permutes execution order inside each cell (for testing
    order independence); results are always aggregated by trial id.
    """
    cfg.validate()
    order = list(range(cfg.trials)) if trial_order is None else list(trial_order)
    if sorted(order) != list(range(cfg.trials)):
        raise ConfigError("trial_order must be a permutation of range(trials)")
    cfg_dict = cfg.to_dict()
    tasks, keys = [], []
    for i_snr, snr in enumerate(cfg.snr_db_list):
        for i_ka, (r, ka) in enumerate(zip(cfg.ka_over_k_grid, cfg.ka_values())):
            seeds = [_cell_seed(cfg.master_seed, i_snr, i_ka, t) for t in order]
            for scheme in cfg.scheme_list:
                tasks.append((cfg_dict, scheme, float(snr), ka, seeds))
                keys.append((scheme, snr, _ratio(r)))
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_run_cell, tasks))
    else:
        results = [_run_cell(t) for t in tasks]
    table = ResultTable()
    for (scheme, snr, r), (outcomes, wall) in zip(keys, results):
        by_id = [None] * cfg.trials
        for tid, o in zip(order, outcomes):
            by_id[tid] = o
        table.rows.append(_aggregate(scheme, snr, r, by_id, wall))
    return table


def run_fig3_sweep(snr_db_grid=None, K: int = 16, K_a: Optional[int] = None, M: int = 8, out=None) -> list:
    """C_1e against 2 C_1 over an SNR grid, optionally written as CSV."""
    grid = list(np.arange(-20, 41, 1.0)) if snr_db_grid is None else list(snr_db_grid)
    rows = bounds.sweep_c1e_vs_2c1(grid, K if K_a is None else K_a, K, M)
    if out is not None:
        with open(out, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(FIG3_HEADER)
            for r in rows:
                w.writerow([repr(v) for v in r])
    return rows


def read_fig3_csv(path) -> list:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != FIG3_HEADER:
            raise ValueError(f"unexpected header {header}")
        return [tuple(float(v) for v in r) for r in reader]


@dataclass
class RipScanConfig:
    N: int = 24
    K: int = 8
    K_a: int = 8
    M: int = 4
    S: int = 2
    seeds: list = field(default_factory=lambda: list(range(20)))
    ensemble: str = "gaussian"
    mode: str = "exhaustive"
    budget: int = 1000
    cap: int = 2_000_000
    rebalance: bool = False

    def __post_init__(self):
        if self.N % self.M:
            raise ConfigError(f"M={self.M} must divide N={self.N}")
        if self.mode not in ("exhaustive", "monte_carlo"):
            raise ConfigError(f"unknown mode {self.mode!r}")
        if not 1 <= self.S <= self.N:
            raise ConfigError(f"need 1 <= S <= N, got S={self.S}")
        try:
            cap = max_admissible_sets(self.K, self.M)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if not 0 <= self.K_a <= self.K * cap:
            raise ConfigError(f"K_a={self.K_a} outside [0, {self.K * cap}]")
        if self.mode == "exhaustive" and math.comb(self.N, self.S) > self.cap:
            raise ConfigError(
                f"C({self.N},{self.S})={math.comb(self.N, self.S)} subsets exceeds cap {self.cap}; set mode to 'monte_carlo'"
            )

    @classmethod
    def from_dict(cls, d: dict) -> "RipScanConfig":
        extra = set(d) - set(cls.__dataclass_fields__)
        if extra:
            raise ConfigError(f"unknown config keys {sorted(extra)}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc


def _finite(v):
    return v if not (isinstance(v, float) and not math.isfinite(v)) else repr(v)


def rip_scan(cfg: RipScanConfig) -> dict:
    """delta_S of Phi and Phi_e, partition plan, bound values and null-space check per seed."""
    family = build_family(cfg.K, cfg.M, max(-(-cfg.K_a // cfg.K), 1))
    entries = []
    for seed in cfg.seeds:
        phi = generate_measurement_matrix(cfg.K, cfg.N, cfg.ensemble, seed=int(seed))
        ext = extend_matrix(phi, family, cfg.K_a)
        try:
            d_phi = restricted_isometry_constant(phi, cfg.S, mode=cfg.mode, budget=cfg.budget, seed=int(seed), cap=cfg.cap)
            d_ext = restricted_isometry_constant(ext, cfg.S, mode=cfg.mode, budget=cfg.budget, seed=int(seed), cap=cfg.cap)
        except BudgetError as exc:
            raise ConfigError(str(exc)) from exc
        plan = partition_extended(ext, rebalance=cfg.rebalance)
        check = null_space_containment(phi, ext, seed=int(seed))
        entry = {
            "seed": int(seed),
            "delta_phi": d_phi.delta_S,
            "delta_ext": d_ext.delta_S,
            "worst_subset_phi": list(d_phi.worst_subset),
            "worst_subset_ext": list(d_ext.worst_subset),
            "partition": plan.to_dict(),
            "null_space": {k: _finite(v) for k, v in check.to_dict().items()},
        }
        if 0 < d_ext.delta_S < 1:
            rep = rip_probability_bounds(cfg.K, cfg.K_a, cfg.M, cfg.N, cfg.S, d_ext.delta_S)
            entry["bounds"] = {k: _finite(v) for k, v in rep.to_dict().items()}
        else:
            entry["bounds"] = None
        entries.append(entry)
    return {"config": asdict(cfg), "family_generators": list(family.generators), "results": entries}


def _git_describe() -> str:
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            capture_output=True,
            text=True,
            timeout=10,
            cwd=Path(__file__).resolve().parent,
        )
        return out.stdout.strip() or "unknown"
    except (OSError, subprocess.SubprocessError):
        return "unknown"


def write_manifest(path, config: dict, seed, wall_time: float, extra: Optional[dict] = None) -> dict:
    manifest = {
        "config_hash": config_hash(config),
        "seed": seed,
        "git_describe": _git_describe(),
        "wall_time": wall_time,
        "csv_schema": CSV_VERSION,
    }
    if extra:
        manifest.update(extra)
    Path(path).write_text(json.dumps(manifest, indent=2))
    return manifest

