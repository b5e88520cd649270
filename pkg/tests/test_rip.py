import itertools
import math

import numpy as np
import pytest

from segcs.errors import BudgetError, DimensionError
from segcs.permutations import build_family
from segcs.rip import (
    null_space_containment,
    partition_extended,
    partition_sizes,
    restricted_isometry_constant,
    rip_probability_bounds,
)
from segcs.sampler import extend_matrix
from segcs.sensing import generate_measurement_matrix


def svd_delta(A, S, K_norm):
    """Brute-force isometry constant from singular values of every column subset."""
    K, N = A.shape
    worst = 0.0
    for T in itertools.combinations(range(N), S):
        s = np.linalg.svd(A[:, T], compute_uv=False)
        s_min = s[-1] if S <= K else 0.0
        worst = max(worst, N / K_norm * s[0] ** 2 - 1, 1 - N / K_norm * s_min**2)
    return worst


def make_pair(K, N, M, K_a, seed, ensemble="gaussian"):
    phi = generate_measurement_matrix(K, N, ensemble, seed=seed)
    fam = build_family(K, M, max(1, -(-K_a // K)))
    return phi, extend_matrix(phi, fam, K_a)


@pytest.mark.parametrize("seed", range(3))
@pytest.mark.parametrize("S", [1, 2, 3])
def test_exhaustive_matches_svd_sweep(seed, S):
    phi, ext = make_pair(8, 16, 4, 8, seed)
    est = restricted_isometry_constant(phi, S)
    assert est.subsets_checked == math.comb(16, S)
    assert est.delta_S == pytest.approx(svd_delta(phi.entries, S, 8), abs=1e-10)
    est_e = restricted_isometry_constant(ext, S)
    assert est_e.K_norm == 16
    assert est_e.delta_S == pytest.approx(svd_delta(ext.entries, S, 16), abs=1e-10)


def test_worst_subset_attains_estimate():
    phi, _ = make_pair(6, 12, 3, 0, 4)
    est = restricted_isometry_constant(phi, 2)
    sv = np.linalg.svd(phi.entries[:, list(est.worst_subset)], compute_uv=False)
    assert max(12 / 6 * sv[0] ** 2 - 1, 1 - 12 / 6 * sv[-1] ** 2) == pytest.approx(est.delta_S, abs=1e-12)


def test_single_column_closed_form():
    phi, _ = make_pair(8, 24, 4, 0, 1)
    a = phi.entries
    expected = np.max(np.abs(24 / 8 * (a**2).sum(axis=0) - 1))
    assert restricted_isometry_constant(phi, 1).delta_S == pytest.approx(expected, abs=1e-12)


def test_more_columns_than_rows():
    a = generate_measurement_matrix(2, 6, seed=0).entries
    est = restricted_isometry_constant(a, 3)
    assert est.delta_S >= 1.0
    assert est.delta_S == pytest.approx(svd_delta(a, 3, 2), abs=1e-10)


def test_monte_carlo_is_a_lower_bound():
    phi, _ = make_pair(8, 24, 4, 0, 2)
    exact = restricted_isometry_constant(phi, 2).delta_S
    mc = restricted_isometry_constant(phi, 2, mode="monte_carlo", budget=50, seed=3)
    assert mc.subsets_checked == 50
    assert mc.delta_S <= exact + 1e-12
    full = restricted_isometry_constant(phi, 2, mode="monte_carlo", budget=10**6, seed=3)
    assert full.subsets_checked == math.comb(24, 2)
    assert full.delta_S == pytest.approx(exact, abs=1e-12)


def test_budget_cap():
    with pytest.raises(BudgetError):
        restricted_isometry_constant(np.ones((4, 40)), 5, cap=1000)


@pytest.mark.parametrize("S", [0, 25])
def test_bad_sparsity(S):
    with pytest.raises(DimensionError):
        restricted_isometry_constant(np.ones((4, 24)), S)


def test_unknown_mode():
    with pytest.raises(ValueError):
        restricted_isometry_constant(np.ones((4, 8)), 1, mode="greedy")


@pytest.mark.parametrize("seed", range(4))
def test_delta_is_monotone_in_sparsity(seed):
    _, ext = make_pair(8, 16, 4, 8, seed)
    d = [restricted_isometry_constant(ext, S).delta_S for S in (1, 2, 3)]
    assert d[0] <= d[1] + 1e-12 <= d[2] + 2e-12


def rows_share_subsample(ext, rows):
    seen = set()
    for r in rows:
        for j, src in enumerate(ext.sources[r]):
            if (int(src), j) in seen:
                return True
            seen.add((int(src), j))
    return False


@pytest.mark.parametrize(
    "K,K_a,M",
    [(8, 1, 2), (8, 3, 4), (8, 4, 2), (8, 8, 4), (16, 8, 4), (16, 16, 8), (10, 2, 5), (9, 9, 3)],
)
def test_two_group_halves(K, K_a, M):
    _, ext = make_pair(K, M * 4, M, K_a, 0)
    K_e = K + K_a
    assert min(K, K_a + M - 1) <= -(-K_e // 2)
    plan = partition_extended(ext)
    assert plan.rule == "halves"
    assert plan.sizes == [-(-K_e // 2), K_e // 2]
    assert sorted(plan.sets[0] + plan.sets[1]) == list(range(K_e))
    assert all(plan.independent)
    assert not any(rows_share_subsample(ext, s) for s in plan.sets)


def test_halves_infeasible_falls_back_to_blocks():
    # K_a + M - 1 = 8 > ceil(10 / 2) = 5
    _, ext = make_pair(8, 16, 8, 2, 0)
    plan = partition_extended(ext)
    assert plan.halves_feasible is False
    assert plan.rule == "blocks"
    assert plan.sizes == [8, 2]
    assert all(plan.independent)


@pytest.mark.parametrize("K,K_a,M", [(8, 9, 4), (8, 20, 4), (8, 48, 4), (6, 7, 3), (12, 30, 4)])
def test_multi_set_blocks(K, K_a, M):
    _, ext = make_pair(K, M * 2, M, K_a, 1)
    plan = partition_extended(ext)
    n_p = -(-(K + K_a) // K)
    assert plan.n_p == n_p
    assert plan.sizes == [K] * (n_p - 1) + [K + K_a - (n_p - 1) * K]
    assert plan.sizes == partition_sizes(K, K_a)
    assert all(plan.independent)
    assert not any(rows_share_subsample(ext, s) for s in plan.sets)


def test_rebalance_evens_the_last_two_groups():
    _, ext = make_pair(8, 16, 4, 10, 0)
    plan = partition_extended(ext, rebalance=True)
    assert plan.rebalanced
    assert plan.sizes[-1] == (8 + 2) // 2
    assert sum(plan.sizes) == 18
    assert sorted(itertools.chain(*plan.sets)) == list(range(18))


@pytest.mark.parametrize("K_a,plain,balanced", [(24, [8, 8, 8, 8], [8, 8, 8, 8]), (20, [8, 8, 8, 4], [8, 8, 6, 6])])
def test_worked_partition_examples(K_a, plain, balanced):
    _, ext = make_pair(8, 16, 4, K_a, 0)
    assert partition_extended(ext).sizes == plain
    assert partition_extended(ext, rebalance=True).sizes == balanced


def test_partition_needs_provenance():
    with pytest.raises(TypeError):
        partition_extended(np.ones((4, 4)))


def test_bound_report_values():
    rep = rip_probability_bounds(K=16, K_a=16, M=8, N=128, S=2, delta_S=0.5, c3=0.001)
    C0 = 0.25 / 16 - 0.125 / 48
    assert rep.C0 == pytest.approx(C0)
    assert rep.single_subset == pytest.approx(1 - 2 * 24**2 * math.exp(-C0 * 16))
    assert rep.two_group == pytest.approx(1 - 4 * 24**2 * math.exp(-C0 * 16))
    assert rep.n_p == 2 and rep.K_np == 16
    bracket = 1 + (1 + math.log(24)) / math.log(64)
    assert rep.C4 == pytest.approx(C0 - 0.001 * bracket)
    assert rep.two_group_uniform == pytest.approx(1 - 4 * math.exp(-rep.C4 * 16))
    assert rep.c3_max_C4 == pytest.approx(C0 / bracket)


@pytest.mark.parametrize("d", [0.0, 1.0, -0.2])
def test_bound_report_rejects_delta(d):
    with pytest.raises(ValueError):
        rip_probability_bounds(8, 8, 4, 24, 2, d)


@pytest.mark.parametrize("seed", range(5))
def test_null_space_containment(seed):
    phi, ext = make_pair(16, 128, 8, 16, seed)
    rep = null_space_containment(phi, ext)
    assert rep.containment
    # a complete permuted set sums to the same vector as the original rows,
    # so each full set costs one rank
    assert rep.null_dim_ext == 128 - 32 + 1
    assert rep.null_dim_orig == 128 - 16
    assert rep.rank_deficient


def test_rank_loss_per_full_set():
    phi, ext = make_pair(8, 160, 4, 20, 0)
    ones = np.ones(8)
    for lo in (8, 16):
        np.testing.assert_allclose(ones @ ext.entries[lo:lo + 8], ones @ phi.entries, atol=1e-12)
    phi, ext = make_pair(8, 160, 4, 8, 0)
    assert null_space_containment(phi, ext).null_dim_ext == 160 - 16 + 1
    # rows are sums of K M block vectors
    phi, ext = make_pair(8, 160, 4, 40, 0)
    assert 160 - null_space_containment(phi, ext).null_dim_ext <= 32
    phi, ext = make_pair(8, 48, 4, 5, 0)
    assert not null_space_containment(phi, ext).rank_deficient


def test_null_space_detects_non_containment():
    a = np.eye(3)[:1]
    b = np.eye(3)[1:2]
    assert not null_space_containment(a, b).containment
