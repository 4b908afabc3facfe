import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_complex
from mmwsim.errors import InvalidArgumentError, SelectionInfeasibleError, SingularChannelError
from mmwsim.precoding import (
    condition_metric,
    evaluate_selection,
    exhaustive_best_rate,
    greedy_select_users,
    hardening_metric,
    post_snr,
    sum_rate,
    zf_precoder,
)


def test_zf_identity():
    np.testing.assert_allclose(zf_precoder(np.eye(4)), np.eye(4), atol=1e-15)


def test_zf_orthogonal_columns():
    h = np.zeros((4, 2), dtype=complex)
    h[0, 0] = 1.0
    h[2, 1] = 2.0j
    f = zf_precoder(h)
    np.testing.assert_allclose(f[:, 0], h[:, 0], atol=1e-15)
    np.testing.assert_allclose(f[:, 1], h[:, 1] / 4, atol=1e-15)
    np.testing.assert_allclose(h.conj().T @ f, np.eye(2), atol=1e-15)


def test_zf_random_zero_interference(rng):
    h = random_complex(rng, 16, 4)
    g = h.conj().T @ zf_precoder(h)
    assert np.max(np.abs(g - np.diag(np.diag(g)))) < 1e-10
    assert np.max(np.abs(np.diag(g) - 1)) < 1e-10
    # column norms equal the inverse Gram diagonal
    np.testing.assert_allclose(
        np.sum(np.abs(zf_precoder(h)) ** 2, axis=0), np.real(np.diag(np.linalg.inv(h.conj().T @ h))), rtol=1e-10
    )


def test_zf_rank_deficient():
    h = np.ones((4, 2))
    with pytest.raises(SingularChannelError):
        zf_precoder(h)


def test_post_snr_examples():
    np.testing.assert_allclose(post_snr(np.eye(2), 1.0, 2), [0.5, 0.5])
    np.testing.assert_allclose(post_snr([[2.0]], 4.0, 1), [16.0])


def test_post_snr_scaling(rng):
    h = random_complex(rng, 8, 3)
    np.testing.assert_allclose(post_snr(2.5 * h, 3.0, 3), 6.25 * post_snr(h, 3.0, 3), rtol=1e-12)


def test_post_snr_errors():
    with pytest.raises(InvalidArgumentError):
        post_snr(np.eye(2), 0.0, 2)
    with pytest.raises(SingularChannelError):
        post_snr(np.ones((3, 2)), 1.0, 2)


def test_post_snr_matches_eq_oracle(rng):
    for _ in range(20):
        h = random_complex(rng, 12, 4)
        rho = 10 ** rng.uniform(-2, 3)
        inv_diag = np.real(np.diag(np.linalg.inv(h.conj().T @ h)))
        np.testing.assert_allclose(post_snr(h, rho, 4) * 4 * inv_diag, rho, rtol=1e-9)


def test_signal_path_power_accounting(rng):
    """Unit-norm ZF beams fed P/L_U each give exactly the closed-form SNRs."""
    h = random_complex(rng, 10, 4)
    p_total, n0 = 7.0, 0.5
    f = zf_precoder(h)
    beams = f / np.linalg.norm(f, axis=0)
    per_user_power = p_total / 4
    effective = h.conj().T @ beams * math.sqrt(per_user_power)
    signal = np.abs(np.diag(effective)) ** 2
    interference = np.sum(np.abs(effective) ** 2, axis=1) - signal
    sinr = signal / (interference + n0)
    np.testing.assert_allclose(sinr, post_snr(h, p_total / n0, 4), rtol=1e-9)
    assert np.max(interference) < 1e-20 * np.max(signal) + 1e-24


def test_sum_rate_modes():
    assert sum_rate([1.0, 1.0], "paper_literal") == 0.0
    assert sum_rate([3.0], "shannon") == 2.0
    assert sum_rate([4.0, 16.0], "paper_literal") == 6.0
    assert sum_rate([0.5], "paper_literal") == -1.0
    with pytest.raises(InvalidArgumentError):
        sum_rate([1.0, 0.0])
    with pytest.raises(InvalidArgumentError):
        sum_rate([])
    with pytest.raises(InvalidArgumentError):
        sum_rate([1.0], "other")


def test_condition_metric_examples(rng):
    q, _ = np.linalg.qr(random_complex(rng, 5, 5))
    assert condition_metric(q) == pytest.approx(1.0, abs=1e-12)
    assert condition_metric(np.diag([1.0, 2.0])) == pytest.approx(0.5)
    v = random_complex(rng, 6, 1)
    assert condition_metric(np.hstack([v, v])) < 1e-10
    with pytest.raises(InvalidArgumentError):
        condition_metric(np.zeros((3, 2)))


def test_hardening_metric_examples(rng):
    assert hardening_metric(np.eye(4)[:, :3]) == 0.0
    v = np.zeros((3, 1))
    v[1] = 1.0
    assert hardening_metric(np.hstack([v, v])) == pytest.approx(1.0)
    h = random_complex(rng, 8, 3)
    assert hardening_metric((0.3 - 2j) * h) == pytest.approx(hardening_metric(h), rel=1e-12)
    with pytest.raises(InvalidArgumentError):
        hardening_metric(np.zeros((3, 2)))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 12), k=st.integers(1, 4))
def test_metrics_unitary_invariance(seed, n, k):
    rng = np.random.default_rng(seed)
    k = min(k, n)
    h = random_complex(rng, n, k)
    q, _ = np.linalg.qr(random_complex(rng, n, n))
    assert condition_metric(q @ h) == pytest.approx(condition_metric(h), rel=1e-9)
    assert hardening_metric(q @ h) == pytest.approx(hardening_metric(h), rel=1e-9, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_zero_interference_property(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(4, 40))
    k = int(rng.integers(1, min(n, 8) + 1))
    h = random_complex(rng, n, k)
    assert np.max(np.abs(h.conj().T @ zf_precoder(h) - np.eye(k))) < 1e-9


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_adding_user_never_raises_incumbent_snr(seed):
    rng = np.random.default_rng(seed)
    h = random_complex(rng, 10, 5)
    rho = 10.0
    # compare pre-power-split SNRs: L_U only rescales, so use L_U = 1 for both
    before = post_snr(h[:, :4], rho, 1)
    after = post_snr(h, rho, 1)[:4]
    assert np.all(after <= before * (1 + 1e-9))


# -- selection -----------------------------------------------------------------

def test_evaluate_selection_fields(rng):
    blocks = [random_complex(rng, 8, 1) for _ in range(3)]
    r = evaluate_selection(blocks, [0, 2], 10.0)
    assert r.feasible and r.selected_users == (0, 2)
    assert len(r.per_user_snr) == 2
    assert r.sum_rate == r.sum_rate_shannon
    assert 0 < r.condition_number <= 1
    with pytest.raises(InvalidArgumentError):
        evaluate_selection(blocks, [1, 1], 10.0)
    literal = evaluate_selection(blocks, [0, 2], 10.0, rate_mode="paper_literal")
    assert literal.sum_rate == literal.sum_rate_literal


def test_greedy_orthogonal_users_all_selected():
    blocks = [np.eye(6)[:, [i]] for i in range(5)]
    for direction in ("incremental", "decremental"):
        selected, result = greedy_select_users(blocks, 1e4, 5, direction)
        assert selected == (0, 1, 2, 3, 4)
        assert result.selected_users == selected


def test_greedy_duplicate_users_pick_lowest_index(rng):
    v = random_complex(rng, 8, 1)
    for direction in ("incremental", "decremental"):
        selected, result = greedy_select_users([v, v.copy()], 100.0, 2, direction)
        assert selected == (0,)
        assert result.feasible


def test_greedy_respects_max_users(rng):
    blocks = [random_complex(rng, 16, 1) for _ in range(6)]
    for direction in ("incremental", "decremental"):
        selected, _ = greedy_select_users(blocks, 1e3, 3, direction)
        assert 1 <= len(selected) <= 3


def test_greedy_infeasible():
    zero = np.zeros((4, 1))
    with pytest.raises(SelectionInfeasibleError):
        greedy_select_users([zero, zero], 1.0, 2)
    with pytest.raises(InvalidArgumentError):
        greedy_select_users([], 1.0, 1)
    with pytest.raises(InvalidArgumentError):
        greedy_select_users([np.ones((2, 1))], 1.0, 1, "sideways")


def test_greedy_never_returns_singular_subset(rng):
    v = random_complex(rng, 6, 1)
    w = random_complex(rng, 6, 1)
    blocks = [v, w, v + w, 2 * v]
    for direction in ("incremental", "decremental"):
        selected, result = greedy_select_users(blocks, 1e3, 4, direction)
        assert result.feasible
        h = np.hstack([blocks[i] for i in selected])
        assert np.linalg.matrix_rank(h) == len(selected)


def _brute_force(blocks, rho):
    best = -np.inf
    for size in range(1, len(blocks) + 1):
        for users in itertools.combinations(range(len(blocks)), size):
            h = np.hstack([blocks[u] for u in users])
            if np.linalg.matrix_rank(h) < h.shape[1]:
                continue
            inv = np.linalg.inv(h.conj().T @ h)
            best = max(best, np.sum(np.log2(1 + rho / (size * np.real(np.diag(inv))))))
    return best


def test_exhaustive_matches_brute_force(rng):
    blocks = [random_complex(rng, 6, 1) for _ in range(5)]
    _, rate = exhaustive_best_rate(blocks, 5.0)
    assert rate == pytest.approx(_brute_force(blocks, 5.0), rel=1e-10)


def test_greedy_within_floor_of_optimum(rng):
    for _ in range(20):
        blocks = [random_complex(rng, 6, 1) for _ in range(5)]
        _, result = greedy_select_users(blocks, 10.0, 5, "incremental")
        assert result.sum_rate_shannon >= 0.85 * _brute_force(blocks, 10.0)
