"""
Zero-forcing precoding, post-processing SNR, sum rate and channel diagnostics.

The multiuser channel ``H`` is ``n_BS x (L_U K)`` with one column per
user antenna; the users see ``H^H x``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError, SelectionInfeasibleError, SingularChannelError
from .numerics import as_matrix, hermitian, hpd_inverse, pseudo_inverse, singular_values

__all__ = [
    "DropResult",
    "zf_precoder",
    "post_snr",
    "sum_rate",
    "condition_metric",
    "hardening_metric",
    "evaluate_selection",
    "greedy_select_users",
    "exhaustive_best_rate",
]


@dataclass(frozen=True)
class DropResult:
    """Metrics of one drop.

    ``feasible=False`` marks a drop whose channel was rank deficient; its
    metric fields are then empty/NaN and ``reason`` explains why.
    """

    drop_index: int
    feasible: bool
    per_user_snr: tuple = ()
    sum_rate: float = float("nan")
    sum_rate_shannon: float = float("nan")
    sum_rate_literal: float = float("nan")
    condition_number: float = float("nan")
    hardening_ratio: float = float("nan")
    selected_users: tuple = ()
    reason: str = ""
    extra: dict = field(default_factory=dict, compare=False)

    @classmethod
    def infeasible(cls, drop_index: int, reason: str) -> "DropResult":
        return cls(drop_index=drop_index, feasible=False, reason=reason)

    def metric(self, name: str):
        """Value(s) of a named report metric."""
        if name == "sum_rate":
            return self.sum_rate
        if name == "sum_rate_shannon":
            return self.sum_rate_shannon
        if name == "sum_rate_literal":
            return self.sum_rate_literal
        if name == "condition":
            return self.condition_number
        if name == "hardening":
            return self.hardening_ratio
        if name == "per_user_snr":
            return list(self.per_user_snr)
        raise InvalidArgumentError(f"unknown metric {name!r}")


def zf_precoder(h) -> np.ndarray:
    """Transmit zero-forcing matrix ``F = H (H^H H)^{-1}``.

    `F` is the Hermitian transpose of ``pinv(H)``, so ``H^H F = I`` and the
    squared norm of column ``i`` is ``[(H^H H)^{-1}]_{ii}``.
    """
    return hermitian(pseudo_inverse(h))


def post_snr(h, total_power_over_noise: float, num_selected: int) -> np.ndarray:
    """Per-column SNR after zero forcing with equal power per user.

    ``SNR_i = rho / (L_U [(H^H H)^{-1}]_{ii})`` where ``rho = P / N0``.
    """
    if not total_power_over_noise > 0:
        raise InvalidArgumentError("P/N0 must be > 0")
    if num_selected < 1:
        raise InvalidArgumentError("num_selected must be >= 1")
    h = as_matrix(h)
    if h.shape[1] > h.shape[0]:
        raise SingularChannelError(f"more streams than BS antennas: {h.shape}")
    gram = hermitian(h) @ h
    diag = np.real(np.diag(hpd_inverse(gram)))
    if np.any(~(diag > 0)) or not np.all(np.isfinite(diag)):
        raise SingularChannelError("inverse Gram matrix has non-positive diagonal")
    return total_power_over_noise / (num_selected * diag)


def sum_rate(snrs, mode: str = "shannon") -> float:
    """Sum of per-stream rates in bit/s/Hz.

    ``"shannon"`` uses ``log2(1 + SNR)``; ``"paper_literal"`` uses ``log2(SNR)``,
    which goes negative for SNR below one.
    """
    snrs = np.asarray(snrs, dtype=float)
    if snrs.size == 0:
        raise InvalidArgumentError("need at least one SNR")
    if np.any(~(snrs > 0)):
        raise InvalidArgumentError("SNRs must be positive")
    if mode == "shannon":
        return float(np.sum(np.log2(1.0 + snrs)))
    if mode == "paper_literal":
        return float(np.sum(np.log2(snrs)))
    raise InvalidArgumentError(f"unknown rate mode {mode!r}")


def condition_metric(h) -> float:
    """``sigma_min / sigma_max`` of `h`; 1 is perfectly conditioned, 0 singular."""
    s = singular_values(h)
    if s[0] == 0.0:
        raise InvalidArgumentError("condition metric of an all-zero matrix is undefined")
    return float(s[-1] / s[0])


def hardening_metric(h) -> float:
    """Frobenius norm of the off-diagonal of ``H^H H`` over that of its diagonal."""
    h = as_matrix(h)
    gram = hermitian(h) @ h
    diag = np.diag(gram)
    diag_norm = np.linalg.norm(diag)
    if diag_norm == 0.0:
        raise InvalidArgumentError("hardening metric needs a non-zero diagonal")
    off_norm = np.sqrt(max(np.linalg.norm(gram) ** 2 - diag_norm**2, 0.0))
    return float(off_norm / diag_norm)


def _shannon_rate(blocks, users, rho: float) -> float:
    """Shannon sum rate of a user subset, ``-inf`` when zero forcing is infeasible."""
    h = np.hstack([blocks[u] for u in users])
    try:
        pinv = pseudo_inverse(h)
    except (SingularChannelError, InvalidArgumentError):
        return float("-inf")
    diag = np.sum(np.abs(pinv) ** 2, axis=1)
    return float(np.sum(np.log2(1.0 + rho / (len(users) * diag))))


def evaluate_selection(per_user_channels, users, total_power_over_noise: float, rate_mode: str = "shannon",
                       drop_index: int = 0) -> DropResult:
    """All metrics for the given subset of users.

    Raises
    ------
    SingularChannelError
        If the concatenated channel of `users` is rank deficient.
    """
    users = tuple(int(u) for u in users)
    if not users or len(set(users)) != len(users):
        raise InvalidArgumentError(f"selected users must be non-empty and distinct, got {users}")
    h = np.hstack([as_matrix(per_user_channels[u]) for u in users])
    # rank check first so singular drops fail on the same threshold everywhere
    pseudo_inverse(h)
    snr = post_snr(h, total_power_over_noise, len(users))
    shannon = sum_rate(snr, "shannon")
    literal = sum_rate(snr, "paper_literal")
    return DropResult(
        drop_index=drop_index,
        feasible=True,
        per_user_snr=tuple(float(x) for x in snr),
        sum_rate=shannon if rate_mode == "shannon" else literal,
        sum_rate_shannon=shannon,
        sum_rate_literal=literal,
        condition_number=condition_metric(h),
        hardening_ratio=hardening_metric(h),
        selected_users=users,
    )


def greedy_select_users(per_user_channels, total_power_over_noise: float, max_users: int,
                        direction: str = "incremental", rate_mode: str = "shannon",
                        drop_index: int = 0) -> tuple[tuple, DropResult]:
    """Greedy user selection on the zero-forcing Shannon sum rate.

    Incremental selection adds, one at a time, the user giving the largest
    sum rate and stops when no addition improves it or `max_users` is
    reached. Decremental selection starts from all users and removes the user
    whose removal helps most; it keeps removing while above `max_users`, even
    if that lowers the rate. Ties go to the lowest index.

    Returns
    -------
    selected : tuple of int
        Selected user indices in ascending order.
    result : DropResult
        Metrics evaluated on the selected subset.
    """
    blocks = [as_matrix(c) for c in per_user_channels]
    n = len(blocks)
    if n == 0:
        raise InvalidArgumentError("need at least one user")
    if max_users < 1:
        raise InvalidArgumentError("max_users must be >= 1")
    rho = total_power_over_noise
    if all(_shannon_rate(blocks, (u,), rho) == float("-inf") for u in range(n)):
        raise SelectionInfeasibleError("every single-user channel is rank deficient")

    if direction == "incremental":
        selected: list = []
        current = float("-inf")
        while len(selected) < min(max_users, n):
            best_user, best_rate = None, float("-inf")
            for u in range(n):
                if u in selected:
                    continue
                rate = _shannon_rate(blocks, sorted(selected + [u]), rho)
                if rate > best_rate:
                    best_user, best_rate = u, rate
            if best_user is None or not best_rate > current:
                break
            selected.append(best_user)
            current = best_rate
    elif direction == "decremental":
        selected = list(range(n))
        current = _shannon_rate(blocks, selected, rho)
        while len(selected) > 1:
            rates = [_shannon_rate(blocks, [v for v in selected if v != u], rho) for u in selected]
            # on ties drop the highest index so the lowest one stays
            best = len(rates) - 1 - int(np.argmax(rates[::-1]))
            best_user, best_rate = selected[best], rates[best]
            must_drop = len(selected) > max_users or current == float("-inf")
            if not (must_drop or best_rate > current):
                break
            selected.remove(best_user)
            current = best_rate
        if current == float("-inf"):
            raise SelectionInfeasibleError("decremental selection found no feasible subset")
    else:
        raise InvalidArgumentError(f"direction must be 'incremental' or 'decremental', got {direction!r}")

    selected_t = tuple(sorted(selected))
    return selected_t, evaluate_selection(blocks, selected_t, rho, rate_mode, drop_index)


def exhaustive_best_rate(per_user_channels, total_power_over_noise: float) -> tuple[tuple, float]:
    """Best Shannon sum rate over every non-empty user subset (brute force)."""
    blocks = [as_matrix(c) for c in per_user_channels]
    best, best_rate = (), float("-inf")
    for size in range(1, len(blocks) + 1):
        for users in itertools.combinations(range(len(blocks)), size):
            rate = _shannon_rate(blocks, users, total_power_over_noise)
            if rate > best_rate:
                best, best_rate = users, rate
    return best, best_rate
