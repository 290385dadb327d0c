"""Numerical and structural observability tests for the networked pair."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import block_diag

from .linalg import TOL, as_matrix, as_square
from .model import LtiSystem, SensorNetwork, is_strongly_connected


@dataclass(frozen=True)
class ObservabilityReport:
    rank: int
    required: int
    observable: bool
    method: str
    smallest_singular_values: tuple = ()


def observability_matrix(a, c) -> np.ndarray:
    """Stack ``[C; CA; ...; CA^(d-1)]``."""
    a = as_square(a, "a")
    c = as_matrix(c, "c")
    rows = [c]
    for _ in range(a.shape[0] - 1):
        rows.append(rows[-1] @ a)
    return np.vstack(rows)


def kalman_rank_test(a, c) -> ObservabilityReport:
    """Rank of the observability matrix with threshold ``d * eps * sigma_max``."""
    a = as_square(a, "a")
    c = as_matrix(c, "c")
    if c.shape[1] != a.shape[0]:
        raise ValueError(f"c has {c.shape[1]} columns, a is {a.shape[0]} square")
    d = a.shape[0]
    obs = observability_matrix(a, c)
    sv = np.linalg.svd(obs, compute_uv=False)
    thresh = d * np.finfo(float).eps * (sv[0] if sv.size else 0.0)
    rank = int(np.sum(sv > thresh))
    tail = tuple(float(s) for s in np.sort(np.concatenate([sv, np.zeros(max(0, d - sv.size))]))[:2])
    return ObservabilityReport(rank, d, rank == d, "kalman_rank", tail)


def output_matrix(c_rows) -> np.ndarray:
    """``D_C = blockdiag(C_1, ..., C_N)``, shape ``N x Nn``."""
    c = as_matrix(c_rows, "c_rows")
    return block_diag(*[row[None, :] for row in c])


def dbar_c(c_rows) -> np.ndarray:
    """``D_C^T D_C``; block-diagonal with rank-one blocks ``C_i^T C_i``."""
    dc = output_matrix(c_rows)
    return dc.T @ dc


def networked_pair(net: SensorNetwork, sys: LtiSystem):
    return np.kron(net.p, sys.a), dbar_c(sys.c_rows)


def is_structurally_observable_networked(net: SensorNetwork, sys: LtiSystem):
    """Sufficient conditions for distributed observability of ``(P kron A, D_C^T D_C)``.

    Returns ``(ok, reasons)`` where ``reasons`` lists every failed condition.
    """
    reasons = []
    if net.n_sensors != sys.n_sensors:
        reasons.append(f"{net.n_sensors} sensors in network but {sys.n_sensors} output rows")
    if not is_strongly_connected(net):
        reasons.append("not strongly connected")
    if not net.self_damped:
        missing = [int(i) for i in np.flatnonzero(np.diag(net.p) <= 0)]
        reasons.append(f"not self-damped: p_ii = 0 at sensors {missing}")
    if not kalman_rank_test(sys.a, sys.c_rows).observable:
        reasons.append("(A, C) not observable")
    if abs(np.linalg.det(sys.a)) <= TOL.det:
        reasons.append("A is rank deficient")
    return not reasons, reasons


def local_observability_check(net: SensorNetwork, sys: LtiSystem, sensor: int) -> ObservabilityReport:
    """Kalman test of ``A`` against the outputs of ``sensor`` and its in-neighbors."""
    if not 0 <= sensor < net.n_sensors:
        raise IndexError(f"sensor {sensor} out of range")
    members = sorted(set(net.in_neighbors(sensor)) | {sensor})
    return kalman_rank_test(sys.a, sys.c_rows[members])
