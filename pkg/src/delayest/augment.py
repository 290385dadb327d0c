"""Delay-augmented operators.

With a delay bound ``tau_bar`` the history ``(z_k; z_{k-1}; ...; z_{k-tau_bar})``
evolves by a block companion matrix whose first block-row carries the weights
split by link delay, and whose sub-diagonal is an identity shift register.
Slots are 0-based: slot 0 is the newest slice.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import TOL, as_square, matrix_power, shift_companion, spectral_radius
from .model import DelayProfile, full_delay_profile


@dataclass(frozen=True)
class AugmentedOperator:
    base_dim: int
    tau_bar: int
    matrix: np.ndarray
    kind: str  # "plain" or "modified_kron"

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.shape != (self.base_dim * (self.tau_bar + 1),) * 2:
            raise ValueError(f"augmented matrix has shape {m.shape}, "
                             f"expected {self.base_dim * (self.tau_bar + 1)} square")
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)

    def first_row_block(self, r: int) -> np.ndarray:
        d = self.base_dim
        return self.matrix[:d, r * d:(r + 1) * d]


def split_by_delay(p, delays: DelayProfile) -> list[np.ndarray]:
    """Split ``p`` into ``P_0 .. P_tau_bar`` so that ``P_r`` keeps the entries delayed by ``r``."""
    p = as_square(p, "p")
    size = p.shape[0]
    parts = [np.zeros_like(p) for _ in range(delays.tau_bar + 1)]
    for i in range(size):
        for j in range(size):
            if p[i, j] == 0.0:
                continue
            if i != j and (i, j) not in delays.tau:
                raise KeyError(f"no delay recorded for link {j} -> {i} (entry ({i}, {j}))")
            parts[delays.delay(i, j)][i, j] = p[i, j]
    return parts


def build_augmented(p, delays: DelayProfile) -> AugmentedOperator:
    parts = split_by_delay(p, delays)
    return AugmentedOperator(parts[0].shape[0], delays.tau_bar, shift_companion(parts), "plain")


def build_augmented_pa(p, a, delays: DelayProfile) -> AugmentedOperator:
    """First block-row ``[P_0 kron A, P_1 kron A^2, ..., P_tau_bar kron A^(tau_bar+1)]``."""
    a = as_square(a, "a")
    parts = split_by_delay(p, delays)
    blocks = [np.kron(pr, matrix_power(a, r + 1)) for r, pr in enumerate(parts)]
    return AugmentedOperator(blocks[0].shape[0], delays.tau_bar, shift_companion(blocks),
                             "modified_kron")


def unit_vector(slot: int, length: int) -> np.ndarray:
    if not 0 <= slot < length:
        raise IndexError(f"slot {slot} out of range for {length} slots")
    e = np.zeros((length, 1))
    e[slot, 0] = 1.0
    return e


def selector(slot: int, slice_dim: int, tau_bar: int) -> np.ndarray:
    """Materialized selection matrix ``(e_slot kron I_m)^T`` of shape ``m x m(tau_bar+1)``."""
    return np.kron(unit_vector(slot, tau_bar + 1), np.eye(slice_dim)).T


def select_slice(v, slot: int, slice_dim: int) -> np.ndarray:
    v = np.asarray(v)
    slots = v.shape[0] // slice_dim
    if slots * slice_dim != v.shape[0]:
        raise ValueError(f"vector length {v.shape[0]} is not a multiple of {slice_dim}")
    if not 0 <= slot < slots:
        raise IndexError(f"slot {slot} out of range for {slots} slots")
    return v[slot * slice_dim:(slot + 1) * slice_dim]


def stack_history(slices) -> np.ndarray:
    """Stack slices newest first into one augmented vector."""
    return np.concatenate([np.ravel(s) for s in slices])


@dataclass(frozen=True)
class DelayRootsReport:
    passed: bool
    rho_base: float
    rho_augmented: float
    bound: float
    homogeneous: bool


def verify_delay_roots(a, delays) -> DelayRootsReport:
    """Compare the spectral radius of the augmented ``a`` with ``rho(a)^(1/(tau_bar+1))``.

    ``delays`` is a :class:`DelayProfile` over the entries of ``a`` or an int
    ``r`` that delays every entry (diagonal included) by ``r``. When every
    nonzero entry carries the full delay the bound must hold with equality,
    otherwise only the inequality is checked. The inequality is guaranteed for nonnegative ``a``; signed
    matrices can violate it.
    """
    a = as_square(a, "a")
    rho_a = spectral_radius(a)
    if rho_a >= 1:
        raise ValueError(f"need rho(a) < 1, got {rho_a}")
    if isinstance(delays, (int, np.integer)):
        profile = full_delay_profile(a.shape[0], int(delays))
    else:
        profile = delays
    homogeneous = all(profile.delay(int(i), int(j)) == profile.tau_bar
                      for i, j in zip(*np.nonzero(a)))
    rho_bar = spectral_radius(build_augmented(a, profile).matrix)
    bound = rho_a ** (1.0 / (profile.tau_bar + 1))
    if homogeneous:
        ok = abs(rho_bar - bound) <= TOL.rel
    else:
        ok = rho_bar <= bound + TOL.rel
    return DelayRootsReport(bool(ok), rho_a, rho_bar, bound, homogeneous)
