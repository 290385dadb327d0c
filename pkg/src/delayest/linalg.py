"""Dense real-matrix kernels.

Everything here works on plain ``numpy`` arrays. Eigenvalues come from
LAPACK's balanced Hessenberg/shifted-QR driver (``numpy.linalg.eigvals``);
a LAPACK convergence failure surfaces as :class:`SolverFailure` instead of
a silent NaN.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Tolerances:
    """Shared numerical tolerances for property checks and acceptance tests."""

    abs: float = 1e-10
    rel: float = 1e-8
    stochastic: float = 1e-12
    det: float = 1e-10
    shift_roots: float = 1e-6


TOL = Tolerances()


class SolverFailure(RuntimeError):
    """Raised when the dense eigen-solver does not converge."""


def as_matrix(m, name="matrix") -> np.ndarray:
    """Coerce ``m`` to a 2-D float array and validate it.

    Raises ValueError on empty dimensions or non-finite entries.
    """
    arr = np.array(m, dtype=float, copy=True)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2:
        raise ValueError(f"{name}: expected a 2-D array, got ndim={arr.ndim}")
    if arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ValueError(f"{name}: dimensions must be positive, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name}: entries must be finite")
    return arr


def as_square(m, name="matrix") -> np.ndarray:
    arr = as_matrix(m, name)
    if arr.shape[0] != arr.shape[1]:
        raise ValueError(f"{name}: expected a square matrix, got {arr.shape}")
    return arr


def kron(a, b) -> np.ndarray:
    """Kronecker product; block (i, j) of the result is ``a[i, j] * b``."""
    return np.kron(as_matrix(a, "a"), as_matrix(b, "b"))


@dataclass(frozen=True)
class SpectrumResult:
    eigenvalues: np.ndarray
    spectral_radius: float = field(init=False)

    def __post_init__(self):
        ev = np.asarray(self.eigenvalues, dtype=complex)
        ev.flags.writeable = False
        object.__setattr__(self, "eigenvalues", ev)
        object.__setattr__(self, "spectral_radius", float(np.max(np.abs(ev))))


def eigenvalues(m) -> SpectrumResult:
    """All eigenvalues of a square matrix, with multiplicity."""
    arr = as_square(m)
    try:
        ev = np.linalg.eigvals(arr)
    except np.linalg.LinAlgError as exc:
        raise SolverFailure(f"eigenvalue iteration did not converge for {arr.shape} matrix") from exc
    if not np.all(np.isfinite(ev)):
        raise SolverFailure("eigen-solver returned non-finite eigenvalues")
    return SpectrumResult(ev)


def spectral_radius(m) -> float:
    return eigenvalues(m).spectral_radius


def matrix_power(m, k: int) -> np.ndarray:
    """``m**k`` by repeated squaring; ``k = 0`` gives the identity."""
    if int(k) != k or k < 0:
        raise ValueError(f"power must be a nonnegative integer, got {k!r}")
    return np.linalg.matrix_power(as_square(m), int(k))


def block_assemble(blocks) -> np.ndarray:
    """Assemble a dense matrix from a grid of blocks.

    ``blocks`` is a list of rows; each entry is an array or ``None`` (a zero
    placeholder). Every block row needs at least one concrete block fixing
    its height, and likewise every block column its width.
    """
    grid = [list(row) for row in blocks]
    if not grid or not grid[0]:
        raise ValueError("block grid must be non-empty")
    ncols = len(grid[0])
    for r, row in enumerate(grid):
        if len(row) != ncols:
            raise ValueError(f"block row {r} has {len(row)} entries, expected {ncols}")

    heights = [None] * len(grid)
    widths = [None] * ncols
    for r, row in enumerate(grid):
        for c, blk in enumerate(row):
            if blk is None:
                continue
            blk = as_matrix(blk, f"block ({r}, {c})")
            grid[r][c] = blk
            h, w = blk.shape
            if heights[r] is None:
                heights[r] = h
            elif heights[r] != h:
                raise ValueError(f"block ({r}, {c}) has height {h}, expected {heights[r]}")
            if widths[c] is None:
                widths[c] = w
            elif widths[c] != w:
                raise ValueError(f"block ({r}, {c}) has width {w}, expected {widths[c]}")
    for r, h in enumerate(heights):
        if h is None:
            raise ValueError(f"block row {r} has no concrete block to fix its height")
    for c, w in enumerate(widths):
        if w is None:
            raise ValueError(f"block column {c} has no concrete block to fix its width")

    out = np.zeros((sum(heights), sum(widths)))
    r0 = 0
    for r, row in enumerate(grid):
        c0 = 0
        for c, blk in enumerate(row):
            if blk is not None:
                out[r0:r0 + heights[r], c0:c0 + widths[c]] = blk
            c0 += widths[c]
        r0 += heights[r]
    return out


def shift_companion(first_row_blocks) -> np.ndarray:
    """Block companion matrix: given first block-row, identity sub-diagonal.

    ``first_row_blocks`` are square blocks of a common size ``m``; the result
    has shape ``(m*L, m*L)`` with ``L = len(first_row_blocks)``.
    """
    first = [as_square(b, f"block {i}") for i, b in enumerate(first_row_blocks)]
    m = first[0].shape[0]
    size = len(first)
    out = np.zeros((m * size, m * size))
    for i, b in enumerate(first):
        if b.shape != (m, m):
            raise ValueError(f"block {i} has shape {b.shape}, expected {(m, m)}")
        out[:m, i * m:(i + 1) * m] = b
    if size > 1:
        out[m:, :-m] = np.eye(m * (size - 1))
    return out


def shift_block_matrix(a_i, n: int, i: int) -> np.ndarray:
    """Shift matrix with a single nonzero block ``a_i`` at block column ``i``.

    ``i`` is 1-based (``1 <= i <= n``); the result is ``nN x nN``.
    """
    a_i = as_square(a_i, "a_i")
    if not 1 <= i <= n:
        raise ValueError(f"need 1 <= i <= n, got i={i}, n={n}")
    zero = np.zeros_like(a_i)
    row = [zero] * n
    row[i - 1] = a_i
    return shift_companion(row)


def match_multisets(x, y) -> float:
    """Largest pairing distance between two equal-size complex multisets.

    Uses an optimal assignment so repeated and clustered values pair up
    correctly.
    """
    from scipy.optimize import linear_sum_assignment

    x = np.asarray(x, dtype=complex).ravel()
    y = np.asarray(y, dtype=complex).ravel()
    if x.size != y.size:
        return float("inf")
    if x.size == 0:
        return 0.0
    cost = np.abs(x[:, None] - y[None, :])
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].max())


@dataclass(frozen=True)
class ShiftRootsReport:
    passed: bool
    max_mismatch: float
    poly_mismatch: float
    tolerance: float
    n: int
    i: int
    block_size: int


def verify_shift_roots(a_i, n: int, i: int, tol: float = TOL.shift_roots) -> ShiftRootsReport:
    """Check the spectrum of :func:`shift_block_matrix` against its predicted roots.

    The prediction is every ``i``-th root of every eigenvalue of ``a_i`` plus
    zero with multiplicity ``N*(n - i)``. Mismatch is measured relative to
    ``max(1, rho)`` since root-finding near clustered eigenvalues loses digits.
    """
    a_i = as_square(a_i, "a_i")
    big = shift_block_matrix(a_i, n, i)
    actual = eigenvalues(big).eigenvalues

    mu = eigenvalues(a_i).eigenvalues
    roots = []
    for m in mu:
        mag = abs(m) ** (1.0 / i)
        ang = np.angle(m)
        roots.extend(mag * np.exp(1j * (ang + 2 * np.pi * np.arange(i)) / i))
    predicted = np.concatenate([np.asarray(roots, dtype=complex),
                                np.zeros(a_i.shape[0] * (n - i), dtype=complex)])
    scale = max(1.0, float(np.max(np.abs(predicted))) if predicted.size else 1.0)
    mismatch = match_multisets(actual, predicted) / scale

    # characteristic polynomial identity, sampled off the spectrum
    size = a_i.shape[0]
    points = 1.5 * scale * np.exp(2j * np.pi * (np.arange(8) + 0.5) / 8)
    poly = 0.0
    for lam in points:
        lhs = np.linalg.det(lam * np.eye(big.shape[0]) - big)
        rhs = lam ** (size * (n - i)) * np.linalg.det(lam ** i * np.eye(size) - a_i)
        poly = max(poly, abs(lhs - rhs) / max(abs(rhs), 1e-300))
    passed = mismatch <= tol and poly <= tol
    return ShiftRootsReport(passed, mismatch, poly, tol, n, i, size)
