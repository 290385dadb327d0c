import numpy as np
import pytest

from delayest.linalg import (SolverFailure, block_assemble, eigenvalues, kron, shift_block_matrix,
                             match_multisets, matrix_power, shift_companion, spectral_radius,
                             verify_shift_roots)


def test_kron_block_layout():
    a = np.array([[1.0, 2.0], [3.0, 4.0]])
    b = np.array([[0.0, 1.0], [1.0, 0.0]])
    k = kron(a, b)
    assert k.shape == (4, 4)
    np.testing.assert_array_equal(k[2:, :2], 3.0 * b)
    np.testing.assert_array_equal(k[:2, 2:], 2.0 * b)


def test_kron_spectrum_is_pairwise_products():
    # P has eigenvalues 1 and 1/4, A has 2 and 3
    p = np.array([[0.5, 0.5], [0.25, 0.75]])
    a = np.diag([2.0, 3.0])
    ev = eigenvalues(kron(p, a)).eigenvalues
    assert match_multisets(ev, [2.0, 3.0, 0.5, 0.75]) < 1e-12


def test_spectral_radius_of_companion():
    # lambda^3 - 0.8 has three roots of modulus 0.8**(1/3)
    comp = shift_companion([np.zeros((1, 1)), np.zeros((1, 1)), np.array([[0.8]])])
    assert spectral_radius(comp) == pytest.approx(0.9283177667225558, abs=1e-12)


def test_spectral_radius_of_rotation():
    theta = 0.3
    r = 0.9 * np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
    assert spectral_radius(r) == pytest.approx(0.9, abs=1e-14)


def test_eigenvalues_reject_bad_input():
    with pytest.raises(ValueError):
        eigenvalues(np.ones((2, 3)))
    with pytest.raises(ValueError):
        eigenvalues([[np.nan]])
    with pytest.raises(ValueError):
        eigenvalues(np.zeros((0, 0)))


def test_solver_failure_is_runtime_error():
    assert issubclass(SolverFailure, RuntimeError)


def test_matrix_power():
    a = np.array([[1.0, 1.0], [0.0, 1.0]])
    np.testing.assert_array_equal(matrix_power(a, 5), [[1.0, 5.0], [0.0, 1.0]])
    np.testing.assert_array_equal(matrix_power(a, 0), np.eye(2))
    with pytest.raises(ValueError):
        matrix_power(a, -1)


def test_block_assemble_with_placeholders():
    out = block_assemble([[np.ones((1, 2)), None], [None, 2 * np.ones((2, 1))]])
    np.testing.assert_array_equal(out, [[1, 1, 0], [0, 0, 2], [0, 0, 2]])


def test_block_assemble_names_the_bad_block():
    with pytest.raises(ValueError, match=r"block \(1, 0\)"):
        block_assemble([[np.ones((1, 1)), np.ones((1, 1))], [np.ones((2, 2)), np.ones((1, 1))]])
    with pytest.raises(ValueError, match="block column 1"):
        block_assemble([[np.ones((1, 1)), None]])


def test_shift_companion_layout():
    blocks = [np.full((2, 2), float(r)) for r in range(3)]
    m = shift_companion(blocks)
    assert m.shape == (6, 6)
    np.testing.assert_array_equal(m[:2, 4:], 2.0)
    np.testing.assert_array_equal(m[2:, :4], np.eye(4))
    np.testing.assert_array_equal(m[2:, 4:], 0.0)


def test_shift_block_matrix_places_single_block():
    m = shift_block_matrix(np.array([[0.25]]), 3, 2)
    np.testing.assert_array_equal(m[0], [0.0, 0.25, 0.0])
    with pytest.raises(ValueError):
        shift_block_matrix(np.eye(2), 2, 3)


def test_shift_roots_scalar_example():
    # x^2 = 1/4 on top of a zero: eigenvalues +-1/2
    ev = eigenvalues(shift_block_matrix(np.array([[0.25]]), 2, 2)).eigenvalues
    assert match_multisets(ev, [0.5, -0.5]) < 1e-14


def test_shift_roots_with_trailing_zeros():
    # n=3, i=1: roots of A itself plus zeros of multiplicity N*(n-i)
    a = np.array([[0.0, 1.0], [-0.5, 0.3]])
    rep = verify_shift_roots(a, 3, 1)
    assert rep.passed
    ev = eigenvalues(shift_block_matrix(a, 3, 1)).eigenvalues
    assert np.sum(np.abs(ev) < 1e-6) == 4


def test_verify_shift_roots_complex_block():
    rep = verify_shift_roots(np.array([[0.2, -0.9], [0.9, 0.2]]), 4, 3)
    assert rep.passed and rep.max_mismatch < 1e-12 and rep.poly_mismatch < 1e-10


def test_match_multisets_pairs_duplicates():
    assert match_multisets([1, 1, 2], [2, 1, 1]) == 0.0
    assert match_multisets([1, 1, 2], [1, 2, 2]) == pytest.approx(1.0)
    assert match_multisets([1], [1, 2]) == float("inf")
