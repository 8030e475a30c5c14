import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qdpic.errors import InvalidInputError, SizeGuardError
from qdpic.linalg import (
    as_unitary,
    haar_unitary,
    mode_list,
    permanent_bruteforce,
    permanent_ryser,
    scattering_submatrix,
    unitarity_residual,
)

from conftest import random_complex


def naive_permanent(a):
    # textbook definition, loops only; independent of both library routines
    n = len(a)
    total = 0j
    for perm in itertools.permutations(range(n)):
        prod = 1 + 0j
        for i in range(n):
            prod *= a[i][perm[i]]
        total += prod
    return total


def test_small_permanents_by_hand():
    assert permanent_ryser(np.array([[2.0]])) == pytest.approx(2.0)
    assert permanent_ryser(np.array([[1, 2], [3, 4]])) == pytest.approx(10.0)
    assert permanent_bruteforce(np.ones((3, 3))) == pytest.approx(6.0)
    # the all-ones n x n matrix has permanent n!
    assert permanent_ryser(np.ones((6, 6))) == pytest.approx(720.0)


def test_empty_matrix_rejected():
    with pytest.raises(InvalidInputError):
        permanent_ryser(np.zeros((0, 0)))


@pytest.mark.parametrize("n", range(1, 6))
def test_both_algorithms_match_definition(rng, n):
    a = random_complex(rng, n)
    ref = naive_permanent(a.tolist())
    assert permanent_bruteforce(a) == pytest.approx(ref, rel=1e-12)
    assert permanent_ryser(a) == pytest.approx(ref, rel=1e-12)


def test_bruteforce_size_guard():
    with pytest.raises(SizeGuardError):
        permanent_bruteforce(np.ones((9, 9)))


def test_non_square_rejected():
    with pytest.raises(InvalidInputError):
        permanent_ryser(np.ones((2, 3)))


@settings(max_examples=40, deadline=None)
@given(n=st.integers(1, 6), seed=st.integers(0, 2**32 - 1), data=st.data())
def test_permanent_invariances(n, seed, data):
    r = np.random.default_rng(seed)
    a = random_complex(r, n)
    p = permanent_ryser(a)
    rows = data.draw(st.permutations(range(n)))
    cols = data.draw(st.permutations(range(n)))
    assert permanent_ryser(a[np.ix_(rows, cols)]) == pytest.approx(p, rel=1e-9, abs=1e-12)
    assert permanent_ryser(a.T) == pytest.approx(p, rel=1e-9, abs=1e-12)
    # multilinear in each row
    c = complex(r.normal(), r.normal())
    b = a.copy()
    b[0] *= c
    assert permanent_ryser(b) == pytest.approx(c * p, rel=1e-9, abs=1e-12)


def test_permanent_of_diagonal_and_permutation_matrix(rng):
    d = rng.normal(size=5) + 1j * rng.normal(size=5)
    assert permanent_ryser(np.diag(d)) == pytest.approx(np.prod(d), rel=1e-12)
    perm = np.eye(7)[rng.permutation(7)]
    assert permanent_ryser(perm) == pytest.approx(1.0)


def test_haar_unitary_is_unitary_and_reproducible():
    u = haar_unitary(6, 3)
    assert unitarity_residual(u) < 1e-12
    assert np.array_equal(u, haar_unitary(6, 3))


def test_as_unitary_rejects_non_unitary():
    with pytest.raises(InvalidInputError):
        as_unitary(np.array([[1, 0], [0, 2]]))
    with pytest.raises(InvalidInputError):
        as_unitary(np.ones((2, 3)))


def test_scattering_submatrix_rows_are_outputs():
    sub = scattering_submatrix(np.eye(4), [1, 3], [1, 3])
    assert np.allclose(sub, np.eye(2))
    # modes 1-based, rows picked by output, columns by input; repeats allowed
    m = np.arange(16).reshape(4, 4).astype(complex)
    sub = scattering_submatrix(m, [2, 2], [1, 4])
    assert np.allclose(sub, [[m[0, 1], m[0, 1]], [m[3, 1], m[3, 1]]])


def test_scattering_submatrix_dft_entries_have_modulus_half():
    from qdpic.circuit import dft_unitary

    sub = scattering_submatrix(dft_unitary(4), [1, 3], [2, 4])
    assert np.allclose(np.abs(sub), 0.5)


def test_mode_list_validation():
    assert mode_list([3, 1], 4) == (1, 3)
    with pytest.raises(InvalidInputError):
        mode_list([0, 1], 4)
    with pytest.raises(InvalidInputError):
        mode_list([5], 4)
