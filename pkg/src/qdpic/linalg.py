"""Complex-matrix primitives and matrix permanents.

Mode indices in the public API are 1-based, matching how optical modes are
labelled on the chip. Matrices are plain ``numpy`` arrays; the ``as_*``
helpers validate and return read-only complex copies.
"""
from __future__ import annotations

import itertools
from functools import lru_cache
from typing import Sequence

import numpy as np

from .errors import InvalidInputError, SizeGuardError

UNITARY_TOL = 1e-10
BRUTEFORCE_MAX_N = 8


def as_complex_matrix(a) -> np.ndarray:
    m = np.array(a, dtype=complex)
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise InvalidInputError(f"expected a non-empty 2-D matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise InvalidInputError("matrix has non-finite entries")
    m.setflags(write=False)
    return m


def unitarity_residual(a) -> float:
    """Max absolute entry of U^dagger U - I."""
    u = np.asarray(a, dtype=complex)
    return float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[1]))))


def as_unitary(a, tol: float = UNITARY_TOL) -> np.ndarray:
    u = as_complex_matrix(a)
    if u.shape[0] != u.shape[1]:
        raise InvalidInputError(f"unitary must be square, got shape {u.shape}")
    res = unitarity_residual(u)
    if res > tol:
        raise InvalidInputError(f"matrix is not unitary: max |U^dag U - I| = {res:.3e} > {tol:.1e}")
    return u


def _square(a) -> np.ndarray:
    m = as_complex_matrix(a)
    if m.shape[0] != m.shape[1]:
        raise InvalidInputError(f"permanent needs a square matrix, got shape {m.shape}")
    return m


@lru_cache(maxsize=None)
def _permutations(n: int) -> np.ndarray:
    return np.array(list(itertools.permutations(range(n))), dtype=np.intp).reshape(-1, n)


def permanent_bruteforce(a) -> complex:
    """Permanent as the Leibniz-style sum over all n! permutations.

    Exists as an oracle for :func:`permanent_ryser`; refuses n > 8.
    """
    m = _square(a)
    n = m.shape[0]
    if n > BRUTEFORCE_MAX_N:
        raise SizeGuardError(f"brute-force permanent limited to n <= {BRUTEFORCE_MAX_N}, got {n}")
    perms = _permutations(n)
    return complex(m[np.arange(n), perms].prod(axis=1).sum())


def permanent_ryser(a) -> complex:
    """Permanent via Ryser's inclusion-exclusion formula.

    Column subsets are visited in Gray-code order so each step updates the
    row sums by adding or removing a single column, giving O(2^n n) work.
    """
    m = _square(a)
    n = m.shape[0]
    row_sums = np.zeros(n, dtype=complex)
    total = 0j
    in_subset = np.zeros(n, dtype=bool)
    size = 0
    for k in range(1, 2**n):
        # column to flip = index of lowest set bit of k
        j = (k & -k).bit_length() - 1
        if in_subset[j]:
            row_sums -= m[:, j]
            size -= 1
        else:
            row_sums += m[:, j]
            size += 1
        in_subset[j] = not in_subset[j]
        total += (-1) ** size * np.prod(row_sums)
    return complex((-1) ** n * total)


permanent = permanent_ryser


def mode_list(modes: Sequence[int] | object, num_modes: int | None = None) -> tuple[int, ...]:
    """Canonical nondecreasing 1-based mode-assignment tuple.

    Accepts a sequence of mode labels or anything with a ``modes`` attribute
    (e.g. :class:`qdpic.interference.PhotonConfig`).
    """
    if hasattr(modes, "modes"):
        modes = modes.modes
    out = tuple(sorted(int(x) for x in modes))
    if num_modes is not None:
        for x in out:
            if not 1 <= x <= num_modes:
                raise InvalidInputError(f"mode {x} outside 1..{num_modes}")
    return out


def scattering_submatrix(u, input_modes, output_modes) -> np.ndarray:
    """Rows picked by the output modes, columns by the input modes.

    Entry (k, l) is ``U[d_k, s_l]`` where ``d`` and ``s`` are the canonical
    (sorted, repeated per occupation) mode-assignment lists.
    """
    u = np.asarray(u, dtype=complex)
    m = u.shape[0]
    s = mode_list(input_modes, m)
    d = mode_list(output_modes, m)
    if len(s) != len(d):
        raise InvalidInputError(f"photon number mismatch: {len(s)} in, {len(d)} out")
    sub = u[np.ix_(np.array(d, dtype=np.intp) - 1, np.array(s, dtype=np.intp) - 1)]
    return as_complex_matrix(sub) if sub.size else sub


def haar_unitary(m: int, rng: np.random.Generator | int | None = None) -> np.ndarray:
    """Haar-random m x m unitary (QR of a Ginibre matrix with phase fix)."""
    rng = np.random.default_rng(rng)
    z = (rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))
