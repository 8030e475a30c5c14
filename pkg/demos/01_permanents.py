"""Permanents: the brute-force definition, Ryser's formula, and what they cost."""
import time

import numpy as np

from qdpic.linalg import haar_unitary, permanent_bruteforce, permanent_ryser

rng = np.random.default_rng(0)

# The permanent is the determinant without signs. For the all-ones matrix it is n!.
print("perm(ones(5)) =", permanent_ryser(np.ones((5, 5))).real)

# Both routines agree on random complex matrices
for n in range(1, 9):
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    rel = abs(permanent_ryser(a) - permanent_bruteforce(a)) / abs(permanent_bruteforce(a))
    print(f"n={n}: relative difference {rel:.1e}")

# Brute force is O(n! n); Ryser is O(2^n n). Time both at n = 8.
a = haar_unitary(8, rng)
for fn in (permanent_bruteforce, permanent_ryser):
    t0 = time.perf_counter()
    fn(a)
    print(f"{fn.__name__}: {1e3 * (time.perf_counter() - t0):.1f} ms")

# Ryser keeps going where the brute force refuses
t0 = time.perf_counter()
p = permanent_ryser(haar_unitary(16, rng))
print(f"16x16 Haar permanent |perm| = {abs(p):.3e} in {time.perf_counter() - t0:.2f} s")
