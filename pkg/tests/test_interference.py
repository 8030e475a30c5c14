import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qdpic.circuit import dft_unitary, mzi_unitary
from qdpic.errors import InvalidInputError
from qdpic.interference import (
    GramMatrix,
    PhotonConfig,
    Suppression,
    distribution_from_csv,
    distribution_to_csv,
    full_distribution,
    is_cyclic,
    mzi_fringe,
    output_coherence,
    output_configs,
    output_probability,
    suppression_predicate,
)
from qdpic.linalg import haar_unitary


def first_quantized_distribution(u, input_modes, gram):
    """Output probabilities from an explicit symmetrized n-particle wavefunction.

    Photon j carries internal vector psi_j with <psi_k|psi_j> = gram[j, k]
    (gram[a, b] pairs photon a in the ket with photon b in the bra).
    The (unnormalized) bosonic state is the sum over particle permutations of
    product states; after applying u to each particle's path we trace out the
    internal degrees and sum over orderings of each output multiset.
    """
    m = u.shape[0]
    n = len(input_modes)
    w, vecs = np.linalg.eigh(gram)
    psi = vecs * np.sqrt(np.clip(w, 0, None))  # rows psi_j: psi_k^dag psi_j = gram[j, k]
    single = [np.kron(u[:, mode - 1], psi[j]) for j, mode in enumerate(input_modes)]
    state = 0
    for perm in itertools.permutations(range(n)):
        term = single[perm[0]]
        for k in perm[1:]:
            term = np.multiply.outer(term, single[k])
        state = state + term
    d = psi.shape[1]
    probs = np.abs(state.reshape((m, d) * n)) ** 2
    probs = probs.sum(axis=tuple(range(1, 2 * n, 2)))
    probs /= probs.sum()
    out = {}
    for c in itertools.combinations_with_replacement(range(1, m + 1), n):
        out[c] = sum(probs[tuple(x - 1 for x in o)] for o in set(itertools.permutations(c)))
    return out


def random_gram(rng, n):
    vecs = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    vecs /= np.linalg.norm(vecs, axis=1, keepdims=True)
    return vecs.conj() @ vecs.T  # gram[j, k] = <v_j | v_k>


# -- configurations ---------------------------------------------------------------------


def test_photon_config_basics():
    c = PhotonConfig.from_modes([3, 1, 3], 4)
    assert c.occupations == (1, 0, 2, 0)
    assert c.modes == (1, 3, 3)
    assert c.label == "1,3,3"
    assert c.num_photons == 3
    assert not c.collision_free
    assert PhotonConfig.parse("1,3,3", 4) == c
    with pytest.raises(InvalidInputError):
        PhotonConfig.parse("1,5", 4)
    with pytest.raises(InvalidInputError):
        PhotonConfig((1, -1))


def test_output_config_counts():
    assert len(output_configs(4, 2)) == 10
    assert len(output_configs(4, 2, collision_free=True)) == 6
    assert len(output_configs(6, 3)) == math.comb(8, 3)


# -- Gram matrix ------------------------------------------------------------------------


def test_gram_constructors_and_validation():
    assert np.allclose(GramMatrix.ideal(3).overlaps, 1)
    assert np.allclose(GramMatrix.distinguishable(3).overlaps, np.eye(3))
    u = GramMatrix.uniform(2, 0.81).overlaps
    assert u[0, 1] == pytest.approx(0.9)
    with pytest.raises(InvalidInputError):
        GramMatrix(np.array([[1, 0.5], [0.4, 1]]))  # not Hermitian
    with pytest.raises(InvalidInputError):
        GramMatrix(np.array([[1, 0], [0, 0.9]]))  # diagonal not 1
    with pytest.raises(InvalidInputError):
        GramMatrix(np.array([[1, 0.9, 0.9], [0.9, 1, -0.9], [0.9, -0.9, 1]]))  # not PSD
    with pytest.raises(InvalidInputError):
        GramMatrix.uniform(2, 1.2)


# -- probabilities against the first-quantized oracle --------------------------------------


@pytest.mark.parametrize(
    "m,input_modes",
    [(2, (1, 2)), (4, (1, 3)), (4, (1, 2, 4)), (3, (1, 1)), (4, (2, 2, 3)), (3, (1, 1, 1))],
)
@pytest.mark.parametrize("kind", ["ideal", "distinguishable", "random"])
def test_distribution_matches_first_quantized_oracle(m, input_modes, kind):
    rng = np.random.default_rng(len(input_modes) * 10 + m)
    n = len(input_modes)
    gram = {"ideal": np.ones((n, n)), "distinguishable": np.eye(n), "random": random_gram(rng, n)}[kind]
    u = haar_unitary(m, rng)
    ours = full_distribution(u, input_modes, GramMatrix(gram))
    ref = first_quantized_distribution(u, input_modes, gram)
    assert sum(ours.values()) == pytest.approx(1.0, abs=1e-12)
    for cfg, p in ours.items():
        assert p == pytest.approx(ref[cfg.modes], abs=1e-12)


def test_two_photon_mixture_rule():
    # for two photons, P(V) = V * P_indist + (1 - V) * P_dist
    u = haar_unitary(4, 5)
    for out in output_configs(4, 2):
        pi = output_probability(u, (1, 2), out, GramMatrix.ideal(2))
        pd = output_probability(u, (1, 2), out, GramMatrix.distinguishable(2))
        pv = output_probability(u, (1, 2), out, GramMatrix.uniform(2, 0.37))
        assert pv == pytest.approx(0.37 * pi + 0.63 * pd, abs=1e-13)


def test_hom_dip_on_balanced_mzi():
    u = mzi_unitary(np.pi / 2, 0.0)
    assert output_probability(u, (1, 2), (1, 2)) < 1e-15
    assert output_probability(u, (1, 2), (1, 2), GramMatrix.distinguishable(2)) == pytest.approx(0.5)
    assert output_probability(u, (1, 2), (1, 1)) == pytest.approx(0.5)


@settings(max_examples=30, deadline=None)
@given(st.floats(-np.pi, np.pi), st.floats(0, 1))
def test_fringe_formula_matches_interference_model(theta, v):
    p = output_probability(mzi_unitary(theta, 0.3), (1, 2), (1, 2), GramMatrix.uniform(2, v))
    assert p == pytest.approx(float(mzi_fringe(theta, v)), abs=1e-12)


def test_fringe_rejects_bad_visibility():
    with pytest.raises(InvalidInputError):
        mzi_fringe(0.0, -0.1)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.data())
def test_relabeling_invariance(seed, data):
    # permuting photon labels together with the Gram matrix leaves probabilities unchanged
    rng = np.random.default_rng(seed)
    gram = GramMatrix(random_gram(rng, 3))
    u = haar_unitary(4, rng)
    inp, out = (1, 2, 4), (1, 3, 3)
    perm = data.draw(st.permutations(range(3)))
    relabeled = tuple(inp[k] for k in perm)
    p = output_probability(u, inp, out, gram)
    assert output_probability(u, relabeled, out, gram.permuted(perm)) == pytest.approx(p, abs=1e-12)
    dist = full_distribution(u, relabeled, gram.permuted(perm))
    assert dist[PhotonConfig.from_modes(out, 4)] == pytest.approx(p, abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(st.integers(2, 6), st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_distribution_sums_to_one(m, n, seed):
    rng = np.random.default_rng(seed)
    inp = tuple(sorted(rng.integers(1, m + 1, size=n)))
    d = full_distribution(haar_unitary(m, rng), inp, GramMatrix(random_gram(rng, n)))
    assert sum(d.values()) == pytest.approx(1.0, abs=1e-9)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_input_phase_invariance(seed):
    rng = np.random.default_rng(seed)
    u = haar_unitary(4, rng)
    d = np.exp(1j * rng.uniform(0, 2 * np.pi, 4))
    gram = GramMatrix(random_gram(rng, 2))
    for out in output_configs(4, 2):
        assert output_probability(u * d[None, :], (1, 3), out, gram) == pytest.approx(
            output_probability(u, (1, 3), out, gram), abs=1e-12
        )


def test_coherence_diagonal_and_hermiticity():
    u = haar_unitary(4, 9)
    s = GramMatrix.uniform(2, 0.5)
    a, b = (1, 2), (3, 4)
    assert output_coherence(u, (1, 3), a, a, s).real == pytest.approx(output_probability(u, (1, 3), a, s))
    assert output_coherence(u, (1, 3), a, b, s) == pytest.approx(np.conj(output_coherence(u, (1, 3), b, a, s)))


def test_photon_number_mismatch():
    with pytest.raises(InvalidInputError):
        output_probability(np.eye(4), (1, 2), (1,))


def test_renormalized_collision_free_distribution():
    d = full_distribution(dft_unitary(4), (1, 3), collision_free=True, renormalize=True)
    assert sum(d.values()) == pytest.approx(1.0)
    assert d[PhotonConfig.from_modes((1, 3), 4)] == pytest.approx(0.5)


def test_distribution_csv_round_trip():
    d = full_distribution(haar_unitary(4, 2), (2, 3), GramMatrix.uniform(2, 0.9))
    text = distribution_to_csv(d)
    assert text.splitlines()[0] == "output_config,probability"
    back = distribution_from_csv(text, 4)
    assert back == d


# -- suppression law -----------------------------------------------------------------------


def test_is_cyclic():
    assert is_cyclic((1, 3), 4) and is_cyclic((2, 4), 4)
    assert not is_cyclic((1, 2), 4)
    assert is_cyclic((1, 3, 5), 6) and is_cyclic((2, 4, 6), 6)
    assert not is_cyclic((1, 2, 3), 4)


@pytest.mark.parametrize("m,n", [(4, 2), (6, 2), (6, 3)])
def test_suppression_law_exhaustive(m, n):
    u = dft_unitary(m)
    checked = 0
    for inp in itertools.combinations(range(1, m + 1), n):
        for out in output_configs(m, n):
            verdict = suppression_predicate(inp, out, m)
            if not is_cyclic(inp, m):
                assert verdict is Suppression.NOT_APPLICABLE
                continue
            p = output_probability(u, inp, out)
            if verdict is Suppression.SUPPRESSED:
                assert p < 1e-12
                checked += 1
            else:
                assert verdict is Suppression.ALLOWED
    assert checked > 0


def test_suppression_is_lifted_for_distinguishable_photons():
    p = output_probability(dft_unitary(4), (1, 3), (1, 2), GramMatrix.distinguishable(2))
    assert p == pytest.approx(1 / 8)
