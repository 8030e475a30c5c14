"""Multiphoton output statistics for partially distinguishable photons.

Distinguishability is described by a Gram matrix ``S`` of internal-state
overlaps between input photons. Photons are numbered in the canonical
order of their input modes, so ``S[k, l]`` refers to the k-th and l-th
entries of the sorted input mode list. All-ones is the ideal bosonic case,
the identity matrix the classical-particle case.
"""
from __future__ import annotations

import csv
import enum
import io
import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import InvalidInputError, SizeGuardError
from .linalg import as_unitary, scattering_submatrix

MAX_PHOTONS = 6
IMAG_TOL = 1e-12


@dataclass(frozen=True, order=True)
class PhotonConfig:
    """Photon numbers per mode (mode 1 first)."""

    occupations: tuple[int, ...]

    def __post_init__(self):
        occ = tuple(int(x) for x in self.occupations)
        if not occ or any(x < 0 for x in occ):
            raise InvalidInputError(f"invalid occupation list {self.occupations}")
        object.__setattr__(self, "occupations", occ)

    @classmethod
    def from_modes(cls, modes: Iterable[int], num_modes: int) -> "PhotonConfig":
        occ = [0] * num_modes
        for x in modes:
            if not 1 <= x <= num_modes:
                raise InvalidInputError(f"mode {x} outside 1..{num_modes}")
            occ[x - 1] += 1
        return cls(tuple(occ))

    @classmethod
    def parse(cls, label: str, num_modes: int) -> "PhotonConfig":
        """Inverse of :attr:`label`."""
        modes = [int(x) for x in label.split(",") if x.strip()]
        return cls.from_modes(modes, num_modes)

    @property
    def num_modes(self) -> int:
        return len(self.occupations)

    @property
    def num_photons(self) -> int:
        return sum(self.occupations)

    @property
    def modes(self) -> tuple[int, ...]:
        """Sorted 1-based mode of each photon, repeated per occupation."""
        return tuple(j + 1 for j, t in enumerate(self.occupations) for _ in range(t))

    @property
    def label(self) -> str:
        return ",".join(str(x) for x in self.modes)

    @property
    def collision_free(self) -> bool:
        return all(t <= 1 for t in self.occupations)

    def __str__(self) -> str:
        return self.label


def _config(x, num_modes: int) -> PhotonConfig:
    if isinstance(x, PhotonConfig):
        if x.num_modes != num_modes:
            raise InvalidInputError(f"config has {x.num_modes} modes, circuit has {num_modes}")
        return x
    return PhotonConfig.from_modes(x, num_modes)


@dataclass(frozen=True)
class GramMatrix:
    """Pairwise internal-state overlaps of the input photons.

    Photon ``j`` is the ``j``-th entry of the input mode list. The index
    convention is the one of the permutation-pair sum, where
    ``overlaps[a, b]`` pairs photon ``a`` in the ket with photon ``b`` in the
    bra, i.e. ``overlaps[a, b] = <psi_b|psi_a>``. Real Gram matrices are
    unaffected by the choice.
    """

    overlaps: np.ndarray

    def __post_init__(self):
        s = np.array(self.overlaps, dtype=complex)
        if s.ndim != 2 or s.shape[0] != s.shape[1]:
            raise InvalidInputError(f"Gram matrix must be square, got shape {s.shape}")
        if not np.allclose(s, s.conj().T, atol=1e-12):
            raise InvalidInputError("Gram matrix is not Hermitian")
        if not np.allclose(np.diag(s), 1.0, atol=1e-12):
            raise InvalidInputError("Gram matrix must have unit diagonal")
        if np.any(np.abs(s) > 1 + 1e-12):
            raise InvalidInputError("Gram matrix overlaps exceed 1 in modulus")
        if s.size and np.linalg.eigvalsh(s).min() < -1e-12:
            raise InvalidInputError("Gram matrix is not positive semidefinite")
        s.setflags(write=False)
        object.__setattr__(self, "overlaps", s)

    @property
    def n(self) -> int:
        return self.overlaps.shape[0]

    @classmethod
    def ideal(cls, n: int) -> "GramMatrix":
        return cls(np.ones((n, n)))

    @classmethod
    def distinguishable(cls, n: int) -> "GramMatrix":
        return cls(np.eye(n))

    @classmethod
    def uniform(cls, n: int, visibility: float) -> "GramMatrix":
        """All pairs share the same real overlap sqrt(visibility)."""
        if not 0.0 <= visibility <= 1.0:
            raise InvalidInputError(f"visibility must lie in [0, 1], got {visibility}")
        x = math.sqrt(visibility)
        return cls((1 - x) * np.eye(n) + x * np.ones((n, n)))

    def permuted(self, perm: Sequence[int]) -> "GramMatrix":
        p = np.asarray(perm)
        return GramMatrix(self.overlaps[np.ix_(p, p)])


@lru_cache(maxsize=None)
def _perm_table(n: int) -> np.ndarray:
    return np.array(list(itertools.permutations(range(n))), dtype=np.intp).reshape(-1, n)


def _weights(s: np.ndarray) -> np.ndarray:
    """W[a, b] = prod_k S[sigma_a(k), rho_b(k)] over all permutation pairs."""
    p = _perm_table(s.shape[0])
    return np.prod(s[p[:, None, :], p[None, :, :]], axis=2)


def _amplitudes(m: np.ndarray) -> np.ndarray:
    """prod_k M[k, sigma(k)] for every permutation sigma."""
    n = m.shape[0]
    return np.prod(m[np.arange(n), _perm_table(n)], axis=1)


def permutation_pair_sum(ma: np.ndarray, mb: np.ndarray, s: np.ndarray) -> complex:
    """sum_{sigma, rho} prod S[sigma(k), rho(k)] prod Ma[k, sigma(k)] prod conj(Mb[k, rho(k)])."""
    n = ma.shape[0]
    if n == 0:
        return 1.0 + 0j
    if n > MAX_PHOTONS:
        raise SizeGuardError(f"permutation-pair sum limited to {MAX_PHOTONS} photons, got {n}")
    return complex(_amplitudes(ma) @ _weights(s) @ _amplitudes(mb).conj())


def _input_norm(cfg: PhotonConfig, s: np.ndarray) -> float:
    """Squared norm of the input state: product of Gram permanents over photons sharing a mode."""
    norm = 1.0
    start = 0
    for t in cfg.occupations:
        if t > 1:
            block = s[start : start + t, start : start + t]
            p = _perm_table(t)
            norm *= float(np.real(np.prod(block[np.arange(t), p], axis=1).sum()))
        start += t
    return norm


def _gram(s, n: int, input=None) -> np.ndarray:
    """Overlaps ordered like the sorted input modes.

    A raw input mode sequence is an assignment list (photon ``j`` enters
    mode ``input[j]``), so the Gram matrix is reordered to sorted-mode order.
    """
    if s is None:
        return np.ones((n, n), dtype=complex)
    g = s if isinstance(s, GramMatrix) else GramMatrix(s)
    if g.n != n:
        raise InvalidInputError(f"Gram matrix is {g.n}x{g.n} but there are {n} photons")
    if input is None or isinstance(input, PhotonConfig):
        return g.overlaps
    order = np.argsort(np.asarray(list(input)), kind="stable")
    return g.overlaps[np.ix_(order, order)]


def _real(x: complex) -> float:
    if abs(x.imag) > IMAG_TOL:
        raise FloatingPointError(f"probability has imaginary residue {x.imag:.3e}")
    return x.real


def output_coherence(u, input, output_a, output_b, s: GramMatrix | None = None) -> complex:
    """Density-matrix element between two output configurations, internal states traced out.

    Diagonal elements are :func:`output_probability` values (unclipped).
    """
    u = as_unitary(u)
    m = u.shape[0]
    cin = _config(input, m)
    ca, cb = _config(output_a, m), _config(output_b, m)
    n = cin.num_photons
    if ca.num_photons != n or cb.num_photons != n:
        raise InvalidInputError("photon number differs between input and output")
    g = _gram(s, n, input)
    ma = scattering_submatrix(u, cin, ca)
    mb = scattering_submatrix(u, cin, cb)
    fact = math.sqrt(math.prod(math.factorial(t) for t in ca.occupations) * math.prod(math.factorial(t) for t in cb.occupations))
    return permutation_pair_sum(ma, mb, g) / (fact * _input_norm(cin, g))


def output_probability(u, input, output, s: GramMatrix | None = None) -> float:
    """Probability of detecting ``output`` when ``input`` enters circuit ``u``.

    ``input``/``output`` are :class:`PhotonConfig` objects or lists of
    1-based modes. ``s`` defaults to ideal indistinguishable photons.
    """
    p = _real(output_coherence(u, input, output, output, s))
    return min(1.0, max(0.0, p))


def output_configs(num_modes: int, num_photons: int, collision_free: bool = False) -> list[PhotonConfig]:
    """All configurations of n photons on m modes in lexicographic mode order."""
    if collision_free:
        combos = itertools.combinations(range(1, num_modes + 1), num_photons)
    else:
        combos = itertools.combinations_with_replacement(range(1, num_modes + 1), num_photons)
    return [PhotonConfig.from_modes(c, num_modes) for c in combos]


def full_distribution(
    u,
    input,
    s: GramMatrix | None = None,
    collision_free: bool = False,
    renormalize: bool = False,
) -> dict[PhotonConfig, float]:
    """Probabilities over every output configuration.

    With ``collision_free`` only outputs with at most one photon per mode are
    returned; ``renormalize`` then rescales that subset to sum to one, which is
    what a threshold-detector histogram of coincidences estimates.
    """
    u = as_unitary(u)
    m = u.shape[0]
    cin = _config(input, m)
    s = GramMatrix(_gram(s, cin.num_photons, input))
    dist = {
        c: output_probability(u, cin, c, s)
        for c in output_configs(m, cin.num_photons, collision_free)
    }
    if renormalize:
        total = sum(dist.values())
        if total <= 0:
            raise InvalidInputError("cannot renormalize a distribution with zero total weight")
        dist = {c: p / total for c, p in dist.items()}
    return dist


class Suppression(enum.Enum):
    SUPPRESSED = "suppressed"
    ALLOWED = "allowed"
    NOT_APPLICABLE = "not-applicable"


def is_cyclic(input, num_modes: int) -> bool:
    """Input photons sit on modes s, s + m/n, s + 2m/n, ... with one photon each."""
    modes = _config(input, num_modes).modes
    n = len(modes)
    if n == 0 or num_modes % n:
        return False
    step = num_modes // n
    return all(modes[k] == modes[0] + k * step for k in range(n))


def suppression_predicate(input, output, num_modes: int) -> Suppression:
    """Zero-transmission rule for cyclic inputs into the m-mode DFT.

    An output is suppressed when the sum of its photons' mode labels is not
    a multiple of the photon number n. Shifting all labels by one changes
    the sum by n, so 0- and 1-based labels give the same verdict.
    """
    cin = _config(input, num_modes)
    cout = _config(output, num_modes)
    n = cin.num_photons
    if cout.num_photons != n:
        raise InvalidInputError("photon number differs between input and output")
    if not is_cyclic(cin, num_modes):
        return Suppression.NOT_APPLICABLE
    total = sum(c % n for c in cout.modes) % n
    return Suppression.SUPPRESSED if total else Suppression.ALLOWED


def mzi_fringe(theta, visibility: float):
    """Cross-output coincidence probability for one photon in each MZI input.

    ``V cos^2(theta) + (1 - V)(1 + cos^2(theta))/2`` for the symmetric-coupler
    convention of :mod:`qdpic.circuit`; vectorizes over ``theta``.
    """
    if not 0.0 <= visibility <= 1.0:
        raise InvalidInputError(f"visibility must lie in [0, 1], got {visibility}")
    c2 = np.cos(theta) ** 2
    return visibility * c2 + (1.0 - visibility) * (1.0 + c2) / 2.0


def distribution_to_csv(dist: Mapping[PhotonConfig, float], path=None) -> str:
    """Write ``output_config,probability`` rows; returns the CSV text."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["output_config", "probability"])
    for cfg in sorted(dist, key=lambda c: c.modes):
        w.writerow([cfg.label, repr(float(dist[cfg]))])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text


def distribution_from_csv(text: str, num_modes: int) -> dict[PhotonConfig, float]:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != ["output_config", "probability"]:
        raise InvalidInputError("missing output_config,probability header")
    return {PhotonConfig.parse(r[0], num_modes): float(r[1]) for r in rows[1:]}
