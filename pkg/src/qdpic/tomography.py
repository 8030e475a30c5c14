"""Post-selected path-encoded qubit pair: state extraction, Pauli tomography, MLE.

Qubit mapping: mode 1 -> |0>_1, mode 2 -> |1>_1, mode 3 -> |0>_2,
mode 4 -> |1>_2. Basis order is |00>, |01>, |10>, |11>. A measurement
outcome bit of 0 means the photon left through the top (|0>) rail of its
analysis MZI, which is the +1 eigenvalue of the measured Pauli operator.
"""
from __future__ import annotations

import csv
import io
import itertools
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from scipy import optimize

from .circuit import MeshConfig, compile_unitary, dft_unitary, mesh_to_unitary, mzi_unitary
from .errors import DegeneratePostselectionError, InvalidInputError, ReconstructionError
from .interference import GramMatrix, PhotonConfig, output_coherence, output_probability

QUBIT_OUTPUTS = ((1, 3), (1, 4), (2, 3), (2, 4))  # |00>, |01>, |10>, |11>
BELL_INPUT = (1, 3)
OUTCOMES = ((0, 0), (0, 1), (1, 0), (1, 1))

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}

# (theta, phi) of the analysis MZI that maps the basis eigenvector with eigenvalue +1 onto the top rail
ANALYSIS_PHASES = {"Z": (np.pi, 0.0), "X": (np.pi / 2, 0.0), "Y": (np.pi / 2, np.pi / 2)}

PSI_PLUS = np.array([0, 1, 1, 0], dtype=complex) / np.sqrt(2)
PSI_MINUS = np.array([0, 1, -1, 0], dtype=complex) / np.sqrt(2)
PHI_PLUS = np.array([1, 0, 0, 1], dtype=complex) / np.sqrt(2)
PHI_MINUS = np.array([1, 0, 0, -1], dtype=complex) / np.sqrt(2)


@dataclass(frozen=True, eq=False)
class TwoQubitState:
    rho: np.ndarray

    def __post_init__(self):
        r = np.array(self.rho, dtype=complex)
        if r.shape != (4, 4):
            raise InvalidInputError(f"two-qubit state must be 4x4, got {r.shape}")
        if np.max(np.abs(r - r.conj().T)) > 1e-10:
            raise InvalidInputError("density matrix is not Hermitian")
        if abs(np.trace(r) - 1) > 1e-10:
            raise InvalidInputError(f"density matrix trace {np.trace(r).real:.12f} != 1")
        if np.linalg.eigvalsh(0.5 * (r + r.conj().T)).min() < -1e-9:
            raise InvalidInputError("density matrix is not positive semidefinite")
        r.setflags(write=False)
        object.__setattr__(self, "rho", r)

    @classmethod
    def pure(cls, psi) -> "TwoQubitState":
        v = np.asarray(psi, dtype=complex)
        v = v / np.linalg.norm(v)
        return cls(np.outer(v, v.conj()))

    @classmethod
    def maximally_mixed(cls) -> "TwoQubitState":
        return cls(np.eye(4) / 4)

    def concurrence(self) -> float:
        yy = np.kron(PAULI["Y"], PAULI["Y"])
        r_tilde = yy @ self.rho.conj() @ yy
        ev = np.sqrt(np.clip(np.linalg.eigvals(self.rho @ r_tilde).real, 0, None))
        ev = np.sort(ev)[::-1]
        return float(max(0.0, ev[0] - ev[1] - ev[2] - ev[3]))

    def purity(self) -> float:
        return float(np.real(np.trace(self.rho @ self.rho)))


@dataclass(frozen=True)
class PauliSetting:
    basis_1: str
    basis_2: str

    def __post_init__(self):
        for b in (self.basis_1, self.basis_2):
            if b not in ANALYSIS_PHASES:
                raise InvalidInputError(f"basis must be one of X, Y, Z, got {b!r}")

    @property
    def label(self) -> str:
        return self.basis_1 + self.basis_2

    @classmethod
    def parse(cls, label: str) -> "PauliSetting":
        if len(label) != 2:
            raise InvalidInputError(f"setting label must be two letters, got {label!r}")
        return cls(label[0], label[1])

    def phases(self) -> tuple[tuple[float, float], tuple[float, float]]:
        return ANALYSIS_PHASES[self.basis_1], ANALYSIS_PHASES[self.basis_2]

    def analysis_unitary(self) -> np.ndarray:
        """Block-diagonal pair of output MZIs on modes (1, 2) and (3, 4)."""
        (t1, p1), (t2, p2) = self.phases()
        u = np.zeros((4, 4), dtype=complex)
        u[:2, :2] = mzi_unitary(t1, p1)
        u[2:, 2:] = mzi_unitary(t2, p2)
        return u


ALL_SETTINGS = tuple(PauliSetting(a, b) for a, b in itertools.product("XYZ", repeat=2))


def _projector(basis: str, bit: int) -> np.ndarray:
    """Rank-1 projector realized by the analysis MZI for one rail of one qubit."""
    theta, phi = ANALYSIS_PHASES[basis]
    row = mzi_unitary(theta, phi)[bit]  # amplitude reaching output rail `bit` from each input rail
    v = row.conj()
    return np.outer(v, v.conj())


def measurement_projector(setting: PauliSetting, outcome: tuple[int, int]) -> np.ndarray:
    return np.kron(_projector(setting.basis_1, outcome[0]), _projector(setting.basis_2, outcome[1]))


def postselect_two_qubit(u, s: GramMatrix | None = None, input=BELL_INPUT) -> tuple[TwoQubitState, float]:
    """State of the photon pair conditioned on one photon per qubit rail pair.

    Coherences between the four qubit outputs use the same permutation-pair
    sum as probabilities, so partial distinguishability shows up as mixing.
    Returns the normalized state and the post-selection probability.
    """
    cin = PhotonConfig.from_modes(input, 4)
    if cin.modes != BELL_INPUT:
        raise InvalidInputError(f"expected one photon in each of modes 1 and 3, got {cin.modes}")
    outs = [PhotonConfig.from_modes(o, 4) for o in QUBIT_OUTPUTS]
    block = np.empty((4, 4), dtype=complex)
    for i, a in enumerate(outs):
        for j, b in enumerate(outs):
            if j < i:
                block[i, j] = block[j, i].conjugate()
            else:
                block[i, j] = output_coherence(u, cin, a, b, s)
    p = float(np.real(np.trace(block)))
    if p <= 1e-15:
        raise DegeneratePostselectionError("post-selected two-qubit subspace has zero probability")
    block = 0.5 * (block + block.conj().T)
    return TwoQubitState(block / p), p


def pauli_expectation(state: TwoQubitState, setting: PauliSetting) -> float:
    op = np.kron(PAULI[setting.basis_1], PAULI[setting.basis_2])
    return float(np.clip(np.real(np.trace(state.rho @ op)), -1.0, 1.0))


def fidelity(state: TwoQubitState, target) -> float:
    """Fidelity to a target given as a state vector (<psi|rho|psi>) or a density matrix.

    For a mixed target the Uhlmann form (tr sqrt(sqrt(rho) sigma sqrt(rho)))^2 is used.
    """
    if isinstance(target, TwoQubitState):
        target = target.rho
    t = np.asarray(target, dtype=complex)
    if t.ndim == 1:
        v = t / np.linalg.norm(t)
        return float(np.clip(np.real(v.conj() @ state.rho @ v), 0.0, 1.0))
    w, vecs = np.linalg.eigh(state.rho)
    root = (vecs * np.sqrt(np.clip(w, 0.0, None))) @ vecs.conj().T
    inner = np.linalg.eigvalsh(root @ t @ root)
    return float(np.clip(np.sum(np.sqrt(np.clip(inner, 0.0, None))) ** 2, 0.0, 1.0))


def _bell_target_unitary() -> np.ndarray:
    # the raw DFT heralds (|00> - |11>)/sqrt2; a swap of modes 3, 4 (X on qubit 2)
    # followed by a pi phase on mode 2 (Z on qubit 1) turns it into psi+
    swap34 = np.eye(4)[[0, 1, 3, 2]]
    return np.diag([1, -1, 1, 1]) @ swap34 @ dft_unitary(4)


def bell_settings(check: bool = True) -> MeshConfig:
    """Mesh whose ideal post-selected output is psi+ = (|01> + |10>)/sqrt2."""
    cfg = compile_unitary(_bell_target_unitary())
    if check:
        state, p = postselect_two_qubit(mesh_to_unitary(cfg))
        f = fidelity(state, PSI_PLUS)
        if f < 1 - 1e-9 or abs(p - 0.5) > 1e-9:
            raise RuntimeError(f"Bell mesh verification failed: F = {f}, p = {p}")
    return cfg


def convention_audit() -> dict[str, dict[str, int]]:
    """Sign of <XX>, <YY>, <ZZ> for psi+ versus the correlation pattern reported for the experiment.

    The experiment reports correlation for XX and anticorrelation for YY and
    ZZ. For (|01> + |10>)/sqrt2 the algebra gives +1, +1, -1, so the YY sign
    disagrees; the mismatch is reported here rather than absorbed into the
    Y analysis phase.
    """
    reported = {"XX": +1, "YY": -1, "ZZ": -1}
    psi = TwoQubitState.pure(PSI_PLUS)
    computed = {k: int(round(pauli_expectation(psi, PauliSetting.parse(k)))) for k in reported}
    mismatches = {k: 1 for k in reported if computed[k] != reported[k]}
    return {"reported": reported, "computed": computed, "mismatch": mismatches}


@dataclass(frozen=True, eq=False)
class TomographyCounts:
    """Outcome counts per Pauli setting, in the order of ``OUTCOMES``."""

    counts: Mapping[str, np.ndarray]

    def __post_init__(self):
        c = {}
        for label, v in self.counts.items():
            PauliSetting.parse(label)
            arr = np.asarray(v, dtype=float)
            if arr.shape != (4,) or np.any(arr < 0):
                raise InvalidInputError(f"setting {label}: expected 4 non-negative counts")
            c[label] = arr
        object.__setattr__(self, "counts", dict(sorted(c.items())))

    def __getitem__(self, label: str) -> np.ndarray:
        return self.counts[label]

    def expectation(self, label: str) -> float:
        """Correlation estimate (n00 - n01 - n10 + n11) / total."""
        n = self.counts[label]
        return float((n[0] - n[1] - n[2] + n[3]) / n.sum())

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["setting", "outcome", "count"])
        for label, arr in self.counts.items():
            for (b1, b2), n in zip(OUTCOMES, arr.tolist()):
                w.writerow([label, f"{b1}{b2}", repr(n) if n != int(n) else int(n)])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_csv(cls, text: str) -> "TomographyCounts":
        rows = list(csv.DictReader(io.StringIO(text)))
        counts: dict[str, np.ndarray] = {}
        index = {f"{a}{b}": i for i, (a, b) in enumerate(OUTCOMES)}
        for r in rows:
            arr = counts.setdefault(r["setting"], np.zeros(4))
            arr[index[r["outcome"]]] = float(r["count"])
        return cls(counts)


def setting_distribution(u_prep, setting: PauliSetting, s: GramMatrix | None = None) -> np.ndarray:
    """Post-selected 4-outcome distribution for one analysis setting (sums to 1)."""
    total = setting.analysis_unitary() @ np.asarray(u_prep, dtype=complex)
    p = np.array([output_probability(total, BELL_INPUT, out, s) for out in QUBIT_OUTPUTS])
    if p.sum() <= 0:
        raise DegeneratePostselectionError(f"setting {setting.label} has zero post-selection probability")
    return p / p.sum()


def simulate_tomography_counts(
    mesh: MeshConfig | np.ndarray,
    s: GramMatrix | None = None,
    shots_per_setting: int = 10_000,
    seed: int | None = None,
    analytic: bool = False,
    settings=ALL_SETTINGS,
) -> TomographyCounts:
    """Multinomial post-selected counts for each Pauli setting.

    The preparation circuit is followed by the analysis MZIs and the photon
    statistics are computed directly on the composed circuit. With
    ``analytic`` the expected (non-integer) counts are returned instead.
    """
    if shots_per_setting < 1:
        raise InvalidInputError("shots_per_setting must be >= 1")
    u = mesh_to_unitary(mesh) if isinstance(mesh, MeshConfig) else np.asarray(mesh, dtype=complex)
    rng = np.random.default_rng(seed)
    out = {}
    for st in settings:
        p = setting_distribution(u, st, s)
        if analytic:
            out[st.label] = p * shots_per_setting
        else:
            out[st.label] = rng.multinomial(shots_per_setting, p)
    return TomographyCounts(out)


def sample_state_counts(
    state: TwoQubitState, shots_per_setting: int, seed: int | None = None, settings=ALL_SETTINGS
) -> TomographyCounts:
    """Multinomial counts for an arbitrary density matrix via the Born rule tr(P rho)."""
    rng = np.random.default_rng(seed)
    out = {}
    for st in settings:
        p = np.array([np.real(np.trace(measurement_projector(st, o) @ state.rho)) for o in OUTCOMES])
        p = np.clip(p, 0.0, None)
        out[st.label] = rng.multinomial(shots_per_setting, p / p.sum())
    return TomographyCounts(out)


def _projector_table(counts: TomographyCounts):
    projs, ns = [], []
    for label, arr in counts.counts.items():
        st = PauliSetting.parse(label)
        for outcome, n in zip(OUTCOMES, arr):
            projs.append(measurement_projector(st, outcome))
            ns.append(n)
    return np.array(projs), np.array(ns, dtype=float)


def linear_inversion(counts: TomographyCounts) -> np.ndarray:
    """Least-squares inversion of the Born rule. Diagnostic only: may be unphysical."""
    projs, ns = _projector_table(counts)
    labels = list(counts.counts)
    freqs = []
    for label in labels:
        arr = counts[label]
        freqs.extend(arr / arr.sum())
    freqs = np.array(freqs)
    # Born rule is linear in the 16 Pauli coefficients of rho
    basis = [np.kron(PAULI[a], PAULI[b]) / 4 for a, b in itertools.product("IXYZ", repeat=2)]
    A = np.array([[np.real(np.trace(P @ B)) for B in basis] for P in projs])
    coef, *_ = np.linalg.lstsq(A, freqs, rcond=None)
    rho = sum(c * B for c, B in zip(coef, basis))
    return 0.5 * (rho + rho.conj().T)


_TRIL = np.tril_indices(4)
_DIAG_POS = [i for i, (r, c) in enumerate(zip(*_TRIL)) if r == c]
_OFF_POS = [i for i, (r, c) in enumerate(zip(*_TRIL)) if r != c]


def _t_from_params(x: np.ndarray) -> np.ndarray:
    t = np.zeros((4, 4), dtype=complex)
    vals = np.zeros(10, dtype=complex)
    vals[_DIAG_POS] = x[:4]
    vals[_OFF_POS] = x[4:10] + 1j * x[10:16]
    t[_TRIL] = vals
    return t


def _params_from_rho(rho: np.ndarray) -> np.ndarray:
    """Cholesky-style parameters with rho proportional to T^dagger T, T lower-triangular."""
    w, v = np.linalg.eigh(0.5 * (rho + rho.conj().T))
    w = np.clip(w, 1e-3, None)
    r = (v * w) @ v.conj().T
    # r = T^dag T with T lower triangular  <=>  J r J = L L^dag with J the exchange matrix
    j = np.eye(4)[::-1]
    l = np.linalg.cholesky(j @ r @ j)
    t = (j @ l @ j).conj().T
    vals = t[_TRIL]
    x = np.empty(16)
    x[:4] = vals[_DIAG_POS].real
    x[4:10] = vals[_OFF_POS].real
    x[10:16] = vals[_OFF_POS].imag
    return x


def _rho_from_params(x: np.ndarray) -> np.ndarray:
    t = _t_from_params(x)
    a = t.conj().T @ t
    return a / np.real(np.trace(a))


@dataclass(frozen=True, eq=False)
class MLEResult:
    state: TwoQubitState
    log_likelihood: float
    restarts: int
    params: np.ndarray = field(repr=False)


def mle_reconstruct(
    counts: TomographyCounts,
    max_restarts: int = 5,
    seed: int | None = 0,
    step_tol: float = 1e-9,
) -> MLEResult:
    """Maximum-likelihood density matrix with rho = T^dag T / tr(T^dag T).

    The multinomial log-likelihood sum n log p is maximized with BFGS and
    an analytic gradient, starting from the PSD-clipped linear inversion and
    then from random points until one run converges. Convergence means the
    optimizer stopped with a parameter step below ``step_tol`` (relative to
    the parameter scale) or a vanishing gradient.
    """
    if set(counts.counts) != {s.label for s in ALL_SETTINGS}:
        raise InvalidInputError("MLE needs counts for all nine Pauli settings")
    for label, arr in counts.counts.items():
        if arr.sum() <= 0:
            raise InvalidInputError(f"setting {label} has zero total counts")
    projs, ns = _projector_table(counts)
    n_total = ns.sum()

    def objective(x):
        t = _t_from_params(x)
        a = t.conj().T @ t
        tr = np.real(np.trace(a))
        num = np.real(np.einsum("kij,ji->k", projs, a))
        num = np.maximum(num, 1e-300)
        # settings are complete, so sum over outcomes of tr(P a) = tr(a) for each setting
        f = -np.sum(ns * np.log(num)) + n_total * np.log(tr)
        tp = np.einsum("ij,kjl->kil", t, projs)  # T P_k
        gmat = -np.einsum("k,kij->ij", ns / num, tp) + n_total / tr * t
        g = 2.0 * gmat[_TRIL]
        grad = np.empty(16)
        grad[:4] = g[_DIAG_POS].real
        grad[4:10] = g[_OFF_POS].real
        grad[10:16] = g[_OFF_POS].imag
        return f, grad

    rng = np.random.default_rng(seed)
    starts = [_params_from_rho(linear_inversion(counts))]
    best = None
    for attempt in range(max_restarts + 1):
        if attempt < len(starts):
            x0 = starts[attempt]
        else:
            x0 = rng.normal(size=16)
        res = optimize.minimize(objective, x0, jac=True, method="BFGS",
                                options={"gtol": 1e-8 * max(1.0, n_total), "xrtol": step_tol, "maxiter": 10_000})
        if best is None or res.fun < best.fun:
            best = res
        if res.success:
            break
    else:
        rho = _rho_from_params(best.x)
        raise ReconstructionError(
            "maximum-likelihood reconstruction did not converge",
            best=TwoQubitState(0.5 * (rho + rho.conj().T)),
            diagnostics={"message": best.message, "nit": best.nit, "fun": float(best.fun)},
        )
    rho = _rho_from_params(best.x)
    rho = 0.5 * (rho + rho.conj().T)
    p = np.maximum(np.real(np.einsum("kij,ji->k", projs, rho)), 1e-300)
    loglik = float(np.sum(ns * np.log(p)))
    return MLEResult(TwoQubitState(rho), loglik, attempt, best.x)


def export_state_csv(state: TwoQubitState, path=None, **metadata) -> str:
    """16 rows ``row,col,real,imag`` preceded by ``# key=value`` metadata lines."""
    buf = io.StringIO()
    for k, v in metadata.items():
        buf.write(f"# {k}={v!r}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["row", "col", "real", "imag"])
    for i in range(4):
        for j in range(4):
            z = state.rho[i, j]
            w.writerow([i, j, repr(float(z.real)), repr(float(z.imag))])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text
