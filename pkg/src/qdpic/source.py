"""Pulsed quantum-dot source, two-mode demultiplexer and loss bookkeeping."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import InvalidInputError


def indistinguishability_from_dephasing(lifetime_ps: float, dephasing_per_ns: float) -> float:
    """Two-photon overlap gamma / (gamma + 2 gamma_d) of a pure-dephased two-level emitter."""
    if lifetime_ps <= 0:
        raise InvalidInputError(f"lifetime must be positive, got {lifetime_ps}")
    if dephasing_per_ns < 0:
        raise InvalidInputError(f"dephasing rate must be non-negative, got {dephasing_per_ns}")
    if math.isinf(dephasing_per_ns):
        return 0.0
    gamma = 1e3 / lifetime_ps  # ns^-1
    return gamma / (gamma + 2.0 * dephasing_per_ns)


def dephasing_for_indistinguishability(lifetime_ps: float, visibility: float) -> float:
    """Inverse of :func:`indistinguishability_from_dephasing` in the dephasing rate."""
    if not 0.0 < visibility <= 1.0:
        raise InvalidInputError(f"visibility must lie in (0, 1], got {visibility}")
    gamma = 1e3 / lifetime_ps
    return gamma * (1.0 - visibility) / (2.0 * visibility)


@dataclass(frozen=True)
class SourceModel:
    """Emitter figures of merit. Defaults are the free-space characterization values."""

    lifetime_ps: float = 917.0
    pure_dephasing_per_ns: float = 0.03
    multiphoton_prob: float = 0.0
    efficiency: float = 0.215
    repetition_rate_mhz: float = 72.0

    def __post_init__(self):
        if not self.lifetime_ps > 0:
            raise InvalidInputError(f"lifetime must be positive, got {self.lifetime_ps}")
        if not self.pure_dephasing_per_ns >= 0:
            raise InvalidInputError(f"dephasing rate must be non-negative, got {self.pure_dephasing_per_ns}")
        for name in ("multiphoton_prob", "efficiency"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise InvalidInputError(f"{name} must lie in [0, 1], got {v}")
        if not self.repetition_rate_mhz > 0:
            raise InvalidInputError(f"repetition rate must be positive, got {self.repetition_rate_mhz}")

    @property
    def period_ps(self) -> float:
        return 1e6 / self.repetition_rate_mhz

    @property
    def indistinguishability(self) -> float:
        return indistinguishability_from_dephasing(self.lifetime_ps, self.pure_dephasing_per_ns)


@dataclass(frozen=True)
class PulseRecord:
    pulse_index: int
    photon_count: int
    emission_times: tuple[float, ...]


@dataclass(frozen=True, eq=False)
class PulseStream(Sequence[PulseRecord]):
    """Column storage for a run of pulses; indexing yields :class:`PulseRecord`.

    ``emission_times`` is flat; the photons of record ``i`` occupy
    ``emission_times[offsets[i]:offsets[i] + photon_counts[i]]``.
    """

    pulse_indices: np.ndarray
    photon_counts: np.ndarray
    emission_times: np.ndarray
    period_ps: float
    num_source_pulses: int
    offsets: np.ndarray = field(init=False)

    def __post_init__(self):
        counts = np.asarray(self.photon_counts, dtype=np.int64)
        if len(counts) != len(self.pulse_indices):
            raise InvalidInputError("pulse_indices and photon_counts differ in length")
        if counts.sum() != len(self.emission_times):
            raise InvalidInputError("emission_times length does not match photon counts")
        offsets = np.zeros(len(counts), dtype=np.int64)
        np.cumsum(counts[:-1], out=offsets[1:])
        for name, arr in (("pulse_indices", np.asarray(self.pulse_indices, dtype=np.int64)),
                          ("photon_counts", counts),
                          ("emission_times", np.asarray(self.emission_times, dtype=float)),
                          ("offsets", offsets)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def __len__(self) -> int:
        return len(self.pulse_indices)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return self.take(np.arange(len(self))[i])
        n = int(self.photon_counts[i])
        o = int(self.offsets[i])
        return PulseRecord(int(self.pulse_indices[i]), n, tuple(self.emission_times[o : o + n].tolist()))

    @property
    def total_photons(self) -> int:
        return int(self.photon_counts.sum())

    @property
    def duration_ps(self) -> float:
        return self.num_source_pulses * self.period_ps

    def photon_pulse_indices(self) -> np.ndarray:
        """Source pulse index of every photon, aligned with ``emission_times``."""
        return np.repeat(self.pulse_indices, self.photon_counts)

    def arrival_times(self) -> np.ndarray:
        """Absolute photon times in ps, sorted."""
        t = self.photon_pulse_indices() * self.period_ps + self.emission_times
        return np.sort(t, kind="stable")

    def take(self, rows) -> "PulseStream":
        rows = np.asarray(rows, dtype=np.int64)
        counts = self.photon_counts[rows]
        starts = self.offsets[rows]
        photon_idx = np.repeat(starts, counts) + _ragged_arange(counts)
        return PulseStream(self.pulse_indices[rows], counts, self.emission_times[photon_idx],
                           self.period_ps, self.num_source_pulses)

    def detected_rate_mhz(self) -> float:
        return self.total_photons / self.duration_ps * 1e6


def _ragged_arange(counts: np.ndarray) -> np.ndarray:
    """Concatenation of arange(c) for each c in counts."""
    counts = np.asarray(counts, dtype=np.int64)
    total = int(counts.sum())
    if total == 0:
        return np.zeros(0, dtype=np.int64)
    ends = np.cumsum(counts)
    return np.arange(total, dtype=np.int64) - np.repeat(ends - counts, counts)


def _from_counts(counts: np.ndarray, lifetime_ps: float, period_ps: float, rng: np.random.Generator) -> PulseStream:
    n = len(counts)
    times = rng.exponential(lifetime_ps, size=int(counts.sum()))
    return PulseStream(np.arange(n), counts, times, period_ps, n)


def generate_pulse_stream(model: SourceModel, num_pulses: int, seed: int | None = None) -> PulseStream:
    """One emitted photon per pulse, plus a second with probability ``multiphoton_prob``.

    Each emitted photon survives collection independently with probability
    ``efficiency``. Survivors get i.i.d. exponential emission delays. The
    excitation pulse width is neglected.
    """
    if num_pulses < 1:
        raise InvalidInputError(f"num_pulses must be >= 1, got {num_pulses}")
    rng = np.random.default_rng(seed)
    emitted = 1 + (rng.random(num_pulses) < model.multiphoton_prob)
    survived = rng.binomial(emitted, model.efficiency)
    return _from_counts(survived, model.lifetime_ps, model.period_ps, rng)


def generate_poissonian_stream(
    mean_photons: float,
    num_pulses: int,
    seed: int | None = None,
    lifetime_ps: float = 917.0,
    repetition_rate_mhz: float = 72.0,
) -> PulseStream:
    """Coherent-state-like pulses: Poisson photon numbers, g2(0) = 1."""
    rng = np.random.default_rng(seed)
    counts = rng.poisson(mean_photons, size=num_pulses)
    return _from_counts(counts, lifetime_ps, 1e6 / repetition_rate_mhz, rng)


def thin(stream: PulseStream, efficiency: float, seed: int | None = None) -> PulseStream:
    """Independent loss on every photon; empty pulses are kept."""
    if not 0.0 <= efficiency <= 1.0:
        raise InvalidInputError(f"efficiency must lie in [0, 1], got {efficiency}")
    rng = np.random.default_rng(seed)
    keep = rng.random(stream.total_photons) < efficiency
    owner = np.repeat(np.arange(len(stream)), stream.photon_counts)
    counts = np.bincount(owner[keep], minlength=len(stream))
    return PulseStream(stream.pulse_indices, counts, stream.emission_times[keep], stream.period_ps,
                       stream.num_source_pulses)


def demultiplex(
    stream: PulseStream, switch_efficiency: float = 1.0, seed: int | None = None
) -> tuple[PulseStream, PulseStream]:
    """Route even source pulses to arm A and odd ones to arm B, then delay A to meet B.

    Each arm is thinned by ``switch_efficiency``. Only slots where both arms
    still hold a photon are returned, as two equal-length streams whose
    ``i``-th records form one synchronized pair (pulses 2k and 2k + 1).
    """
    if len(stream) == 0:
        return stream, stream
    thinned = thin(stream, switch_efficiency, seed)
    idx = thinned.pulse_indices
    occupied = thinned.photon_counts > 0
    even = (idx % 2 == 0) & occupied
    odd = (idx % 2 == 1) & occupied
    slots, rows_a, rows_b = np.intersect1d(idx[even] // 2, idx[odd] // 2, return_indices=True)
    arm_a = thinned.take(np.flatnonzero(even)[rows_a])
    arm_b = thinned.take(np.flatnonzero(odd)[rows_b])
    return arm_a, arm_b


@dataclass(frozen=True)
class LossStage:
    label: str
    loss_db: float | None = None
    efficiency: float | None = None

    def __post_init__(self):
        if (self.loss_db is None) == (self.efficiency is None):
            raise InvalidInputError(f"stage {self.label!r} needs exactly one of loss_db / efficiency")
        eff = self.linear()
        if not 0.0 <= eff <= 1.0:
            raise InvalidInputError(f"stage {self.label!r} has efficiency {eff} outside [0, 1]")

    def linear(self) -> float:
        if self.efficiency is not None:
            return float(self.efficiency)
        return 10.0 ** (-self.loss_db / 10.0)


def waveguide_stage(length_cm: float, db_per_cm: float = 0.3, label: str = "waveguide") -> LossStage:
    return LossStage(label, loss_db=length_cm * db_per_cm)


@dataclass(frozen=True)
class LossBudget:
    efficiency: float
    stages: tuple[tuple[str, float], ...]

    @property
    def loss_db(self) -> float:
        return -10.0 * math.log10(self.efficiency) if self.efficiency > 0 else math.inf


def loss_budget(stages: Iterable[LossStage | Mapping | tuple]) -> LossBudget:
    """Multiply stage efficiencies, keeping a per-stage report in order.

    Stages may be :class:`LossStage`, mappings with ``label`` plus one of
    ``loss_db``/``efficiency``, or ``(label, loss_db)`` tuples.
    """
    report = []
    total = 1.0
    for st in stages:
        if isinstance(st, Mapping):
            st = LossStage(**st)
        elif isinstance(st, tuple):
            st = LossStage(st[0], loss_db=st[1])
        eff = st.linear()
        report.append((st.label, eff))
        total *= eff
    return LossBudget(total, tuple(report))
