"""End-to-end pipelines for the four on-chip experiments plus the loss budget.

Each pipeline chains source -> circuit -> detection -> estimator and is
deterministic given its seed. Independent random streams are derived from
the seed with ``numpy.random.SeedSequence.spawn``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .circuit import MeshConfig, dft_unitary, mesh_to_unitary, mzi_unitary
from .detection import (
    CoincidenceHistogram,
    DetectorModel,
    FringeFit,
    G2Result,
    TagStream,
    antibunched_pair_counts,
    cross_correlation,
    fit_hom_fringe,
    g2_estimator,
    simulate_clicks,
)
from .errors import InvalidInputError
from .interference import (
    GramMatrix,
    Suppression,
    full_distribution,
    output_probability,
    suppression_predicate,
)
from .source import SourceModel, demultiplex, generate_pulse_stream
from .tomography import (
    PSI_PLUS,
    MLEResult,
    TomographyCounts,
    bell_settings,
    fidelity,
    mle_reconstruct,
    postselect_two_qubit,
    simulate_tomography_counts,
)

BALANCED_MZI = mzi_unitary(np.pi / 2, 0.0)


def _seeds(seed, n: int) -> list[np.random.SeedSequence]:
    return np.random.SeedSequence(seed).spawn(n)


# -- HBT -----------------------------------------------------------------------


def generative_g2(multiphoton_prob: float) -> float:
    """g2(0) of pulses holding 1 photon, or 2 with probability p2: 2 p2 / (1 + p2)^2."""
    return 2.0 * multiphoton_prob / (1.0 + multiphoton_prob) ** 2


def _pair_moments(multiphoton_prob: float, efficiency: float, split: float) -> tuple[float, float, float]:
    """E[n_A n_B], E[n_A], E[n_B] for one pulse, by enumerating every photon's fate."""
    e_ab = e_a = e_b = 0.0
    for emitted, p_emit in ((1, 1.0 - multiphoton_prob), (2, multiphoton_prob)):
        for fates in itertools.product(("lost", "A", "B"), repeat=emitted):
            p = p_emit
            for f in fates:
                p *= (1 - efficiency) if f == "lost" else efficiency * (split if f == "A" else 1 - split)
            na, nb = fates.count("A"), fates.count("B")
            e_ab += p * na * nb
            e_a += p * na
            e_b += p * nb
    return e_ab, e_a, e_b


def _window_mass(offset_periods: float, lifetime_ps: float, period_ps: float) -> float:
    """P(offset * T + L in [-T/2, T/2)) for L the difference of two exponential delays (Laplace)."""
    def cdf(x):
        return 0.5 * math.exp(x / lifetime_ps) if x < 0 else 1.0 - 0.5 * math.exp(-x / lifetime_ps)

    c = -offset_periods * period_ps
    return cdf(c + period_ps / 2) - cdf(c - period_ps / 2)


def expected_g2_estimate(
    multiphoton_prob: float,
    efficiency: float,
    split: float = 0.5,
    lifetime_ps: float | None = None,
    period_ps: float | None = None,
    num_side_peaks: int = 5,
) -> float:
    """Expected zero-delay over side-peak ratio of :func:`g2_estimator`, by enumeration.

    Every (emitted, surviving, routed) combination is listed with its
    probability; a pair within one pulse contributes E[n_A n_B] and a pair
    across pulses E[n_A] E[n_B]. Without ``lifetime_ps`` the peaks are taken
    as fully separated. With it, each pair's delay spreads by the difference
    of two exponential emission delays, so tails of neighbouring pulses leak
    into every +-T/2 window; the expectation then includes that leakage.
    """
    e_ab, e_a, e_b = _pair_moments(multiphoton_prob, efficiency, split)
    if e_a * e_b <= 0:
        return math.nan
    cross = e_a * e_b
    if lifetime_ps is None:
        return e_ab / cross
    if period_ps is None:
        raise InvalidInputError("period_ps is required together with lifetime_ps")
    reach = num_side_peaks + 4  # farther pulses contribute below 1e-20 at realistic tau / T

    def window(d: int) -> float:
        same = e_ab * _window_mass(-d, lifetime_ps, period_ps)
        other = sum(_window_mass(j - d, lifetime_ps, period_ps) for j in range(-reach, reach + 1) if j != 0)
        return same + cross * other

    side = [window(d) for k in range(1, num_side_peaks + 1) for d in (-k, k)]
    return window(0) / float(np.mean(side))


def calibrate_multiphoton_prob(
    target_g2: float,
    efficiency: float = 0.215,
    tol: float = 1e-9,
    lifetime_ps: float | None = None,
    period_ps: float | None = None,
    num_side_peaks: int = 5,
) -> float:
    """Grid sweep for the p2 whose expected g2 estimate equals ``target_g2``.

    The sweep is refined around the best grid point until the grid spacing
    falls below ``tol``. Pass ``lifetime_ps``/``period_ps`` to account for
    tail leakage between pulses (see :func:`expected_g2_estimate`).
    """
    if not 0.0 <= target_g2 < 1.0:
        raise InvalidInputError(f"target g2 must lie in [0, 1), got {target_g2}")

    def expected(p):
        return expected_g2_estimate(p, efficiency, 0.5, lifetime_ps, period_ps, num_side_peaks)

    lo, hi = 0.0, 1.0
    while True:
        grid = np.linspace(lo, hi, 101)
        err = np.array([abs(expected(p) - target_g2) for p in grid])
        k = int(np.argmin(err))
        step = grid[1] - grid[0]
        if step < tol:
            return float(grid[k])
        lo, hi = max(0.0, grid[k] - step), min(1.0, grid[k] + step)


@dataclass(frozen=True)
class HbtResult:
    estimate: G2Result
    generative_g2: float  # separated-peak value 2 p2 / (1 + p2)^2
    expected_estimate: float  # estimator expectation, tail leakage included
    histogram: CoincidenceHistogram
    tags: TagStream = field(repr=False)


def route_photons(stream, transfer: np.ndarray, seed) -> list[np.ndarray]:
    """Send every photon of a single-input stream to an output according to |U[:, 0]|^2."""
    probs = np.abs(np.asarray(transfer)[:, 0]) ** 2
    probs = probs / probs.sum()
    rng = np.random.default_rng(seed)
    times = stream.photon_pulse_indices() * stream.period_ps + stream.emission_times
    out = rng.choice(len(probs), size=len(times), p=probs)
    return [np.sort(times[out == k]) for k in range(len(probs))]


def simulate_hbt(
    source: SourceModel,
    num_pulses: int,
    seed: int = 0,
    detector: DetectorModel = DetectorModel(),
    num_side_peaks: int = 5,
    bin_width_ps: float = 100.0,
) -> HbtResult:
    """Photons into one input of a balanced MZI, one detector per output."""
    s_src, s_route, s_a, s_b = _seeds(seed, 4)
    stream = generate_pulse_stream(source, num_pulses, s_src)
    arr_a, arr_b = route_photons(stream, BALANCED_MZI, s_route)
    tags_a = simulate_clicks(arr_a, detector, s_a, channel=1, duration_ps=stream.duration_ps)
    tags_b = simulate_clicks(arr_b, detector, s_b, channel=2, duration_ps=stream.duration_ps)
    est = g2_estimator(tags_a, tags_b, source.period_ps, num_side_peaks)
    hist = cross_correlation(tags_a, tags_b, bin_width_ps, (num_side_peaks + 0.5) * source.period_ps)
    expected = expected_g2_estimate(source.multiphoton_prob, source.efficiency * detector.efficiency, 0.5,
                                    source.lifetime_ps, source.period_ps, num_side_peaks)
    return HbtResult(est, generative_g2(source.multiphoton_prob), expected, hist, TagStream.merge([tags_a, tags_b]))


# -- HOM fringe ------------------------------------------------------------------


@dataclass(frozen=True)
class HomScanResult:
    phases: np.ndarray
    pairs: np.ndarray
    coincidences: np.ndarray
    fit: FringeFit
    visibility_in: float


def expected_pair_fraction(source: SourceModel, switch_efficiency: float) -> float:
    """Pairs per source pulse after demultiplexing: half the slots times P(both arms occupied)."""
    eta = source.efficiency * switch_efficiency
    p2 = source.multiphoton_prob
    empty = (1 - p2) * (1 - eta) + p2 * (1 - eta) ** 2
    return 0.5 * (1 - empty) ** 2


def simulate_hom_scan(
    source: SourceModel,
    phases,
    pairs_per_setting: int = 10_000,
    seed: int = 0,
    switch_efficiency: float = 1.0,
    visibility: float | None = None,
) -> HomScanResult:
    """Demultiplexed photon pairs into both MZI inputs while scanning the internal phase.

    For each setting the source runs for the number of pulses that yields
    ``pairs_per_setting`` pairs on average, so the pair number itself
    fluctuates. Only slots with exactly one photon per arm are interfered;
    each gives a cross-output coincidence with the two-photon probability of
    the MZI at that phase for the source's indistinguishability.
    """
    theta = np.asarray(phases, dtype=float)
    v = source.indistinguishability if visibility is None else visibility
    gram = GramMatrix.uniform(2, v)
    frac = expected_pair_fraction(source, switch_efficiency)
    num_pulses = max(2, int(round(pairs_per_setting / frac)))
    seeds = _seeds(seed, 3 * len(theta))
    pairs, coinc = [], []
    for k, th in enumerate(theta):
        stream = generate_pulse_stream(source, num_pulses, seeds[3 * k])
        arm_a, arm_b = demultiplex(stream, switch_efficiency, seeds[3 * k + 1])
        n = int(np.sum((arm_a.photon_counts == 1) & (arm_b.photon_counts == 1)))
        p = output_probability(mzi_unitary(th, 0.0), (1, 2), (1, 2), gram)
        pairs.append(n)
        coinc.append(int(np.random.default_rng(seeds[3 * k + 2]).binomial(n, p)))
    fit = fit_hom_fringe(theta, coinc)
    return HomScanResult(theta, np.array(pairs), np.array(coinc), fit, v)


# -- suppression law -------------------------------------------------------------------


def suppression_law_table(u=None, s: GramMatrix | None = None) -> dict[tuple[int, int], dict]:
    """Output distributions and suppression verdicts for every two-photon anti-bunched input.

    Keys are input mode pairs; each value holds the full distribution, the
    anti-bunched renormalized distribution, and the predicate per output.
    """
    u = dft_unitary(4) if u is None else u
    m = np.asarray(u).shape[0]
    table = {}
    for inp in itertools.combinations(range(1, m + 1), 2):
        full = full_distribution(u, inp, s)
        anti = full_distribution(u, inp, s, collision_free=True, renormalize=True)
        verdict = {c: suppression_predicate(inp, c, m) for c in full}
        table[inp] = {"full": full, "antibunched": anti, "predicate": verdict}
    return table


@dataclass(frozen=True)
class SuppressionCounts:
    input_modes: tuple[int, ...]
    pair_counts: dict[tuple[int, int], int]
    predicted: dict[tuple[int, int], float]  # anti-bunched renormalized

    @property
    def total(self) -> int:
        return sum(self.pair_counts.values())

    def suppressed_fraction(self) -> tuple[float, float]:
        """Observed share of suppressed anti-bunched patterns and its binomial error."""
        n = self.total
        k = sum(c for pair, c in self.pair_counts.items()
                if suppression_predicate(self.input_modes, pair, 4) is Suppression.SUPPRESSED)
        f = k / n if n else math.nan
        return f, math.sqrt(max(f * (1 - f), 1.0 / n) / n) if n else math.nan

    def predicted_suppressed_fraction(self) -> float:
        return sum(p for pair, p in self.predicted.items()
                   if suppression_predicate(self.input_modes, pair, 4) is Suppression.SUPPRESSED)


def simulate_suppression_counts(
    u,
    input_modes,
    s: GramMatrix | None,
    num_pairs: int,
    seed: int = 0,
    detector: DetectorModel = DetectorModel(),
    lifetime_ps: float = 917.0,
    period_ps: float = 1e6 / 72.0,
) -> SuppressionCounts:
    """Photon pairs through the circuit onto four threshold detectors, one pair per time slot.

    Output configurations (collisions included) are drawn from the exact
    distribution; each photon becomes an arrival on the detector of its
    output mode, and per-slot click patterns are counted.
    """
    u = np.asarray(u, dtype=complex)
    m = u.shape[0]
    inp = tuple(sorted(input_modes))
    full = full_distribution(u, inp, s)
    configs = list(full)
    probs = np.array([full[c] for c in configs])
    probs = probs / probs.sum()
    s_draw, s_time, *s_det = _seeds(seed, 2 + m)
    picks = np.random.default_rng(s_draw).choice(len(configs), size=num_pairs, p=probs)
    slot_modes = np.array([configs[i].modes for i in picks])  # (num_pairs, 2)
    emission = np.random.default_rng(s_time).exponential(lifetime_ps, size=slot_modes.shape)
    times = np.arange(num_pairs)[:, None] * period_ps + emission
    streams = []
    for mode in range(1, m + 1):
        t = np.sort(times[slot_modes == mode])
        streams.append(simulate_clicks(t, detector, s_det[mode - 1], channel=mode, duration_ps=num_pairs * period_ps))
    tags = TagStream.merge(streams)
    counts = antibunched_pair_counts(tags, period_ps, channels=range(1, m + 1))
    anti = full_distribution(u, inp, s, collision_free=True, renormalize=True)
    predicted = {c.modes: p for c, p in anti.items()}
    return SuppressionCounts(inp, counts, predicted)


# -- Bell state -------------------------------------------------------------------------


@dataclass(frozen=True)
class BellResult:
    mesh: MeshConfig
    success_probability: float
    model_fidelity: float
    counts: TomographyCounts
    reconstruction: MLEResult
    fidelity: float


def simulate_bell_tomography(
    visibility: float = 1.0,
    shots_per_setting: int = 1000,
    seed: int = 0,
) -> BellResult:
    """psi+ preparation with partially distinguishable photons, nine-setting tomography, MLE."""
    mesh = bell_settings()
    gram = GramMatrix.uniform(2, visibility)
    state, p = postselect_two_qubit(mesh_to_unitary(mesh), gram)
    counts = simulate_tomography_counts(mesh, gram, shots_per_setting, seed)
    rec = mle_reconstruct(counts)
    return BellResult(mesh, p, fidelity(state, PSI_PLUS), counts, rec, fidelity(rec.state, PSI_PLUS))
