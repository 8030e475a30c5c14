"""Threshold-detector clicks, time tags and the correlation estimators.

Timestamps are float64 picoseconds. Detectors are non-number-resolving:
two photons arriving together on one channel give a single click.
"""
from __future__ import annotations

import csv
import io
import math
from collections import Counter
from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, NamedTuple, Sequence

import numpy as np
from scipy import optimize, special

from .errors import FitError, InvalidInputError, UndefinedNormalizationError
from .interference import mzi_fringe


class TimeTag(NamedTuple):
    channel: int
    timestamp: float


@dataclass(frozen=True, eq=False)
class TagStream:
    """Time-sorted multi-channel tags stored column-wise."""

    channels: np.ndarray
    timestamps: np.ndarray

    def __post_init__(self):
        ch = np.asarray(self.channels, dtype=np.int64)
        ts = np.asarray(self.timestamps, dtype=float)
        if ch.shape != ts.shape:
            raise InvalidInputError("channels and timestamps differ in length")
        if len(ts) and ts.min() < 0:
            raise InvalidInputError("timestamps must be non-negative")
        order = np.argsort(ts, kind="stable")
        ch, ts = ch[order], ts[order]
        ch.setflags(write=False)
        ts.setflags(write=False)
        object.__setattr__(self, "channels", ch)
        object.__setattr__(self, "timestamps", ts)

    @classmethod
    def single(cls, channel: int, timestamps) -> "TagStream":
        ts = np.asarray(timestamps, dtype=float)
        return cls(np.full(len(ts), channel), ts)

    @classmethod
    def merge(cls, streams: Iterable["TagStream"]) -> "TagStream":
        streams = list(streams)
        if not streams:
            return cls(np.zeros(0, np.int64), np.zeros(0))
        return cls(np.concatenate([s.channels for s in streams]), np.concatenate([s.timestamps for s in streams]))

    def __len__(self) -> int:
        return len(self.timestamps)

    def __iter__(self):
        for c, t in zip(self.channels.tolist(), self.timestamps.tolist()):
            yield TimeTag(c, t)

    def channel(self, ch: int) -> np.ndarray:
        return self.timestamps[self.channels == ch]

    @property
    def channel_ids(self) -> list[int]:
        return sorted(set(self.channels.tolist()))


@dataclass(frozen=True)
class DetectorModel:
    efficiency: float = 1.0
    dark_count_rate_hz: float = 0.0
    jitter_sigma_ps: float = 0.0
    dead_time_ps: float = 0.0

    def __post_init__(self):
        for name in ("efficiency", "dark_count_rate_hz", "jitter_sigma_ps", "dead_time_ps"):
            if getattr(self, name) < 0:
                raise InvalidInputError(f"{name} must be non-negative")
        if self.efficiency > 1:
            raise InvalidInputError(f"efficiency must be <= 1, got {self.efficiency}")


def _dead_time_filter(t: np.ndarray, dead_time: float) -> np.ndarray:
    """Non-paralyzable dead time: drop events closer than dead_time to the last kept click."""
    if dead_time <= 0 or len(t) < 2 or np.all(np.diff(t) >= dead_time):
        return t
    keep = np.ones(len(t), dtype=bool)
    last = -math.inf
    for i, x in enumerate(t.tolist()):
        if x - last < dead_time:
            keep[i] = False
        else:
            last = x
    return t[keep]


def simulate_clicks(
    arrivals,
    detector: DetectorModel = DetectorModel(),
    seed: int | None = None,
    channel: int = 0,
    duration_ps: float | None = None,
) -> TagStream:
    """Photon arrival times (ps) on one detector -> its time tags.

    Photons are kept with probability ``efficiency`` and smeared by Gaussian
    jitter. Dark counts are Poisson over ``[0, duration_ps)`` (default: up to
    the last arrival). Dead time is applied to the merged click train, dark
    counts included. Jittered times below zero are clamped to zero.
    """
    t = np.asarray(arrivals, dtype=float)
    if len(t) > 1 and np.any(np.diff(t) < 0):
        raise InvalidInputError("arrival events must be time-sorted")
    rng = np.random.default_rng(seed)
    if duration_ps is None:
        duration_ps = float(t[-1]) if len(t) else 0.0
    t = t[rng.random(len(t)) < detector.efficiency]
    if detector.jitter_sigma_ps > 0:
        t = np.maximum(t + rng.normal(0.0, detector.jitter_sigma_ps, len(t)), 0.0)
    if detector.dark_count_rate_hz > 0 and duration_ps > 0:
        n_dark = rng.poisson(detector.dark_count_rate_hz * duration_ps * 1e-12)
        t = np.concatenate([t, rng.uniform(0.0, duration_ps, n_dark)])
    t = np.sort(t, kind="stable")
    t = _dead_time_filter(t, detector.dead_time_ps)
    return TagStream.single(channel, t)


def _times(tags) -> np.ndarray:
    if isinstance(tags, TagStream):
        return tags.timestamps
    return np.sort(np.asarray(tags, dtype=float))


def count_pairs_in_window(a: np.ndarray, b: np.ndarray, lo: float, hi: float) -> int:
    """Number of pairs with lo <= t_b - t_a < hi (both inputs sorted)."""
    if len(a) == 0 or len(b) == 0:
        return 0
    return int(np.sum(np.searchsorted(b, a + hi, side="left") - np.searchsorted(b, a + lo, side="left")))


@dataclass(frozen=True)
class G2Result:
    g2: float
    error: float
    central_counts: int
    side_counts: tuple[int, ...]

    @property
    def side_mean(self) -> float:
        return float(np.mean(self.side_counts))


def g2_estimator(tags_a, tags_b, rep_period_ps: float, num_side_peaks: int = 5) -> G2Result:
    """Pulsed g2(0): zero-delay coincidences over the mean of neighbouring-pulse peaks.

    Each peak integrates a full period centred on its delay. The side
    normalization averages the ``2 * num_side_peaks`` peaks at delays
    ``+-1 .. +-num_side_peaks`` periods. Errors are Poisson-propagated; a
    zero central count is assigned an uncertainty of one count.
    """
    if rep_period_ps <= 0:
        raise InvalidInputError(f"repetition period must be positive, got {rep_period_ps}")
    if num_side_peaks < 1:
        raise InvalidInputError("need at least one side peak")
    a, b = _times(tags_a), _times(tags_b)
    half = rep_period_ps / 2.0
    central = count_pairs_in_window(a, b, -half, half)
    side = []
    for k in range(1, num_side_peaks + 1):
        for sgn in (-1, 1):
            d = sgn * k * rep_period_ps
            side.append(count_pairs_in_window(a, b, d - half, d + half))
    side_total = sum(side)
    if side_total == 0:
        raise UndefinedNormalizationError("no side-peak coincidences to normalize against")
    side_mean = side_total / len(side)
    g2 = central / side_mean
    if central > 0:
        err = g2 * math.sqrt(1.0 / central + 1.0 / side_total)
    else:
        err = 1.0 / side_mean
    return G2Result(g2, err, central, tuple(side))


@dataclass(frozen=True)
class LifetimeFit:
    tau_ps: float
    tau_error_ps: float
    amplitude: float
    offset_ps: float
    residual: float  # Poisson deviance per degree of freedom


def _exgauss_cdf(t: np.ndarray, tau: float, sigma: float, t0: float) -> np.ndarray:
    x = t - t0
    if sigma <= 0:
        return np.where(x > 0, -np.expm1(-np.clip(x, 0, None) / tau), 0.0)
    z = x / sigma
    log_tail = -x / tau + sigma**2 / (2 * tau**2) + special.log_ndtr(z - sigma / tau)
    return special.ndtr(z) - np.exp(log_tail)


def _deviance_residuals(mu: np.ndarray, n: np.ndarray) -> np.ndarray:
    mu = np.maximum(mu, 1e-300)
    with np.errstate(divide="ignore", invalid="ignore"):
        term = np.where(n > 0, n * np.log(n / mu), 0.0)
    dev = np.maximum(2.0 * (mu - n + term), 0.0)
    return np.sign(mu - n) * np.sqrt(dev)


def fit_lifetime(
    bin_edges,
    counts,
    irf_sigma_ps: float = 0.0,
    t0_ps: float = 0.0,
    fit_offset: bool = False,
    max_nfev: int = 2000,
) -> LifetimeFit:
    """Single-exponential decay convolved with a Gaussian IRF, fitted to a delay histogram.

    The model is integrated exactly over each bin (exponentially modified
    Gaussian CDF) and fitted by least squares on Poisson deviance residuals.
    """
    edges = np.asarray(bin_edges, dtype=float)
    n = np.asarray(counts, dtype=float)
    if len(n) == 0 or n.sum() <= 0:
        raise FitError("empty lifetime histogram", {"bins": len(n)})
    if len(edges) != len(n) + 1:
        raise InvalidInputError("bin_edges must have one more entry than counts")
    centers = 0.5 * (edges[1:] + edges[:-1])
    tau0 = max(float(np.sum(n * (centers - t0_ps)) / n.sum()), edges[1] - edges[0])

    def model(p):
        tau, amp = p[0], p[1]
        t0 = p[2] if fit_offset else t0_ps
        return amp * np.diff(_exgauss_cdf(edges, tau, irf_sigma_ps, t0))

    p0 = [tau0, n.sum()] + ([t0_ps] if fit_offset else [])
    lower = [1e-3, 0.0] + ([-np.inf] if fit_offset else [])
    res = optimize.least_squares(
        lambda p: _deviance_residuals(model(p), n), p0, bounds=(lower, np.inf),
        x_scale="jac", max_nfev=max_nfev, xtol=1e-12, ftol=1e-12,
    )
    if not res.success or not np.all(np.isfinite(res.x)):
        raise FitError("lifetime fit did not converge", {"status": res.status, "message": res.message, "x": res.x.tolist(), "nfev": res.nfev})
    dof = max(1, len(n) - len(p0))
    try:
        cov = np.linalg.inv(res.jac.T @ res.jac)
        tau_err = float(math.sqrt(max(cov[0, 0], 0.0)))
    except np.linalg.LinAlgError:
        tau_err = math.nan
    return LifetimeFit(
        tau_ps=float(res.x[0]),
        tau_error_ps=tau_err,
        amplitude=float(res.x[1]),
        offset_ps=float(res.x[2]) if fit_offset else t0_ps,
        residual=float(2 * res.cost / dof),
    )


@dataclass(frozen=True)
class FringeFit:
    visibility: float
    stderr: float
    amplitude: float
    chi2: float


def fit_hom_fringe(phases, coincidence_counts, singles_counts: Sequence[Sequence[float]] | None = None) -> FringeFit:
    """Weighted least-squares fit of ``A * mzi_fringe(theta, V)`` to coincidence counts.

    The model is linear in ``(A, A V)`` so the fit is solved in closed form
    with Poisson weights ``1 / max(counts, 1)``. When per-setting singles
    for both detectors are given, counts are first rescaled by the relative
    singles product to remove source-rate drift.
    """
    theta = np.asarray(phases, dtype=float)
    y = np.asarray(coincidence_counts, dtype=float)
    if theta.shape != y.shape:
        raise InvalidInputError("phases and counts differ in length")
    if len(theta) == 0 or np.ptp(theta) == 0:
        raise FitError("degenerate fringe design: all phase settings equal", {"settings": len(theta)})
    if len(theta) < 5:
        raise InvalidInputError(f"need >= 5 phase settings, got {len(theta)}")
    if np.ptp(theta) < np.pi / 2 - 1e-12:
        raise InvalidInputError("phase settings must span at least half a fringe period (pi/2)")
    var = np.maximum(y, 1.0)
    if singles_counts is not None:
        sa, sb = (np.asarray(s, dtype=float) for s in singles_counts)
        norm = sa * sb / np.mean(sa * sb)
        y = y / norm
        var = var / norm**2
    c2 = np.cos(theta) ** 2
    design = np.column_stack([(1 + c2) / 2, (c2 - 1) / 2])  # columns multiply A and A*V
    w = 1.0 / np.sqrt(var)
    X = design * w[:, None]
    coef, *_ = np.linalg.lstsq(X, y * w, rcond=None)
    xtx = X.T @ X
    if np.linalg.cond(xtx) > 1e12:
        raise FitError("degenerate fringe design: visibility not identifiable", {"cond": float(np.linalg.cond(xtx))})
    cov = np.linalg.inv(xtx)
    a, b = coef
    if a <= 0:
        raise FitError("fitted fringe amplitude is not positive", {"amplitude": float(a)})
    v = b / a
    grad = np.array([-b / a**2, 1.0 / a])
    se = float(math.sqrt(max(grad @ cov @ grad, 0.0)))
    chi2 = float(np.sum(((design @ coef - y) * w) ** 2))
    return FringeFit(float(np.clip(v, 0.0, 1.0)), se, float(a), chi2)


def fringe_model(phases, amplitude: float, visibility: float) -> np.ndarray:
    return amplitude * mzi_fringe(np.asarray(phases, dtype=float), visibility)


@dataclass(frozen=True)
class CoincidenceHistogram:
    bin_width_ps: float
    window_ps: float
    delays_ps: np.ndarray  # bin centres, symmetric around zero
    counts: np.ndarray

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["delay_ps", "count"])
        for d, c in zip(self.delays_ps.tolist(), self.counts.tolist()):
            w.writerow([repr(float(d)), int(c)])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


def _bin_edges(bin_width: float, window: float) -> np.ndarray:
    half_bins = int(math.ceil(window / bin_width - 0.5 - 1e-12))
    return (np.arange(-half_bins, half_bins + 2) - 0.5) * bin_width


def cross_correlation(a, b, bin_width_ps: float, window_ps: float) -> CoincidenceHistogram:
    """Histogram of all delays t_b - t_a falling in the symmetric window.

    Every tag of ``a`` acts as a start and every tag of ``b`` as a stop; the
    stop range for each start is located by binary search in the sorted
    ``b`` train. Bins are centred on integer multiples of ``bin_width_ps``
    and cover at least ``[-window_ps, window_ps]``.
    """
    if bin_width_ps <= 0:
        raise InvalidInputError("bin width must be positive")
    a, b = _times(a), _times(b)
    edges = _bin_edges(bin_width_ps, window_ps)
    lo = np.searchsorted(b, a + edges[0], side="left")
    hi = np.searchsorted(b, a + edges[-1], side="left")
    n = hi - lo
    starts = np.repeat(np.arange(len(a)), n)
    stops = np.repeat(lo, n) + _ragged(n)
    delays = b[stops] - a[starts]
    counts, _ = np.histogram(delays, bins=edges)
    return CoincidenceHistogram(bin_width_ps, window_ps, 0.5 * (edges[1:] + edges[:-1]), counts)


def _ragged(counts: np.ndarray) -> np.ndarray:
    total = int(counts.sum())
    if total == 0:
        return np.zeros(0, dtype=np.int64)
    ends = np.cumsum(counts)
    return np.arange(total) - np.repeat(ends - counts, counts)


def coincidence_histogram(
    tags: TagStream, bin_width_ps: float, window_ps: float
) -> dict[tuple[int, int], CoincidenceHistogram]:
    """Cross-correlation histogram for every ordered channel pair (a < b)."""
    ids = tags.channel_ids
    return {
        (i, j): cross_correlation(tags.channel(i), tags.channel(j), bin_width_ps, window_ps)
        for i, j in combinations(ids, 2)
    }


def click_patterns(tags: TagStream, rep_period_ps: float, offset_ps: float = 0.0) -> Counter:
    """Per-pulse sets of clicked channels, counted. Keys are sorted channel tuples."""
    pulse = np.floor((tags.timestamps - offset_ps) / rep_period_ps).astype(np.int64)
    patterns: dict[int, set[int]] = {}
    for p, c in zip(pulse.tolist(), tags.channels.tolist()):
        patterns.setdefault(p, set()).add(c)
    return Counter(tuple(sorted(s)) for s in patterns.values())


def antibunched_pair_counts(
    tags: TagStream, rep_period_ps: float, channels: Sequence[int] = (1, 2, 3, 4), offset_ps: float = 0.0
) -> dict[tuple[int, int], int]:
    """Counts of pulses in which exactly two distinct channels clicked, for every channel pair."""
    pats = click_patterns(tags, rep_period_ps, offset_ps)
    return {pair: int(pats.get(pair, 0)) for pair in combinations(sorted(channels), 2)}


def write_time_tags(path, tags: TagStream) -> None:
    """``channel<TAB>timestamp_ps`` per line, in timestamp order."""
    with open(path, "w") as fh:
        for c, t in zip(tags.channels.tolist(), tags.timestamps.tolist()):
            fh.write(f"{c}\t{t!r}\n")


def read_time_tags(path) -> TagStream:
    channels, stamps = [], []
    last = -math.inf
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 2:
                raise InvalidInputError(f"{path}:{lineno}: expected 'channel<TAB>timestamp_ps'")
            try:
                c, t = int(parts[0]), float(parts[1])
            except ValueError as exc:
                raise InvalidInputError(f"{path}:{lineno}: {exc}") from None
            if t < last:
                raise InvalidInputError(f"{path}:{lineno}: timestamp {t} precedes previous {last}; file is unsorted")
            last = t
            channels.append(c)
            stamps.append(t)
    return TagStream(np.array(channels, dtype=np.int64), np.array(stamps, dtype=float))
