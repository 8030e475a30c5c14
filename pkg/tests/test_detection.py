import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qdpic.circuit import mzi_unitary
from qdpic.detection import (
    DetectorModel,
    TagStream,
    antibunched_pair_counts,
    click_patterns,
    coincidence_histogram,
    cross_correlation,
    fit_hom_fringe,
    fit_lifetime,
    fringe_model,
    g2_estimator,
    read_time_tags,
    simulate_clicks,
    write_time_tags,
)
from qdpic.errors import FitError, InvalidInputError, UndefinedNormalizationError
from qdpic.experiments import expected_g2_estimate, route_photons
from qdpic.interference import mzi_fringe
from qdpic.source import SourceModel, generate_poissonian_stream, generate_pulse_stream

PERIOD = 1e6 / 72


# -- click simulation -----------------------------------------------------------------


def test_ideal_detector_passes_arrivals():
    t = np.array([1.0, 5.0, 9.5, 100.0])
    tags = simulate_clicks(t, DetectorModel(), seed=0, channel=3)
    assert tags.timestamps.tolist() == t.tolist()
    assert set(tags.channels.tolist()) == {3}


def test_dark_counts_poisson():
    tags = simulate_clicks([], DetectorModel(dark_count_rate_hz=1000), seed=1, duration_ps=1e12)
    assert abs(len(tags) - 1000) < 3 * math.sqrt(1000)
    assert np.all(np.diff(tags.timestamps) >= 0)


def test_dead_time_drops_close_arrival():
    tags = simulate_clicks([0.0, 10_000.0], DetectorModel(dead_time_ps=50_000), seed=0)
    assert len(tags) == 1
    # non-paralyzable: a dropped event does not extend the dead window
    tags = simulate_clicks([0.0, 30_000.0, 60_000.0], DetectorModel(dead_time_ps=50_000), seed=0)
    assert tags.timestamps.tolist() == [0.0, 60_000.0]


def test_efficiency_thinning_binomial():
    n = 100_000
    tags = simulate_clicks(np.arange(n, dtype=float), DetectorModel(efficiency=0.3), seed=2)
    assert abs(len(tags) - 0.3 * n) < 4 * math.sqrt(n * 0.21)


def test_jitter_spread():
    t = np.arange(20_000) * 1e4 + 1e4
    tags = simulate_clicks(t, DetectorModel(jitter_sigma_ps=50), seed=3)
    assert np.std(tags.timestamps - t) == pytest.approx(50, rel=0.05)


def test_unsorted_arrivals_rejected():
    with pytest.raises(InvalidInputError):
        simulate_clicks([5.0, 1.0], DetectorModel())


def test_detector_validation():
    with pytest.raises(InvalidInputError):
        DetectorModel(efficiency=1.5)
    with pytest.raises(InvalidInputError):
        DetectorModel(dead_time_ps=-1)


# -- histograms -------------------------------------------------------------------------


def brute_force_histogram(a, b, bin_width, edges):
    counts = np.zeros(len(edges) - 1, dtype=int)
    for x in a:
        for y in b:
            d = y - x
            k = np.searchsorted(edges, d, side="right") - 1
            if 0 <= k < len(counts):
                counts[k] += 1
    return counts


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 500), st.integers(1, 500))
def test_histogram_matches_quadratic_oracle(seed, na, nb):
    rng = np.random.default_rng(seed)
    a = np.sort(rng.uniform(0, 1e5, na))
    b = np.sort(rng.uniform(0, 1e5, nb))
    h = cross_correlation(a, b, 250.0, 3000.0)
    edges = np.append(h.delays_ps - 125.0, h.delays_ps[-1] + 125.0)
    assert np.array_equal(h.counts, brute_force_histogram(a, b, 250.0, edges))
    assert np.allclose(h.delays_ps, -h.delays_ps[::-1])
    assert h.delays_ps[0] <= -3000 and h.delays_ps[-1] >= 3000


def test_single_coincidence_zero_bin():
    h = cross_correlation([1000.0], [1000.0], 100.0, 500.0)
    assert h.total == 1
    assert h.counts[np.argmin(np.abs(h.delays_ps))] == 1


def test_histogram_csv():
    h = cross_correlation([0.0], [10.0], 100.0, 200.0)
    lines = h.to_csv().splitlines()
    assert lines[0] == "delay_ps,count"
    assert len(lines) == len(h.counts) + 1


def test_histogram_rejects_bad_bin_width():
    with pytest.raises(InvalidInputError):
        cross_correlation([0.0], [0.0], 0.0, 10.0)


def test_coincidence_histogram_per_pair():
    tags = TagStream(np.array([1, 2, 3]), np.array([0.0, 5.0, 10.0]))
    hists = coincidence_histogram(tags, 10.0, 50.0)
    assert set(hists) == {(1, 2), (1, 3), (2, 3)}
    assert all(h.total == 1 for h in hists.values())


def test_click_patterns_per_pulse():
    tags = TagStream(np.array([1, 3, 2, 2, 4]), np.array([10.0, 20.0, 110.0, 120.0, 210.0]))
    pats = click_patterns(tags, 100.0)
    assert pats == {(1, 3): 1, (2,): 1, (4,): 1}
    pairs = antibunched_pair_counts(tags, 100.0)
    assert len(pairs) == 6 and pairs[(1, 3)] == 1 and sum(pairs.values()) == 1


# -- g2 ---------------------------------------------------------------------------------------


def _hbt_tags(stream, seed):
    a, b = route_photons(stream, mzi_unitary(np.pi / 2, 0), seed)
    return simulate_clicks(a, channel=1, seed=seed + 1), simulate_clicks(b, channel=2, seed=seed + 2)


def test_g2_zero_for_single_photons():
    # short lifetime: emission tails never reach the +-T/2 window of another pulse
    s = generate_pulse_stream(SourceModel(lifetime_ps=200.0, efficiency=0.5), 200_000, seed=1)
    ta, tb = _hbt_tags(s, 10)
    est = g2_estimator(ta, tb, PERIOD)
    assert est.g2 == 0.0 and est.central_counts == 0
    assert est.error > 0


def test_g2_single_photon_floor_from_tail_leakage():
    # at tau = 917 ps and 72 MHz neighbouring-pulse tails put ~5e-4 into the central window
    source = SourceModel(efficiency=0.5)
    s = generate_pulse_stream(source, 1_000_000, seed=4)
    est = g2_estimator(*_hbt_tags(s, 40), PERIOD)
    floor = expected_g2_estimate(0.0, 0.5, 0.5, source.lifetime_ps, source.period_ps)
    assert floor == pytest.approx(math.exp(-PERIOD / 2 / 917.0), rel=1e-3)
    assert abs(est.g2 - floor) < 3 * est.error


def test_g2_one_for_poissonian_light():
    s = generate_poissonian_stream(0.2, 300_000, seed=2)
    ta, tb = _hbt_tags(s, 20)
    est = g2_estimator(ta, tb, PERIOD)
    assert abs(est.g2 - 1.0) < 2 * est.error
    # side peaks of uncorrelated periodic streams are flat
    side = np.array(est.side_counts)
    assert np.all(np.abs(side - side.mean()) < 3 * np.sqrt(side.mean()))


def test_g2_is_deterministic():
    s = generate_poissonian_stream(0.2, 50_000, seed=3)
    ta, tb = _hbt_tags(s, 30)
    assert g2_estimator(ta, tb, PERIOD) == g2_estimator(ta, tb, PERIOD)


def test_g2_errors():
    with pytest.raises(InvalidInputError):
        g2_estimator([0.0], [0.0], 0.0)
    with pytest.raises(UndefinedNormalizationError):
        g2_estimator([0.0], [1.0], PERIOD)


# -- lifetime fit --------------------------------------------------------------------------


def _lifetime_histogram(tau, sigma, n, seed, width=20.0, t_max=8000.0):
    rng = np.random.default_rng(seed)
    t = rng.exponential(tau, n) + (rng.normal(0, sigma, n) if sigma else 0)
    edges = np.arange(-5 * sigma if sigma else 0.0, t_max + width, width)
    counts, _ = np.histogram(t, bins=edges)
    return edges, counts


def test_lifetime_recovery_no_irf():
    edges, counts = _lifetime_histogram(917.0, 0.0, 1_000_000, seed=1)
    fit = fit_lifetime(edges, counts)
    assert abs(fit.tau_ps - 917.0) < 5.0
    assert fit.tau_error_ps < 5.0


def test_lifetime_recovery_with_irf():
    edges, counts = _lifetime_histogram(1000.0, 100.0, 1_000_000, seed=2)
    fit = fit_lifetime(edges, counts, irf_sigma_ps=100.0)
    assert abs(fit.tau_ps - 1000.0) < 10.0


def test_lifetime_empty_histogram():
    with pytest.raises(FitError):
        fit_lifetime(np.arange(11.0), np.zeros(10))


def test_lifetime_error_scales_as_inverse_sqrt_n():
    sizes = np.array([10_000, 100_000, 1_000_000])
    errs = [fit_lifetime(*_lifetime_histogram(917.0, 0.0, int(n), seed=int(n))).tau_error_ps for n in sizes]
    slope = np.polyfit(np.log10(sizes), np.log10(errs), 1)[0]
    assert abs(slope + 0.5) < 0.05


# -- fringe fit -------------------------------------------------------------------------------


PHASES = np.linspace(0, np.pi, 13)


def test_fringe_fit_noiseless():
    counts = fringe_model(PHASES, 10_000, 0.943)
    fit = fit_hom_fringe(PHASES, counts)
    assert fit.visibility == pytest.approx(0.943, abs=1e-6)
    assert fit.amplitude == pytest.approx(10_000, rel=1e-9)
    assert fit_hom_fringe(PHASES, fringe_model(PHASES, 5000, 1.0)).visibility == pytest.approx(1.0, abs=1e-9)


def test_fringe_fit_with_singles_drift():
    drift = np.linspace(0.8, 1.2, len(PHASES))
    counts = fringe_model(PHASES, 10_000, 0.9) * drift**2
    fit = fit_hom_fringe(PHASES, counts, singles_counts=(1e5 * drift, 2e5 * drift))
    assert fit.visibility == pytest.approx(0.9, abs=1e-9)


def test_fringe_fit_design_errors():
    with pytest.raises(FitError):
        fit_hom_fringe(np.zeros(6), np.ones(6))
    with pytest.raises(InvalidInputError):
        fit_hom_fringe(PHASES[:4], np.ones(4))
    with pytest.raises(InvalidInputError):
        fit_hom_fringe(np.linspace(0, 1.0, 7), np.ones(7))


def test_fringe_fit_poisson_noise_within_quoted_scale():
    rng = np.random.default_rng(5)
    n = 10_000
    fit = fit_hom_fringe(PHASES, rng.binomial(n, mzi_fringe(PHASES, 0.943)))
    assert abs(fit.visibility - 0.943) < 0.011
    assert fit.stderr <= 0.011


def test_fringe_estimate_converges_as_inverse_sqrt_n():
    rng = np.random.default_rng(6)
    sizes = np.array([10_000, 100_000, 1_000_000])
    p = mzi_fringe(PHASES, 0.943)
    rms = []
    for n in sizes:
        est = [fit_hom_fringe(PHASES, rng.binomial(n, p)).visibility for _ in range(400)]
        rms.append(np.sqrt(np.mean((np.array(est) - 0.943) ** 2)))
    slope = np.polyfit(np.log10(sizes), np.log10(rms), 1)[0]
    assert abs(slope + 0.5) < 0.05


# -- tag files ---------------------------------------------------------------------------------


def test_tag_file_round_trip(tmp_path):
    tags = TagStream(np.array([2, 1, 2]), np.array([30.5, 10.0, 20.25]))
    path = tmp_path / "tags.txt"
    write_time_tags(path, tags)
    assert path.read_text().splitlines()[0] == "1\t10.0"
    back = read_time_tags(path)
    assert back.channels.tolist() == [1, 2, 2]
    assert back.timestamps.tolist() == [10.0, 20.25, 30.5]


def test_tag_file_rejects_unsorted(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("1\t10.0\n2\t30.0\n1\t20.0\n")
    with pytest.raises(InvalidInputError, match=":3:"):
        read_time_tags(path)


def test_tag_stream_rejects_negative_times():
    with pytest.raises(InvalidInputError):
        TagStream(np.array([1]), np.array([-1.0]))
