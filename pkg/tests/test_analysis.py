import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.base import clone

from rydkick.analysis import (
    CoherenceAnalyzer,
    QuadratureFit,
    analytic_correlation,
    correlation_matrix,
    correlation_standard_error,
    cycle_averaged_moments,
    fit_amplitude_phase,
    fit_beat_frequency,
    modulation_period,
    noise_attenuation,
    ordered_pairs,
    wrap_phase,
)
from rydkick.basis import CESIUM_7S_ENERGY, BasisState
from rydkick.errors import DomainError, FitError
from rydkick.measurement import NoiseModel, Scenario, ShotEnsemble, generate_ensemble
from rydkick.units import ps_to_au
from rydkick.wavepacket import WavePacketSpec, interference_populations

P_STATES = [BasisState.from_defects(n, 1) for n in range(28, 33)]
E = np.array([s.energy for s in P_STATES])
BEAT = E[0] - E[1]
TAUS = np.arange(12.5, 50.0, 0.375)


def test_wrap_phase():
    assert wrap_phase(3 * np.pi / 2) == pytest.approx(-np.pi / 2)
    assert wrap_phase(-np.pi) == pytest.approx(np.pi)


def test_correlation_matrix_matches_numpy(rng):
    rec = rng.normal(size=(4, 30, 3))
    rec[:, :, 1] += 0.5 * rec[:, :, 0]
    corr = correlation_matrix(ShotEnsemble(np.arange(4.0), rec, ("a", "b", "c"), 0))
    for d in range(4):
        assert np.allclose(corr.r[d], np.corrcoef(rec[d].T))


def test_constant_channel_gives_nan():
    rec = np.ones((2, 10, 2))
    rec[:, :, 0] = np.arange(10)
    corr = correlation_matrix(ShotEnsemble(np.arange(2.0), rec, ("a", "b"), 0))
    assert np.isnan(corr.r[0, 0, 1])


def test_jackknife_matches_brute_force(rng):
    rec = rng.normal(size=(2, 12, 2))
    rec[:, :, 1] += rec[:, :, 0]
    ens = ShotEnsemble(np.arange(2.0), rec, ("a", "b"), 0)
    se = correlation_standard_error(ens)
    n = rec.shape[1]
    for d in range(2):
        loo = np.array([np.corrcoef(np.delete(rec[d], i, axis=0).T)[0, 1] for i in range(n)])
        brute = np.sqrt((n - 1) / n * np.sum((loo - loo.mean()) ** 2))
        assert se[d, 0, 1] == pytest.approx(brute, rel=1e-10)


def test_cycle_average_against_dense_jitter_average():
    c1 = np.array([0.6, 0.5 * np.exp(0.4j), 0.62 * np.exp(-1j)])
    c2 = np.array([0.5, 0.7 * np.exp(0.2j), 0.51])
    energies = E[:3]
    tau = 21.0
    period = 2 * np.pi / abs(CESIUM_7S_ENERGY - energies.mean()) / ps_to_au(1.0)
    jitter = np.linspace(0, 3 * period, 60_000, endpoint=False)
    pops = interference_populations(c1, c2, energies, CESIUM_7S_ENERGY, tau + jitter)
    means, cov, fringe = cycle_averaged_moments(c1, c2, energies, tau)
    # the window is whole periods of the mean fringe only, hence ~1e-3 residue
    assert np.allclose(pops.mean(axis=0), means, atol=2e-3)
    assert np.allclose(np.cov(pops.T, bias=True), cov, atol=2e-3)
    assert np.allclose(pops.std(axis=0), fringe, atol=2e-3)


def test_analytic_correlation_from_moments():
    rng = np.random.default_rng(7)
    c1 = rng.uniform(0.3, 0.7, 3) * np.exp(1j * rng.uniform(-3, 3, 3))
    c2 = rng.uniform(0.3, 0.7, 3) * np.exp(1j * rng.uniform(-3, 3, 3))
    sig = rng.uniform(0, 0.5, 3)
    tau = 17.0
    _, cov, fringe = cycle_averaged_moments(c1, c2, E[:3], tau)
    meas = np.sqrt(fringe**2 + sig**2)
    expected = cov / np.outer(meas, meas)
    got = analytic_correlation(c1, c2, E[:3], tau, sig)
    off = ~np.eye(3, dtype=bool)
    assert np.allclose(got[off], expected[off])


def test_attenuation_for_equal_packets():
    # equal packets with sigma_N = 100% of the mean: factor 1/sqrt(3) per channel
    c = np.full(5, 1 / np.sqrt(5))
    att = noise_attenuation(c, c, 2 * np.abs(c) ** 2)
    assert np.allclose(att, 1 / np.sqrt(3))


def test_analytic_correlation_undefined_without_fringe_or_noise():
    with pytest.raises(DomainError):
        analytic_correlation([0.0, 1.0], [1.0, 1.0], E[:2], 10.0)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.05, 1.0), st.floats(-3.0, 3.0))
def test_quadrature_fit_recovers_amplitude_and_phase(amp, phase):
    r = amp * np.cos(phase - BEAT * ps_to_au(TAUS))
    fit = fit_amplitude_phase(TAUS, r, BEAT)
    assert fit.amplitude == pytest.approx(amp, rel=1e-9)
    assert wrap_phase(fit.phase - phase) == pytest.approx(0, abs=1e-9)


def test_quadrature_fit_errors_scale_with_noise(rng):
    r = 0.8 * np.cos(0.3 - BEAT * ps_to_au(TAUS)) + rng.normal(0, 0.05, len(TAUS))
    est = QuadratureFit(BEAT).fit(TAUS, r)
    assert est.amplitude_ == pytest.approx(0.8, abs=4 * est.amplitude_err_)
    assert est.amplitude_err_ == pytest.approx(0.05 * np.sqrt(2 / len(TAUS)), rel=0.3)
    assert np.allclose(est.predict(TAUS), r, atol=0.25)


def test_phase_undefined_at_low_snr(rng):
    r = rng.normal(0, 0.1, len(TAUS))
    est = QuadratureFit(BEAT, snr_threshold=100.0).fit(TAUS, r)
    assert not est.phase_defined_ and np.isnan(est.phase_)


def test_short_scan_rejected():
    taus = np.linspace(12.5, 13.0, 5)
    with pytest.raises(FitError, match="beat period"):
        fit_amplitude_phase(taus, np.ones(5), BEAT)


def test_nan_points_are_skipped():
    r = np.cos(0.2 - BEAT * ps_to_au(TAUS))
    r[::7] = np.nan
    assert fit_amplitude_phase(TAUS, r, BEAT).amplitude == pytest.approx(1.0)


@pytest.mark.parametrize("pair", [(0, 1), (1, 2), (3, 4)])
def test_beat_frequency_search(pair):
    j, k = pair
    w = E[k] - E[j]
    r = 0.4 * np.cos(1.0 - (E[j] - E[k]) * ps_to_au(TAUS))
    found, amp = fit_beat_frequency(TAUS, r)
    assert found == pytest.approx(w, rel=1e-6)
    assert amp == pytest.approx(0.4, rel=1e-6)


def test_modulation_period_of_sinusoids():
    x = np.arange(5, 12, 0.1)
    curves = np.column_stack([np.cos(2 * np.pi * x / 2.9 + p) for p in (0, 1, 2)])
    period, score = modulation_period(x, curves)
    assert period == pytest.approx(2.9, abs=0.01)
    assert score == pytest.approx(1.0, abs=1e-6)


def test_ordered_pairs_by_energy():
    assert ordered_pairs([-1.0, -3.0, -2.0]) == [(1, 2), (1, 0), (2, 0)]


def test_analyzer_end_to_end_noiseless():
    packet = WavePacketSpec.equal(P_STATES, CESIUM_7S_ENERGY, [0, 0.5, 0, 0, 0])
    ref = WavePacketSpec.equal(P_STATES, CESIUM_7S_ENERGY)
    scen = Scenario(packet, P_STATES, TAUS, shots=200, reference=ref, noise=NoiseModel(0.0))
    an = CoherenceAnalyzer(channel_energies=E).fit(generate_ensemble(scen, seed=5))
    assert len(an.pairs_) == 10
    assert np.nanmin(an.amplitudes_) > 0.98
    # 29p carries +0.5 rad in packet 1: Phi(28p,29p) = -0.5, Phi(29p,30p) = +0.5
    assert an.series_[("28p", "29p")].fitted_phase == pytest.approx(-0.5, abs=0.02)
    assert an.series_[("29p", "30p")].fitted_phase == pytest.approx(0.5, abs=0.02)
    rows = an.summary_rows()
    assert set(rows[0]) == {
        "pair", "amplitude", "amplitude_err", "phase", "phase_err", "beat_frequency_au"
    }


def test_estimators_follow_sklearn_conventions():
    est = QuadratureFit(beat_frequency=BEAT, snr_threshold=2.0)
    assert clone(est).get_params() == est.get_params()
    an = CoherenceAnalyzer(channel_energies=list(E))
    assert clone(an).get_params()["channel_energies"] == list(E)


def test_amplitude_does_not_grow_with_noise():
    amps = []
    for rms in (0.0, 0.3, 0.6, 1.0, 1.5):
        scen = Scenario(
            WavePacketSpec.equal(P_STATES[:3], CESIUM_7S_ENERGY), P_STATES[:3], TAUS,
            shots=500, noise=NoiseModel(rms),
        )
        an = CoherenceAnalyzer(channel_energies=E[:3]).fit(generate_ensemble(scen, seed=1))
        amps.append(np.nanmean(an.amplitudes_))
    assert all(b <= a + 0.02 for a, b in zip(amps, amps[1:]))
    # closed form for equal packets: 1 / (1 + 2 rms^2)
    assert amps[-1] == pytest.approx(1 / (1 + 2 * 1.5**2), abs=0.03)
