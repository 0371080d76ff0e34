"""Covariance coherence analysis of shot ensembles.

The correlation between two detector channels over shots at one delay,

    r_jk = (<P_j P_k> - <P_j><P_k>) / (sigma_j sigma_k),

oscillates with the reference delay at the beat frequency w_j - w_k.  Its
amplitude measures how much of the j-k coherence survives, its phase the
relative phase of the two states.  Fits use the convention

    r_jk(tau) = A cos(Phi - (w_j - w_k) tau)

with channels ordered so that w_j < w_k.
"""

from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy.optimize import least_squares
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted, column_or_1d

from .errors import DomainError, FitError
from .units import ps_to_au
from .wavepacket import kicked_coefficients


def wrap_phase(phi):
    """Map angles onto (-pi, pi]."""
    wrapped = np.pi - np.mod(np.pi - np.asarray(phi, dtype=float), 2 * np.pi)
    return wrapped if np.ndim(wrapped) else float(wrapped)


@dataclass(frozen=True, eq=False)
class Correlations:
    taus: np.ndarray  # ps
    labels: tuple
    r: np.ndarray  # (delay, channel, channel); NaN where undefined
    sigma: np.ndarray  # (delay, channel)
    shots: int

    @property
    def undefined(self):
        return np.isnan(self.r)

    def pair(self, j, k):
        return self.r[:, j, k]


def correlation_matrix(ensemble):
    """Shot-to-shot correlation of every channel pair at every delay.

    Moments are plain averages over shots.  A channel with zero variance at
    a delay makes its correlations NaN there rather than zero.
    """
    rec = ensemble.records
    if rec.shape[1] < 2:
        raise DomainError("at least 2 shots per delay are needed")
    mean = rec.mean(axis=1)
    centered = rec - mean[:, None, :]
    cov = np.einsum("dsj,dsk->djk", centered, centered) / rec.shape[1]
    var = np.einsum("djj->dj", cov).copy()
    var[var < 0] = 0.0
    sigma = np.sqrt(var)
    denom = sigma[:, :, None] * sigma[:, None, :]
    with np.errstate(invalid="ignore", divide="ignore"):
        r = np.where(denom > 0, cov / denom, np.nan)
    return Correlations(
        taus=np.asarray(ensemble.nominal_delays),
        labels=tuple(ensemble.channel_labels),
        r=r,
        sigma=sigma,
        shots=rec.shape[1],
    )


def correlation_standard_error(ensemble):
    """Jackknife standard error of every r_jk(tau), shape (delay, chan, chan).

    Leave-one-out moments are formed from running sums, so the cost is
    linear in the number of shots.
    """
    x = ensemble.records
    n = x.shape[1]
    s1 = x.sum(axis=1)
    s2 = np.einsum("dsj,dsk->djk", x, x)
    # leave-one-out moments, shot axis kept
    m1 = (s1[:, None, :] - x) / (n - 1)
    m2 = (s2[:, None, :, :] - x[:, :, :, None] * x[:, :, None, :]) / (n - 1)
    cov = m2 - m1[:, :, :, None] * m1[:, :, None, :]
    var = np.einsum("dsjj->dsj", cov)
    with np.errstate(invalid="ignore", divide="ignore"):
        r_loo = cov / np.sqrt(var[:, :, :, None] * var[:, :, None, :])
    spread = r_loo - r_loo.mean(axis=1, keepdims=True)
    return np.sqrt((n - 1) / n * np.sum(spread**2, axis=1))


def cycle_averaged_moments(c1, c2, energies, tau):
    """Closed-form shot moments for interfering packets at delay ``tau``.

    ``c1`` and ``c2`` are rotating-frame amplitudes C exp(i phi) of the two
    packets on the detected states.  Returns the mean signals
    C_j1^2 + C_j2^2, the covariance matrix
    2 C_j1 C_j2 C_k1 C_k2 cos((phi_j1 - phi_k1) - (phi_j2 - phi_k2) - (w_j - w_k) tau)
    and the fringe standard deviations sqrt(2) C_j1 C_j2.
    """
    c1 = np.asarray(c1, dtype=complex)
    c2 = np.asarray(c2, dtype=complex)
    energies = np.asarray(energies, dtype=float)
    means = np.abs(c1) ** 2 + np.abs(c2) ** 2
    mag = np.abs(c1) * np.abs(c2)
    theta = np.angle(c1) - np.angle(c2) - energies * ps_to_au(tau)
    cov = 2.0 * np.outer(mag, mag) * np.cos(theta[:, None] - theta[None, :])
    return means, cov, np.sqrt(2.0) * mag


def noise_attenuation(c1, c2, sigma_noise=None):
    """Per-channel factor sqrt(1 - sigma_N^2 / sigma_meas^2).

    The expected correlation amplitude of pair (j, k) is the product of the
    two channel factors.
    """
    c1 = np.asarray(c1, dtype=complex)
    c2 = np.asarray(c2, dtype=complex)
    if sigma_noise is None:
        sigma_noise = np.zeros(len(c1))
    sigma_noise = np.asarray(sigma_noise, dtype=float)
    fringe = np.sqrt(2.0) * np.abs(c1) * np.abs(c2)
    if np.any((fringe == 0) & (sigma_noise == 0)):
        raise DomainError("correlation undefined for a channel with no fringe and no noise")
    measured_var = fringe**2 + sigma_noise**2
    return np.sqrt(1.0 - sigma_noise**2 / measured_var)


def analytic_correlation(c1, c2, energies, tau, sigma_noise=None):
    """Expected r_jk at delay ``tau`` including additive detection noise.

    Without noise this is cos((phi_j1 - phi_k1) - (phi_j2 - phi_k2) -
    (w_j - w_k) tau).  Noise of standard deviation sigma_N,j attenuates it
    by sqrt((1 - sigma_Nj^2 / sigma_j,meas^2)(1 - sigma_Nk^2 / sigma_k,meas^2))
    with sigma_meas^2 = sigma^2 + sigma_N^2.
    """
    c1 = np.asarray(c1, dtype=complex)
    c2 = np.asarray(c2, dtype=complex)
    energies = np.asarray(energies, dtype=float)
    attenuation = noise_attenuation(c1, c2, sigma_noise)
    theta = np.angle(c1) - np.angle(c2)
    tau = np.asarray(tau, dtype=float)
    t = ps_to_au(tau)[..., None]
    arg = theta - energies * t
    r = np.cos(arg[..., :, None] - arg[..., None, :])
    return r * attenuation[:, None] * attenuation[None, :]


class QuadratureFit(BaseEstimator, RegressorMixin):
    """Least-squares fit of r(tau) = A cos(Phi - w tau) at a known beat w.

    Parameters
    ----------
    beat_frequency : float
        w_j - w_k in atomic units.
    min_periods : float
        Minimum span of the delay scan, in beat periods.
    snr_threshold : float
        The phase is reported as undefined (NaN) when the amplitude is not
        larger than ``snr_threshold`` times its standard error.
    """

    def __init__(self, beat_frequency=1e-4, min_periods=1.0, snr_threshold=3.0):
        self.beat_frequency = beat_frequency
        self.min_periods = min_periods
        self.snr_threshold = snr_threshold

    def _design(self, taus):
        wt = self.beat_frequency * ps_to_au(taus)
        return np.column_stack([np.cos(wt), np.sin(wt)])

    def fit(self, X, y):
        taus = column_or_1d(np.asarray(X, dtype=float))
        r = column_or_1d(np.asarray(y, dtype=float))
        if len(taus) != len(r):
            raise ValueError("X and y have different lengths")
        keep = np.isfinite(r)
        taus, r = taus[keep], r[keep]
        if self.beat_frequency == 0:
            raise FitError("beat frequency must be nonzero")
        period_ps = 2 * np.pi / abs(self.beat_frequency) / ps_to_au(1.0)
        if len(taus) < 3 or np.ptp(taus) < self.min_periods * period_ps:
            raise FitError(
                f"delay span {np.ptp(taus) if len(taus) else 0:.3g} ps covers less than "
                f"{self.min_periods} beat period(s) of {period_ps:.3g} ps"
            )
        design = self._design(taus)
        coef, *_ = np.linalg.lstsq(design, r, rcond=None)
        resid = r - design @ coef
        dof = max(len(r) - 2, 1)
        try:
            cov = np.linalg.inv(design.T @ design) * (resid @ resid) / dof
        except np.linalg.LinAlgError:
            raise FitError("quadrature fit is singular; delays alias the beat") from None
        c, s = coef
        amp = float(np.hypot(c, s))
        if amp > 0:
            grad_a = np.array([c, s]) / amp
            grad_p = np.array([-s, c]) / amp**2
            amp_err = float(np.sqrt(max(grad_a @ cov @ grad_a, 0.0)))
            phase_err = float(np.sqrt(max(grad_p @ cov @ grad_p, 0.0)))
        else:
            amp_err = float(np.sqrt(max(np.trace(cov) / 2, 0.0)))
            phase_err = np.nan
        self.coef_ = coef
        self.covariance_ = cov
        self.amplitude_ = amp
        self.amplitude_err_ = amp_err
        self.phase_defined_ = bool(amp > 0 and amp > self.snr_threshold * amp_err)
        self.phase_ = float(np.arctan2(s, c)) if self.phase_defined_ else np.nan
        self.phase_err_ = phase_err if self.phase_defined_ else np.nan
        self.raw_phase_ = float(np.arctan2(s, c)) if amp > 0 else np.nan
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        taus = column_or_1d(np.asarray(X, dtype=float))
        return self._design(taus) @ self.coef_


@dataclass(frozen=True)
class FitResult:
    amplitude: float
    phase: float
    amplitude_err: float
    phase_err: float
    beat_frequency: float
    phase_defined: bool
    raw_phase: float = np.nan


def fit_amplitude_phase(taus, r, beat, min_periods=1.0, snr_threshold=3.0):
    """Amplitude and phase of r(tau) = A cos(Phi - beat tau)."""
    est = QuadratureFit(beat, min_periods, snr_threshold).fit(taus, r)
    return FitResult(
        est.amplitude_, est.phase_, est.amplitude_err_, est.phase_err_,
        float(beat), est.phase_defined_, est.raw_phase_,
    )


def fit_beat_frequency(taus, r, omega_range=None, grid_points=4000):
    """Estimate the oscillation frequency of r(tau) with no prior value.

    A least-squares periodogram over ``omega_range`` (a.u.; by default from
    one cycle per scan up to the sampling Nyquist limit) locates the peak,
    then a nonlinear fit of A cos(w tau) + B sin(w tau) refines it.
    Returns ``(omega, amplitude)`` with ``omega > 0``.
    """
    taus = np.asarray(taus, dtype=float)
    r = np.asarray(r, dtype=float)
    keep = np.isfinite(r)
    taus, r = taus[keep], r[keep]
    t = ps_to_au(taus)
    if omega_range is None:
        step = np.min(np.diff(np.sort(t)))
        omega_range = (2 * np.pi / np.ptp(t), np.pi / step)
    omegas = np.linspace(*omega_range, grid_points)
    best, best_rss = None, np.inf
    for w in omegas:
        design = np.column_stack([np.cos(w * t), np.sin(w * t)])
        coef, *_ = np.linalg.lstsq(design, r, rcond=None)
        rss = np.sum((r - design @ coef) ** 2)
        if rss < best_rss:
            best, best_rss = (w, coef), rss
    w0, (c0, s0) = best

    def resid(p):
        c, s, w = p
        return c * np.cos(w * t) + s * np.sin(w * t) - r

    sol = least_squares(resid, [c0, s0, w0], x_scale=[1.0, 1.0, w0])
    c, s, w = sol.x
    if w < 0:
        w, s = -w, -s
    return float(w), float(np.hypot(c, s))


@dataclass(frozen=True, eq=False)
class CorrelationSeries:
    pair: tuple
    taus: np.ndarray
    r_values: np.ndarray
    sigma_j: np.ndarray
    sigma_k: np.ndarray
    fitted_amplitude: float
    fitted_phase: float
    amplitude_err: float
    phase_err: float
    beat_frequency: float
    raw_phase: float = np.nan


def ordered_pairs(energies):
    """Channel index pairs (j, k) with w_j < w_k."""
    order = np.argsort(energies, kind="stable")
    return [(int(j), int(k)) for j, k in combinations(order, 2)]


class CoherenceAnalyzer(BaseEstimator):
    """Correlation matrix plus per-pair amplitude/phase fits for an ensemble.

    ``channel_energies`` (hartree, one per ensemble channel) fix the beat
    frequency of every pair.
    """

    def __init__(self, channel_energies=None, min_periods=1.0, snr_threshold=3.0):
        self.channel_energies = channel_energies
        self.min_periods = min_periods
        self.snr_threshold = snr_threshold

    def fit(self, ensemble, y=None):
        energies = np.asarray(self.channel_energies, dtype=float)
        if len(energies) != len(ensemble.channel_labels):
            raise ValueError("one energy per ensemble channel is required")
        corr = correlation_matrix(ensemble)
        pairs = ordered_pairs(energies)
        n = len(energies)
        amplitudes = np.full((n, n), np.nan)
        phases = np.full((n, n), np.nan)
        series = {}
        for j, k in pairs:
            beat = energies[j] - energies[k]
            fit = fit_amplitude_phase(
                corr.taus, corr.r[:, j, k], beat, self.min_periods, self.snr_threshold
            )
            key = (corr.labels[j], corr.labels[k])
            series[key] = CorrelationSeries(
                pair=key,
                taus=corr.taus,
                r_values=corr.r[:, j, k],
                sigma_j=corr.sigma[:, j],
                sigma_k=corr.sigma[:, k],
                fitted_amplitude=fit.amplitude,
                fitted_phase=fit.phase,
                amplitude_err=fit.amplitude_err,
                phase_err=fit.phase_err,
                beat_frequency=beat,
                raw_phase=fit.raw_phase,
            )
            amplitudes[j, k] = amplitudes[k, j] = fit.amplitude
            phases[j, k] = fit.phase
            phases[k, j] = -fit.phase
        self.correlations_ = corr
        self.pairs_ = [(corr.labels[j], corr.labels[k]) for j, k in pairs]
        self.pair_indices_ = pairs
        self.series_ = series
        self.amplitudes_ = amplitudes
        self.phases_ = phases
        return self

    def summary_rows(self):
        check_is_fitted(self, "series_")
        rows = []
        for key in self.pairs_:
            s = self.series_[key]
            rows.append(
                {
                    "pair": f"{key[0]}-{key[1]}",
                    "amplitude": s.fitted_amplitude,
                    "amplitude_err": s.amplitude_err,
                    "phase": s.fitted_phase,
                    "phase_err": s.phase_err,
                    "beat_frequency_au": float(s.beat_frequency),
                }
            )
        return rows


def p_product_curve(kick_delays, packet, kick_block, channels):
    """Surviving p-amplitude products |b_j||b_k| / (C_j1 C_k1) vs kick delay.

    ``kick_block`` maps packet components onto the channel states.  Returns
    ``(pairs, curves)`` with ``curves`` shaped (delay, pair) and pairs
    ordered as in :func:`ordered_pairs`.
    """
    energies = np.array([c.energy for c in channels])
    col_energy = np.array([c.state.energy for c in packet.components])
    base = {c.state.key: c.amplitude for c in packet.components}
    unkicked = np.array([base.get(ch.key, 0.0) for ch in channels])
    pairs = ordered_pairs(energies)
    curves = np.empty((len(kick_delays), len(pairs)))
    for i, tau in enumerate(kick_delays):
        b = np.abs(kicked_coefficients(packet, kick_block, (energies, col_energy), tau))
        for p, (j, k) in enumerate(pairs):
            curves[i, p] = b[j] * b[k] / (unkicked[j] * unkicked[k])
    return pairs, curves


def modulation_period(x, curves, periods=None):
    """Dominant period shared by a set of curves sampled at ``x``.

    Each curve is standardized, fitted by offset + sinusoid at every trial
    period, and the explained variance is averaged over curves; the best
    trial period is returned with its pooled explained-variance fraction.
    """
    x = np.asarray(x, dtype=float)
    curves = np.atleast_2d(np.asarray(curves, dtype=float))
    if curves.shape[0] != len(x):
        curves = curves.T
    if periods is None:
        span = np.ptp(x)
        step = np.min(np.diff(x))
        periods = np.linspace(4 * step, span, 2000)
    z = curves - curves.mean(axis=0)
    scale = z.std(axis=0)
    z = z[:, scale > 0] / scale[scale > 0]
    best = (np.nan, -np.inf)
    for per in periods:
        w = 2 * np.pi / per
        design = np.column_stack([np.ones_like(x), np.cos(w * x), np.sin(w * x)])
        coef, *_ = np.linalg.lstsq(design, z, rcond=None)
        explained = 1 - np.sum((design @ coef - z) ** 2, axis=0) / np.sum(z**2, axis=0)
        score = float(np.mean(explained))
        if score > best[1]:
            best = (float(per), score)
    return best
