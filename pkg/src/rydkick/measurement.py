"""Simulated state-selective detection: channels, shot noise, shot ensembles."""

import csv
from dataclasses import dataclass, field

import numpy as np

from .basis import index_of
from .errors import BasisMismatchError, ConfigError, DomainError
from .kick import kick_block
from .units import au_to_ps
from .wavepacket import interference_populations, kicked_coefficients


def channel_map(populations, basis, channels):
    """Detector signal per channel: the population of its assigned state.

    ``channels`` is a sequence of basis states (or ``(n, l, m)`` keys).
    Population outside the listed states is not detected.
    """
    lookup = index_of(basis)
    idx = []
    for ch in channels:
        key = getattr(ch, "key", ch)
        if key not in lookup:
            raise BasisMismatchError(f"channel state {key} is not in the basis")
        idx.append(lookup[key])
    return np.asarray(populations)[..., idx]


@dataclass(frozen=True)
class NoiseModel:
    """Additive Gaussian detection noise, independent per channel and shot.

    The standard deviation of channel j is ``relative_rms`` times that
    channel's mean signal without the kick.
    """

    relative_rms: float = 1.0

    def __post_init__(self):
        if not self.relative_rms >= 0:
            raise DomainError(f"relative_rms must be >= 0, got {self.relative_rms}")

    def sigma(self, mean_signals):
        return self.relative_rms * np.asarray(mean_signals, dtype=float)


def add_noise(signals, sigma, rng):
    """Add N(0, sigma_j) to every channel; no clipping at zero."""
    signals = np.asarray(signals, dtype=float)
    return signals + rng.standard_normal(signals.shape) * np.asarray(sigma, dtype=float)


@dataclass(frozen=True, eq=False)
class ShotEnsemble:
    nominal_delays: np.ndarray  # ps
    records: np.ndarray  # (delay, shot, channel)
    channel_labels: tuple
    rng_seed: int
    noise_sigma: np.ndarray = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        records = np.asarray(self.records, dtype=float)
        delays = np.asarray(self.nominal_delays, dtype=float)
        if records.ndim != 3 or records.shape[0] != len(delays):
            raise DomainError(
                f"records shape {records.shape} does not match {len(delays)} delays"
            )
        if records.shape[2] != len(self.channel_labels):
            raise DomainError("one channel label per record column is required")
        object.__setattr__(self, "records", records)
        object.__setattr__(self, "nominal_delays", delays)
        object.__setattr__(self, "channel_labels", tuple(self.channel_labels))

    @property
    def shots_per_delay(self):
        return self.records.shape[1]

    @property
    def shape(self):
        return self.records.shape

    def to_csv(self, path, header_lines=()):
        write_ensemble_csv(self, path, header_lines)


@dataclass(frozen=True)
class Scenario:
    """Everything needed to simulate one delay scan.

    ``kick_block`` holds the kick matrix restricted to channel rows and
    packet columns; ``None`` means no HCP.
    """

    packet: object
    channels: tuple
    delays: np.ndarray
    shots: int = 500
    reference: object = None
    basis: tuple = None
    kick_block: np.ndarray = None
    tau_hcp: float = None
    noise: NoiseModel = NoiseModel()
    jitter_periods: int = 3

    def __post_init__(self):
        if self.reference is None:
            object.__setattr__(self, "reference", self.packet)
        object.__setattr__(self, "channels", tuple(self.channels))
        object.__setattr__(self, "delays", np.asarray(self.delays, dtype=float))
        if self.shots < 2:
            raise ConfigError("at least 2 shots per delay are needed")
        if int(self.jitter_periods) != self.jitter_periods or self.jitter_periods < 1:
            raise ConfigError(
                f"jitter window must be a positive integer number of optical periods, "
                f"got {self.jitter_periods}"
            )
        if self.kick_block is not None:
            if self.tau_hcp is None:
                raise ConfigError("a kick needs tau_hcp")
            if len(self.delays) and self.tau_hcp >= self.delays.min():
                raise ConfigError(
                    f"HCP at {self.tau_hcp} ps must precede the first reference delay "
                    f"{self.delays.min()} ps"
                )

    @property
    def channel_energies(self):
        return np.array([c.energy for c in self.channels])

    def packet_channel_coefficients(self):
        """Rotating-frame amplitudes of packet 1 on the channel states."""
        if self.kick_block is None:
            return _spec_on(self.packet, self.channels)
        col_energy = np.array([c.state.energy for c in self.packet.components])
        return kicked_coefficients(
            self.packet, self.kick_block, (self.channel_energies, col_energy), self.tau_hcp
        )

    def reference_channel_coefficients(self):
        return _spec_on(self.reference, self.channels)

    def unkicked_means(self):
        """Cycle-averaged channel signals without the kick, C_k1^2 + C_k2^2."""
        return (
            np.abs(_spec_on(self.packet, self.channels)) ** 2
            + np.abs(self.reference_channel_coefficients()) ** 2
        )

    def noise_sigma(self):
        return self.noise.sigma(self.unkicked_means())

    def optical_period_ps(self):
        return au_to_ps(2 * np.pi / abs(self.packet.launch_energy - self.packet.mean_energy))

    def with_kick(self, kick_block, tau_hcp):
        return Scenario(
            self.packet, self.channels, self.delays, self.shots, self.reference,
            self.basis, kick_block, tau_hcp, self.noise, self.jitter_periods,
        )

    def without_kick(self):
        return self.with_kick(None, None)


def _spec_on(spec, channels):
    coeffs = {c.state.key: c.amplitude * np.exp(1j * c.phase) for c in spec.components}
    return np.array([coeffs.get(ch.key, 0.0) for ch in channels], dtype=complex)


def packet_kick_block(basis, wavefunctions, Q, packet, channels, L_max=None):
    """Kick matrix rows for ``channels`` and columns for the packet states."""
    lookup = index_of(basis)
    try:
        rows = [lookup[c.key] for c in channels]
        cols = [lookup[c.state.key] for c in packet.components]
    except KeyError as exc:
        raise BasisMismatchError(f"state {exc.args[0]} is not in the basis") from None
    return kick_block(basis, wavefunctions, Q, rows, cols, L_max)


def delay_rng(seed, delay_index):
    """Random stream for one nominal delay, independent of evaluation order."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(delay_index)]))


def generate_ensemble(scenario, seed=0):
    """Simulate ``scenario.shots`` detector records at every nominal delay.

    Each shot draws a reference-delay jitter uniform over an integer number
    of optical periods centred on the nominal delay, so averaging over shots removes the fast fringe and
    keeps the slow beat between states.  Every delay has its own random
    stream, and the draws do not depend on whether a kick is present, so
    kicked and unkicked runs with one seed see identical jitter and noise.
    """
    delays = scenario.delays
    shots = scenario.shots
    packet = scenario.packet_channel_coefficients()
    ref = scenario.reference_channel_coefficients()
    energies = scenario.channel_energies
    sigma = scenario.noise_sigma()
    window = scenario.jitter_periods * scenario.optical_period_ps()

    records = np.empty((len(delays), shots, len(scenario.channels)))
    for d, tau in enumerate(delays):
        rng = delay_rng(seed, d)
        # centred, so the slow beat is sampled at the nominal delay
        jitter = rng.uniform(-window / 2, window / 2, size=shots)
        noise = rng.standard_normal((shots, len(scenario.channels)))
        pops = interference_populations(
            packet, ref, energies, scenario.packet.launch_energy, tau + jitter
        )
        records[d] = pops + noise * sigma
    return ShotEnsemble(
        nominal_delays=delays,
        records=records,
        channel_labels=tuple(c.label for c in scenario.channels),
        rng_seed=int(seed),
        noise_sigma=sigma,
        metadata={
            "tau_hcp_ps": scenario.tau_hcp,
            "jitter_window_ps": window,
        },
    )


def write_ensemble_csv(ensemble, path, header_lines=()):
    """Long-format CSV: tau_ps, shot, channel_label, signal."""
    with open(path, "w", newline="") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["tau_ps", "shot", "channel_label", "signal"])
        labels = ensemble.channel_labels
        for d, tau in enumerate(ensemble.nominal_delays):
            tau_s = repr(float(tau))
            block = ensemble.records[d]
            for shot in range(block.shape[0]):
                for c, label in enumerate(labels):
                    writer.writerow([tau_s, shot, label, repr(float(block[shot, c]))])


def read_ensemble_csv(path):
    """Inverse of :func:`write_ensemble_csv`; ``#`` lines are skipped."""
    with open(path, newline="") as fh:
        rows = csv.DictReader(line for line in fh if not line.startswith("#"))
        taus, shots, labels, values = [], [], [], []
        try:
            for row in rows:
                taus.append(float(row["tau_ps"]))
                shots.append(int(row["shot"]))
                labels.append(row["channel_label"])
                values.append(float(row["signal"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"malformed ensemble CSV {path}: {exc!r}") from None
    if not taus:
        raise ConfigError(f"no records in {path}")
    delay_values = list(dict.fromkeys(taus))
    label_values = list(dict.fromkeys(labels))
    shot_count = max(shots) + 1
    d_index = {t: i for i, t in enumerate(delay_values)}
    c_index = {lab: i for i, lab in enumerate(label_values)}
    records = np.full((len(delay_values), shot_count, len(label_values)), np.nan)
    for t, s, lab, v in zip(taus, shots, labels, values):
        records[d_index[t], s, c_index[lab]] = v
    if np.isnan(records).any():
        raise ConfigError(f"ensemble in {path} has missing (tau, shot, channel) entries")
    return ShotEnsemble(np.array(delay_values), records, tuple(label_values), rng_seed=-1)
