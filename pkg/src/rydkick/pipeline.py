"""Command implementations behind the ``rydkick`` CLI.

Every command writes plain CSV (or text) files whose first lines are
``#`` provenance comments: package version, command, sha256 of the
resolved configuration and the seed.  Floats are written with ``repr``
and nothing depends on wall-clock time, so reruns are byte-identical.
"""

import csv
import logging
import os
from functools import cached_property

import numpy as np

from . import __version__
from .analysis import (
    CoherenceAnalyzer,
    modulation_period,
    noise_attenuation,
    p_product_curve,
    wrap_phase,
)
from .errors import ConfigError, TruncationError
from .kick import build_kick_operator, kick_block, physical_column_mask, save_kick_operator
from .measurement import (
    NoiseModel,
    Scenario,
    generate_ensemble,
    read_ensemble_csv,
    write_ensemble_csv,
)
from .radial import solve_basis

log = logging.getLogger(__name__)

COMMANDS = ("basis", "kick", "scan", "hcp-scan", "analyze")


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(path, header_lines, columns, rows):
    with open(path, "w", newline="") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row[c]) for c in columns])


class Simulation:
    """Resolved configuration plus cached radial functions and kick blocks."""

    def __init__(self, config, seed=None, strict=False, command=""):
        self.config = config
        self.seed = config.seed if seed is None else int(seed)
        self.strict = strict
        self.command = command
        self._blocks = {}

    def provenance(self, extra=()):
        lines = [
            f"rydkick {__version__}",
            f"command {self.command}",
            f"config_sha256 {self.config.digest}",
            f"seed {self.seed}",
        ]
        return lines + list(extra)

    @cached_property
    def basis(self):
        return self.config.basis_states

    @cached_property
    def wavefunctions(self):
        log.info("solving %d radial functions", len(self.basis))
        return solve_basis(self.basis, self.config.grid_spec)

    @cached_property
    def packet_columns(self):
        lookup = {s.key: i for i, s in enumerate(self.basis)}
        return np.array([lookup[c.state.key] for c in self.config.packet.components])

    @cached_property
    def channel_rows(self):
        lookup = {s.key: i for i, s in enumerate(self.basis)}
        return np.array([lookup[c.key] for c in self.config.channels])

    def packet_block(self, Q):
        """Kick rows for the channels, columns for the packet states.

        All rows are built so the packet columns' norm deficit can be
        checked against the unitarity tolerance.
        """
        Q = float(Q)
        if Q not in self._blocks:
            everything = np.arange(len(self.basis))
            full = kick_block(
                self.basis, self.wavefunctions, Q, everything, self.packet_columns,
                self.config.L_max,
            )
            deficit = 1.0 - np.sum(np.abs(full) ** 2, axis=0)
            worst = int(np.argmax(np.abs(deficit)))
            state = self.basis[self.packet_columns[worst]]
            if abs(deficit[worst]) > self.config.unitarity_tol:
                msg = (
                    f"kick Q={Q} loses {deficit[worst]:.3e} of the norm of {state}, "
                    f"above unitarity_tol={self.config.unitarity_tol}"
                )
                if self.strict:
                    raise TruncationError(msg, worst_state=state, deficit=float(deficit[worst]))
                log.warning(msg)
            self._blocks[Q] = full[self.channel_rows]
        return self._blocks[Q]

    def scenario(self, kicked=None, tau_hcp=None, Q=None):
        cfg = self.config
        base = Scenario(
            packet=cfg.packet,
            channels=cfg.channels,
            delays=cfg.delays,
            shots=cfg.shots,
            reference=cfg.reference,
            noise=NoiseModel(cfg.relative_rms),
            jitter_periods=cfg.jitter_periods,
        )
        if kicked is None:
            kicked = cfg.hcp_enabled
        if not kicked:
            return base
        Q = cfg.impulse if Q is None else Q
        tau = cfg.tau_hcp if tau_hcp is None else tau_hcp
        return base.with_kick(self.packet_block(Q), tau)

    def analyzer(self):
        return CoherenceAnalyzer(channel_energies=[c.energy for c in self.config.channels])


def _out(directory, name):
    return os.path.join(directory, name)


def run_basis(sim, out_dir):
    basis = sim.basis
    rows = [
        {
            "index": i, "label": s.label, "n": s.n, "l": s.l, "m": s.m,
            "defect": float(s.defect), "n_eff": float(s.n_eff), "energy_au": float(s.energy),
        }
        for i, s in enumerate(basis)
    ]
    write_csv(
        _out(out_dir, "basis.csv"), sim.provenance([f"states {len(basis)}"]),
        list(rows[0]), rows,
    )
    wfs = sim.wavefunctions
    grid = wfs[0].grid
    diag = []
    for i, wf in enumerate(wfs):
        s = wf.state
        diag.append(
            {
                "index": i,
                "label": s.label,
                "norm": float(wf.norm()),
                "mean_r": float(wf.expectation_r(1)),
                "mean_r_hydrogenic": 0.5 * (3 * s.n_eff**2 - s.l * (s.l + 1)),
                "nodes": wf.nodes(),
                "cutoff_r": float(grid.r[wf.cutoff_index]),
            }
        )
    write_csv(
        _out(out_dir, "radial_diagnostics.csv"),
        sim.provenance([f"grid_points {len(grid.s)}", f"r_max {grid.r[-1]!r}"]),
        list(diag[0]), diag,
    )
    return ["basis.csv", "radial_diagnostics.csv"]


def run_kick(sim, out_dir):
    cfg = sim.config
    op = build_kick_operator(
        sim.basis, cfg.impulse, L_max=cfg.L_max, unitarity_tol=cfg.unitarity_tol,
        wavefunctions=sim.wavefunctions, strict=sim.strict,
    )
    extra = [f"impulse_au {cfg.impulse!r}", f"max_physical_deficit {op.max_deficit!r}"]
    save_kick_operator(op, _out(out_dir, "kick_matrix.txt"), sim.provenance())
    physical = physical_column_mask(sim.basis)
    rows = [
        {
            "index": i, "label": s.label, "column_norm": float(norm),
            "deficit": float(1.0 - norm), "physical": int(physical[i]),
        }
        for i, (s, norm) in enumerate(zip(sim.basis, op.column_norms))
    ]
    write_csv(
        _out(out_dir, "unitarity.csv"),
        sim.provenance(extra + [f"unitarity_tol {cfg.unitarity_tol!r}", f"valid {op.valid}"]),
        list(rows[0]), rows,
    )
    if not op.valid:
        log.warning("kick operator exceeds unitarity_tol at %s", op.worst_column)
    return ["kick_matrix.txt", "unitarity.csv"]


def _analysis_files(sim, analyzer, out_dir, prefix, extra):
    corr = analyzer.correlations_
    rows = []
    for d, tau in enumerate(corr.taus):
        for j, k in analyzer.pair_indices_:
            rows.append(
                {"tau_ps": float(tau), "pair": f"{corr.labels[j]}-{corr.labels[k]}",
                 "r": float(corr.r[d, j, k])}
            )
    write_csv(
        _out(out_dir, f"{prefix}correlation.csv"), sim.provenance(extra),
        ["tau_ps", "pair", "r"], rows,
    )
    write_csv(
        _out(out_dir, f"{prefix}summary.csv"), sim.provenance(extra),
        ["pair", "amplitude", "amplitude_err", "phase", "phase_err", "beat_frequency_au"],
        analyzer.summary_rows(),
    )
    return [f"{prefix}correlation.csv", f"{prefix}summary.csv"]


def _scan_header(sim):
    cfg = sim.config
    lines = [f"noise_relative_rms {cfg.relative_rms!r}", f"shots {cfg.shots}"]
    if cfg.hcp_enabled:
        lines += [f"impulse_au {cfg.impulse!r}", f"tau_hcp_ps {cfg.tau_hcp!r}"]
    else:
        lines.append("hcp disabled")
    return lines


def run_scan(sim, out_dir):
    ensemble = generate_ensemble(sim.scenario(), seed=sim.seed)
    extra = _scan_header(sim)
    write_ensemble_csv(ensemble, _out(out_dir, "ensemble.csv"), sim.provenance(extra))
    analyzer = sim.analyzer().fit(ensemble)
    return ["ensemble.csv"] + _analysis_files(sim, analyzer, out_dir, "", extra)


def hcp_scan_table(sim, Q=None):
    """Per-delay fitted amplitudes and phases with the HCP on and off.

    Both runs share one seed, so they see identical jitter and noise.
    Returns ``(rows, curves)`` where ``curves`` maps each pair label to
    arrays of amplitude and p-amplitude product over the HCP delays.
    """
    cfg = sim.config
    Q = cfg.impulse if Q is None else Q
    delays = cfg.hcp_delays
    off = sim.analyzer().fit(generate_ensemble(sim.scenario(kicked=False), seed=sim.seed))
    block = sim.packet_block(Q)
    pairs, products = p_product_curve(delays, cfg.packet, block, cfg.channels)
    labels = [c.label for c in cfg.channels]
    rows = []
    amp = np.empty((len(delays), len(pairs)))
    dphi = np.empty_like(amp)
    for i, tau in enumerate(delays):
        scen = sim.scenario(kicked=True, tau_hcp=float(tau), Q=Q)
        on = sim.analyzer().fit(generate_ensemble(scen, seed=sim.seed))
        for p, (j, k) in enumerate(pairs):
            key = (labels[j], labels[k])
            s_on, s_off = on.series_[key], off.series_[key]
            change = wrap_phase(s_on.fitted_phase - s_off.fitted_phase)
            change_err = float(np.hypot(s_on.phase_err, s_off.phase_err))
            amp[i, p] = s_on.fitted_amplitude
            dphi[i, p] = change
            rows.append(
                {
                    "tau_hcp_ps": float(tau),
                    "pair": f"{key[0]}-{key[1]}",
                    "amplitude": s_on.fitted_amplitude,
                    "amplitude_err": s_on.amplitude_err,
                    "amplitude_off": s_off.fitted_amplitude,
                    "phase": s_on.fitted_phase,
                    "phase_err": s_on.phase_err,
                    "phase_off": s_off.fitted_phase,
                    "phase_change": float(change),
                    "phase_change_err": change_err,
                    "p_product": float(products[i, p]),
                }
            )
    curves = {
        f"{labels[j]}-{labels[k]}": {"amplitude": amp[:, p], "p_product": products[:, p],
                                     "phase_change": dphi[:, p]}
        for p, (j, k) in enumerate(pairs)
    }
    return rows, curves


def hcp_scan_summary(delays, curves):
    """Pearson correlation of amplitude vs p-product per pair, plus periods."""
    rows = []
    for pair, c in curves.items():
        a, pp = c["amplitude"], c["p_product"]
        pearson = float(np.corrcoef(a, pp)[0, 1]) if np.std(a) > 0 and np.std(pp) > 0 else np.nan
        rows.append(
            {
                "pair": pair,
                "pearson_amplitude_vs_p_product": pearson,
                "amplitude_period_ps": modulation_period(delays, a)[0],
                "p_product_period_ps": modulation_period(delays, pp)[0],
            }
        )
    stack_a = np.column_stack([c["amplitude"] for c in curves.values()])
    stack_p = np.column_stack([c["p_product"] for c in curves.values()])
    pooled = {
        "pair": "all",
        "pearson_amplitude_vs_p_product": float(np.corrcoef(stack_a.ravel(), stack_p.ravel())[0, 1]),
        "amplitude_period_ps": modulation_period(delays, stack_a)[0],
        "p_product_period_ps": modulation_period(delays, stack_p)[0],
    }
    return rows + [pooled]


def expected_amplitudes(scenario):
    """Closed-form pair amplitudes (channel x channel) for a scenario."""
    att = noise_attenuation(
        scenario.packet_channel_coefficients(),
        scenario.reference_channel_coefficients(),
        scenario.noise_sigma(),
    )
    return np.outer(att, att)


def selective_decoherence_search(sim, impulses, delays, low=0.2, high=0.5):
    """Screen (Q, tau_hcp) for one channel decohering while the rest survive.

    Uses the closed-form amplitudes.  For each impulse returns the best
    selective point (channel, delay, margin) and the best point where all
    pairs stay above ``high``; a positive margin means the thresholds are
    met with that much room.
    """
    results = []
    n = len(sim.config.channels)
    off_diag = ~np.eye(n, dtype=bool)
    for Q in impulses:
        best_sel = (None, None, -np.inf)
        best_all = (None, -np.inf)
        for tau in delays:
            amps = expected_amplitudes(sim.scenario(kicked=True, tau_hcp=float(tau), Q=Q))
            best_all = max(best_all, (float(tau), float(amps[off_diag].min() - high)),
                           key=lambda x: x[1])
            for c in range(n):
                others = [i for i in range(n) if i != c]
                with_c = amps[c, others]
                rest = amps[np.ix_(others, others)][~np.eye(n - 1, dtype=bool)]
                margin = min(low - with_c.max(), rest.min() - high)
                if margin > best_sel[2]:
                    best_sel = (c, float(tau), float(margin))
        results.append({"impulse": float(Q), "selective": best_sel, "recovered": best_all})
    return results


def run_hcp_scan(sim, out_dir):
    cfg = sim.config
    rows, curves = hcp_scan_table(sim)
    extra = [
        f"impulse_au {cfg.impulse!r}",
        f"noise_relative_rms {cfg.relative_rms!r}",
        f"shots {cfg.shots}",
        "hcp on and off runs share the seed",
    ]
    write_csv(_out(out_dir, "hcp_scan.csv"), sim.provenance(extra), list(rows[0]), rows)
    summary = hcp_scan_summary(cfg.hcp_delays, curves)
    write_csv(
        _out(out_dir, "hcp_scan_summary.csv"), sim.provenance(extra), list(summary[0]), summary
    )
    return ["hcp_scan.csv", "hcp_scan_summary.csv"]


def _check_ensemble_path(path):
    if path is None:
        raise ConfigError("analyze needs --ensemble PATH")
    if not os.path.isfile(path):
        raise ConfigError(f"ensemble file {path} does not exist")


def run_analyze(sim, out_dir, ensemble_path):
    _check_ensemble_path(ensemble_path)
    ensemble = read_ensemble_csv(ensemble_path)
    by_label = {c.label: c.energy for c in sim.config.channels}
    missing = [lab for lab in ensemble.channel_labels if lab not in by_label]
    if missing:
        raise ConfigError(f"ensemble channels {missing} are not configured channels")
    analyzer = CoherenceAnalyzer([by_label[lab] for lab in ensemble.channel_labels])
    analyzer.fit(ensemble)
    extra = [f"ensemble {os.path.basename(ensemble_path)}"]
    return _analysis_files(sim, analyzer, out_dir, "analyzed_", extra)


def run_command(command, config, out_dir=None, seed=None, strict=False, ensemble=None):
    """Run one CLI command; returns the list of files written."""
    if command not in COMMANDS:
        raise ConfigError(f"unknown command '{command}'; choose from {', '.join(COMMANDS)}")
    out_dir = config.output_dir if out_dir is None else out_dir
    sim = Simulation(config, seed=seed, strict=strict, command=command)
    if command == "analyze":
        # validate inputs before anything is written
        _check_ensemble_path(ensemble)
    os.makedirs(out_dir, exist_ok=True)
    if command == "basis":
        files = run_basis(sim, out_dir)
    elif command == "kick":
        files = run_kick(sim, out_dir)
    elif command == "scan":
        files = run_scan(sim, out_dir)
    elif command == "hcp-scan":
        files = run_hcp_scan(sim, out_dir)
    else:
        files = run_analyze(sim, out_dir, ensemble)
    return [_out(out_dir, f) for f in files]
