"""Scenario configuration: YAML loading, defaults, validation."""

import copy
import hashlib
import json
from dataclasses import dataclass
from importlib import resources

import numpy as np
import yaml

from .basis import BasisState, build_basis
from .errors import ConfigError, DomainError
from .radial import GridSpec
from .wavepacket import PacketComponent, WavePacketSpec

SECTIONS = ("basis", "packet", "reference", "hcp", "channels", "noise", "scan", "output")


def default_config():
    text = resources.files("rydkick").joinpath("data/default.yaml").read_text()
    return yaml.safe_load(text)


OPTIONAL_KEYS = {"reference", "basis.L_max"}
OPEN_SECTIONS = {"reference", "hcp.presets"}


def _merge(base, override, path=""):
    out = copy.deepcopy(base)
    for key, value in override.items():
        where = f"{path}.{key}" if path else key
        if key not in base and where not in OPTIONAL_KEYS and path not in OPEN_SECTIONS:
            raise ConfigError(f"unknown configuration key '{where}'")
        if isinstance(value, dict) and isinstance(base.get(key), dict):
            out[key] = _merge(base[key], value, where)
        else:
            out[key] = copy.deepcopy(value)
    return out


def grid_values(start, end, step, what):
    if step <= 0:
        raise ConfigError(f"{what}: step must be > 0")
    if end < start:
        raise ConfigError(f"{what}: end {end} < start {start}")
    count = int(np.floor((end - start) / step + 1e-9)) + 1
    # rounding keeps grid values such as 7.2 exact in outputs
    return np.round(start + step * np.arange(count), 12)


@dataclass(frozen=True)
class ScenarioConfig:
    raw: dict
    basis_states: tuple
    grid_spec: GridSpec
    unitarity_tol: float
    L_max: int
    packet: WavePacketSpec
    reference: WavePacketSpec
    channels: tuple
    hcp_enabled: bool
    impulse: float
    tau_hcp: float
    hcp_delays: np.ndarray
    relative_rms: float
    delays: np.ndarray
    shots: int
    jitter_periods: int
    seed: int
    output_dir: str

    @property
    def digest(self):
        blob = json.dumps(self.raw, sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()

    @property
    def defects(self):
        return self.raw["basis"]["defects"]


def _state(entry, defects, where):
    try:
        n = int(entry["n"])
        l = int(entry.get("l", 1))
        m = int(entry.get("m", 0))
    except (KeyError, TypeError, ValueError):
        raise ConfigError(f"{where}: each state needs integer n (and optional l, m)") from None
    try:
        return BasisState.from_defects(n, l, m, defects)
    except DomainError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def _packet(section, defects, where):
    states = section.get("states")
    if not states:
        raise ConfigError(f"{where}.states must list at least one state")
    basis_states = [_state(s, defects, f"{where}.states[{i}]") for i, s in enumerate(states)]
    amps = np.array([float(s.get("amplitude", 1.0)) for s in states])
    phases = [float(s.get("phase", 0.0)) for s in states]
    if np.any(amps < 0):
        raise ConfigError(f"{where}: amplitudes must be >= 0")
    if section.get("normalize", True):
        if not np.any(amps > 0):
            raise ConfigError(f"{where}: all amplitudes are zero")
        amps = amps / np.sqrt(np.sum(amps**2))
    try:
        return WavePacketSpec(
            tuple(PacketComponent(s, float(a), p) for s, a, p in zip(basis_states, amps, phases)),
            float(section["launch_energy"]),
        )
    except DomainError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def parse_config(data):
    """Validate a configuration mapping (merged over the defaults)."""
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a mapping of sections")
    raw = _merge(default_config(), data)

    b = raw["basis"]
    defects = b["defects"]
    try:
        n_min, n_max, l_max, m = int(b["n_min"]), int(b["n_max"]), int(b["l_max"]), int(b["m"])
        states = build_basis(n_min, n_max, l_max, m, defects)
    except (DomainError, TypeError, ValueError) as exc:
        raise ConfigError(f"basis: {exc}") from None
    grid = GridSpec(
        points_per_wavelength=float(b["grid"]["points_per_wavelength"]),
        outer_factor=float(b["grid"]["outer_factor"]),
    )
    if grid.points_per_wavelength < 20:
        raise ConfigError("basis.grid.points_per_wavelength must be >= 20")
    tol = float(b["unitarity_tol"])
    L_max = b.get("L_max")
    L_max = 2 * l_max if L_max is None else int(L_max)
    if L_max < l_max:
        raise ConfigError(f"basis.L_max={L_max} must be >= l_max={l_max}")

    packet = _packet(raw["packet"], defects, "packet")
    ref_section = raw.get("reference")
    if ref_section:
        merged = dict(raw["packet"])
        merged.update(ref_section)
        reference = _packet(merged, defects, "reference")
    else:
        reference = packet

    keys = {s.key for s in states}
    for spec, name in ((packet, "packet"), (reference, "reference")):
        for s in spec.states:
            if s.key not in keys:
                raise ConfigError(f"{name} state {s} is outside the basis")

    ch = raw["channels"]
    if ch == "packet":
        channels = tuple(packet.states)
    elif isinstance(ch, list):
        channels = tuple(_state(c, defects, f"channels[{i}]") for i, c in enumerate(ch))
    else:
        raise ConfigError("channels must be 'packet' or a list of states")
    for c in channels:
        if c.key not in keys:
            raise ConfigError(f"channel state {c} is outside the basis")
        if c.l != 1:
            raise ConfigError(f"channel {c} is not a p state")
    if len({c.key for c in channels}) != len(channels) or len(channels) < 2:
        raise ConfigError("channels must be at least two distinct states")

    h = raw["hcp"]
    enabled = bool(h["enabled"])
    impulse = float(h["impulse"])
    tau_hcp = h["delay_ps"]
    if isinstance(tau_hcp, str):
        if tau_hcp not in h.get("presets", {}):
            raise ConfigError(f"hcp.delay_ps: unknown preset '{tau_hcp}'")
        tau_hcp = h["presets"][tau_hcp]
    tau_hcp = float(tau_hcp)
    ds = h["delay_scan"]
    hcp_delays = grid_values(float(ds["start"]), float(ds["end"]), float(ds["step"]), "hcp.delay_scan")
    if tau_hcp < 0 or hcp_delays.min() < 0:
        raise ConfigError("HCP delays must be >= 0")

    rms = float(raw["noise"]["relative_rms"])
    if not rms >= 0:
        raise ConfigError("noise.relative_rms must be >= 0")

    sc = raw["scan"]
    delays = grid_values(
        float(sc["tau_start_ps"]), float(sc["tau_end_ps"]), float(sc["tau_step_ps"]), "scan"
    )
    if delays.min() < 0:
        raise ConfigError("scan delays must be >= 0")
    shots = int(sc["shots"])
    if shots < 2:
        raise ConfigError("scan.shots must be >= 2")
    jp = sc["jitter_periods"]
    if int(jp) != jp or jp < 1:
        raise ConfigError(
            "scan.jitter_periods must be a positive integer number of optical periods"
        )
    if enabled and tau_hcp >= delays.min():
        raise ConfigError(
            f"hcp.delay_ps={tau_hcp} must be earlier than scan.tau_start_ps={delays.min()}"
        )

    return ScenarioConfig(
        raw=raw,
        basis_states=tuple(states),
        grid_spec=grid,
        unitarity_tol=tol,
        L_max=L_max,
        packet=packet,
        reference=reference,
        channels=channels,
        hcp_enabled=enabled,
        impulse=impulse,
        tau_hcp=tau_hcp,
        hcp_delays=hcp_delays,
        relative_rms=rms,
        delays=delays,
        shots=shots,
        jitter_periods=int(jp),
        seed=int(sc["seed"]),
        output_dir=str(raw["output"]["directory"]),
    )


def load_config(path=None):
    """Read a YAML scenario file; ``None`` gives the shipped defaults."""
    if path is None:
        return parse_config({})
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML in {path}: {exc}") from None
    return parse_config(data)
