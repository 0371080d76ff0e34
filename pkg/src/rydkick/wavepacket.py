"""Rydberg wave packets: free evolution, impulsive kicks, reference interference.

Amplitudes are stored in the laboratory frame, a_k(t) = c_k exp(-i w_k t),
with t measured from the arrival of the first (launch) packet.  The delayed
reference packet is excited at time tau from the launch state, which has
accumulated the phase exp(-i w_g tau) by then.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .basis import BasisState, index_of
from .errors import BasisMismatchError, DomainError, TruncationError
from .kick import check_same_basis
from .units import ps_to_au


@dataclass(frozen=True)
class PacketComponent:
    state: BasisState
    amplitude: float
    phase: float = 0.0


@dataclass(frozen=True)
class WavePacketSpec:
    """Expansion coefficients C_k exp(i phi_k) of a packet at its excitation.

    ``launch_energy`` is the energy of the launch state (hartree); it sets
    the fast optical fringe of the interference with a delayed copy.
    """

    components: tuple
    launch_energy: float
    norm_tol: float = 1e-12

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))
        if not self.components:
            raise DomainError("a wave packet needs at least one component")
        keys = [c.state.key for c in self.components]
        if len(set(keys)) != len(keys):
            raise DomainError("duplicate states in wave packet spec")
        if any(c.amplitude < 0 for c in self.components):
            raise DomainError("amplitudes must be non-negative; put signs in the phases")
        total = sum(c.amplitude**2 for c in self.components)
        if abs(total - 1.0) > self.norm_tol:
            raise DomainError(f"wave packet spec is not normalized: sum C_k^2 = {total!r}")

    @classmethod
    def equal(cls, states, launch_energy, phases=None):
        """Equal amplitudes 1/sqrt(N); phases default to zero."""
        amp = 1.0 / np.sqrt(len(states))
        if phases is None:
            phases = [0.0] * len(states)
        return cls(
            tuple(PacketComponent(s, amp, float(p)) for s, p in zip(states, phases)),
            launch_energy,
        )

    @classmethod
    def from_weights(cls, states, weights, launch_energy, phases=None):
        """Amplitudes proportional to ``weights``, normalized here."""
        weights = np.asarray(weights, dtype=float)
        amps = weights / np.sqrt(np.sum(weights**2))
        if phases is None:
            phases = np.zeros(len(states))
        return cls(
            tuple(PacketComponent(s, float(a), float(p)) for s, a, p in zip(states, amps, phases)),
            launch_energy,
        )

    @property
    def states(self):
        return tuple(c.state for c in self.components)

    @property
    def mean_energy(self):
        return sum(c.amplitude**2 * c.state.energy for c in self.components)

    def with_phase_offset(self, key, offset):
        """Copy with ``offset`` (radians) added to the phase of state ``key``."""
        if isinstance(key, BasisState):
            key = key.key
        if key not in {c.state.key for c in self.components}:
            raise DomainError(f"state {key} is not part of the packet")
        comps = tuple(
            PacketComponent(c.state, c.amplitude, c.phase + offset) if c.state.key == key else c
            for c in self.components
        )
        return WavePacketSpec(comps, self.launch_energy, self.norm_tol)

    def coefficients(self, basis):
        """Complex vector C_k exp(i phi_k) laid out over ``basis``."""
        lookup = index_of(basis)
        vec = np.zeros(len(basis), dtype=complex)
        for c in self.components:
            try:
                vec[lookup[c.state.key]] = c.amplitude * np.exp(1j * c.phase)
            except KeyError:
                raise BasisMismatchError(f"packet state {c.state} is not in the basis") from None
        return vec


@dataclass(frozen=True, eq=False)
class WavePacket:
    basis: tuple
    amplitudes: np.ndarray
    time: float = 0.0  # ps since the launch packet

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=complex)
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "basis", tuple(self.basis))

    @property
    def energies(self):
        return np.array([s.energy for s in self.basis])

    def norm(self):
        return float(np.sum(np.abs(self.amplitudes) ** 2))

    def populations(self):
        return np.abs(self.amplitudes) ** 2

    def rotating_frame(self):
        """Amplitudes with the free phase exp(-i w_k t) removed."""
        return self.amplitudes * np.exp(1j * self.energies * ps_to_au(self.time))

    def evolve(self, dt):
        return evolve(self, dt)

    def kick(self, operator, strict=False):
        return apply_kick(self, operator, strict=strict)


def initial_wavepacket(spec, basis):
    """Packet at t = 0 with a_k = C_k exp(i phi_k) on the spec components."""
    return WavePacket(tuple(basis), spec.coefficients(basis), 0.0)


def evolve(wp, dt):
    """Free evolution by ``dt`` picoseconds."""
    if dt < 0:
        raise DomainError(f"evolution time must be >= 0, got {dt}")
    phase = np.exp(-1j * wp.energies * ps_to_au(dt))
    return WavePacket(wp.basis, wp.amplitudes * phase, wp.time + dt)


def apply_kick(wp, operator, strict=False):
    """Apply an impulsive kick at the packet's current time.

    A norm change larger than the operator's unitarity tolerance means
    population leaked out of the truncated basis; it is logged as a
    warning, or raised as :class:`TruncationError` with ``strict``.
    """
    check_same_basis(wp.basis, operator.basis)
    before = wp.norm()
    kicked = WavePacket(wp.basis, operator.matrix @ wp.amplitudes, wp.time)
    drift = abs(kicked.norm() - before)
    if drift > operator.unitarity_tol:
        msg = (
            f"kick changed the packet norm by {drift:.3e} "
            f"(tolerance {operator.unitarity_tol:.1e})"
        )
        if strict:
            raise TruncationError(msg, deficit=drift)
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    return kicked


def reference_amplitudes(ref_spec, basis, tau):
    """Lab-frame amplitudes at time ``tau`` of a reference excited at ``tau``."""
    return ref_spec.coefficients(basis) * np.exp(-1j * ref_spec.launch_energy * ps_to_au(tau))


def populations_with_reference(kicked, ref_spec, tau, time_tol=1e-9):
    """State populations after a reference packet is added at delay ``tau``.

    ``kicked`` must already be evolved to ``tau``.  States outside the
    reference keep their own population.
    """
    if tau < 0:
        raise DomainError(f"reference delay must be >= 0, got {tau}")
    if abs(kicked.time - tau) > time_tol:
        raise DomainError(
            f"packet is at t={kicked.time} ps but the reference arrives at {tau} ps"
        )
    total = kicked.amplitudes + reference_amplitudes(ref_spec, kicked.basis, tau)
    return np.abs(total) ** 2


def kicked_coefficients(spec, kick_block, energies, tau_hcp):
    """Rotating-frame amplitudes after a kick at ``tau_hcp``.

    ``kick_block`` maps the packet components (columns, in spec order) onto
    the rows of interest; ``energies`` are the row and column energies.
    Returns a vector over the rows, constant in time after the kick.
    """
    row_energy, col_energy = energies
    t = ps_to_au(tau_hcp)
    coeffs = np.array([c.amplitude * np.exp(1j * c.phase) for c in spec.components])
    return np.exp(1j * row_energy * t) * (kick_block @ (np.exp(-1j * col_energy * t) * coeffs))


def interference_populations(packet_coeffs, ref_coeffs, energies, launch_energy, taus):
    """Vectorized populations |b_k + C_k2 exp(i(phi_k2 - (w_g - w_k) tau))|^2.

    ``packet_coeffs`` and ``ref_coeffs`` are rotating-frame amplitudes over
    the same states; ``taus`` (ps) may have any shape, the state axis is
    appended last.
    """
    t = ps_to_au(np.asarray(taus, dtype=float))[..., None]
    phase = np.exp(-1j * (launch_energy - np.asarray(energies)) * t)
    return np.abs(packet_coeffs + ref_coeffs * phase) ** 2
