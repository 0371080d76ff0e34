"""Quantum-defect basis states for alkali-like Rydberg atoms.

Energies are in hartree with the ionization limit at zero.
"""

from dataclasses import dataclass, field

from .errors import DomainError

# Cesium low-l quantum defects (n ~ 30 limit, fine structure averaged).
# These are literature defaults, not fitted to any particular measurement.
CESIUM_DEFECTS = (4.049, 3.5916, 2.475, 0.0334)

# 7s binding energy of cesium, the launch state of the wave packets.
CESIUM_7S_ENERGY = -0.0586

_L_LETTERS = "spdfghiklmnoqrtuv"


def defect_for(l, defects):
    """Look up the quantum defect for orbital angular momentum ``l``.

    ``defects`` may be a sequence indexed by ``l`` or a mapping; missing
    entries are treated as hydrogenic (zero defect).
    """
    if defects is None:
        return 0.0
    if isinstance(defects, dict):
        return float(defects.get(l, 0.0))
    return float(defects[l]) if l < len(defects) else 0.0


def rydberg_energy(n, l, defects=CESIUM_DEFECTS):
    """Binding energy ``-1 / (2 (n - delta_l)**2)`` in atomic units."""
    if int(n) != n or int(l) != l:
        raise DomainError(f"quantum numbers must be integers, got n={n}, l={l}")
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    if not 0 <= l < n:
        raise DomainError(f"l must satisfy 0 <= l < n, got n={n}, l={l}")
    n_eff = n - defect_for(l, defects)
    if n_eff <= 0:
        raise DomainError(f"effective quantum number {n_eff:.4g} <= 0 for n={n}, l={l}")
    return -0.5 / n_eff**2


@dataclass(frozen=True, order=True)
class BasisState:
    """A single (n, l, m) eigenstate with its quantum-defect energy."""

    n: int
    l: int
    m: int = 0
    defect: float = field(default=0.0, compare=False)
    energy: float = field(default=None, compare=False)

    def __post_init__(self):
        if self.n < 1 or not 0 <= self.l < self.n:
            raise DomainError(f"invalid state n={self.n}, l={self.l}")
        if abs(self.m) > self.l:
            raise DomainError(f"|m| must be <= l, got l={self.l}, m={self.m}")
        if self.n - self.defect <= 0:
            raise DomainError(f"effective quantum number <= 0 for n={self.n}, l={self.l}")
        if self.energy is None:
            object.__setattr__(self, "energy", -0.5 / (self.n - self.defect) ** 2)

    @classmethod
    def from_defects(cls, n, l, m=0, defects=CESIUM_DEFECTS):
        return cls(n, l, m, defect_for(l, defects), rydberg_energy(n, l, defects))

    @property
    def n_eff(self):
        return self.n - self.defect

    @property
    def key(self):
        return (self.n, self.l, self.m)

    @property
    def label(self):
        letter = _L_LETTERS[self.l] if self.l < len(_L_LETTERS) else f"[l={self.l}]"
        return f"{self.n}{letter}"

    def __str__(self):
        return self.label if self.m == 0 else f"{self.label}(m={self.m})"


def build_basis(n_min=10, n_max=150, l_max=8, m=0, defects=CESIUM_DEFECTS):
    """All states with ``n_min <= n <= n_max``, ``|m| <= l <= l_max``.

    States are ordered by ``l`` first, then ``n``, which keeps each
    angular-momentum block contiguous in the kick matrix.
    """
    if n_min < 1 or n_max < n_min:
        raise DomainError(f"bad n window [{n_min}, {n_max}]")
    if l_max < abs(m):
        raise DomainError(f"l_max={l_max} cannot host m={m}")
    states = []
    for l in range(abs(m), l_max + 1):
        for n in range(max(n_min, l + 1), n_max + 1):
            states.append(BasisState.from_defects(n, l, m, defects))
    return states


def index_of(basis):
    """Map ``(n, l, m)`` keys to positions in ``basis``."""
    return {s.key: i for i, s in enumerate(basis)}
