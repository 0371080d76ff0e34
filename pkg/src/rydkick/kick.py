"""Impulse (sudden) model of a half-cycle pulse kick.

A kick of momentum Q along z multiplies the wavefunction by exp(-i Q z).
Expanding in multipoles,

    exp(-i Q r cos(theta)) = sum_L (-i)**L (2L + 1) j_L(Q r) P_L(cos(theta))

so each matrix element splits into a radial integral of j_L(Q r) and a
Legendre coupling between the angular parts.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.special import spherical_jn

from .angular import angular_coupling
from .basis import BasisState, index_of
from .errors import BasisMismatchError, GridError, TruncationError
from .radial import GridSpec, solve_basis

log = logging.getLogger(__name__)

# Launch manifold of the experiment: n = 28..32, p states.
PHYSICAL_N_WINDOW = (28, 32)
PHYSICAL_L = (1,)

# A bound-state basis always misses the small continuum share (~1e-4 at
# Q = 0.0014 a.u. around n = 30), so tighter defaults are unattainable.
DEFAULT_UNITARITY_TOL = 1e-4


def radial_kick_integral(wf_a, wf_b, L, Q):
    """Integral of u_a(r) j_L(Q r) u_b(r) dr on the shared grid."""
    if L < 0:
        raise ValueError(f"L must be >= 0, got {L}")
    if not wf_a.grid.same_as(wf_b.grid):
        raise GridError(
            f"radial grids of {wf_a.state} and {wf_b.state} differ; "
            "solve both states on a common grid"
        )
    r = wf_a.grid.r
    return wf_a.integrate(wf_a.values * spherical_jn(L, Q * r) * wf_b.values)


@dataclass(frozen=True, eq=False)
class KickOperator:
    """Matrix of <a| exp(-i Q z) |b> over an ordered basis."""

    basis: tuple
    impulse: float
    matrix: np.ndarray
    unitarity_tol: float = DEFAULT_UNITARITY_TOL
    physical_columns: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.physical_columns is None:
            object.__setattr__(
                self, "physical_columns", physical_column_mask(self.basis)
            )

    @property
    def column_norms(self):
        return np.sum(np.abs(self.matrix) ** 2, axis=0)

    @property
    def column_deficits(self):
        """1 - column norm for every column (negative means norm above one)."""
        return 1.0 - self.column_norms

    @property
    def max_deficit(self):
        cols = np.flatnonzero(self.physical_columns)
        if len(cols) == 0:
            return 0.0
        return float(np.max(np.abs(self.column_deficits[cols])))

    @property
    def worst_column(self):
        cols = np.flatnonzero(self.physical_columns)
        if len(cols) == 0:
            return None
        return self.basis[cols[np.argmax(np.abs(self.column_deficits[cols]))]]

    @property
    def valid(self):
        return self.max_deficit < self.unitarity_tol

    def check(self):
        if not self.valid:
            raise TruncationError(
                f"kick operator (Q={self.impulse:g}) is not unitary on the physical "
                f"columns: worst column {self.worst_column} has deficit "
                f"{self.max_deficit:.3e} > {self.unitarity_tol:.1e}; "
                "increase l_max or widen the n window",
                worst_state=self.worst_column,
                deficit=self.max_deficit,
            )
        return self

    def __matmul__(self, amplitudes):
        return self.matrix @ amplitudes

    def save(self, path, header_lines=()):
        save_kick_operator(self, path, header_lines)


def physical_column_mask(basis, n_window=PHYSICAL_N_WINDOW, ls=PHYSICAL_L):
    lo, hi = n_window
    return np.array([lo <= s.n <= hi and s.l in ls for s in basis], dtype=bool)


def build_kick_operator(
    basis,
    Q,
    L_max=None,
    grid_spec=GridSpec(),
    unitarity_tol=DEFAULT_UNITARITY_TOL,
    physical_n_window=PHYSICAL_N_WINDOW,
    physical_l=PHYSICAL_L,
    wavefunctions=None,
    strict=True,
):
    """Assemble the kick matrix for ``basis`` and impulse ``Q`` (a.u.).

    ``L_max`` defaults to ``2 * l_max``, the largest multipole that can
    connect two states of the truncated basis.  With ``strict`` a
    :class:`TruncationError` is raised if any physical column loses more
    than ``unitarity_tol`` of its norm.
    """
    basis = tuple(basis)
    l_max = max(s.l for s in basis)
    if L_max is None:
        L_max = 2 * l_max
    if L_max < l_max:
        raise ValueError(f"L_max={L_max} must be >= l_max={l_max}")
    if wavefunctions is None:
        wavefunctions = solve_basis(basis, grid_spec)
    elif len(wavefunctions) != len(basis):
        raise BasisMismatchError("one wavefunction per basis state is required")
    grid = wavefunctions[0].grid
    for wf in wavefunctions[1:]:
        if not wf.grid.same_as(grid):
            raise GridError("wavefunctions must share one radial grid")

    size = len(basis)
    if Q == 0:
        matrix = np.eye(size, dtype=complex)
    else:
        everything = np.arange(size)
        matrix = kick_block(basis, wavefunctions, Q, everything, everything, L_max)

    op = KickOperator(
        basis=basis,
        impulse=float(Q),
        matrix=matrix,
        unitarity_tol=unitarity_tol,
        physical_columns=physical_column_mask(basis, physical_n_window, physical_l),
    )
    log.debug("kick Q=%g: max physical deficit %.3e (%s)", Q, op.max_deficit, op.worst_column)
    if strict:
        op.check()
    return op


def kick_block(basis, wavefunctions, Q, rows, cols, L_max=None):
    """Sub-block ``U[rows][:, cols]`` of the kick matrix.

    Only (l_a, l_b, L) combinations allowed by the angular selection rules
    are integrated, so a block of a few columns costs a few radial sums.
    """
    rows = np.asarray(rows)
    cols = np.asarray(cols)
    if L_max is None:
        L_max = 2 * max(s.l for s in basis)
    grid = wavefunctions[0].grid
    sqrt_w = np.sqrt(grid.weights)
    u_rows = np.array([wavefunctions[i].values for i in rows]) * sqrt_w
    u_cols = np.array([wavefunctions[i].values for i in cols]) * sqrt_w
    out = np.zeros((len(rows), len(cols)), dtype=complex)
    if Q == 0:
        return _identity_block(basis, rows, cols)
    qr = abs(Q) * grid.r
    parity = 1.0 if Q > 0 else -1.0

    def group(indices):
        groups = {}
        for pos, k in enumerate(indices):
            groups.setdefault((basis[k].l, basis[k].m), []).append(pos)
        return {key: np.array(v) for key, v in groups.items()}

    row_groups = group(rows)
    col_groups = group(cols)
    # exp(-iQz) is complex symmetric in a real basis: fill square blocks once
    square = len(rows) == len(cols) and np.array_equal(rows, cols)
    for L in range(L_max + 1):
        jl = None
        factor = ((-1j) ** L) * (2 * L + 1) * parity**L
        for (la, m), rpos in row_groups.items():
            for (lb, mb), cpos in col_groups.items():
                if mb != m or (square and lb < la):
                    continue
                c = angular_coupling(la, lb, L, m)
                if c == 0.0:
                    continue
                if jl is None:
                    jl = spherical_jn(L, qr)
                radial = (u_rows[rpos] * jl) @ u_cols[cpos].T
                out[np.ix_(rpos, cpos)] += factor * c * radial
                if square and lb != la:
                    out[np.ix_(cpos, rpos)] += factor * c * radial.T
    return out


def _identity_block(basis, rows, cols):
    keys_r = [basis[i].key for i in rows]
    keys_c = [basis[i].key for i in cols]
    return np.array([[1.0 + 0j if a == b else 0j for b in keys_c] for a in keys_r])


def identity_kick(basis):
    basis = tuple(basis)
    return KickOperator(basis=basis, impulse=0.0, matrix=np.eye(len(basis), dtype=complex))


def save_kick_operator(op, path, header_lines=()):
    """Write the operator as text.

    Header lines start with ``#``: any ``header_lines``, impulse, size, then
    one line per basis state ``index n l m defect energy``.  The body holds one matrix row per line
    as ``re im`` pairs in row-major order.
    """
    with open(path, "w") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        fh.write(f"# impulse_au {op.impulse!r}\n")
        fh.write(f"# size {len(op.basis)}\n")
        fh.write("# basis index n l m defect energy_au\n")
        for i, s in enumerate(op.basis):
            fh.write(f"# {i} {s.n} {s.l} {s.m} {s.defect!r} {s.energy!r}\n")
        for row in op.matrix:
            parts = np.column_stack([row.real, row.imag]).ravel()
            fh.write(" ".join(repr(float(x)) for x in parts) + "\n")


def load_kick_operator(path, unitarity_tol=DEFAULT_UNITARITY_TOL):
    impulse = None
    basis = []
    rows = []
    with open(path) as fh:
        for line in fh:
            if line.startswith("#"):
                fields = line[1:].split() or [""]
                if fields[0] == "impulse_au":
                    impulse = float(fields[1])
                elif fields[0].isdigit():
                    _, n, l, m, defect, energy = fields
                    basis.append(BasisState(int(n), int(l), int(m), float(defect), float(energy)))
                continue
            if line.strip():
                vals = np.array(line.split(), dtype=float)
                rows.append(vals[0::2] + 1j * vals[1::2])
    matrix = np.array(rows)
    if matrix.shape != (len(basis), len(basis)):
        raise BasisMismatchError(
            f"matrix shape {matrix.shape} does not match {len(basis)} basis states"
        )
    return KickOperator(tuple(basis), impulse, matrix, unitarity_tol)


def check_same_basis(basis_a, basis_b):
    if len(basis_a) != len(basis_b) or index_of(basis_a) != index_of(basis_b):
        raise BasisMismatchError("wave packet and kick operator use different bases")
