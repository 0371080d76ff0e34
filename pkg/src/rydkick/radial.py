"""Numerov solutions of the Coulomb radial equation at quantum-defect energies.

The radial function u(r) = r R(r) is integrated on a grid that is uniform
in s = sqrt(r).  With u(r) = s**0.5 * chi(s) the equation becomes

    chi''(s) = [-8 - 8 E s**2 + (2l + 1/2)(2l + 3/2) / s**2] chi(s)

which has no first-derivative term and a local wavenumber bounded by
sqrt(8) for every bound state, so a fixed step resolves all of them.
"""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import GridError, SolverError

_K_MAX = np.sqrt(8.0)


@dataclass(frozen=True)
class GridSpec:
    points_per_wavelength: float = 200.0
    outer_factor: float = 2.5
    # e-foldings of decay beyond the outer turning point before the
    # inward integration starts
    decay_efolds: float = 25.0


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Uniform grid in s = sqrt(r) with trapezoid weights dr = 2 s ds."""

    s: np.ndarray
    step: float

    @property
    def r(self):
        return self.s**2

    @property
    def weights(self):
        w = 2.0 * self.s * self.step
        w = w.copy()
        w[0] *= 0.5
        w[-1] *= 0.5
        return w

    def __len__(self):
        return len(self.s)

    def same_as(self, other, rtol=1e-12):
        return (
            len(self) == len(other)
            and abs(self.step - other.step) <= rtol * self.step
            and abs(self.s[0] - other.s[0]) <= rtol * max(self.s[0], self.step)
        )


@dataclass(frozen=True, eq=False)
class RadialWavefunction:
    state: object
    grid: RadialGrid
    values: np.ndarray
    # index below which the inward solution was cut off and set to zero
    cutoff_index: int = 0

    @property
    def r(self):
        return self.grid.r

    def integrate(self, integrand):
        return float(np.dot(self.grid.weights, integrand))

    def norm(self):
        return self.integrate(self.values**2)

    def expectation_r(self, power=1):
        return self.integrate(self.values**2 * self.r**power)

    def nodes(self, rel_threshold=1e-6):
        """Sign changes of u, ignoring tail samples below ``rel_threshold`` of peak."""
        u = self.values
        big = u[np.abs(u) > rel_threshold * np.max(np.abs(u))]
        return int(np.count_nonzero(np.signbit(big[1:]) != np.signbit(big[:-1])))


def _decay_radius(n_eff, efolds):
    """Radius beyond r = 2 n*^2 where the WKB tail has decayed by ``efolds``.

    Uses the l = 0 decay constant kappa = sqrt(1/n*^2 - 2/r), whose integral
    from the turning point is 2 n* [sqrt(X(1+X)) - asinh(sqrt X)] with
    r = 2 n*^2 (1 + X).
    """

    def excess(x):
        return 2.0 * n_eff * (np.sqrt(x * (1 + x)) - np.arcsinh(np.sqrt(x))) - efolds

    hi = 1.0
    while excess(hi) < 0:
        hi *= 2.0
    x = brentq(excess, 0.0, hi, xtol=1e-10)
    return 2.0 * n_eff**2 * (1.0 + x)


def required_extent(states, spec=GridSpec()):
    n_eff_max = max(s.n_eff for s in states)
    return max(spec.outer_factor * n_eff_max**2, _decay_radius(n_eff_max, spec.decay_efolds))


def make_grid(states, spec=GridSpec()):
    """Common grid that hosts every state in ``states``."""
    if spec.points_per_wavelength < 20:
        raise GridError("points_per_wavelength must be >= 20")
    step = 2.0 * np.pi / (_K_MAX * spec.points_per_wavelength)
    s_max = np.sqrt(required_extent(states, spec))
    count = int(np.ceil(s_max / step))
    s = step * np.arange(1, count + 1)
    return RadialGrid(s=s, step=step)


def _integrate_inward(states, grid, spec):
    """Inward Numerov integration of chi(s) for many states at once.

    Returns the unnormalized chi array (one row per state) and the cutoff
    index of each row.
    """
    s = grid.s
    h = grid.step
    count = len(states)
    energy = np.array([st.energy for st in states])
    centrifugal = np.array([(2 * st.l + 0.5) * (2 * st.l + 1.5) for st in states])
    r_start = np.array([_decay_radius(st.n_eff, spec.decay_efolds) for st in states])
    start = np.minimum(np.searchsorted(s, np.sqrt(r_start)), len(s) - 1)

    def q_at(i):
        return -8.0 - 8.0 * energy * s[i] ** 2 + centrifugal / s[i] ** 2

    # innermost classically allowed point of the chi equation, per state
    q_all = -8.0 - 8.0 * np.outer(energy, s**2) + np.outer(centrifugal, 1.0 / s**2)
    allowed = q_all < 0
    allowed &= np.arange(len(s))[None, :] <= start[:, None]
    if not allowed.any(axis=1).all():
        bad = states[int(np.flatnonzero(~allowed.any(axis=1))[0])]
        raise SolverError(
            f"no classically allowed region for {bad}",
            r_min=s[0] ** 2, r_max=s[-1] ** 2, energy=bad.energy,
        )
    inner = np.argmax(allowed, axis=1)
    del q_all, allowed

    rows = np.arange(count)
    chi = np.zeros((count, len(s)))
    chi[rows, start] = 1e-30
    has_prev = start >= 1
    chi[rows[has_prev], start[has_prev] - 1] = 1e-30 * np.exp(
        np.sqrt(np.maximum(q_at(start), 0.0))[has_prev] * h
    )
    cutoff = np.zeros(count, dtype=int)
    running = np.ones(count, dtype=bool)

    for i in range(int(start.max()) - 1, 0, -1):
        f_i = 1.0 - h * h / 12.0 * q_at(i)
        f_ip1 = 1.0 - h * h / 12.0 * q_at(i + 1)
        f_im1 = 1.0 - h * h / 12.0 * q_at(i - 1)
        active = running & (i <= start - 1)
        if not active.any():
            continue
        new = ((12.0 - 10.0 * f_i) * chi[:, i] - f_ip1 * chi[:, i + 1]) / f_im1
        stop = active & (i - 1 < inner) & (
            (np.abs(new) > np.abs(chi[:, i])) | (np.signbit(new) != np.signbit(chi[:, i]))
        )
        cutoff[stop] = i
        running &= ~stop
        write = active & ~stop
        chi[write, i - 1] = new[write]
    return chi, cutoff


def _finish(states, grid, chi, cutoff):
    u = np.sqrt(grid.s)[None, :] * chi
    if not np.all(np.isfinite(u)):
        bad = states[int(np.flatnonzero(~np.isfinite(u).all(axis=1))[0])]
        raise SolverError(
            f"non-finite values integrating {bad}",
            r_min=grid.r[0], r_max=grid.r[-1], energy=bad.energy,
        )
    norm = u**2 @ grid.weights
    if not np.all(norm > 0):
        bad = states[int(np.flatnonzero(~(norm > 0))[0])]
        raise SolverError(
            f"zero norm for {bad}", r_min=grid.r[0], r_max=grid.r[-1], energy=bad.energy
        )
    u /= np.sqrt(norm)[:, None]
    # sign convention: innermost significant lobe positive, so that equal
    # expansion phases describe a packet launched from the core
    big = np.abs(u) > 1e-2 * np.max(np.abs(u), axis=1, keepdims=True)
    first = np.argmax(big, axis=1)
    u *= np.sign(u[np.arange(len(states)), first])[:, None]
    return [
        RadialWavefunction(state=st, grid=grid, values=u[k], cutoff_index=int(cutoff[k]))
        for k, st in enumerate(states)
    ]


def _check_extent(states, grid):
    for st in states:
        if grid.r[-1] <= 2.0 * st.n_eff**2:
            raise SolverError(
                f"grid does not reach the outer turning point of {st}",
                r_min=grid.r[0], r_max=grid.r[-1], energy=st.energy,
            )


def solve_radial(state, grid=None, spec=GridSpec()):
    """Normalized u(r) for ``state`` by inward Numerov integration.

    Integration starts deep in the outer forbidden region, where any
    error in the starting values decays away, and runs inward.  Inside
    the inner turning point the solution is cut at the first point where
    it starts growing again (the irregular Coulomb solution taking over)
    and set to zero below it.
    """
    if grid is None:
        grid = make_grid([state], spec)
    _check_extent([state], grid)
    chi, cutoff = _integrate_inward([state], grid, spec)
    return _finish([state], grid, chi, cutoff)[0]


def solve_basis(states, spec=GridSpec(), orthonormalize=True):
    """Radial functions for every state on one shared grid.

    Cutting the inward solutions off near the core leaves same-l states
    with overlaps of order 1e-4.  With ``orthonormalize`` each l block is
    replaced by its symmetric (Lowdin) orthonormalization, the closest
    orthonormal set in the least-squares sense.
    """
    grid = make_grid(states, spec)
    _check_extent(states, grid)
    chi, cutoff = _integrate_inward(states, grid, spec)
    wfs = _finish(states, grid, chi, cutoff)
    if not orthonormalize:
        return wfs
    sqrt_w = np.sqrt(grid.weights)
    # radial functions do not depend on m, so each (l, m) block is separate
    for l, m in sorted({(st.l, st.m) for st in states}):
        idx = [i for i, st in enumerate(states) if st.l == l and st.m == m]
        u = np.array([wfs[i].values for i in idx])
        overlap = (u * sqrt_w) @ (u * sqrt_w).T
        evals, evecs = np.linalg.eigh(overlap)
        if evals.min() <= 0.5:
            raise SolverError(
                f"(l, m)=({l}, {m}) block is nearly linearly dependent (min eigenvalue {evals.min():.3g})",
                r_min=grid.r[0], r_max=grid.r[-1],
            )
        inv_sqrt = (evecs / np.sqrt(evals)) @ evecs.T
        u_orth = inv_sqrt @ u
        for row, i in enumerate(idx):
            wfs[i] = RadialWavefunction(
                state=wfs[i].state, grid=grid, values=u_orth[row],
                cutoff_index=wfs[i].cutoff_index,
            )
    return wfs
