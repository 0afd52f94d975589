"""Trajectory guidance, equilibrium sampling, and the ensemble density matrix.

A trajectory rides its conditional wave function: the guidance velocity
is the probability current over the density, v = J/|ψ|², evaluated by
linear interpolation between grid points.  For the two-component linear
-band field the current needs no derivative at all, J = v_f ψ†σψ.  Both
forms are invariant under rescaling of the field, so absorbing-layer
norm loss never biases the kinematics.

Positions are sampled from |ψ|² (quantum equilibrium) by inverting the
piecewise-constant CDF on the grid; the propagator's continuity equation
then keeps the ensemble |ψ(t)|²-distributed (equivariance), which is a
tested property rather than an assumption.

The mixed state over an ensemble of conditional wave functions is
ρ = Σ_j p_j |ψ̃_j⟩⟨ψ̃_j| with unit-normalized ψ̃_j — a convex sum of
projectors, so hermiticity and positivity hold by construction and are
re-checked numerically on demand.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .constants import FERMI_VELOCITY, hbar
from .fields import Array, Bispinor2D, ComplexField1D, current_density

# density below this fraction of the peak counts as a node: the velocity
# field is unreliable there and the trajectory freezes for the substep
NODE_DENSITY_FRACTION = 1e-12


class NodeEncountered(Exception):
    """Raised when a guidance velocity is requested inside a density node."""


@dataclass
class Trajectory:
    """One Bohmian trajectory tied to one conditional wave function."""

    position: float | tuple[float, float]
    alive: bool = True
    history: list = dc_field(default_factory=list)

    def record(self, t: float):
        self.history.append((t, self.position))


# ----- guidance velocities -----


def _interp_periodic(values: Array, x: Array, dx: float) -> Array:
    """Linear interpolation on a uniform periodic grid."""
    n = values.shape[0]
    s = np.asarray(x) / dx
    i0 = np.floor(s).astype(int)
    frac = s - i0
    i0 = i0 % n
    i1 = (i0 + 1) % n
    return values[i0] * (1.0 - frac) + values[i1] * frac


def velocity_field_1d(field: ComplexField1D, mass: float) -> tuple[Array, Array]:
    """Grid samples of (J, ρ) from which pointwise velocities interpolate."""
    return current_density(field, mass), np.abs(field.values) ** 2


def bohm_velocity(field: ComplexField1D, x, mass: float):
    """Guidance velocity v(x) = J(x)/ρ(x); scalar or vectorized over x.

    Raises NodeEncountered when every requested point sits in a node;
    vector calls zero the velocity at node points instead (the caller
    freezes those trajectories for the substep).
    """
    J, rho = velocity_field_1d(field, mass)
    return _velocity_from_samples(J, rho, x, field.grid.dx)


def _velocity_from_samples(J: Array, rho: Array, x, dx: float):
    scalar = np.isscalar(x) or np.ndim(x) == 0
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    Ji = _interp_periodic(J, xs, dx)
    ri = _interp_periodic(rho, xs, dx)
    floor = NODE_DENSITY_FRACTION * rho.max()
    at_node = ri < floor
    if scalar:
        if at_node[0]:
            raise NodeEncountered(f"density node at x = {xs[0]:.6e}")
        return float(Ji[0] / ri[0])
    v = np.zeros_like(xs)
    ok = ~at_node
    v[ok] = Ji[ok] / ri[ok]
    return v


def bohm_velocity_dirac(spinor: Bispinor2D, r):
    """v = v_f (ψ†σψ)/(ψ†ψ) bilinearly interpolated at r = (x, y)."""
    u, l = spinor.upper, spinor.lower
    cross = np.conj(u) * l
    jx = 2.0 * FERMI_VELOCITY * cross.real
    jy = 2.0 * FERMI_VELOCITY * cross.imag
    rho = np.abs(u) ** 2 + np.abs(l) ** 2
    return _velocity_from_samples_2d(jx, jy, rho, r, spinor.grid)


def _velocity_from_samples_2d(jx, jy, rho, r, grid):
    scalar = np.ndim(r) == 1
    pts = np.atleast_2d(np.asarray(r, dtype=float))
    dx, dy = grid.dx
    nx, ny = grid.shape
    sx = pts[:, 0] / dx
    sy = pts[:, 1] / dy
    ix0 = np.floor(sx).astype(int)
    iy0 = np.floor(sy).astype(int)
    fx = sx - ix0
    fy = sy - iy0
    ix0 %= nx
    iy0 %= ny
    ix1 = (ix0 + 1) % nx
    iy1 = (iy0 + 1) % ny

    def bilin(F):
        return (
            F[ix0, iy0] * (1 - fx) * (1 - fy)
            + F[ix1, iy0] * fx * (1 - fy)
            + F[ix0, iy1] * (1 - fx) * fy
            + F[ix1, iy1] * fx * fy
        )

    ri = bilin(rho)
    floor = NODE_DENSITY_FRACTION * rho.max()
    at_node = ri < floor
    vx = np.zeros(len(pts))
    vy = np.zeros(len(pts))
    ok = ~at_node
    vx[ok] = bilin(jx)[ok] / ri[ok]
    vy[ok] = bilin(jy)[ok] / ri[ok]
    if scalar:
        if at_node[0]:
            raise NodeEncountered(f"density node at r = {pts[0]}")
        return float(vx[0]), float(vy[0])
    return np.stack([vx, vy], axis=1)


# ----- sampling and advancing -----


def sample_positions(field, n: int, rng: np.random.Generator) -> Array:
    """Draw n positions from |ψ|² by inverse CDF (1D) or cell weights (2D)."""
    if isinstance(field, Bispinor2D):
        rho = (np.abs(field.upper) ** 2 + np.abs(field.lower) ** 2).ravel()
        cells = rng.choice(rho.size, size=n, p=rho / rho.sum())
        ix, iy = np.unravel_index(cells, field.grid.shape)
        dx, dy = field.grid.dx
        x = (ix + rng.random(n)) * dx
        y = (iy + rng.random(n)) * dy
        return np.stack([x, y], axis=1)
    rho = np.abs(field.values) ** 2
    cdf = np.cumsum(rho)
    u = rng.random(n) * cdf[-1]
    idx = np.searchsorted(cdf, u)
    prev = np.where(idx > 0, cdf[idx - 1], 0.0)
    frac = (u - prev) / rho[idx]
    return (idx + frac) * field.grid.dx


def advance_positions(positions: Array, field, mass: float, dt: float) -> Array:
    """Midpoint (RK2) advance of a batch of positions in a frozen field.

    Node points contribute zero velocity for the substep (freeze rule).
    """
    if isinstance(field, Bispinor2D):
        u, l = field.upper, field.lower
        cross = np.conj(u) * l
        jx = 2.0 * FERMI_VELOCITY * cross.real
        jy = 2.0 * FERMI_VELOCITY * cross.imag
        rho = np.abs(u) ** 2 + np.abs(l) ** 2
        v1 = _velocity_from_samples_2d(jx, jy, rho, positions, field.grid)
        mid = positions + 0.5 * dt * v1
        v2 = _velocity_from_samples_2d(jx, jy, rho, mid, field.grid)
        return positions + dt * v2
    J, rho = velocity_field_1d(field, mass)
    v1 = _velocity_from_samples(J, rho, positions, field.grid.dx)
    mid = positions + 0.5 * dt * v1
    v2 = _velocity_from_samples(J, rho, mid, field.grid.dx)
    return positions + dt * v2


def advance_rowwise(positions: Array, J_rows: Array, rho_rows: Array, dx: float, dt: float) -> Array:
    """RK2 advance where row i of (J, ρ) guides positions[i].

    Same rules as `advance_positions` (midpoint stage, node freeze against
    each row's own density peak), but for many carriers that each own a
    distinct frozen field, so the per-carrier velocity samples gather from
    matching rows instead of one shared array.
    """
    m, n = rho_rows.shape
    rows = np.arange(m)
    floor = NODE_DENSITY_FRACTION * rho_rows.max(axis=1)

    def vel(xs):
        s = xs / dx
        i0 = np.floor(s).astype(int)
        frac = s - i0
        i0 %= n
        i1 = (i0 + 1) % n
        Ji = J_rows[rows, i0] * (1.0 - frac) + J_rows[rows, i1] * frac
        ri = rho_rows[rows, i0] * (1.0 - frac) + rho_rows[rows, i1] * frac
        v = np.zeros(m)
        ok = ~(ri < floor)
        v[ok] = Ji[ok] / ri[ok]
        return v

    v1 = vel(positions)
    v2 = vel(positions + 0.5 * dt * v1)
    return positions + dt * v2


def advance_trajectory(traj: Trajectory, field, mass: float, dt: float) -> Trajectory:
    """Advance one trajectory in place (frozen-field RK2); no-op if not alive."""
    if not traj.alive:
        return traj
    if isinstance(field, Bispinor2D):
        pos = np.array([traj.position])
        traj.position = tuple(advance_positions(pos, field, mass, dt)[0])
    else:
        pos = np.array([traj.position], dtype=float)
        traj.position = float(advance_positions(pos, field, mass, dt)[0])
    return traj


# ----- ensemble density matrix -----


@dataclass(frozen=True)
class EnsembleDensityMatrix:
    matrix: Array
    cell: float  # coarse cell size (m) the matrix indices refer to
    weight_sum: float


def _coarsen(values: Array, max_dim: int) -> Array:
    n = values.shape[0]
    if n <= max_dim:
        return values
    b = n // max_dim
    return values.reshape(max_dim, b).mean(axis=1)


def ensemble_density_matrix(
    cwfs: list[ComplexField1D], weights, max_dim: int = 512
) -> EnsembleDensityMatrix:
    """ρ = Σ_j p_j |ψ̃_j⟩⟨ψ̃_j| on a coarse grid of at most max_dim cells.

    Each field is unit-normalized first; coarse-graining block-averages
    amplitudes (still a convex sum of projectors afterwards, so complete
    positivity survives).  The result is trace-normalized.
    """
    if not cwfs:
        raise ValueError("need at least one conditional wave function")
    w = np.asarray(weights, dtype=float)
    if w.shape != (len(cwfs),) or np.any(w < 0.0) or w.sum() == 0.0:
        raise ValueError("weights must be nonnegative with positive sum")
    grid = cwfs[0].grid
    if any(f.grid != grid for f in cwfs):
        raise ValueError("all fields must share one grid")
    dim = min(grid.n, max_dim)
    block = grid.n // dim
    rows = np.empty((len(cwfs), dim), dtype=np.complex128)
    for j, f in enumerate(cwfs):
        v = f.values / np.sqrt((np.abs(f.values) ** 2).sum() * grid.dx)
        rows[j] = _coarsen(v, dim)
    # Gram-style accumulation ρ[a,b] = Σ_j p_j ψ_j[a] ψ_j[b]*, one BLAS call
    rho = (rows.T * w) @ rows.conj()
    tr = np.trace(rho).real
    if tr <= 0.0:
        raise ValueError("coarse-grained ensemble has zero trace")
    return EnsembleDensityMatrix(rho / tr, grid.dx * block, float(w.sum()))


@dataclass(frozen=True)
class PositivityReport:
    min_eigenvalue: float
    trace: float
    hermiticity_deviation: float
    passed: bool


def positivity_report(
    edm: EnsembleDensityMatrix,
    eig_floor: float = -1e-8,
    trace_tol: float = 1e-10,
    herm_tol: float = 1e-10,
) -> PositivityReport:
    """Numerical check that ρ is a valid state: Hermitian, unit trace, PSD."""
    rho = edm.matrix
    herm = float(np.max(np.abs(rho - rho.conj().T)))
    tr = float(np.trace(rho).real)
    min_eig = float(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min())
    passed = herm <= herm_tol and abs(tr - 1.0) <= trace_tol and min_eig >= eig_floor
    return PositivityReport(min_eig, tr, herm, passed)


def expectation_from_trajectories(observable, cwfs: list, trajectories: list[Trajectory], weights) -> float:
    """Σ_j p_j O(r_j) / Σ_j p_j for a position-diagonal observable."""
    if len(cwfs) != len(trajectories):
        raise ValueError("need exactly one trajectory per conditional wave function")
    w = np.asarray(weights, dtype=float)
    if w.shape != (len(trajectories),) or np.any(w < 0.0) or w.sum() == 0.0:
        raise ValueError("weights must be nonnegative with positive sum")
    vals = np.array([observable(t.position) for t in trajectories], dtype=float)
    return float((w * vals).sum() / w.sum())
