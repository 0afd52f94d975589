"""Prepared experiments: RTD bias sweeps, single-collision graphene packets,
and Klein-tunneling transmission scenarios.

Each runner owns its geometry defaults (documented assumptions, not
measured facts), takes a seed, and returns a plain record object the CLI
flattens into CSV tables.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import bohm, device as devmod, dirac, scattering
from .constants import EV, FERMI_VELOCITY
from .fields import Bispinor2D, Grid1D, Grid2D, l2_norm
from .schrodinger import quartic_absorber

# ----- shared 2D helpers -----


def absorber_2d(grid: Grid2D, strength_j: float, margin_fraction: float = 0.1):
    """Separable quartic absorbing layer on all four box edges."""
    wx = quartic_absorber(Grid1D(grid.lengths_m[0], grid.shape[0]), strength_j, margin_fraction)
    wy = quartic_absorber(Grid1D(grid.lengths_m[1], grid.shape[1]), strength_j, margin_fraction)
    return wx[:, None] + wy[None, :]


@dataclass
class DiracRecord:
    """Time series of one 2D linear-band packet experiment."""

    dt: float
    n_steps: int
    collision_step: int | None
    collision: dirac.DiracCollision | None = None
    q_used: tuple[float, float] | None = None
    times: list = dc_field(default_factory=list)
    centroid: list = dc_field(default_factory=list)
    k_mean: list = dc_field(default_factory=list)
    band_plus: list = dc_field(default_factory=list)
    band_minus: list = dc_field(default_factory=list)
    centroid_velocity: list = dc_field(default_factory=list)
    norm2: list = dc_field(default_factory=list)
    trajectories: list = dc_field(default_factory=list)  # (t, (n_traj, 2) array)
    absorbed_left: float = 0.0
    absorbed_right: float = 0.0
    transmission_series: list = dc_field(default_factory=list)  # (t, fraction beyond plane)
    final_spinor: Bispinor2D | None = None


def _side_loss_split(spinor_before: Bispinor2D, absorber, lost: float, x_mid: float):
    """Attribute a step's norm² loss to the left/right absorbers by
    CAP-weighted density; the layers are far apart so this is essentially exact."""
    w = -absorber.imag
    dens = np.abs(spinor_before.upper) ** 2 + np.abs(spinor_before.lower) ** 2
    wd = w * dens
    tot = wd.sum()
    if tot <= 0.0 or lost <= 0.0:
        return 0.0, 0.0
    X, _ = spinor_before.grid.positions()
    right = wd[X >= x_mid].sum() / tot
    return lost * (1.0 - right), lost * right


def evolve_dirac_packet(
    spinor: Bispinor2D,
    potential,
    absorber,
    dt: float,
    n_steps: int,
    rng: np.random.Generator,
    collision_step: int | None = None,
    collision: dirac.DiracCollision | None = None,
    n_trajectories: int = 16,
    sample_stride: int = 10,
    transmission_plane_m: float | None = None,
) -> DiracRecord:
    """Propagate one packet, optionally firing one prepared collision."""
    rec = DiracRecord(dt=dt, n_steps=n_steps, collision_step=collision_step, collision=collision)
    grid = spinor.grid
    pot_total = None
    if potential is not None or absorber is not None:
        pot_total = (0.0 if potential is None else potential) + (
            0.0 if absorber is None else absorber
        )
    traj = bohm.sample_positions(spinor, n_trajectories, rng) if n_trajectories else None
    norm2 = l2_norm(spinor) ** 2
    x_mid = grid.lengths_m[0] / 2.0
    for istep in range(n_steps):
        t = istep * dt
        if collision_step is not None and istep == collision_step and collision is not None:
            spinor, q_used = dirac.apply_collision(spinor, collision)
            rec.q_used = q_used
        before = spinor
        spinor = dirac.step(spinor, pot_total, dt)
        new_norm2 = l2_norm(spinor) ** 2
        if absorber is not None:
            dl, dr = _side_loss_split(before, absorber, norm2 - new_norm2, x_mid)
            rec.absorbed_left += dl
            rec.absorbed_right += dr
        norm2 = new_norm2
        if traj is not None:
            traj = bohm.advance_positions(traj, spinor, 0.0, dt)
        if istep % sample_stride == 0 or istep == n_steps - 1:
            rec.times.append(t + dt)
            c = dirac.packet_centroid(spinor)
            rec.centroid.append(c)
            rec.k_mean.append(dirac.central_wavevector(spinor))
            bp, bm = dirac.band_weights(spinor)
            rec.band_plus.append(bp)
            rec.band_minus.append(bm)
            try:
                rec.centroid_velocity.append(bohm.bohm_velocity_dirac(spinor, c))
            except bohm.NodeEncountered:
                rec.centroid_velocity.append((float("nan"), float("nan")))
            rec.norm2.append(norm2)
            if traj is not None:
                rec.trajectories.append((t + dt, traj.copy()))
            if transmission_plane_m is not None:
                dens = np.abs(spinor.upper) ** 2 + np.abs(spinor.lower) ** 2
                X, _ = grid.positions()
                rec.transmission_series.append(
                    (t + dt, float(dens[X > transmission_plane_m].sum() * grid.cell_area))
                )
    rec.final_spinor = spinor
    return rec


# ----- graphene single-collision experiment -----


@dataclass(frozen=True)
class GrapheneCollisionSetup:
    """Free-flight conduction packet redirected by one prepared event."""

    band_flip: bool = False
    k0_mag: float = 2.27e8  # 1/m
    sigma_m: float = 40e-9
    new_angle_rad: float = math.pi / 4.0
    lengths_m: tuple[float, float] = (768e-9, 768e-9)
    shape: tuple[int, int] = (256, 256)
    dt_s: float = 0.35e-15
    pre_collision_s: float = 0.10e-12
    post_collision_s: float = 0.16e-12
    absorber_ev: float = 0.15


def run_graphene_collision(setup: GrapheneCollisionSetup, seed) -> DiracRecord:
    """Conduction packet moving along +y; at t_c one event re-aims it to
    `new_angle_rad`, staying in band (elastic) or flipping to the valence
    branch (inelastic) so the packet afterwards runs against its own ⟨k⟩."""
    rng = np.random.default_rng(seed)
    grid = Grid2D(setup.lengths_m, setup.shape)
    center = (setup.lengths_m[0] / 2.0, setup.lengths_m[1] / 3.0)
    psi = dirac.conduction_packet(grid, center, setup.sigma_m, (0.0, setup.k0_mag))
    k0 = dirac.central_wavevector(psi)
    if setup.band_flip:
        ev = scattering.forced_band_flip(k0, dirac.BandIndex.CONDUCTION, setup.new_angle_rad)
    else:
        ev = scattering.forced_elastic_redirect(k0, setup.new_angle_rad)
    absorber = absorber_2d(grid, setup.absorber_ev * EV)
    n_pre = int(round(setup.pre_collision_s / setup.dt_s))
    n_post = int(round(setup.post_collision_s / setup.dt_s))
    return evolve_dirac_packet(
        psi,
        None,
        absorber,
        setup.dt_s,
        n_pre + n_post,
        rng,
        collision_step=n_pre,
        collision=ev,
    )


# ----- Klein tunneling experiment -----


@dataclass(frozen=True)
class KleinSetup:
    barrier_ev: float = 0.4
    barrier_width_m: float = 200e-9
    k0_mag: float = 2.27e8
    sigma_m: float = 40e-9
    incidence_rad: float = math.pi / 6.0
    lengths_m: tuple[float, float] = (1024e-9, 768e-9)
    shape: tuple[int, int] = (512, 256)
    dt_s: float = 0.35e-15
    total_s: float = 0.60e-12
    approach_m: float = 150e-9  # initial centroid distance to the barrier face
    absorber_ev: float = 0.15


@dataclass
class KleinResult:
    scenario: str
    record: DiracRecord
    transmission: float
    collision_time_s: float | None


def run_klein(setup: KleinSetup, scenario: str, seed) -> KleinResult:
    """Scenarios: 'normal' (β₀ = 0 control), 'oblique' (β₀ = incidence),
    'oblique_collision' (oblique, then one elastic rotation to normal
    incidence just before the barrier).

    Transmission = norm² beyond the barrier's far face at the end plus
    flux retired by the right absorber, over the initial norm².
    """
    if scenario not in ("normal", "oblique", "oblique_collision"):
        raise ValueError(f"unknown scenario '{scenario}'")
    rng = np.random.default_rng(seed)
    grid = Grid2D(setup.lengths_m, setup.shape)
    Lx, Ly = setup.lengths_m
    xb0 = Lx / 2.0 - setup.barrier_width_m / 2.0
    xb1 = xb0 + setup.barrier_width_m
    beta0 = 0.0 if scenario == "normal" else setup.incidence_rad
    k0 = (setup.k0_mag * math.cos(beta0), setup.k0_mag * math.sin(beta0))
    y_c = Ly / 2.0 if scenario == "normal" else Ly * 0.42
    center = (xb0 - setup.approach_m, y_c)
    psi = dirac.conduction_packet(grid, center, setup.sigma_m, k0)
    X, _ = grid.positions()
    potential = setup.barrier_ev * EV * ((X >= xb0) & (X < xb1))
    absorber = absorber_2d(grid, setup.absorber_ev * EV)
    n_steps = int(round(setup.total_s / setup.dt_s))
    collision_step = None
    collision = None
    t_c = None
    if scenario == "oblique_collision":
        # rotate to normal incidence when the centroid is ~50 nm from the face
        vx = FERMI_VELOCITY * math.cos(beta0)
        t_c = (setup.approach_m - 50e-9) / vx
        collision_step = int(round(t_c / setup.dt_s))
        collision = scattering.forced_elastic_redirect(dirac.central_wavevector(psi), 0.0)
    rec = evolve_dirac_packet(
        psi,
        potential,
        absorber,
        setup.dt_s,
        n_steps,
        rng,
        collision_step=collision_step,
        collision=collision,
        transmission_plane_m=xb1,
    )
    final_beyond = rec.transmission_series[-1][1] if rec.transmission_series else 0.0
    transmission = final_beyond + rec.absorbed_right
    return KleinResult(scenario, rec, float(transmission), t_c)


# ----- RTD sweeps -----


@dataclass(frozen=True)
class RtdSetup:
    device: devmod.DeviceSpec
    layout: devmod.BoxLayout
    mechanisms: tuple
    params: devmod.RunParams
    biases: tuple


def default_mechanisms(temperature_k: float = 300.0) -> list[scattering.Mechanism]:
    """Reference coupling set: constant configured rates of Golden-Rule
    magnitude for the standard channels of the contact material."""
    em, ab = scattering.equilibrium_optical_pair(2.0e12, temperature_k)
    return [
        scattering.Mechanism(scattering.MechanismKind.ACOUSTIC_ELASTIC, 3.0e12, temperature_k=temperature_k),
        scattering.Mechanism(scattering.MechanismKind.IMPURITY_ELASTIC, 1.0e12, temperature_k=temperature_k),
        em,
        ab,
    ]


def default_rtd_setup(
    biases=None,
    dissipative: bool = True,
    total_time_s: float = 5.0e-12,
    electron_cap: int = 16,
    temperature_k: float = 300.0,
    density_matrix_stride: int = 0,
    n: int = 1024,
    box_length_m: float = 768e-9,
) -> RtdSetup:
    dev = devmod.resonant_tunneling_device(temperature_k=temperature_k)
    layout = devmod.default_layout(box_length_m=box_length_m, n=n)
    mechs = tuple(default_mechanisms(temperature_k)) if dissipative else ()
    dt = devmod.suggest_dt(dev, layout)
    params = devmod.RunParams(
        dt=dt,
        n_steps=int(round(total_time_s / dt)),
        electron_cap=electron_cap,
        density_matrix_stride=density_matrix_stride,
    )
    if biases is None:
        # span the double-barrier resonance: the transfer-matrix peak for the
        # default geometry sits near 0.41-0.42 V, so the list brackets the
        # rise, the peak, and the falling (NDR) branch
        biases = tuple(np.round(np.linspace(0.0, 0.63, 10), 6))
    return RtdSetup(dev, layout, mechs, params, tuple(biases))


def run_rtd_sweep(setup: RtdSetup, seed: int, threads: int = 1):
    return devmod.iv_sweep(
        setup.device,
        setup.layout,
        setup.mechanisms,
        setup.params,
        setup.biases,
        seed,
        threads=threads,
    )
