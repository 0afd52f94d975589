"""1D transport device: geometry, mean-field potential, injection, stepping.

The simulation box is larger than the device: the device's band profile
(the "active region") sits centered in the box, flanked by flat contact
zones where fresh carriers are injected as Gaussian packets, and by
absorbing layers at the box edges that retire outgoing flux.  Each
carrier owns one conditional wave function, one trajectory, and one
momentum-exchange ledger; carriers couple only through the mean-field
Coulomb term, a 1D Poisson solve over the other carriers' trajectory
positions (sheet charges of a configurable cross-section area, which is
what gives the textbook piecewise-linear tent response).

Current is measured two ways and cross-checked: net trajectory
crossings of the mid-device plane (counting), and the Ramo-Shockley sum
of path lengths swept inside the active region (so one full traversal
integrates to exactly one elementary charge).
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import bohm, scattering, schrodinger
from .constants import EV, elementary_charge, epsilon_0, hbar, k_B, m_e
from .fields import (
    Array,
    ComplexField1D,
    Grid1D,
    _wrap_field_1d,
    expectation_momentum,
    gaussian_packet,
    l2_norm,
)
from .schrodinger import KickState, Potential1D


@dataclass(frozen=True)
class Region:
    """Band-offset slab [start, end) in device coordinates, metres/joules."""

    start_m: float
    end_m: float
    offset_j: float


@dataclass(frozen=True)
class DeviceSpec:
    """Static description of the 1D device and its contacts."""

    total_length_m: float
    regions: tuple[Region, ...]
    fermi_level_j: float
    temperature_k: float
    mass_ratio: float
    bias_v: float = 0.0
    relative_permittivity: float = 12.9
    cross_section_m2: float = (150e-9) ** 2

    def __post_init__(self):
        if self.total_length_m <= 0.0:
            raise ValueError("device length must be positive")
        if self.mass_ratio <= 0.0:
            raise ValueError("effective mass ratio must be positive")
        if self.temperature_k < 0.0:
            raise ValueError("temperature must be >= 0")
        # regions must tile [0, L] without gaps or overlap
        regs = sorted(self.regions, key=lambda r: r.start_m)
        edge = 0.0
        for r in regs:
            if abs(r.start_m - edge) > 1e-15 or r.end_m <= r.start_m:
                raise ValueError("regions must tile the device length exactly")
            edge = r.end_m
        if abs(edge - self.total_length_m) > 1e-15:
            raise ValueError("regions must tile the device length exactly")
        object.__setattr__(self, "regions", tuple(regs))

    @property
    def mass(self) -> float:
        return self.mass_ratio * m_e


def resonant_tunneling_device(
    barrier_height_ev: float = 0.5,
    barrier_width_m: float = 1.6e-9,
    well_width_m: float = 2.4e-9,
    total_length_m: float = 120e-9,
    fermi_level_ev: float = 0.15,
    temperature_k: float = 300.0,
    mass_ratio: float = 0.067,
    bias_v: float = 0.0,
    **kwargs,
) -> DeviceSpec:
    """Symmetric double-barrier device, barriers centered about the midpoint."""
    mid = total_length_m / 2.0
    half = well_width_m / 2.0
    vb = barrier_height_ev * EV
    regions = (
        Region(0.0, mid - half - barrier_width_m, 0.0),
        Region(mid - half - barrier_width_m, mid - half, vb),
        Region(mid - half, mid + half, 0.0),
        Region(mid + half, mid + half + barrier_width_m, vb),
        Region(mid + half + barrier_width_m, total_length_m, 0.0),
    )
    return DeviceSpec(
        total_length_m=total_length_m,
        regions=regions,
        fermi_level_j=fermi_level_ev * EV,
        temperature_k=temperature_k,
        mass_ratio=mass_ratio,
        bias_v=bias_v,
        **kwargs,
    )


@dataclass(frozen=True)
class BoxLayout:
    """Placement of the device inside the (larger) simulation box."""

    grid: Grid1D
    absorber_margin_fraction: float
    packet_sigma_m: float

    @property
    def absorber_margin_m(self) -> float:
        return self.absorber_margin_fraction * self.grid.length_m

    @property
    def interior(self) -> tuple[float, float]:
        return (self.absorber_margin_m, self.grid.length_m - self.absorber_margin_m)

    def active_span(self, device: DeviceSpec) -> tuple[float, float]:
        start = 0.5 * (self.grid.length_m - device.total_length_m)
        return (start, start + device.total_length_m)

    def injection_centers(self) -> tuple[float, float]:
        off = self.absorber_margin_m + 3.2 * self.packet_sigma_m
        return (off, self.grid.length_m - off)


def default_layout(
    box_length_m: float = 768e-9,
    n: int = 1024,
    absorber_margin_fraction: float = 0.1,
    packet_sigma_m: float = 40e-9,
) -> BoxLayout:
    return BoxLayout(Grid1D(box_length_m, n), absorber_margin_fraction, packet_sigma_m)


# ----- potential assembly -----


class MeanFieldSolver:
    """Band profile + bias ramp + tent-superposition Coulomb on the box grid.

    The charge response uses the exact discrete Green's function of the
    Dirichlet finite-difference Laplacian (a tent), which is the same
    solution a tridiagonal solve would produce, assembled in O(n) per
    charge node.
    """

    def __init__(self, device: DeviceSpec, layout: BoxLayout):
        self.device = device
        self.layout = layout
        grid = layout.grid
        x = grid.positions()
        a0, a1 = layout.active_span(device)
        profile = np.zeros(grid.n)
        for r in device.regions:
            mask = (x >= a0 + r.start_m) & (x < a0 + r.end_m)
            profile[mask] = r.offset_j
        self._band = profile
        self._x = x
        eps = epsilon_0 * device.relative_permittivity
        # one sheet charge of area A per carrier; C has units of joules
        self._tent_scale = elementary_charge**2 * grid.dx / (eps * device.cross_section_m2)
        self._idx = np.arange(grid.n, dtype=float)
        # Electrostatics lives between the contact planes (the device ends);
        # the reservoirs outside are ideal conductors that pin the potential.
        self._i_left = int(round(a0 / grid.dx))
        self._i_right = int(round(a1 / grid.dx))
        shape = np.clip(
            (self._idx - self._i_left) / (self._i_right - self._i_left), 0.0, 1.0
        )
        self._ramp_shape = shape
        # every tent is supported on the contact interval only, so the hot
        # loop works on this window and leaves the rest of the box untouched
        self.window = slice(self._i_left, self._i_right + 1)
        self._win_idx = self._idx[self.window]

    def ramp(self, bias_v: float) -> Array:
        """Laplace part: 0 in the source lead, -e·V in the drain lead, linear
        across the device between the contact planes."""
        return -elementary_charge * bias_v * self._ramp_shape

    def cloud_in_cell(self, position_m: float) -> tuple[tuple[int, int], tuple[float, float]]:
        s = position_m / self.layout.grid.dx
        i0 = int(np.floor(s))
        frac = s - i0
        n = self.layout.grid.n
        return ((i0 % n, (i0 + 1) % n), (1.0 - frac, frac))

    def tent_window(self, node: int, weight: float) -> Array:
        """Potential-energy response of one CIC node charge, restricted to
        the contact interval (its full support).

        Dirichlet zeros sit at the contact planes; a charge outside the
        contacts is screened by the reservoir and contributes nothing.
        """
        ia, ib = self._i_left, self._i_right
        if not ia < node < ib:
            return np.zeros(ib - ia + 1)
        i = self._win_idx
        span = float(ib - ia)
        g = np.where(i <= node, (i - ia) * (ib - node), (node - ia) * (ib - i)) / span
        return self._tent_scale * weight * g

    def tent(self, node: int, weight: float) -> Array:
        """Box-sized version of `tent_window` (zero outside the contacts)."""
        out = np.zeros(self.layout.grid.n)
        out[self.window] = self.tent_window(node, weight)
        return out

    def charge_window(self, position_m: float) -> Array:
        """Contact-interval potential response of one carrier (CIC pair)."""
        (j0, j1), (w0, w1) = self.cloud_in_cell(position_m)
        return self.tent_window(j0, w0) + self.tent_window(j1, w1)

    def charge_response(self, positions) -> Array:
        out = np.zeros(self.layout.grid.n)
        for p in positions:
            (j0, j1), (w0, w1) = self.cloud_in_cell(p)
            out += self.tent(j0, w0)
            out += self.tent(j1, w1)
        return out

    def band_profile(self) -> Array:
        return self._band.copy()


def assemble_potential(
    device: DeviceSpec,
    bundles,
    layout: BoxLayout,
    absorber: Array | None = None,
    exclude_id: int | None = None,
    _solver: MeanFieldSolver | None = None,
) -> Potential1D:
    """Conditional potential seen by one carrier: band + ramp + other charges."""
    solver = _solver if _solver is not None else MeanFieldSolver(device, layout)
    v = solver.band_profile() + solver.ramp(device.bias_v)
    positions = [
        b.trajectory.position for b in bundles if b.trajectory.alive and b.bundle_id != exclude_id
    ]
    if positions:
        v = v + solver.charge_response(positions)
    return Potential1D(layout.grid, v, absorber)


# ----- contact injection -----


def contact_flux_rate(fermi_level_j: float, temperature_k: float) -> float:
    """Carriers per second impinging from one degenerate 1D contact.

    ν = (kT/πħ)·ln(1 + e^{E_f/kT}), the Fermi-Dirac flux integral with
    spin degeneracy 2; at T = 0 this limits to max(E_f, 0)/πħ.
    """
    if temperature_k <= 0.0:
        return max(fermi_level_j, 0.0) / (math.pi * hbar)
    kt = k_B * temperature_k
    return kt / (math.pi * hbar) * math.log1p(math.exp(min(fermi_level_j / kt, 700.0)))


class ContactSampler:
    """Inverse-CDF sampler for injected kinetic energies.

    Flux weighting cancels the 1D density of states, leaving the plain
    Fermi-Dirac factor as the energy density.
    """

    def __init__(self, fermi_level_j: float, temperature_k: float, n_table: int = 4096):
        if temperature_k <= 0.0:
            self.e_cut = max(fermi_level_j, 0.0)
            self._grid = None
        else:
            kt = k_B * temperature_k
            self.e_cut = max(fermi_level_j, 0.0) + 8.0 * kt
            e = np.linspace(0.0, self.e_cut, n_table)
            occ = 1.0 / (1.0 + np.exp((e - fermi_level_j) / kt))
            cdf = np.cumsum(occ)
            self._grid = (e, cdf / cdf[-1])

    def draw(self, rng: np.random.Generator) -> float:
        if self._grid is None:
            return rng.random() * self.e_cut  # T = 0: uniform below E_f
        e, cdf = self._grid
        return float(np.interp(rng.random(), cdf, e))


@dataclass
class ElectronBundle:
    """One carrier: conditional wave function + trajectory + kick ledger."""

    field: ComplexField1D
    trajectory: bohm.Trajectory
    kick: KickState
    origin: str  # 'left' | 'right'
    bundle_id: int
    injected_at: float
    initial_norm2: float
    collisions: list = dc_field(default_factory=list)
    fate: str | None = None
    retired_at: float | None = None


def inject(
    layout: BoxLayout,
    device: DeviceSpec,
    side: str,
    energy_j: float,
    bundle_id: int,
    time: float,
    rng: np.random.Generator,
) -> ElectronBundle:
    """Materialize one carrier at the given contact with kinetic energy E."""
    left_c, right_c = layout.injection_centers()
    center = left_c if side == "left" else right_c
    k_mag = math.sqrt(2.0 * device.mass * max(energy_j, 0.0)) / hbar
    k0 = k_mag if side == "left" else -k_mag
    f = gaussian_packet(layout.grid, center, layout.packet_sigma_m, k0)
    lo, hi = layout.interior
    pos = None
    for _ in range(32):  # keep the starting point out of the absorbing layers
        cand = float(bohm.sample_positions(f, 1, rng)[0])
        if lo < cand < hi:
            pos = cand
            break
    if pos is None:
        pos = center
    return ElectronBundle(
        field=f,
        trajectory=bohm.Trajectory(position=pos),
        kick=KickState(),
        origin=side,
        bundle_id=bundle_id,
        injected_at=time,
        initial_norm2=l2_norm(f) ** 2,
    )


# ----- run bookkeeping -----


@dataclass
class RunRecord:
    """Everything a transport run emits, in memory."""

    bias_v: float
    dt: float
    n_steps: int
    window: tuple[float, float]  # measurement window in seconds
    active_span: tuple[float, float]
    times: list = dc_field(default_factory=list)
    ramo_current: list = dc_field(default_factory=list)
    net_crossings: list = dc_field(default_factory=list)
    alive_count: list = dc_field(default_factory=list)
    events: list = dc_field(default_factory=list)  # (t, bundle_id, kind, q, dE_ev)
    trajectory_samples: list = dc_field(default_factory=list)  # (t, {id: x})
    positivity_samples: list = dc_field(default_factory=list)  # (t, report)
    injected: Counter = dc_field(default_factory=Counter)
    fates: Counter = dc_field(default_factory=Counter)
    alive_time_s: float = 0.0
    transit_collisions: list = dc_field(default_factory=list)  # per retired bundle

    def in_window(self, t: float) -> bool:
        return self.window[0] <= t <= self.window[1]


def current_counting(record: RunRecord) -> float:
    """e · (net plane crossings in the window) / window length, amperes."""
    t0, t1 = record.window
    net = sum(
        c for t, c in zip(record.times, record.net_crossings) if t0 <= t <= t1
    )
    span = t1 - t0
    return elementary_charge * net / span if span > 0.0 else 0.0


def current_ramo(record: RunRecord) -> float:
    """Window average of the Ramo-Shockley instantaneous current."""
    xs = [i for t, i in zip(record.times, record.ramo_current) if record.in_window(t)]
    return float(np.mean(xs)) if xs else 0.0


def gross_crossings(record: RunRecord) -> int:
    t0, t1 = record.window
    return sum(
        abs(c) for t, c in zip(record.times, record.net_crossings) if t0 <= t <= t1
    )


def charge_bookkeeping(record: RunRecord) -> dict:
    """injected == transmitted + reflected + absorbed + still_inside, exactly."""
    total_inj = sum(record.injected.values())
    f = record.fates
    balance = total_inj - (
        f["transmitted"] + f["reflected"] + f["absorbed"] + f["still_inside"]
    )
    return {
        "injected": total_inj,
        "transmitted": f["transmitted"],
        "reflected": f["reflected"],
        "absorbed": f["absorbed"],
        "still_inside": f["still_inside"],
        "balanced": balance == 0,
    }


def collision_statistics(record: RunRecord) -> dict:
    """Collision frequency both per unit time and per completed transit."""
    n_events = len(record.events)
    per_second = n_events / record.alive_time_s if record.alive_time_s > 0.0 else 0.0
    per_transit = float(np.mean(record.transit_collisions)) if record.transit_collisions else 0.0
    return {"events": n_events, "per_electron_second": per_second, "per_transit": per_transit}


# ----- the transport loop -----


@dataclass
class RunParams:
    dt: float
    n_steps: int
    electron_cap: int = 16
    kick_substeps: int = 1
    absorber_strength_ev: float = 0.1
    warmup_fraction: float = 0.2
    sample_stride: int = 50
    density_matrix_stride: int = 0  # 0 disables sampling
    density_matrix_dim: int = 256

    def __post_init__(self):
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")
        if self.n_steps <= 0:
            raise ValueError("n_steps must be positive")
        if self.electron_cap < 1:
            raise ValueError("electron cap must be >= 1")
        if self.kick_substeps < 1:
            raise ValueError("kick_substeps must be >= 1")


def suggest_dt(device: DeviceSpec, layout: BoxLayout, phase_budget: float = 0.45) -> float:
    """dt so the largest occupied kinetic or potential phase per step stays
    under `phase_budget` radians.  The spectral kinetic factor is exact per
    mode, so the budget is taken over the physically injected spectrum
    (contact cutoff plus the full bias drop), not the grid Nyquist mode."""
    sampler = ContactSampler(device.fermi_level_j, device.temperature_k)
    e_kin_max = sampler.e_cut + elementary_charge * abs(device.bias_v)
    v_max = max((abs(r.offset_j) for r in device.regions), default=0.0)
    v_max += elementary_charge * abs(device.bias_v)
    scale = max(e_kin_max, v_max, 1e-25)
    return phase_budget * hbar / scale


class TransportRun:
    """One stochastic transport experiment at a fixed bias."""

    def __init__(
        self,
        device: DeviceSpec,
        layout: BoxLayout,
        mechanisms,
        params: RunParams,
        seed,
    ):
        self.device = device
        self.layout = layout
        self.mechanisms = list(mechanisms)
        self.params = params
        self.rng = np.random.default_rng(seed)
        self.solver = MeanFieldSolver(device, layout)
        self.absorber = schrodinger.quartic_absorber(
            layout.grid,
            params.absorber_strength_ev * EV,
            layout.absorber_margin_fraction,
        )
        self.sampler = ContactSampler(device.fermi_level_j, device.temperature_k)
        self.flux = contact_flux_rate(device.fermi_level_j, device.temperature_k)
        self.p_collision = scattering.collision_probability(
            scattering.total_rate(self.mechanisms), params.dt
        )
        self.bundles: list[ElectronBundle] = []
        self._next_id = 0
        self._plane = sum(layout.active_span(device)) / 2.0
        self._norm_floor = 1e-6
        # per-run static factors: the conditional potentials differ between
        # carriers only on the contact window (tent support), so the half-step
        # phase outside it is computed once
        static_v = self.solver.band_profile() + self.solver.ramp(device.bias_v)
        self._half_v_static = np.exp(-0.5j * (static_v + self.absorber) * params.dt / hbar)
        self._kin0 = schrodinger._kinetic_factor(layout.grid, device.mass, params.dt, 0.0)

    # -- helpers --

    def _inject_step(self, t: float, record: RunRecord):
        order = ("left", "right") if (int(round(t / self.params.dt)) % 2 == 0) else ("right", "left")
        for side in order:
            attempts = self.rng.poisson(self.flux * self.params.dt)
            for _ in range(attempts):
                if sum(b.fate is None for b in self.bundles) >= self.params.electron_cap:
                    break
                e = self.sampler.draw(self.rng)
                b = inject(self.layout, self.device, side, e, self._next_id, t, self.rng)
                self._next_id += 1
                self.bundles.append(b)
                record.injected[side] += 1

    def _retire(self, b: ElectronBundle, fate: str, t: float, record: RunRecord):
        b.fate = fate
        b.retired_at = t
        b.trajectory.alive = False
        record.fates[fate] += 1
        record.transit_collisions.append(len(b.collisions))

    def _maybe_collide(self, b: ElectronBundle, t: float, record: RunRecord):
        if not self.mechanisms or self.rng.random() >= self.p_collision:
            return
        k_central = expectation_momentum(b.field) / hbar
        ev = scattering.select_event_parabolic(k_central, self.device.mass, self.mechanisms, self.rng)
        if ev is None:
            return
        n_sub = self.params.kick_substeps
        q_sub = self.layout.grid.round_wavenumber(ev.q / n_sub)
        if q_sub == 0.0:
            return  # exchanged momentum below grid resolution: no-op
        b.kick.pending.extend([q_sub] * n_sub)
        b.collisions.append(ev)
        record.events.append((t, b.bundle_id, ev.kind.value, ev.q, ev.delta_e_ev))

    def _apply_pending_kicks(self, b: ElectronBundle):
        if b.kick.pending:
            q = b.kick.pending.pop(0)
            b.field, q_used = schrodinger.apply_kick(b.field, q)
            b.kick.lambda_accum += hbar * q_used

    def step(self, istep: int, record: RunRecord):
        """potential → field step → trajectories → collisions → retirement → injection."""
        t = istep * self.params.dt
        dt = self.params.dt
        live = [b for b in self.bundles if b.fate is None]
        a_lo, a_hi = record.active_span
        net_cross = 0
        ramo = 0.0
        if live:
            grid = self.layout.grid
            m = len(live)
            win = self.solver.window
            for b in live:
                self._apply_pending_kicks(b)
            # all live carriers step together: one batched FFT quartet per
            # step instead of per-carrier transforms
            psi = np.empty((m, grid.n), dtype=np.complex128)
            for i, b in enumerate(live):
                psi[i] = b.field.values
            psi *= self._half_v_static
            hwin = None
            if m > 1:
                # conditional potentials share the all-charge tent solution
                tents = np.stack(
                    [self.solver.charge_window(b.trajectory.position) for b in live]
                )
                hwin = np.exp((-0.5j * dt / hbar) * (tents.sum(axis=0)[None, :] - tents))
                psi[:, win] *= hwin
            spec = np.fft.fft(psi, axis=1)
            spec *= self._kin0
            psi = np.fft.ifft(spec, axis=1)
            psi *= self._half_v_static
            if hwin is not None:
                psi[:, win] *= hwin
            if not np.all(np.isfinite(psi.view(np.float64))):
                raise FloatingPointError("a carrier field became non-finite")
            # guidance samples (J, ρ) from the freshly stepped fields
            dpsi = np.fft.ifft(np.fft.fft(psi, axis=1) * (1j * grid.wavenumbers()), axis=1)
            J = (hbar / self.device.mass) * np.imag(np.conj(psi) * dpsi)
            rho = np.abs(psi) ** 2
            norm2 = rho.sum(axis=1) * grid.dx
            x_old = np.array([b.trajectory.position for b in live])
            x_new = bohm.advance_rowwise(x_old, J, rho, grid.dx, dt)
            # signed crossings of the mid-device plane
            crossed = (x_old - self._plane) * (x_new - self._plane) < 0.0
            net_cross = int(np.sign(x_new - x_old)[crossed].sum())
            # Ramo-Shockley: swept path clipped to the active region
            ramo = float(
                (np.clip(x_new, a_lo, a_hi) - np.clip(x_old, a_lo, a_hi)).sum()
            ) / (a_hi - a_lo)
            for i, b in enumerate(live):
                b.field = _wrap_field_1d(grid, psi[i])
                b.trajectory.position = float(x_new[i])
                self._maybe_collide(b, t, record)
            record.alive_time_s += m * dt
            # retirement
            lo, hi = self.layout.interior
            for i, b in enumerate(live):
                x = b.trajectory.position
                if not (lo < x < hi):
                    exited = "right" if x >= hi else "left"
                    fate = "transmitted" if exited != b.origin else "reflected"
                    self._retire(b, fate, t, record)
                elif norm2[i] < self._norm_floor * b.initial_norm2:
                    self._retire(b, "absorbed", t, record)
        self._inject_step(t, record)
        record.times.append(t)
        record.net_crossings.append(net_cross)
        record.ramo_current.append(elementary_charge * ramo / dt)
        record.alive_count.append(sum(b.fate is None for b in self.bundles))
        if self.params.sample_stride and istep % self.params.sample_stride == 0:
            record.trajectory_samples.append(
                (t, {b.bundle_id: b.trajectory.position for b in self.bundles if b.fate is None})
            )
        stride = self.params.density_matrix_stride
        if stride and istep % stride == 0:
            live_now = [b for b in self.bundles if b.fate is None]
            if live_now:
                edm = bohm.ensemble_density_matrix(
                    [b.field for b in live_now],
                    np.ones(len(live_now)),
                    max_dim=self.params.density_matrix_dim,
                )
                record.positivity_samples.append((t, bohm.positivity_report(edm)))

    def run(self) -> RunRecord:
        p = self.params
        t_end = p.n_steps * p.dt
        record = RunRecord(
            bias_v=self.device.bias_v,
            dt=p.dt,
            n_steps=p.n_steps,
            window=(p.warmup_fraction * t_end, t_end),
            active_span=self.layout.active_span(self.device),
        )
        for istep in range(p.n_steps):
            self.step(istep, record)
        for b in self.bundles:
            if b.fate is None:
                b.fate = "still_inside"
                record.fates["still_inside"] += 1
        return record


# ----- bias sweeps -----


@dataclass(frozen=True)
class IVPoint:
    bias_v: float
    current_counting_a: float
    current_ramo_a: float
    gross_crossings: int
    injected: int
    collisions_per_second: float
    collisions_per_transit: float
    converged: bool


# a bias point counts as converged once its window saw at least this many
# gross plane crossings; below that the estimator cross-check is noise
CONVERGENCE_MIN_CROSSINGS = 50


def run_transport(
    device: DeviceSpec,
    layout: BoxLayout,
    mechanisms,
    params: RunParams,
    seed,
) -> RunRecord:
    return TransportRun(device, layout, mechanisms, params, seed).run()


def iv_point_from_record(record: RunRecord) -> IVPoint:
    stats = collision_statistics(record)
    gross = gross_crossings(record)
    return IVPoint(
        bias_v=record.bias_v,
        current_counting_a=current_counting(record),
        current_ramo_a=current_ramo(record),
        gross_crossings=gross,
        injected=sum(record.injected.values()),
        collisions_per_second=stats["per_electron_second"],
        collisions_per_transit=stats["per_transit"],
        converged=gross >= CONVERGENCE_MIN_CROSSINGS,
    )


def iv_sweep(
    device_base: DeviceSpec,
    layout: BoxLayout,
    mechanisms,
    params: RunParams,
    biases,
    seed: int,
    threads: int = 1,
    adaptive_dt: bool = True,
) -> tuple[list[IVPoint], list[RunRecord]]:
    """Independent run per bias point; per-bias RNG streams are spawned from
    (seed, bias index) so results do not depend on execution order."""
    jobs = []
    for i, bias in enumerate(biases):
        dev = DeviceSpec(
            total_length_m=device_base.total_length_m,
            regions=device_base.regions,
            fermi_level_j=device_base.fermi_level_j,
            temperature_k=device_base.temperature_k,
            mass_ratio=device_base.mass_ratio,
            bias_v=bias,
            relative_permittivity=device_base.relative_permittivity,
            cross_section_m2=device_base.cross_section_m2,
        )
        p = params
        if adaptive_dt:
            dt = min(params.dt, suggest_dt(dev, layout))
            n_steps = int(round(params.n_steps * params.dt / dt))
            p = RunParams(
                dt=dt,
                n_steps=n_steps,
                electron_cap=params.electron_cap,
                kick_substeps=params.kick_substeps,
                absorber_strength_ev=params.absorber_strength_ev,
                warmup_fraction=params.warmup_fraction,
                sample_stride=params.sample_stride,
                density_matrix_stride=params.density_matrix_stride,
                density_matrix_dim=params.density_matrix_dim,
            )
        jobs.append((dev, layout, list(mechanisms), p, np.random.SeedSequence([seed, i])))
    if threads > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=threads) as ex:
            records = list(ex.map(_sweep_worker, jobs))
    else:
        records = [_sweep_worker(j) for j in jobs]
    return [iv_point_from_record(r) for r in records], records


def _sweep_worker(job) -> RunRecord:
    device, layout, mechanisms, params, seed = job
    return run_transport(device, layout, mechanisms, params, seed)
