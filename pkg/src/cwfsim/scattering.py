"""Stochastic electron-phonon and impurity scattering.

Collisions are instantaneous momentum exchanges drawn per carrier per
step.  A mechanism's `rate` is its base coupling strength Γ₀ (1/s); the
effective rate entering the dice is Γ₀·(N+1) for phonon emission and
Γ₀·N for absorption, with N the equilibrium Bose occupancy of the
phonon at the mechanism temperature.  Writing it this way makes the
absorption channel close by itself at T → 0 and pins the equilibrium
emission/absorption ratio at e^{ħω/kT} without extra bookkeeping.

Selection semantics per step: at most one event per carrier.  Whether
any collision fires is Bernoulli with p = 1 - exp(-Γ_tot·dt); which
mechanism fired is multinomial in the effective rates; the outcome can
still be rejected (no kinematically allowed final state), in which case
the carrier flies on unchanged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .constants import bose_occupancy, ev_to_joule, hbar
from .dirac import BandIndex, DiracCollision, beta_angle

# optical phonons of the reference material exchange this fixed quantum
OPTICAL_PHONON_EV = 0.036


class MechanismKind(Enum):
    ACOUSTIC_ELASTIC = "acoustic_elastic"
    IMPURITY_ELASTIC = "impurity_elastic"
    OPTICAL_EMISSION = "optical_emission"
    OPTICAL_ABSORPTION = "optical_absorption"

    @property
    def elastic(self) -> bool:
        return self in (MechanismKind.ACOUSTIC_ELASTIC, MechanismKind.IMPURITY_ELASTIC)


@dataclass(frozen=True)
class Mechanism:
    """One scattering channel: kind, base rate Γ₀ (1/s), phonon quantum, bath T."""

    kind: MechanismKind
    rate: float
    phonon_energy_ev: float = 0.0
    temperature_k: float = 300.0

    def __post_init__(self):
        if self.rate < 0.0:
            raise ValueError("mechanism rate must be >= 0")
        if not self.kind.elastic and self.phonon_energy_ev <= 0.0:
            raise ValueError("optical mechanisms need a positive phonon energy")
        if self.temperature_k < 0.0:
            raise ValueError("temperature must be >= 0")

    def effective_rate(self) -> float:
        """Γ₀ weighted by the phonon occupancy of the channel."""
        if self.kind is MechanismKind.OPTICAL_EMISSION:
            return self.rate * (bose_occupancy(ev_to_joule(self.phonon_energy_ev), self.temperature_k) + 1.0)
        if self.kind is MechanismKind.OPTICAL_ABSORPTION:
            return self.rate * bose_occupancy(ev_to_joule(self.phonon_energy_ev), self.temperature_k)
        return self.rate


def equilibrium_optical_pair(
    base_rate: float, temperature_k: float, phonon_energy_ev: float = OPTICAL_PHONON_EV
) -> tuple[Mechanism, Mechanism]:
    """Emission/absorption pair sharing one coupling strength (detailed balance)."""
    em = Mechanism(MechanismKind.OPTICAL_EMISSION, base_rate, phonon_energy_ev, temperature_k)
    ab = Mechanism(MechanismKind.OPTICAL_ABSORPTION, base_rate, phonon_energy_ev, temperature_k)
    return em, ab


@dataclass(frozen=True)
class CollisionEvent:
    """Realized scattering outcome for a 1D effective-mass carrier."""

    kind: MechanismKind
    q: float  # exchanged wavenumber (1/m); carrier gains ħq
    delta_e_ev: float  # carrier energy change
    time: float = 0.0


def total_rate(mechanisms) -> float:
    return sum(m.effective_rate() for m in mechanisms)


def collision_probability(gamma: float, dt: float) -> float:
    """p = 1 - e^{-Γ dt}; exact for a Poisson process observed over dt."""
    if gamma < 0.0 or dt < 0.0:
        raise ValueError("rate and dt must be >= 0")
    return -math.expm1(-gamma * dt)


def _pick_mechanism(mechanisms, rng: np.random.Generator) -> Mechanism | None:
    rates = np.array([m.effective_rate() for m in mechanisms])
    tot = rates.sum()
    if tot <= 0.0:
        return None
    return mechanisms[rng.choice(len(mechanisms), p=rates / tot)]


def select_event_parabolic(
    k: float, mass: float, mechanisms, rng: np.random.Generator
) -> CollisionEvent | None:
    """Draw one outcome for an effective-mass carrier with central wavenumber k.

    Elastic channels reverse the carrier: q = -2k (the only non-identity
    elastic final state in one dimension).  Optical channels set the final
    |k'| from ħ²k'²/2m = ħ²k²/2m ± ħω with a random sign of k', and reject
    emission when the ledger would go negative.  Returns None when the
    drawn channel has no allowed outcome.
    """
    mech = _pick_mechanism(mechanisms, rng)
    if mech is None:
        return None
    if mech.kind.elastic:
        if k == 0.0:
            return None  # no distinct elastic final state
        return CollisionEvent(mech.kind, q=-2.0 * k, delta_e_ev=0.0)
    e_kin = (hbar * k) ** 2 / (2.0 * mass)
    quantum = ev_to_joule(mech.phonon_energy_ev)
    if mech.kind is MechanismKind.OPTICAL_EMISSION:
        e_final = e_kin - quantum
        if e_final < 0.0:
            return None
        delta = -mech.phonon_energy_ev
    else:
        e_final = e_kin + quantum
        delta = mech.phonon_energy_ev
    k_final = math.sqrt(2.0 * mass * e_final) / hbar
    sign = 1.0 if rng.random() < 0.5 else -1.0
    return CollisionEvent(mech.kind, q=sign * k_final - k, delta_e_ev=delta)


# ----- linear-band (Dirac) selection -----


def _pseudospin_weight(s0: int, sf: int, beta0: float, betaf: float) -> float:
    """|(1 + s0·sf·e^{i(β0-βf)})/2|², the chirality overlap of in/out states."""
    return abs(0.5 * (1.0 + s0 * sf * np.exp(1j * (beta0 - betaf)))) ** 2


def _draw_angle(s0: int, sf: int, beta0: float, rng: np.random.Generator) -> float:
    # rejection sampling against the flat envelope; weight <= 1 everywhere
    while True:
        betaf = rng.uniform(-math.pi, math.pi)
        if rng.random() < _pseudospin_weight(s0, sf, beta0, betaf):
            return betaf


def select_event_dirac(
    k0: tuple[float, float],
    band: BandIndex,
    mechanisms,
    rng: np.random.Generator,
) -> DiracCollision | None:
    """Draw one outcome for a linear-band carrier at central wavevector k0.

    The final radius follows from s_f·ħv_f|kf| = s₀·ħv_f|k0| ± ħω (s_f
    flips when the energy crosses zero); the final angle is drawn from the
    chirality overlap, which kills in-band backscatter and favours
    backscatter across a band flip.  Elastic channels keep |kf| = |k0|.
    """
    mech = _pick_mechanism(mechanisms, rng)
    if mech is None:
        return None
    from .constants import FERMI_VELOCITY

    k0mag = math.hypot(k0[0], k0[1])
    if k0mag == 0.0:
        return None
    s0 = band.sign
    beta0 = beta_angle(k0)
    if mech.kind.elastic:
        sf = s0
        kfmag = k0mag
        delta = 0.0
    else:
        e0 = s0 * hbar * FERMI_VELOCITY * k0mag
        quantum = ev_to_joule(mech.phonon_energy_ev)
        if mech.kind is MechanismKind.OPTICAL_EMISSION:
            ef = e0 - quantum
            delta = -quantum
        else:
            ef = e0 + quantum
            delta = quantum
        if ef == 0.0:
            return None  # final state would sit on the degeneracy point
        sf = 1 if ef > 0.0 else -1
        kfmag = abs(ef) / (hbar * FERMI_VELOCITY)
    betaf = _draw_angle(s0, sf, beta0, rng)
    kf = (kfmag * math.cos(betaf), kfmag * math.sin(betaf))
    return DiracCollision(
        k0=k0,
        kf=kf,
        band_flip_m=0 if sf == s0 else 1,
        delta_e_j=delta if not mech.kind.elastic else 0.0,
        mechanism=mech.kind.value,
    )


# ----- forced events for prepared single-collision experiments -----


def forced_elastic_redirect(k0: tuple[float, float], new_angle: float) -> DiracCollision:
    """Same-band rotation of the central wavevector to `new_angle`."""
    kmag = math.hypot(k0[0], k0[1])
    kf = (kmag * math.cos(new_angle), kmag * math.sin(new_angle))
    return DiracCollision(k0=k0, kf=kf, band_flip_m=0, delta_e_j=0.0)


def forced_band_flip(k0: tuple[float, float], band: BandIndex, new_angle: float) -> DiracCollision:
    """Flip to the opposite band at the same |k| while re-aiming to `new_angle`.

    The carrier energy changes by -2·s₀·ħv_f|k0| (phonon picks it up).
    """
    from .constants import FERMI_VELOCITY

    kmag = math.hypot(k0[0], k0[1])
    kf = (kmag * math.cos(new_angle), kmag * math.sin(new_angle))
    delta = -2.0 * band.sign * hbar * FERMI_VELOCITY * kmag
    return DiracCollision(k0=k0, kf=kf, band_flip_m=1, delta_e_j=delta)
