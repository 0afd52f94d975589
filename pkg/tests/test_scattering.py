"""Tests for the stochastic collision channels.

Statistical assertions run at fixed seeds with 3-sigma bands; energy and
momentum bookkeeping is checked against closed-form kinematics.
"""

import math

import numpy as np
import pytest

from cwfsim.constants import EV, FERMI_VELOCITY, bose_occupancy, hbar, k_B, m_e
from cwfsim.dirac import BandIndex
from cwfsim.scattering import (
    OPTICAL_PHONON_EV,
    CollisionEvent,
    Mechanism,
    MechanismKind,
    collision_probability,
    equilibrium_optical_pair,
    forced_band_flip,
    forced_elastic_redirect,
    select_event_dirac,
    select_event_parabolic,
    total_rate,
)

MASS = 0.067 * m_e


def k_of_energy(e_ev: float) -> float:
    return math.sqrt(2.0 * MASS * e_ev * EV) / hbar


# ----- probabilities and rates -----


def test_collision_probability_edge_values():
    assert collision_probability(0.0, 1e-15) == 0.0
    assert collision_probability(5e12, 0.0) == 0.0
    assert collision_probability(math.log(2.0) / 1e-15, 1e-15) == pytest.approx(0.5, rel=1e-12)
    with pytest.raises(ValueError):
        collision_probability(-1.0, 1e-15)
    with pytest.raises(ValueError):
        collision_probability(1.0, -1e-15)


def test_collision_probability_matches_bernoulli_statistics():
    p = collision_probability(2.0e12, 1e-13)  # 1 - e^{-0.2}
    rng = np.random.default_rng(9)
    n = 1_000_000
    hits = (rng.random(n) < p).mean()
    sd = math.sqrt(p * (1.0 - p) / n)
    assert abs(hits - p) < 3.0 * sd


def test_mechanism_validation():
    with pytest.raises(ValueError):
        Mechanism(MechanismKind.ACOUSTIC_ELASTIC, rate=-1.0)
    with pytest.raises(ValueError):
        Mechanism(MechanismKind.OPTICAL_EMISSION, rate=1e12)  # no phonon energy
    with pytest.raises(ValueError):
        Mechanism(MechanismKind.ACOUSTIC_ELASTIC, rate=1e12, temperature_k=-5.0)


def test_effective_rates_follow_phonon_occupancy():
    em, ab = equilibrium_optical_pair(1e12, 300.0)
    n_bose = bose_occupancy(OPTICAL_PHONON_EV * EV, 300.0)
    assert em.effective_rate() == pytest.approx(1e12 * (n_bose + 1.0), rel=1e-12)
    assert ab.effective_rate() == pytest.approx(1e12 * n_bose, rel=1e-12)
    # detailed balance: emission/absorption = e^{hbar w / k T}
    ratio = em.effective_rate() / ab.effective_rate()
    boltzmann = math.exp(OPTICAL_PHONON_EV * EV / (k_B * 300.0))
    assert ratio == pytest.approx(boltzmann, rel=1e-12)


def test_absorption_channel_closes_at_zero_temperature():
    em, ab = equilibrium_optical_pair(1e12, 0.0)
    assert ab.effective_rate() == 0.0
    assert em.effective_rate() == pytest.approx(1e12, rel=1e-12)
    assert total_rate([em, ab]) == pytest.approx(1e12, rel=1e-12)


# ----- 1D effective-mass outcomes -----


def test_elastic_event_reverses_wavenumber():
    k = k_of_energy(0.1)
    mech = Mechanism(MechanismKind.ACOUSTIC_ELASTIC, rate=1e12)
    rng = np.random.default_rng(1)
    ev = select_event_parabolic(k, MASS, [mech], rng)
    assert ev.kind is MechanismKind.ACOUSTIC_ELASTIC
    assert ev.q == -2.0 * k
    assert ev.delta_e_ev == 0.0


def test_elastic_event_needs_moving_carrier():
    mech = Mechanism(MechanismKind.ACOUSTIC_ELASTIC, rate=1e12)
    rng = np.random.default_rng(1)
    assert select_event_parabolic(0.0, MASS, [mech], rng) is None


def test_optical_emission_energy_bookkeeping():
    k = k_of_energy(0.1)
    em = Mechanism(MechanismKind.OPTICAL_EMISSION, 1e12, OPTICAL_PHONON_EV, 300.0)
    rng = np.random.default_rng(2)
    for _ in range(50):
        ev = select_event_parabolic(k, MASS, [em], rng)
        assert ev.delta_e_ev == -OPTICAL_PHONON_EV
        e_final = (hbar * (k + ev.q)) ** 2 / (2.0 * MASS) / EV
        assert e_final == pytest.approx(0.1 - OPTICAL_PHONON_EV, rel=1e-12)


def test_optical_absorption_energy_bookkeeping():
    k = k_of_energy(0.02)
    ab = Mechanism(MechanismKind.OPTICAL_ABSORPTION, 1e12, OPTICAL_PHONON_EV, 300.0)
    rng = np.random.default_rng(3)
    ev = select_event_parabolic(k, MASS, [ab], rng)
    assert ev.delta_e_ev == OPTICAL_PHONON_EV
    e_final = (hbar * (k + ev.q)) ** 2 / (2.0 * MASS) / EV
    assert e_final == pytest.approx(0.02 + OPTICAL_PHONON_EV, rel=1e-12)


def test_emission_below_threshold_is_rejected():
    k = k_of_energy(0.02)  # 20 meV < 36 meV quantum
    em = Mechanism(MechanismKind.OPTICAL_EMISSION, 1e12, OPTICAL_PHONON_EV, 300.0)
    rng = np.random.default_rng(4)
    for _ in range(200):
        assert select_event_parabolic(k, MASS, [em], rng) is None


def test_no_absorption_events_at_zero_temperature():
    k = k_of_energy(0.1)
    em, ab = equilibrium_optical_pair(1e12, 0.0)
    rng = np.random.default_rng(5)
    kinds = [select_event_parabolic(k, MASS, [em, ab], rng).kind for _ in range(5000)]
    assert all(kd is MechanismKind.OPTICAL_EMISSION for kd in kinds)


def test_mechanism_selection_follows_rate_ratios():
    k = k_of_energy(0.1)
    m1 = Mechanism(MechanismKind.ACOUSTIC_ELASTIC, rate=1e12)
    m2 = Mechanism(MechanismKind.IMPURITY_ELASTIC, rate=3e12)
    rng = np.random.default_rng(6)
    n = 20_000
    picks = [select_event_parabolic(k, MASS, [m1, m2], rng).kind for _ in range(n)]
    frac = sum(kd is MechanismKind.IMPURITY_ELASTIC for kd in picks) / n
    sd = math.sqrt(0.75 * 0.25 / n)
    assert abs(frac - 0.75) < 3.0 * sd


def test_emission_absorption_counts_obey_detailed_balance():
    k = k_of_energy(0.15)  # emission always allowed
    em, ab = equilibrium_optical_pair(1e12, 300.0)
    rng = np.random.default_rng(7)
    n = 30_000
    kinds = [select_event_parabolic(k, MASS, [em, ab], rng).kind for _ in range(n)]
    n_em = sum(kd is MechanismKind.OPTICAL_EMISSION for kd in kinds)
    n_bose = bose_occupancy(OPTICAL_PHONON_EV * EV, 300.0)
    p_em = (n_bose + 1.0) / (2.0 * n_bose + 1.0)
    sd = math.sqrt(p_em * (1.0 - p_em) / n)
    assert abs(n_em / n - p_em) < 3.0 * sd


def test_empty_mechanism_list_never_scatters():
    rng = np.random.default_rng(8)
    assert select_event_parabolic(1e8, MASS, [], rng) is None
    assert total_rate([]) == 0.0
    assert collision_probability(total_rate([]), 1e-15) == 0.0


# ----- linear-band outcomes -----


def test_dirac_elastic_preserves_radius_and_band():
    k0 = (0.25e9, 0.1e9)
    mech = Mechanism(MechanismKind.IMPURITY_ELASTIC, rate=1e12)
    rng = np.random.default_rng(9)
    for _ in range(100):
        ev = select_event_dirac(k0, BandIndex.CONDUCTION, [mech], rng)
        assert ev.band_flip_m == 0
        assert math.hypot(*ev.kf) == pytest.approx(math.hypot(*k0), rel=1e-12)
        assert ev.delta_e_j == 0.0


def test_dirac_elastic_angle_statistics_suppress_backscatter():
    """In-band angle density ~ cos^2(dbeta/2): mean cos(dbeta) = +1/2."""
    k0 = (0.3e9, 0.0)
    mech = Mechanism(MechanismKind.IMPURITY_ELASTIC, rate=1e12)
    rng = np.random.default_rng(10)
    n = 20_000
    cosd = np.empty(n)
    for i in range(n):
        ev = select_event_dirac(k0, BandIndex.CONDUCTION, [mech], rng)
        cosd[i] = math.cos(math.atan2(ev.kf[1], ev.kf[0]))
    # density p(d) = cos^2(d/2)/pi: <cos> = 1/2, var = <cos^2> - 1/4 = 1/8
    sd = math.sqrt((3.0 / 8.0 - 0.25) / n)
    assert abs(cosd.mean() - 0.5) < 3.0 * sd
    # exact backscatter has zero weight; a 10-degree cone about it keeps
    # ~1.4e-4 of the mass, so a handful of hits at most
    d = np.abs(np.abs(np.arccos(np.clip(cosd, -1, 1))) - math.pi)
    assert (d < math.radians(10.0)).sum() < 20


def test_dirac_band_flip_angle_statistics_favour_backscatter():
    """Across a flip the density ~ sin^2(dbeta/2): mean cos(dbeta) = -1/2."""
    # conduction carrier below the phonon quantum: emission lands on the
    # valence branch
    quantum = OPTICAL_PHONON_EV * EV
    k0mag = 0.5 * quantum / (hbar * FERMI_VELOCITY)
    k0 = (k0mag, 0.0)
    em = Mechanism(MechanismKind.OPTICAL_EMISSION, 1e12, OPTICAL_PHONON_EV, 300.0)
    rng = np.random.default_rng(11)
    n = 20_000
    cosd = np.empty(n)
    for i in range(n):
        ev = select_event_dirac(k0, BandIndex.CONDUCTION, [em], rng)
        assert ev.band_flip_m == 1
        cosd[i] = math.cos(math.atan2(ev.kf[1], ev.kf[0]))
    sd = math.sqrt((3.0 / 8.0 - 0.25) / n)
    assert abs(cosd.mean() + 0.5) < 3.0 * sd


def test_dirac_emission_crossing_zero_flips_band():
    quantum = OPTICAL_PHONON_EV * EV
    e0 = 0.5 * quantum  # emission final energy: -quantum/2
    k0 = (e0 / (hbar * FERMI_VELOCITY), 0.0)
    em = Mechanism(MechanismKind.OPTICAL_EMISSION, 1e12, OPTICAL_PHONON_EV, 300.0)
    rng = np.random.default_rng(12)
    ev = select_event_dirac(k0, BandIndex.CONDUCTION, [em], rng)
    assert ev.band_flip_m == 1
    kf_expected = 0.5 * quantum / (hbar * FERMI_VELOCITY)
    assert math.hypot(*ev.kf) == pytest.approx(kf_expected, rel=1e-12)
    assert ev.delta_e_j == pytest.approx(-quantum, rel=1e-12)


def test_dirac_absorption_from_valence_flips_up():
    quantum = OPTICAL_PHONON_EV * EV
    e0 = -0.5 * quantum  # valence carrier; absorption -> +quantum/2
    k0 = (0.5 * quantum / (hbar * FERMI_VELOCITY), 0.0)
    ab = Mechanism(MechanismKind.OPTICAL_ABSORPTION, 1e12, OPTICAL_PHONON_EV, 300.0)
    rng = np.random.default_rng(13)
    ev = select_event_dirac(k0, BandIndex.VALENCE, [ab], rng)
    assert ev.band_flip_m == 1
    assert math.hypot(*ev.kf) == pytest.approx(abs(e0 + quantum) / (hbar * FERMI_VELOCITY), rel=1e-12)


def test_dirac_zero_wavevector_never_scatters():
    mech = Mechanism(MechanismKind.IMPURITY_ELASTIC, rate=1e12)
    rng = np.random.default_rng(14)
    assert select_event_dirac((0.0, 0.0), BandIndex.CONDUCTION, [mech], rng) is None


# ----- forced single-collision events -----


def test_forced_elastic_redirect_rotates_at_fixed_radius():
    k0 = (0.3e9, 0.0)
    ev = forced_elastic_redirect(k0, math.pi / 2)
    assert ev.band_flip_m == 0
    assert ev.delta_e_j == 0.0
    assert ev.kf[0] == pytest.approx(0.0, abs=1e-3)
    assert ev.kf[1] == pytest.approx(0.3e9, rel=1e-12)


def test_forced_band_flip_reverses_energy():
    k0 = (0.3e9, 0.0)
    ev = forced_band_flip(k0, BandIndex.CONDUCTION, math.pi)
    assert ev.band_flip_m == 1
    assert ev.delta_e_j == pytest.approx(-2.0 * hbar * FERMI_VELOCITY * 0.3e9, rel=1e-12)
    assert ev.kf[0] == pytest.approx(-0.3e9, rel=1e-12)


def test_collision_event_carries_fields():
    ev = CollisionEvent(MechanismKind.ACOUSTIC_ELASTIC, q=-2e8, delta_e_ev=0.0, time=1e-12)
    assert ev.q == -2e8
    assert ev.time == 1e-12
