"""Physical constants and unit helpers.

Everything internal to the solvers is SI (metres, seconds, joules,
kilograms, 1/m wavenumbers).  Electron-volts and nanometres only appear
at the configuration boundary, converted through the helpers below.
"""

from scipy.constants import hbar, m_e, elementary_charge, epsilon_0, k as k_B

# conduction-band effective mass ratio for GaAs
GAAS_MASS_RATIO = 0.067

# graphene Fermi velocity, m/s
FERMI_VELOCITY = 1.0e6

EV = elementary_charge  # J per eV
NM = 1.0e-9
FS = 1.0e-15
PS = 1.0e-12


def ev_to_joule(e_ev):
    return e_ev * EV


def joule_to_ev(e_j):
    return e_j / EV


def nm_to_m(x_nm):
    return x_nm * NM


def m_to_nm(x_m):
    return x_m / NM


def thermal_energy(temperature_k):
    """k_B T in joules."""
    return k_B * temperature_k


def bose_occupancy(energy_j, temperature_k):
    """Equilibrium phonon occupancy N = 1/(exp(E/kT) - 1); 0 at T = 0."""
    if temperature_k <= 0.0:
        return 0.0
    import math

    x = energy_j / (k_B * temperature_k)
    if x > 700.0:
        return 0.0
    return 1.0 / (math.expm1(x))
