"""Atomic units (hbar = m_e = e = 4 pi eps0 = 1) and boundary conversions."""

import math

ALPHA = 1.0 / 137.035999
HBAR = 1.0
C_LIGHT = 1.0 / ALPHA
EPS0 = 1.0 / (4.0 * math.pi)
MU0 = 1.0 / (EPS0 * C_LIGHT**2)

# radiation-reaction time e^2 / (6 pi eps0 m c^3)
TAU_E = 2.0 / 3.0 * ALPHA**3

ELECTRON_MASS = 1.0
PROTON_MASS = 1836.15267343
NEUTRON_MASS = 1838.68366173

HARTREE_EV = 27.211386245988
BOHR_M = 5.29177210903e-11
TIME_AU_S = 2.4188843265857e-17


def hartree_to_ev(energy):
    return energy * HARTREE_EV


def ev_to_hartree(energy):
    return energy / HARTREE_EV


def bohr_to_m(length):
    return length * BOHR_M


def tau_to_seconds(t):
    return t * TIME_AU_S
