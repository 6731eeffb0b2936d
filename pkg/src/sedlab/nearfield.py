"""Near field of a slow classical point particle: Coulomb, magnetic dipole,
moving-charge (Lorentz) and radiation terms.

All functions broadcast over leading axes, so one call can evaluate many
(direction, distance, velocity, acceleration) tuples.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

import numpy as np

from .units import C_LIGHT, EPS0, MU0, PROTON_MASS

NUCLEAR_MAGNETON = 1.0 / (2.0 * PROTON_MASS)
NONRELATIVISTIC_LIMIT = 0.1


@dataclass(frozen=True)
class ParticleEM:
    z: int
    mass: float
    g: float
    spin: np.ndarray
    moment_override: np.ndarray | None = None

    def __post_init__(self):
        if not self.mass > 0:
            raise ValueError("mass must be positive")
        object.__setattr__(self, "spin", np.asarray(self.spin, dtype=float))
        if self.moment_override is not None:
            object.__setattr__(self, "moment_override",
                               np.asarray(self.moment_override, dtype=float))

    @property
    def charge(self) -> float:
        return float(self.z)


@lru_cache(maxsize=None)
def gfactor_table() -> dict[str, dict]:
    """Rows of the bundled g-factor table keyed by particle name."""
    text = resources.files("sedlab").joinpath("data/gfactors.csv").read_text()
    rows = {}
    for row in csv.DictReader(text.splitlines()):
        rows[row["particle"]] = {
            "z": int(row["z"]), "mass": float(row["mass"]), "g": float(row["g"]),
            "source": row["source"],
        }
    return rows


def preset(name: str, spin=(0.0, 0.0, 0.5)) -> ParticleEM:
    """Particle from the g-factor table.

    The neutron carries no charge, so g(q/2m)S vanishes; its preset sets
    ``moment_override`` to g_n * mu_N * S, the nuclear-magneton convention.
    """
    try:
        row = gfactor_table()[name]
    except KeyError:
        raise ValueError(f"no preset for {name!r}") from None
    spin = np.asarray(spin, dtype=float)
    override = row["g"] * NUCLEAR_MAGNETON * spin if name == "neutron" else None
    return ParticleEM(row["z"], row["mass"], row["g"], spin, override)


def magnetic_moment(particle: ParticleEM) -> np.ndarray:
    """g (q / 2m) S, unless the particle carries an explicit moment."""
    if particle.moment_override is not None:
        return particle.moment_override.copy()
    return particle.g * particle.charge / (2.0 * particle.mass) * particle.spin


@dataclass(frozen=True, eq=False)
class FieldAtPoint:
    e_charge: np.ndarray
    e_rad: np.ndarray
    b_dipole: np.ndarray
    b_lorentz: np.ndarray
    b_rad: np.ndarray

    @property
    def total_e(self) -> np.ndarray:
        return self.e_charge + self.e_rad

    @property
    def total_b(self) -> np.ndarray:
        return self.b_dipole + self.b_lorentz + self.b_rad

    def rows(self):
        """(term, vector) pairs in output order."""
        return [
            ("e_charge", self.e_charge), ("e_rad", self.e_rad), ("total_e", self.total_e),
            ("b_dipole", self.b_dipole), ("b_lorentz", self.b_lorentz), ("b_rad", self.b_rad),
            ("total_b", self.total_b),
        ]


def _dot(a, b):
    return np.sum(a * b, axis=-1, keepdims=True)


def near_field(particle: ParticleEM, rhat, r, v, a, *, moment=None) -> FieldAtPoint:
    """Field at distance ``r`` along unit vector ``rhat`` from the particle."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ValueError("distance must be positive")
    n = np.asarray(rhat, dtype=float)
    v = np.asarray(v, dtype=float)
    a = np.asarray(a, dtype=float)
    if np.any(np.linalg.norm(v, axis=-1) > NONRELATIVISTIC_LIMIT * C_LIGHT):
        warnings.warn("velocity above 0.1 c: the near-field expressions are nonrelativistic",
                      RuntimeWarning, stacklevel=2)
    m = magnetic_moment(particle) if moment is None else np.asarray(moment, dtype=float)
    q = particle.charge
    rr = r[..., None] if r.ndim else r
    k_e = 1.0 / (4.0 * np.pi * EPS0)
    k_b = MU0 / (4.0 * np.pi)

    n_x_a = np.cross(n, a)
    e_charge = k_e * q * n / rr**2
    e_rad = k_e * q / C_LIGHT**2 * np.cross(n, n_x_a) / rr
    b_dipole = k_b * (3.0 * n * _dot(n, m) - m) / rr**3
    b_lorentz = k_b * q * np.cross(v, n) / rr**2
    b_rad = -k_b * q / C_LIGHT * n_x_a / rr
    shape = np.broadcast_shapes(e_charge.shape, b_dipole.shape, b_lorentz.shape, b_rad.shape)
    return FieldAtPoint(*(np.broadcast_to(x, shape).copy()
                          for x in (e_charge, e_rad, b_dipole, b_lorentz, b_rad)))


def field_at_offset(particle: ParticleEM, offset, v, a, *, moment=None) -> FieldAtPoint:
    """:func:`near_field` at a displacement vector from the particle."""
    offset = np.asarray(offset, dtype=float)
    dist = np.linalg.norm(offset, axis=-1)
    if np.any(dist <= 0):
        raise ValueError("evaluation point coincides with the particle")
    return near_field(particle, offset / dist[..., None], dist, v, a, moment=moment)
