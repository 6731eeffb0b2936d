"""Radiation-damped, field-driven motion of a bound electron.

The third time derivative in the Abraham-Lorentz force is replaced by its
Landau-Lifshitz reduction, ``tau_e * d/dt F_ext``, with ``F_ext`` the binding
force plus the field force ``-E``.  Units are atomic with electron mass 1 and
charge -1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _kernel as K
from .diagnostics import EnergyLedger
from .units import TAU_E
from .zeropoint import CollapsedField, ModeEnsemble, efield_dipole, efield_dipole_rate

STATUS_NAMES = {K.RUNNING: "completed", K.IONIZED: "ionized", K.DIVERGED: "diverged"}
CHUNK_STEPS = 4096
# a Coulomb approach is unresolved once the local Kepler period spans fewer steps
MIN_STEPS_PER_LOCAL_PERIOD = 10.0


def resolved_radius(dt: float) -> float:
    """Smallest radius whose local Kepler period 2 pi r^1.5 covers the step budget."""
    return (MIN_STEPS_PER_LOCAL_PERIOD * dt / (2.0 * math.pi)) ** (2.0 / 3.0)


class SingularityError(ValueError):
    """Coulomb force requested at the origin."""


@dataclass(frozen=True)
class ParticleState:
    r: np.ndarray
    v: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        r = np.array(self.r, dtype=float).reshape(3)
        v = np.array(self.v, dtype=float).reshape(3)
        if not (np.all(np.isfinite(r)) and np.all(np.isfinite(v)) and math.isfinite(self.t)):
            raise FloatingPointError("particle state has non-finite components")
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "t", float(self.t))


@dataclass(frozen=True)
class PotentialModel:
    variant: str
    omega: float | None = None

    def __post_init__(self):
        if self.variant not in ("coulomb", "harmonic", "free"):
            raise ValueError(f"unknown potential {self.variant!r}")
        if self.variant == "harmonic" and not (self.omega is not None and self.omega > 0):
            raise ValueError("harmonic potential needs omega > 0")

    @classmethod
    def coulomb(cls):
        return cls("coulomb")

    @classmethod
    def harmonic(cls, omega=1.0):
        return cls("harmonic", float(omega))

    @classmethod
    def free(cls):
        return cls("free")

    @property
    def kind(self) -> int:
        return {"coulomb": K.COULOMB, "harmonic": K.HARMONIC, "free": K.FREE}[self.variant]

    @property
    def omega_sq(self) -> float:
        return self.omega**2 if self.variant == "harmonic" else 0.0

    def potential_energy(self, r):
        r = np.asarray(r, dtype=float)
        if self.variant == "coulomb":
            return -1.0 / np.linalg.norm(r, axis=-1)
        if self.variant == "harmonic":
            return 0.5 * self.omega_sq * np.sum(r * r, axis=-1)
        return np.zeros(r.shape[:-1])

    def period(self, r0: float = 1.0) -> float:
        """Orbital period at radius ``r0`` (coulomb) or oscillation period."""
        if self.variant == "coulomb":
            return 2.0 * math.pi * r0**1.5
        if self.variant == "harmonic":
            return 2.0 * math.pi / self.omega
        return 2.0 * math.pi


def binding_force(model: PotentialModel, r) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    if model.variant == "coulomb":
        d = np.linalg.norm(r)
        if d == 0.0:
            raise SingularityError("Coulomb force is singular at r = 0")
        return -r / d**3
    if model.variant == "harmonic":
        return -model.omega_sq * r
    return np.zeros(3)


def binding_force_rate(model: PotentialModel, r, v) -> np.ndarray:
    """Time derivative of the binding force along the motion, J(r) . v."""
    r = np.asarray(r, dtype=float)
    v = np.asarray(v, dtype=float)
    if model.variant == "coulomb":
        d = np.linalg.norm(r)
        if d == 0.0:
            raise SingularityError("Coulomb force is singular at r = 0")
        return -v / d**3 + 3.0 * r * np.dot(r, v) / d**5
    if model.variant == "harmonic":
        return -model.omega_sq * v
    return np.zeros(3)


def radiation_reaction(model: PotentialModel, state: ParticleState, e_field_rate=None,
                       *, tau: float = TAU_E) -> np.ndarray:
    """Order-reduced radiation-reaction force ``tau * d/dt (F_bind - E)``.

    ``e_field_rate`` is dE/dt at the particle; ``None`` means no field.
    """
    rate = binding_force_rate(model, state.r, state.v)
    if e_field_rate is not None:
        rate = rate - np.asarray(e_field_rate, dtype=float)
    return tau * rate


def _acceleration(model, r, v, e, de, tau):
    state = ParticleState(r, v)
    return binding_force(model, r) - e + radiation_reaction(model, state, de, tau=tau)


def step(state: ParticleState, dt: float, model: PotentialModel, ensemble: ModeEnsemble,
         *, tau: float = TAU_E) -> ParticleState:
    """One classical RK4 step with the dipole field evaluated at the stage times."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    if len(ensemble):
        limit = 0.05 * 2.0 * math.pi / float(np.max(ensemble.omega))
        if dt > limit:
            raise ValueError(f"dt={dt} exceeds 0.05 of the shortest field period ({limit})")

    def rhs(t, r, v):
        e = efield_dipole(ensemble, t)
        de = efield_dipole_rate(ensemble, t)
        return v, _acceleration(model, r, v, e, de, tau)

    t, r, v = state.t, state.r, state.v
    k1r, k1v = rhs(t, r, v)
    k2r, k2v = rhs(t + 0.5 * dt, r + 0.5 * dt * k1r, v + 0.5 * dt * k1v)
    k3r, k3v = rhs(t + 0.5 * dt, r + 0.5 * dt * k2r, v + 0.5 * dt * k2v)
    k4r, k4v = rhs(t + dt, r + dt * k3r, v + dt * k3v)
    r_new = r + dt / 6.0 * (k1r + 2.0 * k2r + 2.0 * k3r + k4r)
    v_new = v + dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
    return ParticleState(r_new, v_new, t + dt)


@dataclass(eq=False)
class Trajectory:
    """Strided samples of one integrated charge.

    ``p_in`` and ``p_rad`` are the instantaneous field input and Larmor
    powers at each sample.
    """

    t: np.ndarray
    r: np.ndarray
    v: np.ndarray
    p_in: np.ndarray
    p_rad: np.ndarray
    status: str
    ledger: EnergyLedger
    dt: float
    r_ionize: float = math.inf
    index: int = 0
    seed: int = 0
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return self.t.shape[0]

    @property
    def samples(self):
        return [
            (ParticleState(self.r[i], self.v[i], self.t[i]), float(self.p_in[i]), float(self.p_rad[i]))
            for i in range(len(self))
        ]

    @property
    def t_final(self) -> float:
        return float(self.t[-1])

    def bound_mask(self, burn_in: float = 0.0) -> np.ndarray:
        radius = np.linalg.norm(self.r, axis=1)
        return (self.t >= burn_in) & (radius < self.r_ionize) & np.isfinite(radius)


def auto_dt(model: PotentialModel, omega_max: float | None, r0: float = 1.0) -> float:
    """min(shortest field period, orbital period) / 200."""
    period = model.period(r0)
    if omega_max is not None:
        period = min(period, 2.0 * math.pi / omega_max)
    return period / 200.0


def step_grid(t_end: float, dt_max: float) -> tuple[float, int]:
    """Uniform step no larger than ``dt_max`` that lands exactly on ``t_end``."""
    if t_end <= 0:
        return dt_max, 0
    n = max(1, math.ceil(t_end / dt_max - 1e-9))
    return t_end / n, n


def integrate(collapsed: CollapsedField, model: PotentialModel, starts: Sequence[tuple],
              dt: float, n_steps: int, *, tau: float = TAU_E, stride: int = 1,
              r_ionize: float = math.inf, r_collapse: float = 1e-3) -> list[dict]:
    """Integrate several initial conditions through one shared field realization.

    Each start is ``(r0, v0)``.  Returns one dict of raw sample arrays per start.
    Coulomb runs are diverged below ``max(r_collapse, resolved_radius(dt))``:
    a fixed step cannot follow a plunge deeper than that.
    """
    if model.variant == "coulomb":
        r_collapse = max(r_collapse, resolved_radius(dt))
    m = len(starts)
    ys = np.zeros((m, 8))
    for p, (r0, v0) in enumerate(starts):
        ys[p, :3] = r0
        ys[p, 3:6] = v0
    status = np.zeros(m, dtype=np.int64)
    cap = n_steps // stride + 3
    rec_step = np.zeros((m, cap), dtype=np.int64)
    rec_y = np.zeros((m, cap, 8))
    rec_pin = np.zeros((m, cap))
    rec_prad = np.zeros((m, cap))
    n_rec = np.zeros(m, dtype=np.int64)

    e0 = np.zeros((1, 3))
    de0 = np.zeros((1, 3))
    K.field_samples(collapsed.omega, collapsed.cos_amp, collapsed.sin_amp, 0.0, 0.0, 1, e0, de0)
    deriv = np.empty(8)
    for p in range(m):
        K._rhs(model.kind, model.omega_sq, tau, ys[p], *e0[0], *de0[0], deriv)
        rec_y[p, 0] = ys[p]
        rec_pin[p, 0] = deriv[6]
        rec_prad[p, 0] = deriv[7]
        n_rec[p] = 1
        radius = math.sqrt(ys[p, 0] ** 2 + ys[p, 1] ** 2 + ys[p, 2] ** 2)
        if radius > r_ionize:
            status[p] = K.IONIZED
        elif model.variant == "coulomb" and radius < r_collapse:
            status[p] = K.DIVERGED

    e = np.empty((2 * CHUNK_STEPS + 1, 3))
    de = np.empty((2 * CHUNK_STEPS + 1, 3))
    step0 = 0
    while step0 < n_steps and np.any(status == K.RUNNING):
        n = min(CHUNK_STEPS, n_steps - step0)
        K.field_samples(collapsed.omega, collapsed.cos_amp, collapsed.sin_amp, step0 * dt, 0.5 * dt,
                        2 * n + 1, e, de)
        K.integrate_chunk(ys, status, model.kind, model.omega_sq, tau, dt, n, e, de,
                          step0, stride, n_steps, r_ionize, r_collapse,
                          rec_step, rec_y, rec_pin, rec_prad, n_rec)
        step0 += n

    out = []
    for p in range(m):
        k = n_rec[p]
        out.append({
            "t": rec_step[p, :k] * dt,
            "y": rec_y[p, :k].copy(),
            "p_in": rec_pin[p, :k].copy(),
            "p_rad": rec_prad[p, :k].copy(),
            "status": STATUS_NAMES[int(status[p])],
        })
    return out


def build_trajectory(raw: dict, model: PotentialModel, dt: float, r_ionize: float,
                     index: int = 0, seed: int = 0) -> Trajectory:
    y = raw["y"]
    r, v = y[:, :3], y[:, 3:6]
    with np.errstate(all="ignore"):
        mech = 0.5 * np.sum(v * v, axis=1) + model.potential_energy(r)
    ledger = EnergyLedger(raw["t"], y[:, 6], y[:, 7], mech)
    return Trajectory(raw["t"], r, v, raw["p_in"], raw["p_rad"], raw["status"], ledger,
                      dt, r_ionize, index, seed)


def random_unit_vector(rng: np.random.Generator) -> np.ndarray:
    u, v = rng.random(2)
    cos_theta = 1.0 - 2.0 * u
    sin_theta = math.sqrt(max(0.0, 1.0 - cos_theta**2))
    phi = 2.0 * math.pi * v
    return np.array([sin_theta * math.cos(phi), sin_theta * math.sin(phi), cos_theta])


def circular_start(rng: np.random.Generator, r0: float = 1.0, eccentricity: float = 0.0):
    """Kepler orbit with pericenter ``r0`` in a random plane; circular for e = 0."""
    rhat = random_unit_vector(rng)
    trial = random_unit_vector(rng)
    normal = np.cross(rhat, trial)
    normal /= np.linalg.norm(normal)
    speed = math.sqrt((1.0 + eccentricity) / r0)
    return r0 * rhat, speed * np.cross(normal, rhat)


def stationary_start(rng: np.random.Generator, omega: float, strata=None, n_strata: int = 1):
    """Phase-space point from the oscillator ground-state distribution.

    Per component the energy is exponential with mean omega/2 (so that
    <x^2> = 1/(2 omega)) and the phase uniform.  With ``strata`` (one stratum
    index per component) the energy quantile is drawn inside that stratum.
    """
    u = rng.random(3)
    if strata is not None:
        u = (np.asarray(strata) + u) / n_strata
    energy = -0.5 * omega * np.log1p(-u)
    phase = 2.0 * math.pi * rng.random(3)
    amp = np.sqrt(2.0 * energy)
    return amp / omega * np.cos(phase), -amp * np.sin(phase)


def initial_condition(config, rng, strata=None, n_strata=1):
    if config.init == "circular":
        return circular_start(rng, config.r0, config.eccentricity)
    if config.init == "stationary":
        return stationary_start(rng, config.potential.omega, strata, n_strata)
    if config.init == "rest":
        if config.potential.variant == "coulomb":
            return np.array([config.r0, 0.0, 0.0]), np.zeros(3)
        return np.zeros(3), np.zeros(3)
    raise ValueError(f"unknown init {config.init!r}")


def simulate_group(config, rng: np.random.Generator, n_members: int = 1, *, strata=None,
                   n_strata: int = 1, indices=None, seed: int = 0) -> list[Trajectory]:
    """Integrate ``n_members`` charges through one sampled field realization.

    With two members the second starts from the mirrored phase-space point
    ``(-r0, -v0)`` (antithetic pairing).
    """
    if n_members not in (1, 2):
        raise ValueError("a field group holds one trajectory or an antithetic pair")
    ensemble = config.sample_field(rng)
    r0, v0 = initial_condition(config, rng, strata, n_strata)
    starts = [(r0, v0), (-r0, -v0)][:n_members]
    dt, n_steps = config.step_grid()
    raws = integrate(CollapsedField.from_ensemble(ensemble), config.potential, starts, dt,
                     n_steps, tau=config.tau, stride=config.stride, r_ionize=config.r_ionize,
                     r_collapse=config.r_collapse)
    indices = list(range(n_members)) if indices is None else list(indices)
    return [build_trajectory(raw, config.potential, dt, config.r_ionize, idx, seed)
            for raw, idx in zip(raws, indices)]


def simulate_trajectory(config, rng: np.random.Generator, *, strata=None, n_strata=1,
                        index: int = 0, seed: int = 0) -> Trajectory:
    """Sample a field realization and initial condition, then integrate to ``t_end``.

    The run stops early with status ``ionized`` once |r| exceeds
    ``config.r_ionize`` and ``diverged`` on non-finite state or Coulomb collapse.
    """
    return simulate_group(config, rng, 1, strata=strata, n_strata=n_strata,
                          indices=[index], seed=seed)[0]
