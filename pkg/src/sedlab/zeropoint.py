"""Finite-mode realization of the classical zero-point radiation field.

Modes are stored frequency-major: mode ``i * n_dir + j`` is direction ``j`` of
frequency cell ``i``.  Amplitudes are kept as arrays; :meth:`ModeEnsemble.mode`
gives a per-mode view when one is needed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .units import C_LIGHT, EPS0, HBAR

# reference axis for the polarization basis, and the fallback when khat is close to it
_REF_AXIS = np.array([0.0, 0.0, 1.0])
_FALLBACK_AXIS = np.array([1.0, 0.0, 0.0])
_FALLBACK_THRESHOLD = 0.9


def spectral_density(omega, *, hbar=HBAR, c=C_LIGHT):
    """Zero-point energy density per unit angular frequency, hbar w^3 / (2 pi^2 c^3)."""
    w = np.asarray(omega, dtype=float)
    if np.any(w < 0):
        raise ValueError(f"spectral_density needs omega >= 0, got {omega!r}")
    out = hbar * w**3 / (2.0 * math.pi**2 * c**3)
    return float(out) if out.ndim == 0 else out


def window_energy_density(omega_min, omega_max, *, hbar=HBAR, c=C_LIGHT):
    """Closed-form integral of :func:`spectral_density` over [omega_min, omega_max]."""
    if not 0 <= omega_min <= omega_max:
        raise ValueError("need 0 <= omega_min <= omega_max")
    return hbar * (omega_max**4 - omega_min**4) / (8.0 * math.pi**2 * c**3)


@dataclass(frozen=True)
class FieldSpec:
    omega_min: float
    omega_max: float
    n_freq: int
    n_dir: int
    jitter: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.omega_min < self.omega_max:
            raise ValueError(
                f"need 0 < omega_min < omega_max, got omega_min={self.omega_min}, "
                f"omega_max={self.omega_max}"
            )
        if int(self.n_freq) != self.n_freq or self.n_freq < 1:
            raise ValueError(f"n_freq must be a positive integer, got {self.n_freq}")
        if int(self.n_dir) != self.n_dir or self.n_dir < 1:
            raise ValueError(f"n_dir must be a positive integer, got {self.n_dir}")
        if not 0 <= self.jitter < 1:
            raise ValueError(f"jitter must lie in [0, 1), got {self.jitter}")
        if not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {self.seed}")

    @property
    def spacing(self) -> float:
        return (self.omega_max - self.omega_min) / self.n_freq

    @property
    def recurrence_time(self) -> float:
        """Time after which the frequency comb would artificially repeat."""
        return 2.0 * math.pi / self.spacing

    @property
    def n_modes(self) -> int:
        return self.n_freq * self.n_dir


@dataclass(frozen=True)
class Mode:
    omega: float
    khat: np.ndarray
    eps1: np.ndarray
    eps2: np.ndarray
    a1: float
    a2: float
    b1: float
    b2: float
    amplitude_scale: float


@dataclass(frozen=True, eq=False)
class ModeEnsemble:
    """Immutable bundle of plane-wave modes.

    ``amps`` columns are ``(a1, a2, b1, b2)``: cosine and sine amplitudes of the
    two polarizations.
    """

    omega: np.ndarray
    khat: np.ndarray
    eps1: np.ndarray
    eps2: np.ndarray
    amps: np.ndarray
    scale: np.ndarray
    spec: FieldSpec | None = None
    n_dir: int = field(default=1)

    def __post_init__(self):
        for name in ("omega", "khat", "eps1", "eps2", "amps", "scale"):
            arr = np.ascontiguousarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def empty(cls, spec: FieldSpec | None = None) -> "ModeEnsemble":
        z3 = np.zeros((0, 3))
        return cls(np.zeros(0), z3, z3, z3, np.zeros((0, 4)), np.zeros(0), spec, 1)

    def __len__(self) -> int:
        return self.omega.shape[0]

    def mode(self, i: int) -> Mode:
        a1, a2, b1, b2 = self.amps[i]
        return Mode(
            float(self.omega[i]), self.khat[i].copy(), self.eps1[i].copy(),
            self.eps2[i].copy(), float(a1), float(a2), float(b1), float(b2),
            float(self.scale[i]),
        )

    @property
    def modes(self) -> list[Mode]:
        return [self.mode(i) for i in range(len(self))]

    def to_columns(self) -> dict[str, np.ndarray]:
        """Flat per-mode columns, for run-record serialization."""
        cols = {"omega": self.omega, "scale": self.scale}
        for name, arr in (("khat", self.khat), ("eps1", self.eps1), ("eps2", self.eps2)):
            for k, axis in enumerate("xyz"):
                cols[f"{name}_{axis}"] = arr[:, k]
        for k, name in enumerate(("a1", "a2", "b1", "b2")):
            cols[name] = self.amps[:, k]
        return cols


def polarization_pair(khat):
    """Orthonormal (eps1, eps2) transverse to each row of ``khat``.

    Gram-Schmidt against z; rows with |khat_z| > 0.9 use x instead.
    """
    khat = np.atleast_2d(np.asarray(khat, dtype=float))
    kx, ky, kz = khat.T
    use_x = np.abs(khat @ _REF_AXIS) > _FALLBACK_THRESHOLD
    rx, ry, rz = (np.where(use_x, a, b) for a, b in zip(_FALLBACK_AXIS, _REF_AXIS))
    # the second projection pass pulls transversality down to roundoff
    for _ in range(2):
        d = rx * kx + ry * ky + rz * kz
        ex, ey, ez = rx - d * kx, ry - d * ky, rz - d * kz
        norm = np.sqrt(ex * ex + ey * ey + ez * ez)
        rx, ry, rz = ex / norm, ey / norm, ez / norm
    eps1 = np.stack([rx, ry, rz], axis=1)
    cx, cy, cz = ky * rz - kz * ry, kz * rx - kx * rz, kx * ry - ky * rx
    norm = np.sqrt(cx * cx + cy * cy + cz * cz)
    eps2 = np.stack([cx / norm, cy / norm, cz / norm], axis=1)
    return eps1, eps2


def _unit_sphere(u, v):
    # area-preserving map of the unit square onto the sphere
    cos_theta = 1.0 - 2.0 * u
    sin_theta = np.sqrt(np.maximum(0.0, 1.0 - cos_theta**2))
    phi = 2.0 * math.pi * v
    return np.stack([sin_theta * np.cos(phi), sin_theta * np.sin(phi), cos_theta], axis=-1)


def sample_modes(spec: FieldSpec, rng: np.random.Generator | None = None) -> ModeEnsemble:
    """Draw one realization of the windowed zero-point field.

    Frequency cell ``i`` gets ``omega_min + (i + u_i * jitter) * spacing``;
    every (frequency, direction) pair carries two polarizations with standard
    normal cosine and sine amplitudes.  The per-mode scale is chosen so that
    ``eps0 <E^2>`` equals the window integral of the zero-point spectrum.
    """
    if rng is None:
        rng = np.random.default_rng(spec.seed)
    n_f, n_d = spec.n_freq, spec.n_dir
    dw = spec.spacing

    u = rng.random(n_f)
    omega_cells = spec.omega_min + (np.arange(n_f) + u * spec.jitter) * dw
    khat = _unit_sphere(rng.random(n_f * n_d), rng.random(n_f * n_d))
    eps1, eps2 = polarization_pair(khat)
    amps = rng.standard_normal((n_f * n_d, 4))

    omega = np.repeat(omega_cells, n_d)
    scale = np.sqrt(spectral_density(omega) * dw / (EPS0 * n_d * 2.0))
    return ModeEnsemble(omega, khat, eps1, eps2, amps, scale, spec, n_d)


def _plane_wave_sum(ens: ModeEnsemble, phase, weight):
    # sum_modes weight * [eps1 (a1 cos + b1 sin) + eps2 (a2 cos + b2 sin)]
    c, s = np.cos(phase), np.sin(phase)
    a1, a2, b1, b2 = ens.amps.T
    w1 = weight * (a1 * c + b1 * s)
    w2 = weight * (a2 * c + b2 * s)
    return w1 @ ens.eps1 + w2 @ ens.eps2


def efield_dipole(ens: ModeEnsemble, t: float) -> np.ndarray:
    """Electric field at the origin (dipole approximation, k.r -> 0)."""
    if len(ens) == 0:
        return np.zeros(3)
    return _plane_wave_sum(ens, ens.omega * t, ens.scale)


def efield_dipole_rate(ens: ModeEnsemble, t: float) -> np.ndarray:
    """Analytic time derivative of :func:`efield_dipole`."""
    if len(ens) == 0:
        return np.zeros(3)
    # d/dt [a cos wt + b sin wt] = w [b cos wt - a sin wt]: same sum at phase wt + pi/2
    phase = ens.omega * t
    c, s = np.cos(phase), np.sin(phase)
    a1, a2, b1, b2 = ens.amps.T
    w = ens.scale * ens.omega
    return (w * (b1 * c - a1 * s)) @ ens.eps1 + (w * (b2 * c - a2 * s)) @ ens.eps2


def _phase_full(ens: ModeEnsemble, r, t):
    r = np.asarray(r, dtype=float)
    k_dot_r = (ens.khat @ r) * (ens.omega / C_LIGHT)
    return ens.omega * t - k_dot_r


def afield_full(ens: ModeEnsemble, r, t: float) -> np.ndarray:
    """Vector potential of the full plane-wave sum at position ``r``.

    Each mode is ``(scale / omega) eps [a sin(k.r - wt) + b cos(k.r - wt)]`` so
    that ``-dA/dt`` reproduces the dipole field at the origin exactly.
    """
    if len(ens) == 0:
        return np.zeros(3)
    phase = _phase_full(ens, r, t)
    c, s = np.cos(phase), np.sin(phase)
    a1, a2, b1, b2 = ens.amps.T
    w = ens.scale / ens.omega
    # sin(k.r - wt) = -sin(phase), cos(k.r - wt) = cos(phase)
    return (w * (b1 * c - a1 * s)) @ ens.eps1 + (w * (b2 * c - a2 * s)) @ ens.eps2


def efield_full(ens: ModeEnsemble, r, t: float) -> np.ndarray:
    """Electric field ``-dA/dt`` of the full plane-wave sum at position ``r``."""
    if len(ens) == 0:
        return np.zeros(3)
    return _plane_wave_sum(ens, _phase_full(ens, r, t), ens.scale)


@dataclass(frozen=True, eq=False)
class CollapsedField:
    """Dipole field folded per frequency: E(t) = sum_i P_i cos(w_i t) + Q_i sin(w_i t).

    All directions of one frequency cell share ``omega``, so the mode sum
    collapses to ``n_freq`` vector terms.  Used by the trajectory integrator.
    """

    omega: np.ndarray
    cos_amp: np.ndarray
    sin_amp: np.ndarray

    @classmethod
    def from_ensemble(cls, ens: ModeEnsemble) -> "CollapsedField":
        if len(ens) == 0:
            return cls(np.zeros(0), np.zeros((0, 3)), np.zeros((0, 3)))
        n_d = ens.n_dir
        n_f = len(ens) // n_d
        # (n, 2) polarization weights times the (n, 2, 3) polarization basis
        basis = np.stack([ens.eps1, ens.eps2], axis=1) * ens.scale[:, None, None]
        p = np.einsum("nk,nkj->nj", ens.amps[:, :2], basis)
        q = np.einsum("nk,nkj->nj", ens.amps[:, 2:], basis)
        return cls(
            np.ascontiguousarray(ens.omega[::n_d]),
            np.ascontiguousarray(p.reshape(n_f, n_d, 3).sum(axis=1)),
            np.ascontiguousarray(q.reshape(n_f, n_d, 3).sum(axis=1)),
        )

    def __len__(self) -> int:
        return self.omega.shape[0]

    def efield(self, t: float) -> np.ndarray:
        c, s = np.cos(self.omega * t), np.sin(self.omega * t)
        return c @ self.cos_amp + s @ self.sin_amp
