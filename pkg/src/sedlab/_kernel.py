"""Compiled inner loops: phasor field synthesis and the RK4 stepper.

State rows are ``(x, y, z, vx, vy, vz, work_in, radiated)``; the last two are
integrated alongside the motion so the energy ledger has the same order as
the trajectory.
"""

import math

import numpy as np
from numba import njit

COULOMB = 0
HARMONIC = 1
FREE = 2

RUNNING = 0
IONIZED = 1
DIVERGED = 2

# reassociation only; NaN/inf semantics stay intact
_FIELD_FLAGS = {"reassoc", "contract"}


@njit(cache=True, fastmath=_FIELD_FLAGS)
def field_samples(omega, cos_amp, sin_amp, t0, h, n, e_out, de_out):
    """Fill ``e_out[k]``, ``de_out[k]`` with E and dE/dt at ``t0 + k h``."""
    n_f = omega.shape[0]
    zr = np.empty(n_f)
    zi = np.empty(n_f)
    wr = np.empty(n_f)
    wi = np.empty(n_f)
    for i in range(n_f):
        zr[i] = math.cos(omega[i] * t0)
        zi[i] = math.sin(omega[i] * t0)
        wr[i] = math.cos(omega[i] * h)
        wi[i] = math.sin(omega[i] * h)
    px = cos_amp[:, 0].copy()
    py = cos_amp[:, 1].copy()
    pz = cos_amp[:, 2].copy()
    qx = sin_amp[:, 0].copy()
    qy = sin_amp[:, 1].copy()
    qz = sin_amp[:, 2].copy()
    for k in range(n):
        ex = 0.0
        ey = 0.0
        ez = 0.0
        dx = 0.0
        dy = 0.0
        dz = 0.0
        for i in range(n_f):
            c = zr[i]
            s = zi[i]
            ex += px[i] * c + qx[i] * s
            ey += py[i] * c + qy[i] * s
            ez += pz[i] * c + qz[i] * s
            # d/dt: w (Q cos - P sin)
            wc = omega[i] * c
            ws = omega[i] * s
            dx += qx[i] * wc - px[i] * ws
            dy += qy[i] * wc - py[i] * ws
            dz += qz[i] * wc - pz[i] * ws
            zr[i] = c * wr[i] - s * wi[i]
            zi[i] = c * wi[i] + s * wr[i]
        e_out[k, 0] = ex
        e_out[k, 1] = ey
        e_out[k, 2] = ez
        de_out[k, 0] = dx
        de_out[k, 1] = dy
        de_out[k, 2] = dz


@njit(cache=True)
def _rhs(kind, w2, tau, y, ex, ey, ez, dex, dey, dez, out):
    x = y[0]
    yy = y[1]
    z = y[2]
    vx = y[3]
    vy = y[4]
    vz = y[5]
    if kind == COULOMB:
        r2 = x * x + yy * yy + z * z
        r = math.sqrt(r2)
        inv3 = 1.0 / (r2 * r)
        fx = -x * inv3
        fy = -yy * inv3
        fz = -z * inv3
        # time derivative of -r/|r|^3 along the motion
        rv3 = 3.0 * (x * vx + yy * vy + z * vz) * inv3 / r2
        gx = -vx * inv3 + x * rv3
        gy = -vy * inv3 + yy * rv3
        gz = -vz * inv3 + z * rv3
    elif kind == HARMONIC:
        fx = -w2 * x
        fy = -w2 * yy
        fz = -w2 * z
        gx = -w2 * vx
        gy = -w2 * vy
        gz = -w2 * vz
    else:
        fx = 0.0
        fy = 0.0
        fz = 0.0
        gx = 0.0
        gy = 0.0
        gz = 0.0
    # electron charge -1: field force -E, reduced reaction tau d/dt(F - E)
    ax = fx - ex + tau * (gx - dex)
    ay = fy - ey + tau * (gy - dey)
    az = fz - ez + tau * (gz - dez)
    out[0] = vx
    out[1] = vy
    out[2] = vz
    out[3] = ax
    out[4] = ay
    out[5] = az
    out[6] = -(ex * vx + ey * vy + ez * vz)
    out[7] = tau * (ax * ax + ay * ay + az * az)


@njit(cache=True)
def rk4_step(kind, w2, tau, y, dt, e, de, j, out, k1, k2, k3, k4, tmp):
    """One RK4 step from half-step index ``j`` (field rows j, j+1, j+2)."""
    _rhs(kind, w2, tau, y, e[j, 0], e[j, 1], e[j, 2], de[j, 0], de[j, 1], de[j, 2], k1)
    for q in range(8):
        tmp[q] = y[q] + 0.5 * dt * k1[q]
    m = j + 1
    _rhs(kind, w2, tau, tmp, e[m, 0], e[m, 1], e[m, 2], de[m, 0], de[m, 1], de[m, 2], k2)
    for q in range(8):
        tmp[q] = y[q] + 0.5 * dt * k2[q]
    _rhs(kind, w2, tau, tmp, e[m, 0], e[m, 1], e[m, 2], de[m, 0], de[m, 1], de[m, 2], k3)
    for q in range(8):
        tmp[q] = y[q] + dt * k3[q]
    m = j + 2
    _rhs(kind, w2, tau, tmp, e[m, 0], e[m, 1], e[m, 2], de[m, 0], de[m, 1], de[m, 2], k4)
    for q in range(8):
        out[q] = y[q] + dt / 6.0 * (k1[q] + 2.0 * k2[q] + 2.0 * k3[q] + k4[q])


@njit(cache=True)
def integrate_chunk(ys, status, kind, w2, tau, dt, n_steps, e, de, step0, stride, n_total,
                    r_ionize, r_collapse, rec_step, rec_y, rec_pin, rec_prad, n_rec):
    """Advance every live row of ``ys`` by up to ``n_steps`` steps.

    ``e``/``de`` hold the field on the half-step grid of this chunk
    (``2 n_steps + 1`` rows).  A row is sampled after global step ``s`` when
    ``s % stride == 0``, at ``s == n_total``, or when it terminates.
    """
    m = ys.shape[0]
    k1 = np.empty(8)
    k2 = np.empty(8)
    k3 = np.empty(8)
    k4 = np.empty(8)
    tmp = np.empty(8)
    new = np.empty(8)
    deriv = np.empty(8)
    for p in range(m):
        if status[p] != RUNNING:
            continue
        y = ys[p]
        for k in range(n_steps):
            rk4_step(kind, w2, tau, y, dt, e, de, 2 * k, new, k1, k2, k3, k4, tmp)
            for q in range(8):
                y[q] = new[q]
            s = step0 + k + 1
            finite = True
            for q in range(8):
                if not math.isfinite(y[q]):
                    finite = False
            r = math.sqrt(y[0] * y[0] + y[1] * y[1] + y[2] * y[2]) if finite else 0.0
            if not finite:
                status[p] = DIVERGED
            elif r > r_ionize:
                status[p] = IONIZED
            elif kind == COULOMB and r < r_collapse:
                status[p] = DIVERGED
            if s % stride == 0 or s == n_total or status[p] != RUNNING:
                j = 2 * (k + 1)
                if finite:
                    _rhs(kind, w2, tau, y, e[j, 0], e[j, 1], e[j, 2],
                         de[j, 0], de[j, 1], de[j, 2], deriv)
                    rec_pin[p, n_rec[p]] = deriv[6]
                    rec_prad[p, n_rec[p]] = deriv[7]
                else:
                    rec_pin[p, n_rec[p]] = np.nan
                    rec_prad[p, n_rec[p]] = np.nan
                rec_step[p, n_rec[p]] = s
                for q in range(8):
                    rec_y[p, n_rec[p], q] = y[q]
                n_rec[p] += 1
            if status[p] != RUNNING:
                break
