"""Compiled inner loops shared by the plant and the estimator.

Everything here works on flat float64 arrays so numba can compile it in
nopython mode. The public modules wrap these with dataclasses.

Parameter vector layout (see ``PhysicalParams.as_vector``)::

    0 coupling constant pi*Kd*R^4/2     6 Fs
    1 geometric factor A                 7 vs
    2 gap d                              8 Kv top
    3 m1                                 9 Kv bottom
    4 m2                                10 sign smoothing eps
    5 Fc                                11 track length

Disturbance vector layout (see ``Disturbance.vector_at``)::

    0 constant force on top magnet, positive pushes toward -x
    1 holding force on top magnet (stick-slip grip, see ``deriv``)
    2 extra mass on top magnet
    3 bottom locked flag (0 or 1)
    4 extra force on bottom magnet, +x positive
"""

import numpy as np
from numba import njit

N_PARAMS = 12
N_DIST = 5


@njit(cache=True)
def lateral_force(delta, coupling, geom, gap):
    """Force on the top magnet for a bottom-minus-top offset ``delta``."""
    bracket = geom - 1.5 * delta * delta * geom * geom
    bracket = np.maximum(bracket, 0.0)
    # alpha is the top-relative-to-bottom ratio, so the leading minus restores
    return -coupling * bracket * np.arctan(-delta / gap)


@njit(cache=True)
def stribeck(v, fc, fs, vs, kv, eps):
    r = v / vs
    return (fc + (fs - fc) * np.exp(-r * r)) * np.tanh(v / eps) + kv * v


@njit(cache=True)
def grip_force(v, f_free, hold):
    """Force of a hand gripping the follower, Karnopp style.

    At rest it cancels ``f_free`` (the sum of the other forces) up to
    ``hold``; while sliding it opposes the motion with ``hold``.
    """
    if hold <= 0.0:
        return 0.0
    if v == 0.0:
        if abs(f_free) <= hold:
            return f_free
        return hold if f_free > 0.0 else -hold
    return hold if v > 0.0 else -hold


@njit(cache=True)
def forces(x, u, p, dist):
    """Return (magnetic force on top, bottom friction, top friction, disturbance on top)."""
    fmag = lateral_force(x[0] - x[2], p[0], p[1], p[2])
    fric1 = p[9] * x[1]
    fric2 = stribeck(x[3], p[5], p[6], p[7], p[8], p[10])
    fdist = dist[0] + grip_force(x[3], fmag - fric2 - dist[0], dist[1])
    return fmag, fric1, fric2, fdist


@njit(cache=True)
def deriv(x, u, p, dist, out):
    fmag, fric1, fric2, fdist = forces(x, u, p, dist)
    if dist[3] > 0.5:
        out[0] = 0.0
        out[1] = 0.0
    else:
        out[0] = x[1]
        out[1] = (u + dist[4] - fmag - fric1) / p[3]
    out[2] = x[3]
    out[3] = (fmag - fric2 - fdist) / (p[4] + dist[2])


@njit(cache=True)
def clamp(x, length):
    if x[0] < 0.0:
        x[0] = 0.0
        x[1] = 0.0
    elif x[0] > length:
        x[0] = length
        x[1] = 0.0
    if x[2] < 0.0:
        x[2] = 0.0
        x[3] = 0.0
    elif x[2] > length:
        x[2] = length
        x[3] = 0.0


@njit(cache=True)
def rk4_step(x, u, dt, p, dist):
    k1 = np.empty(4)
    k2 = np.empty(4)
    k3 = np.empty(4)
    k4 = np.empty(4)
    tmp = np.empty(4)
    deriv(x, u, p, dist, k1)
    for i in range(4):
        tmp[i] = x[i] + 0.5 * dt * k1[i]
    deriv(tmp, u, p, dist, k2)
    for i in range(4):
        tmp[i] = x[i] + 0.5 * dt * k2[i]
    deriv(tmp, u, p, dist, k3)
    for i in range(4):
        tmp[i] = x[i] + dt * k3[i]
    deriv(tmp, u, p, dist, k4)
    out = np.empty(4)
    for i in range(4):
        out[i] = x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
    if dist[1] > 0.0 and x[3] != 0.0 and out[3] * x[3] <= 0.0:
        # a grip that reverses the follower within one step has stopped it
        out[3] = 0.0
    clamp(out, p[11])
    return out


@njit(cache=True)
def propagate(x, u_seq, dt, p, dist):
    """Apply one RK4 step per entry of ``u_seq`` (zero-order hold)."""
    y = x.copy()
    for k in range(u_seq.shape[0]):
        y = rk4_step(y, u_seq[k], dt, p, dist)
    return y


@njit(cache=True)
def fd_jacobian(x, u_seq, dt, p, dist):
    """Central-difference Jacobian of ``propagate`` with respect to the state."""
    jac = np.empty((4, 4))
    for i in range(4):
        h = max(1e-7, 1e-7 * abs(x[i]))
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        fp = propagate(xp, u_seq, dt, p, dist)
        fm = propagate(xm, u_seq, dt, p, dist)
        for j in range(4):
            jac[j, i] = (fp[j] - fm[j]) / (2.0 * h)
    return jac
