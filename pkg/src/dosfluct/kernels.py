"""Numba kernels: RK4 phase sweeps and the tridiagonal inertia count.

The phase obeys theta' = kappa - (q(t)/kappa) sin^2(theta) with q = a(t) F(X_t).
The fast sweeps take unwrapped positions plus precomputed envelope values on
the grid and at step midpoints, and evaluate the profile F inline (one shared
evaluation per node serves every kappa); the substepped sweep also evaluates
the envelope inline, interpolating the driver linearly inside each path step.

Every kernel does independent per-path work with no shared accumulation, so
results are bit-identical for any thread count.
"""

import math

import numpy as np
from numba import njit, prange


@njit(cache=True, inline="always")
def _rk4_step(th, kappa, q0, qmid, q1, h):
    s = math.sin(th)
    k1 = kappa - (q0 / kappa) * s * s
    s = math.sin(th + 0.5 * h * k1)
    k2 = kappa - (qmid / kappa) * s * s
    s = math.sin(th + 0.5 * h * k2)
    k3 = kappa - (qmid / kappa) * s * s
    s = math.sin(th + h * k3)
    k4 = kappa - (q1 / kappa) * s * s
    return th + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


@njit(cache=True, inline="always")
def _profile(x, f0, fks, fre, fim):
    out = f0
    for j in range(fks.shape[0]):
        out += 2.0 * (fre[j] * math.cos(fks[j] * x) - fim[j] * math.sin(fks[j] * x))
    return out


@njit(cache=True)
def rk4_sweep_dense(xs, ag, am, h, kappa, f0, fks, fre, fim, theta0, out):
    """Single path, single kappa; records theta at every grid node."""
    th = theta0
    out[0] = th
    f_lo = _profile(xs[0], f0, fks, fre, fim)
    for i in range(xs.shape[0] - 1):
        f_mid = _profile(0.5 * (xs[i] + xs[i + 1]), f0, fks, fre, fim)
        f_hi = _profile(xs[i + 1], f0, fks, fre, fim)
        th = _rk4_step(th, kappa, ag[i] * f_lo, am[i] * f_mid, ag[i + 1] * f_hi, h)
        out[i + 1] = th
        f_lo = f_hi


@njit(cache=True, parallel=True)
def rk4_sweep_ensemble(theta, xs, ag, am, h, kappas, f0, fks, fre, fim):
    """Advance all paths through one chunk, profile evaluated inline once per
    node and shared across kappas; theta is (npaths, nkappa) in-place."""
    npaths = theta.shape[0]
    nk = kappas.shape[0]
    nsteps = xs.shape[1] - 1
    for p in prange(npaths):
        f_lo = _profile(xs[p, 0], f0, fks, fre, fim)
        for i in range(nsteps):
            x_hi = xs[p, i + 1]
            f_mid = _profile(0.5 * (xs[p, i] + x_hi), f0, fks, fre, fim)
            f_hi = _profile(x_hi, f0, fks, fre, fim)
            q0 = ag[i] * f_lo
            qmid = am[i] * f_mid
            q1 = ag[i + 1] * f_hi
            for j in range(nk):
                theta[p, j] = _rk4_step(theta[p, j], kappas[j], q0, qmid, q1, h)
            f_lo = f_hi


@njit(cache=True, inline="always")
def _envelope(t, code, param):
    if code == 0:
        return (1.0 + t * t) ** (-param / 2.0)
    if code == 1:
        return math.log(t + math.e) ** (-param)
    return param


@njit(cache=True)
def rk4_sweep_substeps(xs, t0, dt, substeps, kappa, env_code, env_param,
                       f0, fks, fre, fim, theta0, out):
    """Single path/kappa sweep with ODE substeps; driver and envelope are
    evaluated directly at substep points (driver linearly interpolated,
    unwrapped).  Records theta at the path grid nodes."""
    th = theta0
    out[0] = th
    h = dt / substeps
    for i in range(xs.shape[0] - 1):
        x_lo = xs[i]
        slope = (xs[i + 1] - xs[i]) / dt
        t_lo = t0 + i * dt
        for r in range(substeps):
            ta = t_lo + r * h
            tm = ta + 0.5 * h
            tb = ta + h
            xa = x_lo + (ta - t_lo) * slope
            xm = x_lo + (tm - t_lo) * slope
            xb = x_lo + (tb - t_lo) * slope
            qa = _envelope(ta, env_code, env_param) * _profile(xa, f0, fks, fre, fim)
            qmid = _envelope(tm, env_code, env_param) * _profile(xm, f0, fks, fre, fim)
            qb = _envelope(tb, env_code, env_param) * _profile(xb, f0, fks, fre, fim)
            th = _rk4_step(th, kappa, qa, qmid, qb, h)
        out[i + 1] = th


@njit(cache=True)
def tridiag_negative_pivots(q, h, E):
    """Negative-pivot count of the LDL' factorization of (A - E I), where A is
    the 3-point discretization of -d^2/dt^2 + q with Dirichlet ends.

    Returns (count, breakdown) with breakdown=True when a pivot underflows the
    safe magnitude; the caller retries with a shifted E.
    """
    inv_h2 = 1.0 / (h * h)
    off2 = inv_h2 * inv_h2
    tiny = 1e-14 * (2.0 * inv_h2 + abs(E))
    count = 0
    d = 1.0
    first = True
    for i in range(q.shape[0]):
        a = 2.0 * inv_h2 + q[i] - E
        if first:
            d = a
            first = False
        else:
            d = a - off2 / d
        if abs(d) < tiny:
            return count, True
        if d < 0.0:
            count += 1
    return count, False
