"""Compiled inner loops: simplex projection and the GDA recursions."""
import numpy as np
from numba import njit


@njit(cache=True)
def simplex_threshold(v):
    """Threshold ``tau`` with ``sum(max(v - tau, 0)) == 1``."""
    d = v.shape[0]
    u = np.sort(v)[::-1]
    css = 0.0
    tau = 0.0
    for k in range(d):
        css += u[k]
        t = (css - 1.0) / (k + 1)
        if u[k] - t > 0.0:
            tau = t
    return tau


@njit(cache=True)
def project_into(v, out):
    """Write the simplex projection of ``v`` into ``out`` and return ``tau``."""
    tau = simplex_threshold(v)
    for i in range(v.shape[0]):
        w = v[i] - tau
        out[i] = w if w > 0.0 else 0.0
    return tau


@njit(cache=True)
def _kahan_add(acc, comp, v):
    for i in range(v.shape[0]):
        yv = v[i] - comp[i]
        tv = acc[i] + yv
        comp[i] = (tv - acc[i]) - yv
        acc[i] = tv


@njit(cache=True)
def gda_run(a, eta, x0, y0, T, alternating, checkpoints, store):
    """Run ``T`` GDA steps and snapshot the state at each checkpoint.

    ``checkpoints`` is an increasing array of step indices in ``1..T``.  For
    checkpoint ``t`` the snapshot holds ``x^{t-1}, y^{t-1}, x^t, y^t`` and the
    compensated sums of ``x^1..x^t`` and ``y^1..y^t``.  When ``store`` is true
    every iterate ``x^0..x^T`` is kept as well.
    """
    m, n = a.shape
    K = checkpoints.shape[0]
    snap_xp = np.empty((K, n))
    snap_yp = np.empty((K, m))
    snap_x = np.empty((K, n))
    snap_y = np.empty((K, m))
    snap_sx = np.empty((K, n))
    snap_sy = np.empty((K, m))
    if store:
        xs = np.empty((T + 1, n))
        ys = np.empty((T + 1, m))
        xs[0] = x0
        ys[0] = y0
    else:
        xs = np.empty((0, n))
        ys = np.empty((0, m))
    at = np.ascontiguousarray(a.T)
    x = x0.copy()
    y = y0.copy()
    xn = np.empty(n)
    yn = np.empty(m)
    vx = np.empty(n)
    vy = np.empty(m)
    sx = np.zeros(n)
    cx = np.zeros(n)
    sy = np.zeros(m)
    cy = np.zeros(m)
    k = 0
    for t in range(1, T + 1):
        gy = at @ y
        for i in range(n):
            vx[i] = x[i] - eta * gy[i]
        project_into(vx, xn)
        gx = a @ (xn if alternating else x)
        for j in range(m):
            vy[j] = y[j] + eta * gx[j]
        project_into(vy, yn)
        _kahan_add(sx, cx, xn)
        _kahan_add(sy, cy, yn)
        if store:
            xs[t] = xn
            ys[t] = yn
        if k < K and checkpoints[k] == t:
            snap_xp[k] = x
            snap_yp[k] = y
            snap_x[k] = xn
            snap_y[k] = yn
            snap_sx[k] = sx
            snap_sy[k] = sy
            k += 1
        x, xn = xn, x
        y, yn = yn, y
    return snap_xp, snap_yp, snap_x, snap_y, snap_sx, snap_sy, xs, ys


@njit(cache=True)
def batch_thresholds(M):
    """Row-wise simplex thresholds of a 2-D array."""
    out = np.empty(M.shape[0])
    for k in range(M.shape[0]):
        out[k] = simplex_threshold(M[k])
    return out
