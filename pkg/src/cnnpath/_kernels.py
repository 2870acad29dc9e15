"""Compiled inner loops for the lattice integrator.

Everything here works on plain arrays so numba can compile it. The public
wrappers live in :mod:`cnnpath.lattice` and :mod:`cnnpath.wavesim`.

Reaction curves are passed as ``(kind, cpar, bx, by, bs)``:

* ``kind == 0``: cubic, ``cpar = (bias0, slope, r1, r2, r3)``
* ``kind == 1``: piecewise linear, breakpoints ``bx``, values ``by`` and
  per-segment slopes ``bs`` (terminal segments extrapolate).
"""

import numpy as np
from numba import njit

# integrate() status codes
DONE_TIME = 0
DONE_WATCH = 1
DONE_QUIET = 2
DIVERGED = 3


@njit(cache=True)
def reaction(x, kind, cpar, bx, by, bs):
    if kind == 0:
        return cpar[0] + cpar[1] * (x - cpar[2]) * (x - cpar[3]) * (x - cpar[4])
    k = np.searchsorted(bx, x, side="right") - 1
    if k < 0:
        k = 0
    elif k > bs.size - 1:
        k = bs.size - 1
    return by[k] + bs[k] * (x - bx[k])


@njit(cache=True)
def derivative(v, out, gn, gs, gw, ge, active, frozen, stim, bias, cap,
               kind, cpar, bx, by, bs):
    n, m = v.shape
    for i in range(n):
        for j in range(m):
            if frozen[i, j] or not active[i, j]:
                out[i, j] = 0.0
                continue
            x = v[i, j]
            dn = gn[i, j] * (v[i - 1, j] - x) if i > 0 else 0.0
            ds = gs[i, j] * (v[i + 1, j] - x) if i < n - 1 else 0.0
            dw = gw[i, j] * (v[i, j - 1] - x) if j > 0 else 0.0
            de = ge[i, j] * (v[i, j + 1] - x) if j < m - 1 else 0.0
            # (N + S) + (W + E): mirror images of a cell sum identical pairs
            coupling = (dn + ds) + (dw + de)
            out[i, j] = (coupling + (bias + stim[i, j])
                         - reaction(x, kind, cpar, bx, by, bs)) / cap


@njit(cache=True)
def _near(x, level, eps):
    return abs(x - level) < eps


@njit(cache=True)
def mark_active(v, active, gn, gs, gw, ge, stim, levels, eps, settled):
    """Flag cells that must be integrated this step.

    A cell is settled when it and all coupled neighbours rest at one of
    ``levels``. Only cells whose coupled neighbours are all settled too may
    be skipped: a neighbour that moves during the RK4 sub-stages would
    otherwise be invisible to them for a whole step.
    """
    n, m = v.shape
    for i in range(n):
        for j in range(m):
            s = False
            if stim[i, j] == 0.0:
                for q in range(levels.size):
                    lev = levels[q]
                    if not _near(v[i, j], lev, eps):
                        continue
                    ok = True
                    if i > 0 and gn[i, j] > 0.0 and not _near(v[i - 1, j], lev, eps):
                        ok = False
                    if ok and i < n - 1 and gs[i, j] > 0.0 and not _near(v[i + 1, j], lev, eps):
                        ok = False
                    if ok and j > 0 and gw[i, j] > 0.0 and not _near(v[i, j - 1], lev, eps):
                        ok = False
                    if ok and j < m - 1 and ge[i, j] > 0.0 and not _near(v[i, j + 1], lev, eps):
                        ok = False
                    if ok:
                        s = True
                        break
            settled[i, j] = s
    for i in range(n):
        for j in range(m):
            a = not settled[i, j]
            if not a and i > 0 and gn[i, j] > 0.0 and not settled[i - 1, j]:
                a = True
            if not a and i < n - 1 and gs[i, j] > 0.0 and not settled[i + 1, j]:
                a = True
            if not a and j > 0 and gw[i, j] > 0.0 and not settled[i, j - 1]:
                a = True
            if not a and j < m - 1 and ge[i, j] > 0.0 and not settled[i, j + 1]:
                a = True
            active[i, j] = a


@njit(cache=True)
def rk4(v, out, dt, gn, gs, gw, ge, active, frozen, stim, bias, cap,
        kind, cpar, bx, by, bs, k1, k2, k3, k4, tmp):
    derivative(v, k1, gn, gs, gw, ge, active, frozen, stim, bias, cap, kind, cpar, bx, by, bs)
    half = 0.5 * dt
    n, m = v.shape
    for i in range(n):
        for j in range(m):
            tmp[i, j] = v[i, j] + half * k1[i, j]
    derivative(tmp, k2, gn, gs, gw, ge, active, frozen, stim, bias, cap, kind, cpar, bx, by, bs)
    for i in range(n):
        for j in range(m):
            tmp[i, j] = v[i, j] + half * k2[i, j]
    derivative(tmp, k3, gn, gs, gw, ge, active, frozen, stim, bias, cap, kind, cpar, bx, by, bs)
    for i in range(n):
        for j in range(m):
            tmp[i, j] = v[i, j] + dt * k3[i, j]
    derivative(tmp, k4, gn, gs, gw, ge, active, frozen, stim, bias, cap, kind, cpar, bx, by, bs)
    sixth = dt / 6.0
    for i in range(n):
        for j in range(m):
            out[i, j] = v[i, j] + sixth * (k1[i, j] + 2.0 * k2[i, j] + 2.0 * k3[i, j] + k4[i, j])


@njit(cache=True)
def integrate(v, t0, k0, nmax, dt, gn, gs, gw, ge, bias, cap, kind, cpar, bx, by, bs,
              clamp, clamp_val, clamp_until, stim_in, stim_until,
              vw, cross, watch, watch_all, linger, quiet, aux,
              use_active, levels, eps):
    """Advance ``v`` in place by at most ``nmax`` RK4 steps.

    ``aux`` carries episode bookkeeping between calls:
    ``aux[0]`` last crossing time, ``aux[1]`` time the watch condition was
    met (NaN while pending), ``aux[2]`` flat index of the first non-finite
    cell after a divergence.

    The clock reads ``t0 + k*dt`` where ``k`` counts steps from the episode
    origin ``t0``; ``k0`` steps have been taken before this call, so chunked
    and single-call runs see identical times.

    Returns ``(t, steps_taken, status)``.
    """
    n, m = v.shape
    k1 = np.empty_like(v)
    k2 = np.empty_like(v)
    k3 = np.empty_like(v)
    k4 = np.empty_like(v)
    tmp = np.empty_like(v)
    new = np.empty_like(v)
    active = np.ones((n, m), dtype=np.bool_)
    settled = np.zeros((n, m), dtype=np.bool_)
    zero_stim = np.zeros((n, m))
    no_clamp = np.zeros((n, m), dtype=np.bool_)

    n_watch = 0
    for i in range(n):
        for j in range(m):
            if watch[i, j]:
                n_watch += 1

    t = t0 + k0 * dt
    for step in range(nmax):
        stim = stim_in if t < stim_until else zero_stim
        frozen = clamp if t < clamp_until else no_clamp
        if t < clamp_until:
            for i in range(n):
                for j in range(m):
                    if clamp[i, j]:
                        v[i, j] = clamp_val[i, j]
        if use_active:
            mark_active(v, active, gn, gs, gw, ge, stim, levels, eps, settled)
        rk4(v, new, dt, gn, gs, gw, ge, active, frozen, stim, bias, cap,
            kind, cpar, bx, by, bs, k1, k2, k3, k4, tmp)

        for i in range(n):
            for j in range(m):
                if not np.isfinite(new[i, j]):
                    aux[2] = i * m + j
                    return t, step, DIVERGED

        n_hit = 0
        for i in range(n):
            for j in range(m):
                if np.isnan(cross[i, j]):
                    a = v[i, j]
                    b = new[i, j]
                    if a < vw <= b:
                        tc = t + dt * (vw - a) / (b - a)
                        cross[i, j] = tc
                        if tc > aux[0]:
                            aux[0] = tc
                if watch[i, j] and not np.isnan(cross[i, j]):
                    n_hit += 1
                v[i, j] = new[i, j]
        t = t0 + (k0 + step + 1) * dt

        if n_watch > 0 and np.isnan(aux[1]):
            if (watch_all and n_hit == n_watch) or (not watch_all and n_hit > 0):
                aux[1] = t
        if not np.isnan(aux[1]) and t >= aux[1] + linger:
            return t, step + 1, DONE_WATCH
        if quiet > 0.0 and t - aux[0] >= quiet:
            return t, step + 1, DONE_QUIET
    return t, nmax, DONE_TIME
