"""Numba kernels for the hot loops: discriminant scans and orbit norms.

Both kernels parallelize over energies with prange; every (energy, theta)
cell is computed start-to-finish inside one thread with a fixed instruction
sequence, so results are bit-identical regardless of the thread count.
Products are kept in a renormalized form (entries of order one plus an
accumulated log scale) so arbitrarily long products never overflow.
"""

from __future__ import annotations

import numpy as np
from numba import njit, prange

# default steps between unconditional rescalings; callers shrink it when
# per-step growth ln(2 + |E| + sup|f|) is unusually large
RENORM_EVERY = 48
_TINY_LOG = -1e300


def renorm_interval(v_max: float) -> int:
    """Renormalization cadence keeping entry magnitudes below ~1e260."""
    rate = np.log(2.0 + abs(v_max))
    return max(1, min(RENORM_EVERY, int(500.0 / rate)))


@njit(cache=True, parallel=True, fastmath=True)
def disc_scan(e_vals, fbuf2, ntheta, offs, renorm_every):
    """Per energy: signed extremes of the trace of A_q over the theta grid.

    fbuf2 is the sampled potential doubled (length 2*ntheta) so each step's
    rotated lookup is a contiguous slice; offs[j] is the grid shift of step
    j.  The trace is kept as (sign, log magnitude) because it swings
    exponentially in q.  Returns, per energy, the minimizing and maximizing
    signed values (min_sign, min_log, max_sign, max_log) and their grid
    indices; the smooth signed extremes are what a grid estimates reliably,
    unlike the exponentially narrow dips of |trace|.
    """
    n_e = e_vals.shape[0]
    q = offs.shape[0]
    min_sign = np.empty(n_e)
    min_log = np.empty(n_e)
    max_sign = np.empty(n_e)
    max_log = np.empty(n_e)
    argmin = np.empty(n_e, np.int64)
    argmax = np.empty(n_e, np.int64)
    for ie in prange(n_e):
        e = e_vals[ie]
        a = np.ones(ntheta)
        b = np.zeros(ntheta)
        c = np.zeros(ntheta)
        d = np.ones(ntheta)
        logs = np.zeros(ntheta)
        j = 0
        since = 0
        while j + 1 < q:
            base1 = offs[j]
            base2 = offs[j + 1]
            for i in range(ntheta):
                v1 = e - fbuf2[base1 + i]
                v2 = e - fbuf2[base2 + i]
                t1 = v1 * a[i] - c[i]
                t2 = v1 * b[i] - d[i]
                na = v2 * t1 - a[i]
                nb = v2 * t2 - b[i]
                c[i] = t1
                d[i] = t2
                a[i] = na
                b[i] = nb
            j += 2
            since += 2
            if since >= renorm_every:
                since = 0
                for i in range(ntheta):
                    m = abs(a[i]) + abs(b[i]) + abs(c[i]) + abs(d[i])
                    if m > 0.0:
                        logs[i] += np.log(m)
                        inv = 1.0 / m
                        a[i] *= inv
                        b[i] *= inv
                        c[i] *= inv
                        d[i] *= inv
        if j < q:
            base1 = offs[j]
            for i in range(ntheta):
                v = e - fbuf2[base1 + i]
                t1 = v * a[i] - c[i]
                t2 = v * b[i] - d[i]
                c[i] = a[i]
                d[i] = b[i]
                a[i] = t1
                b[i] = t2
        lo_s, lo_l, lo_i = 1.0, 1e300, 0
        hi_s, hi_l, hi_i = -1.0, 1e300, 0
        for i in range(ntheta):
            tr = a[i] + d[i]
            if tr > 0.0:
                s = 1.0
                ld = logs[i] + np.log(tr)
            elif tr < 0.0:
                s = -1.0
                ld = logs[i] + np.log(-tr)
            else:
                s = 0.0
                ld = _TINY_LOG
            # signed comparison in (sign, log) space
            if (s < lo_s) or (s == lo_s and
                              ((s >= 0.0 and ld < lo_l) or
                               (s < 0.0 and ld > lo_l))):
                lo_s, lo_l, lo_i = s, ld, i
            if (s > hi_s) or (s == hi_s and
                              ((s >= 0.0 and ld > hi_l) or
                               (s < 0.0 and ld < hi_l))):
                hi_s, hi_l, hi_i = s, ld, i
        min_sign[ie] = lo_s
        min_log[ie] = lo_l
        max_sign[ie] = hi_s
        max_log[ie] = hi_l
        argmin[ie] = lo_i
        argmax[ie] = hi_i
    return min_sign, min_log, max_sign, max_log, argmin, argmax


@njit(cache=True, parallel=True, fastmath=True)
def orbit_log_norms(e_vals, fvals, k, m, renorm_every):
    """ln ||A_k(theta_j)|| for the m orbit points theta_j = theta0 + j*omega.

    fvals[t] = f(theta0 + t*omega) for t = 0..m+k-2; sample j consumes the
    contiguous slice fvals[j : j+k].  Returns an (n_energies, m) array.
    """
    n_e = e_vals.shape[0]
    out = np.empty((n_e, m))
    for ie in prange(n_e):
        e = e_vals[ie]
        a = np.ones(m)
        b = np.zeros(m)
        c = np.zeros(m)
        d = np.ones(m)
        logs = np.zeros(m)
        since = 0
        for i in range(k):
            for j in range(m):
                v = e - fvals[i + j]
                t1 = v * a[j] - c[j]
                t2 = v * b[j] - d[j]
                c[j] = a[j]
                d[j] = b[j]
                a[j] = t1
                b[j] = t2
            since += 1
            if since >= renorm_every:
                since = 0
                for j in range(m):
                    mm = abs(a[j]) + abs(b[j]) + abs(c[j]) + abs(d[j])
                    if mm > 0.0:
                        logs[j] += np.log(mm)
                        inv = 1.0 / mm
                        a[j] *= inv
                        b[j] *= inv
                        c[j] *= inv
                        d[j] *= inv
        for j in range(m):
            fro2 = a[j] * a[j] + b[j] * b[j] + c[j] * c[j] + d[j] * d[j]
            det = a[j] * d[j] - b[j] * c[j]
            disc = fro2 * fro2 - 4.0 * det * det
            if disc < 0.0:
                disc = 0.0
            smax2 = 0.5 * (fro2 + np.sqrt(disc))
            out[ie, j] = logs[j] + 0.5 * np.log(smax2)
    return out
