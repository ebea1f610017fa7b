"""Compiled inner loops for the weight-normalizer products and the stick slice sampler.

``logk[t, m] = log p_m + log N(x_t | mu_x_m, delta_x_m)`` and
``log D_t = logsumexp_m logk[t, m]``.  ``K`` holds ``exp(logk - r[:, None])``
for a per-row reference ``r`` and ``Ks`` its row sums, so swapping one
column costs O(n) rather than O(n L).
"""
import math

import numpy as np
from numba import njit

_BIG = 600.0
_TINY = 1e-280


@njit(cache=True)
def refresh(logk, K, r, logD, Ks):
    N, L = logk.shape
    for t in range(N):
        mx = logk[t, 0]
        for m in range(1, L):
            if logk[t, m] > mx:
                mx = logk[t, m]
        r[t] = mx
        s = 0.0
        for m in range(L):
            K[t, m] = math.exp(logk[t, m] - mx)
            s += K[t, m]
        Ks[t] = s
        logD[t] = mx + math.log(s)


@njit(cache=True)
def _exact_row(logk, t, l, newval):
    L = logk.shape[1]
    mx = newval
    for m in range(L):
        if m != l and logk[t, m] > mx:
            mx = logk[t, m]
    s = math.exp(newval - mx)
    for m in range(L):
        if m != l:
            s += math.exp(logk[t, m] - mx)
    return mx + math.log(s)


@njit(cache=True)
def swap_column(logk, K, r, logD, Ks, l, newcol, newlogD):
    """log D_t after replacing column ``l`` by ``newcol``; returns sum_t (new - old)."""
    N, L = logk.shape
    total = 0.0
    for t in range(N):
        if K[t, l] < 0.5 * Ks[t]:
            o = Ks[t] - K[t, l]
        else:
            # column l dominates the row; subtracting would cancel
            o = 0.0
            for m in range(L):
                if m != l:
                    o += K[t, m]
        e = newcol[t] - r[t]
        done = False
        if e < _BIG:
            v = o + math.exp(e)
            if v > _TINY:
                newlogD[t] = r[t] + math.log(v)
                done = True
        if not done:
            newlogD[t] = _exact_row(logk, t, l, newcol[t])
        total += newlogD[t] - logD[t]
    return total


@njit(cache=True)
def accept_column(logk, K, r, logD, Ks, l, newcol, newlogD):
    N, L = logk.shape
    for t in range(N):
        logk[t, l] = newcol[t]
        logD[t] = newlogD[t]
        e = newcol[t] - r[t]
        if e > _BIG or logD[t] - r[t] < -_BIG:
            mx = logk[t, 0]
            for m in range(1, L):
                if logk[t, m] > mx:
                    mx = logk[t, m]
            r[t] = mx
            for m in range(L):
                K[t, m] = math.exp(logk[t, m] - mx)
        else:
            K[t, l] = math.exp(e)
        # row sum from the exact log normalizer keeps Ks free of drift
        Ks[t] = math.exp(logD[t] - r[t])


@njit(cache=True)
def stick_interval(c, logp, zeta, l, v, w0, w1, dcur):
    """Admissible slice interval for ``zeta[l]`` (0-based ``l`` in 0..L-2).

    ``c[t, m]`` are weight-kernel ordinates rescaled per row, ``logp`` the
    current log weights and ``v`` uniforms.  The slice draw ``u_t`` is
    ``v_t / d(z_{t-1})`` so the constraint is ``zeta w1_t + w0_t < dcur_t / v_t``.
    Fills ``w0``, ``w1``, ``dcur`` and returns ``(lo, hi, n_violations_at_current)``.
    """
    N, L = c.shape
    zl = zeta[l]
    log_zl = math.log(zl)
    # prod_{s<l} zeta_s
    log_before = 0.0
    for s in range(l):
        log_before += math.log(zeta[s])
    before = math.exp(log_before)
    # p_m for m < l, and p_m / zeta_l for m > l
    scaled = np.empty(L)
    for m in range(L):
        if m < l:
            scaled[m] = math.exp(logp[m])
        elif m > l:
            scaled[m] = math.exp(logp[m] - log_zl)
        else:
            scaled[m] = before
    lo = 0.0
    hi = 1.0
    bad = 0
    for t in range(N):
        a0 = 0.0
        for m in range(l):
            a0 += c[t, m] * scaled[m]
        a0 += c[t, l] * before
        a1 = -c[t, l] * before
        for m in range(l + 1, L):
            a1 += c[t, m] * scaled[m]
        w0[t] = a0
        w1[t] = a1
        d = zl * a1 + a0
        dcur[t] = d
        rhs = d / v[t]
        if a1 > 0.0:
            b = (rhs - a0) / a1
            if b < hi:
                hi = b
        elif a1 < 0.0:
            b = (rhs - a0) / a1
            if b > lo:
                lo = b
    if zl < lo - 1e-9 or zl > hi + 1e-9:
        bad = 1
    # roundoff only: the current value satisfies every constraint exactly
    lo = min(lo, zl)
    hi = max(hi, zl)
    return lo, hi, bad


@njit(cache=True)
def slice_violations(w0, w1, dcur, v, znew):
    n = 0
    for t in range(w0.shape[0]):
        d = znew * w1[t] + w0[t]
        if d * v[t] > dcur[t] * (1.0 + 1e-10):
            n += 1
    return n


def warmup():
    """Compile all kernels on tiny inputs."""
    logk = np.zeros((2, 2))
    K = np.ones((2, 2))
    r = np.zeros(2)
    logD = np.zeros(2)
    Ks = np.zeros(2)
    refresh(logk, K, r, logD, Ks)
    new = np.zeros(2)
    nl = np.zeros(2)
    swap_column(logk, K, r, logD, Ks, 0, new, nl)
    accept_column(logk, K, r, logD, Ks, 0, new, nl)
    w0, w1, dc = np.zeros(2), np.zeros(2), np.zeros(2)
    stick_interval(K, np.log(np.array([0.5, 0.5])), np.array([0.5]), 0, np.full(2, 0.5), w0, w1, dc)
    slice_violations(w0, w1, dc, np.full(2, 0.5), 0.5)
