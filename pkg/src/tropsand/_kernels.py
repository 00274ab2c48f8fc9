"""Compiled relaxation and sampling loops.

These mirror ``core.topple``/``core.relax`` and ``rng.draw`` on int64
numerators so that millions of relaxations fit in a desk-scale budget.
They are only valid for denominators up to 2**62 (sums stay below 2**63).
The pure-Python implementations stay the reference; tests pin the two
together.
"""

import numpy as np
from numba import njit, prange

_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_SALT = np.uint64(0x632BE59BD9B4E019)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_ONE = np.uint64(1)

GUARD = -1
OVERFLOW = -2


@njit(cache=True)
def mix64(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@njit(cache=True)
def trial_key(seed, trial):
    s = mix64(seed ^ _SALT)
    return mix64(s + np.uint64(trial) * _GAMMA)


@njit(cache=True)
def draw_numerator(key, j, shift):
    return np.int64(mix64(key + (np.uint64(j) + _ONE) * _GAMMA) >> np.uint64(shift))


@njit(cache=True)
def sample_into(seed, trial, n, denom_log2, out):
    """Fill ``out[:n]`` with distinct numerators in [1, 2**denom_log2); returns draws used."""
    key = trial_key(seed, trial)
    shift = 64 - denom_log2
    j = 0
    filled = 0
    while filled < n:
        x = draw_numerator(key, j, shift)
        j += 1
        if x == 0:
            continue
        dup = False
        for t in range(filled):
            if out[t] == x:
                dup = True
                break
        if dup:
            continue
        out[filled] = x
        filled += 1
    return j


@njit(cache=True)
def topple_inplace(pos, mult, k, p, denom, tpos, tmult):
    """Topple at a ``p`` that is not a break point; returns the new size or -1 on overflow."""
    i = 0
    while i < k and pos[i] < p:
        i += 1
    a = pos[i - 1] if i > 0 else 0
    b = pos[i] if i < k else denom
    c = min(p - a, b - p)
    na = a + c
    nb = b - c
    cap = tpos.shape[0]
    j = 0
    for t in range(i - 1):
        tpos[j] = pos[t]
        tmult[j] = mult[t]
        j += 1
    if i > 0 and mult[i - 1] > 1:
        tpos[j] = a
        tmult[j] = mult[i - 1] - 1
        j += 1
    if j + 2 > cap:
        return -1
    if na == nb:
        tpos[j] = na
        tmult[j] = 2
        j += 1
    else:
        tpos[j] = na
        tmult[j] = 1
        tpos[j + 1] = nb
        tmult[j + 1] = 1
        j += 2
    start = i
    if i < k:
        if mult[i] > 1:
            if j >= cap:
                return -1
            tpos[j] = b
            tmult[j] = mult[i] - 1
            j += 1
        start = i + 1
    if j + (k - start) > cap:
        return -1
    for t in range(start, k):
        tpos[j] = pos[t]
        tmult[j] = mult[t]
        j += 1
    for t in range(j):
        pos[t] = tpos[t]
        mult[t] = tmult[t]
    return j


@njit(cache=True)
def relax_into(pts, denom, max_sweeps, pos, mult):
    """Relax from the zero state; returns ``(L, size)`` or ``(GUARD|OVERFLOW, size)``."""
    cap = pos.shape[0]
    tpos = np.empty(cap, np.int64)
    tmult = np.empty(cap, np.int64)
    k = 0
    sweeps = 0
    n = pts.shape[0]
    while True:
        changed = False
        for t in range(n):
            p = pts[t]
            # membership test decides change; topple is the identity on break points
            on = False
            for u in range(k):
                if pos[u] == p:
                    on = True
                    break
            if on:
                continue
            k2 = topple_inplace(pos, mult, k, p, denom, tpos, tmult)
            if k2 < 0:
                return OVERFLOW, k
            k = k2
            changed = True
        if not changed:
            return sweeps, k
        sweeps += 1
        if sweeps > max_sweeps:
            return GUARD, k


@njit(cache=True)
def relax_length(pts, denom, max_sweeps):
    cap = pts.shape[0] + 3
    pos = np.empty(cap, np.int64)
    mult = np.empty(cap, np.int64)
    L, _ = relax_into(pts, denom, max_sweeps, pos, mult)
    return L


@njit(cache=True, parallel=True)
def trial_lengths(n, start, count, seed, denom_log2, max_sweeps):
    denom = np.int64(1) << np.int64(denom_log2)
    out = np.empty(count, np.int64)
    for t in prange(count):
        pts = np.empty(n, np.int64)
        sample_into(seed, start + t, n, denom_log2, pts)
        out[t] = relax_length(pts, denom, max_sweeps)
    return out


@njit(cache=True, parallel=True)
def raster_lengths(R, denom, max_sweeps):
    """L at cell centres ``((2i+1)/(2R), (2j+1)/(2R))``; ``out[i, j]`` has p on i, q on j."""
    out = np.empty((R, R), np.int64)
    step = denom // (2 * R)
    for i in prange(R):
        pts = np.empty(2, np.int64)
        for j in range(R):
            pts[0] = (2 * i + 1) * step
            pts[1] = (2 * j + 1) * step
            out[i, j] = relax_length(pts, denom, max_sweeps)
    return out


@njit(cache=True, parallel=True)
def avalanche_lengths(n, start, count, seed, denom_log2):
    """Length of the avalanche interval of draw ``n`` against draws ``0..n-1``.

    Returns numerators over ``2**denom_log2`` and the number of extra draws
    spent avoiding the degenerate case ``p_new == q``.
    """
    denom = np.int64(1) << np.int64(denom_log2)
    mask = np.uint64(denom - 1)
    shift = 64 - denom_log2
    out = np.empty(count, np.int64)
    resampled = np.zeros(count, np.int64)
    for t in prange(count):
        pts = np.empty(n + 1, np.int64)
        used = sample_into(seed, start + t, n + 1, denom_log2, pts)
        acc = np.uint64(0)
        for u in range(n):
            acc += np.uint64(pts[u])
        q = np.int64((np.uint64(0) - acc) & mask)
        p = pts[n]
        key = trial_key(seed, start + t)
        j = used
        while p == q:
            resampled[t] += 1
            while True:
                x = draw_numerator(key, j, shift)
                j += 1
                if x == 0:
                    continue
                dup = False
                for u in range(n):
                    if pts[u] == x:
                        dup = True
                        break
                if not dup:
                    break
            p = x
        if p > q:
            out[t] = denom - q
        else:
            out[t] = q
    return out, resampled


@njit(cache=True, parallel=True)
def sample_block(n, start, count, seed, denom_log2):
    out = np.empty((count, n), np.int64)
    for t in prange(count):
        sample_into(seed, start + t, n, denom_log2, out[t])
    return out
