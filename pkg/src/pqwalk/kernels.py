"""Hot loops: step-length generation and the fused evolve/observe sweep.

Two implementations of :func:`evolve` exist. ``_evolve_loop`` is written as
explicit site loops and is compiled with numba; ``_evolve_numpy`` does the
same work with slice arithmetic. Which one :func:`evolve` dispatches to is
fixed at import time by :mod:`pqwalk._accel`.

Array layout: site ``x`` lives at index ``x + offset``. The active window
``[lo, hi]`` is kept in index coordinates and only that range is touched.
"""

import numpy as np

from ._accel import HAS_NUMBA, njit

SCHEME_FIXED = 0
SCHEME_I = 1
SCHEME_II = 2

# number of per-record float series returned by evolve
N_SERIES = 7  # m1, m2, norm, A, B_mag, B_herm.real, B_herm.imag


# Sites at the window edge whose probability falls below TRIM are zeroed and
# dropped. The far tail of the light cone otherwise decays into subnormal
# floats, which are an order of magnitude slower to multiply.
TRIM = 1e-200


def _abs2_py(z):
    return z.real * z.real + z.imag * z.imag


_abs2 = njit(_abs2_py)


def _sequence_loop(scheme, p, q, fixed_l, u, T):
    out = np.empty(T, dtype=np.int64)
    if scheme == SCHEME_FIXED:
        for t in range(T):
            out[t] = fixed_l
        return out
    k = 0
    prev = 1 if u[k] < 0.5 else 2
    k += 1
    out[0] = prev
    for t in range(1, T):
        if scheme == SCHEME_I:
            if u[k] >= p:
                prev = 3 - prev
            k += 1
        else:
            if u[k] >= p:
                k += 1
                prev = 1 if u[k] < q else 2
            k += 1
        out[t] = prev
    return out


def _observe_loop(a, b, offset, lo, hi, out):
    m1 = 0.0
    m2 = 0.0
    pn = 0.0
    pa = 0.0
    bm = 0.0
    bre = 0.0
    bim = 0.0
    aw = a[lo:hi + 1]
    bw = b[lo:hi + 1]
    x0 = float(lo - offset)
    for j in range(hi - lo + 1):
        ai = aw[j]
        bi = bw[j]
        qa = ai.real * ai.real + ai.imag * ai.imag
        qb = bi.real * bi.real + bi.imag * bi.imag
        x = x0 + j
        pr = qa + qb
        xp = x * pr
        pn += pr
        m1 += xp
        m2 += x * xp
        pa += qa
        bm += abs(ai) * abs(bi)
        bre += ai.real * bi.real + ai.imag * bi.imag
        bim += ai.imag * bi.real - ai.real * bi.imag
    out[0] = m1
    out[1] = m2
    out[2] = pn
    out[3] = pa
    out[4] = bm
    out[5] = bre
    out[6] = bim


def _evolve_loop(a, b, offset, lengths, coin, record_every, snap_steps, series, snaps):
    n = a.shape[0]
    T = lengths.shape[0]
    u00 = coin[0, 0]
    u01 = coin[0, 1]
    u10 = coin[1, 0]
    u11 = coin[1, 1]
    lo = offset
    hi = offset
    for i in range(n):
        if a[i] != 0 or b[i] != 0:
            lo = min(lo, i)
            hi = max(hi, i)
    a2 = np.zeros_like(a)
    b2 = np.zeros_like(b)
    src_a, src_b, dst_a, dst_b = a, b, a2, b2
    r = 0
    s = 0
    nsnap = snap_steps.shape[0]
    for t in range(T + 1):
        if t % record_every == 0:
            _observe(src_a, src_b, offset, lo, hi, series[r])
            r += 1
        if s < nsnap and snap_steps[s] == t:
            for i in range(lo, hi + 1):
                ai = src_a[i]
                bi = src_b[i]
                snaps[s, i] = (ai.real * ai.real + ai.imag * ai.imag
                               + bi.real * bi.real + bi.imag * bi.imag)
            s += 1
        if t == T:
            break
        l = lengths[t]
        if lo - l < 0 or hi + l >= n:
            raise ValueError("shift exceeds lattice bounds")
        for i in range(lo - l, lo + l):
            dst_a[i] = 0.0
        for i in range(hi - l + 1, hi + l + 1):
            dst_b[i] = 0.0
        # zero-based views keep the inner loop free of wraparound checks
        sa = src_a[lo:hi + 1]
        sb = src_b[lo:hi + 1]
        da = dst_a[lo + l:hi + l + 1]
        db = dst_b[lo - l:hi - l + 1]
        for j in range(hi - lo + 1):
            aj = sa[j]
            bj = sb[j]
            da[j] = u00 * aj + u01 * bj
            db[j] = u10 * aj + u11 * bj
        src_a, src_b, dst_a, dst_b = dst_a, dst_b, src_a, src_b
        lo -= l
        hi += l
        while lo < hi and _abs2(src_a[lo]) + _abs2(src_b[lo]) < TRIM:
            src_a[lo] = 0.0
            src_b[lo] = 0.0
            lo += 1
        while hi > lo and _abs2(src_a[hi]) + _abs2(src_b[hi]) < TRIM:
            src_a[hi] = 0.0
            src_b[hi] = 0.0
            hi -= 1
    if T % 2 == 1:
        a[:] = src_a
        b[:] = src_b
    a[:lo] = 0.0
    a[hi + 1:] = 0.0
    b[:lo] = 0.0
    b[hi + 1:] = 0.0
    return lo, hi


def _evolve_numpy(a, b, offset, lengths, coin, record_every, snap_steps, series, snaps):
    n = a.shape[0]
    T = lengths.shape[0]
    (u00, u01), (u10, u11) = coin
    nz = np.flatnonzero((a != 0) | (b != 0))
    lo = min(offset, int(nz[0])) if nz.size else offset
    hi = max(offset, int(nz[-1])) if nz.size else offset
    r = 0
    s = 0
    nsnap = snap_steps.shape[0]
    for t in range(T + 1):
        sl = slice(lo, hi + 1)
        aw = a[sl]
        bw = b[sl]
        rec = t % record_every == 0
        snap = s < nsnap and snap_steps[s] == t
        if rec or snap:
            qa = aw.real**2 + aw.imag**2
            qb = bw.real**2 + bw.imag**2
            pr = qa + qb
            if rec:
                x = np.arange(lo - offset, hi - offset + 1, dtype=np.float64)
                xp = x * pr
                off = np.dot(aw, bw.conj())
                series[r] = (xp.sum(), (x * xp).sum(), pr.sum(), qa.sum(),
                             (np.abs(aw) * np.abs(bw)).sum(), off.real, off.imag)
                r += 1
            if snap:
                snaps[s, sl] = pr
                s += 1
        if t == T:
            break
        l = int(lengths[t])
        if lo - l < 0 or hi + l >= n:
            raise ValueError("shift exceeds lattice bounds")
        ca = u00 * aw + u01 * bw
        cb = u10 * aw + u11 * bw
        a[lo:lo + l] = 0.0
        b[hi - l + 1:hi + 1] = 0.0
        a[lo + l:hi + l + 1] = ca
        b[lo - l:hi - l + 1] = cb
        lo -= l
        hi += l
        pw = (a[lo:hi + 1].real ** 2 + a[lo:hi + 1].imag ** 2
              + b[lo:hi + 1].real ** 2 + b[lo:hi + 1].imag ** 2)
        keep = np.flatnonzero(pw >= TRIM)
        if keep.size:
            new_lo, new_hi = lo + int(keep[0]), lo + int(keep[-1])
        else:
            new_lo = new_hi = lo
        a[lo:new_lo] = 0.0
        b[lo:new_lo] = 0.0
        a[new_hi + 1:hi + 1] = 0.0
        b[new_hi + 1:hi + 1] = 0.0
        lo, hi = new_lo, new_hi
    return lo, hi


def _sequence_numpy(scheme, p, q, fixed_l, u, T):
    if scheme == SCHEME_FIXED:
        return np.full(T, fixed_l, dtype=np.int64)
    first = 1 if u[0] < 0.5 else 2
    if scheme == SCHEME_I:
        flips = np.concatenate(([0], np.cumsum(u[1:T] >= p) & 1))
        return np.where(flips == 0, first, 3 - first).astype(np.int64)
    # variable draw consumption; sequential by nature
    return _sequence_loop(scheme, p, q, fixed_l, u, T)


_observe = njit(_observe_loop)
evolve_numba = njit(_evolve_loop) if HAS_NUMBA else None
sequence_numba = njit(_sequence_loop) if HAS_NUMBA else None

if HAS_NUMBA:
    evolve = evolve_numba
    make_sequence = sequence_numba
else:
    evolve = _evolve_numpy
    make_sequence = _sequence_numpy


def draws_needed(scheme, T):
    """Upper bound on uniforms consumed by a length-``T`` sequence."""
    if scheme == SCHEME_FIXED:
        return 0
    if scheme == SCHEME_I:
        return T
    return 2 * T - 1
