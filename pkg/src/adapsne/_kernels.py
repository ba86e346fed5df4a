"""numba kernels.  Each mirrors a numpy reference elsewhere in the package.

* ``fwa_rows``        <-> ``fwa.fwa_search`` with ``fwa.perplexity_objective``
* ``tsne_grad``       <-> ``embedding._grad_numpy``
* ``tsne_kl``         <-> ``embedding.kl_divergence`` of ``student_t_affinities``
* ``grid_counts``     <-> ``grid._counts_numpy``

Results agree with the references up to floating-point summation order.
"""

import math

import numpy as np

from ._accel import njit, prange

XI = 1e-12

# exp(-a) for a >= 0 as Cody-Waite reduction + degree-12 Taylor polynomial
# with a 2**k table; unlike math.exp this vectorises without SVML.
# Relative error stays below 1e-14.
_LN2_HI = 6.93147180369123816490e-01
_LN2_LO = 1.90821492927058770002e-10
_INV_LN2 = 1.44269504088896338700e00
_POW2_OFFSET = 1100
POW2 = 2.0 ** np.arange(-_POW2_OFFSET, 2, dtype=np.float64)
_FAST = {"reassoc", "contract", "arcp"}


@njit(fastmath=_FAST, inline="always")
def _exp_neg(a, pow2):
    x = max(-a, -708.0)
    k = math.floor(x * _INV_LN2 + 0.5)
    r = (x - k * _LN2_HI) - k * _LN2_LO
    p = 1.0 + r * (1.0 + r * (0.5 + r * (1.0 / 6 + r * (1.0 / 24 + r * (1.0 / 120 + r * (1.0 / 720 + r * (
        1.0 / 5040 + r * (1.0 / 40320 + r * (1.0 / 362880 + r * (1.0 / 3628800 + r * (
            1.0 / 39916800 + r * (1.0 / 479001600))))))))))))
    return p * pow2[int(k) + _POW2_OFFSET]


@njit(fastmath=_FAST)
def _row_fitness(dd, s, target, logspace, pow2):
    if logspace:
        s = math.exp(s)
    inv = 1.0 / (2.0 * s * s)
    z = 0.0
    wa = 0.0
    for j in range(dd.shape[0]):
        a = dd[j] * inv
        w = _exp_neg(a, pow2)
        z += w
        wa += w * a
    return abs(math.exp(math.log(z) + wa / z) - target)


@njit
def _better(f1, p1, i1, f2, p2, i2):
    if f1 != f2:
        return f1 < f2
    if p1 != p2:
        return p1 < p2
    return i1 < i2


@njit
def _allocate(fit, m, amax, floor, counts, amps):
    n = fit.shape[0]
    fmax = fit.max()
    fmin = fit.min()
    tot = 0.0
    raw = np.empty(n)
    for k in range(n):
        raw[k] = fmax - fit[k] + XI
        tot += raw[k]
    s = 0
    for k in range(n):
        raw[k] = m * raw[k] / tot
        c = np.rint(raw[k])
        counts[k] = max(1, int(c))
        s += counts[k]
        amps[k] = max(amax * (fit[k] - fmin + XI) / (fmax - fmin + XI), floor)
    diff = m - s
    if diff > 0:
        order = np.argsort(-raw, kind="mergesort")
        j = 0
        while diff > 0:
            counts[order[j % n]] += 1
            diff -= 1
            j += 1
    elif diff < 0:
        order = np.argsort(raw, kind="mergesort")
        j = 0
        while diff < 0:
            k = order[j % n]
            if counts[k] > 1:
                counts[k] -= 1
                diff += 1
            j += 1


@njit
def _fwa_one(dd, target, u, lo, hi, amax, floors, n, m, nmut, gens, literal, logspace, pow2):
    cap = n + m + nmut
    pos = np.empty(cap)
    fit = np.empty(cap)
    fw = np.empty(n)
    ff = np.empty(n)
    counts = np.empty(n, dtype=np.int64)
    amps = np.empty(n)
    idx = np.empty(cap, dtype=np.int64)
    tmp = np.empty(cap, dtype=np.int64)

    for k in range(n):
        x = min(max(lo + (hi - lo) * u[k], lo), hi)
        fw[k] = x
        ff[k] = _row_fitness(dd, x, target, logspace, pow2)
        if math.isnan(ff[k]):
            return x, np.nan
    b = 0
    for k in range(1, n):
        if _better(ff[k], fw[k], k, ff[b], fw[b], b):
            b = k
    best_p = fw[b]
    best_f = ff[b]

    off = n
    for gen in range(gens):
        for k in range(n):
            pos[k] = fw[k]
            fit[k] = ff[k]
        _allocate(ff, m, amax, floors[gen], counts, amps)
        t = n
        fsmax = -np.inf
        fsmin = np.inf
        for k in range(n):
            for _c in range(counts[k]):
                x = min(max(fw[k] + amps[k] * u[off + t - n], lo), hi)
                fx = _row_fitness(dd, x, target, logspace, pow2)
                if math.isnan(fx):
                    return x, np.nan
                pos[t] = x
                fit[t] = fx
                fsmax = max(fsmax, fx)
                fsmin = min(fsmin, fx)
                t += 1
        delta = fsmax - fsmin
        for k in range(nmut):
            if literal:
                x = fw[k % n] + delta
            else:
                x = fw[k % n] + delta * u[off + m + k]
            x = min(max(x, lo), hi)
            fx = _row_fitness(dd, x, target, logspace, pow2)
            if math.isnan(fx):
                return x, np.nan
            pos[t] = x
            fit[t] = fx
            t += 1
        # insertion sort by (fitness, position, slot), then exact duplicate
        # positions move behind all distinct ones
        for q in range(cap):
            idx[q] = q
        for q in range(1, cap):
            a = idx[q]
            r = q - 1
            while r >= 0 and _better(fit[a], pos[a], a, fit[idx[r]], pos[idx[r]], idx[r]):
                idx[r + 1] = idx[r]
                r -= 1
            idx[r + 1] = a
        nk = 0
        for q in range(cap):
            if q == 0 or pos[idx[q]] != pos[idx[q - 1]]:
                tmp[nk] = idx[q]
                nk += 1
        for q in range(cap):
            if q > 0 and pos[idx[q]] == pos[idx[q - 1]]:
                tmp[nk] = idx[q]
                nk += 1
        for q in range(cap):
            idx[q] = tmp[q]
        for r in range(n):
            fw[r] = pos[idx[r]]
            ff[r] = fit[idx[r]]
        if ff[0] < best_f:
            best_p = fw[0]
            best_f = ff[0]
        off += m + nmut
    return best_p, best_f


@njit(parallel=True)
def fwa_rows(d2, target, draws, lo, hi, amax, floors, n, m, nmut, gens, literal, logspace, pow2):
    rows = d2.shape[0]
    sig = np.empty(rows)
    fit = np.empty(rows)
    for i in prange(rows):
        dd = np.empty(rows - 1)
        t = 0
        for j in range(rows):
            if j != i:
                dd[t] = d2[i, j]
                t += 1
        dd -= dd.min()
        s, f = _fwa_one(dd, target, draws[i], lo, hi, amax, floors, n, m, nmut, gens, literal, logspace, pow2)
        sig[i] = s
        fit[i] = f
    return sig, fit


@njit(parallel=True, fastmath=_FAST)
def tsne_grad(p, y):
    """KL gradient and the Student-t normaliser Z for 2-D ``y``."""
    n = y.shape[0]
    y0 = y[:, 0].copy()
    y1 = y[:, 1].copy()
    rowz = np.zeros(n)
    for i in prange(n):
        acc = 0.0
        for j in range(n):
            dx = y0[i] - y0[j]
            dy = y1[i] - y1[j]
            acc += 1.0 / (1.0 + dx * dx + dy * dy)
        rowz[i] = acc - 1.0  # drop the j == i term
    z = 0.0
    for i in range(n):
        z += rowz[i]
    invz = 1.0 / z
    grad = np.empty((n, 2))
    for i in prange(n):
        g0 = 0.0
        g1 = 0.0
        for j in range(n):
            dx = y0[i] - y0[j]
            dy = y1[i] - y1[j]
            w = 1.0 / (1.0 + dx * dx + dy * dy)
            c = (p[i, j] - w * invz) * w
            g0 += c * dx
            g1 += c * dy
        grad[i, 0] = 4.0 * g0
        grad[i, 1] = 4.0 * g1
    return grad, z


@njit(parallel=True, fastmath=_FAST)
def tsne_kl(p, y, plogp):
    """KL(P || Q) given ``plogp = sum p ln p`` over the positive entries of P."""
    n = y.shape[0]
    y0 = y[:, 0].copy()
    y1 = y[:, 1].copy()
    rowz = np.zeros(n)
    rowc = np.zeros(n)
    for i in prange(n):
        acc = 0.0
        cross = 0.0
        for j in range(n):
            if j == i:
                continue
            dx = y0[i] - y0[j]
            dy = y1[i] - y1[j]
            t = 1.0 + dx * dx + dy * dy
            acc += 1.0 / t
            if p[i, j] > 0:
                cross += p[i, j] * math.log(t)
        rowz[i] = acc
        rowc[i] = cross
    z = 0.0
    c = 0.0
    psum = 0.0
    for i in range(n):
        z += rowz[i]
        c += rowc[i]
    for i in range(n):
        for j in range(n):
            psum += p[i, j]
    # sum p ln(p/q) with q = 1 / (t Z)
    return plogp + c + psum * math.log(z)


@njit
def grid_counts(y, base0, base1, cs0, cs1, g):
    counts = np.zeros((g, g), dtype=np.int64)
    cells = np.empty((y.shape[0], 2), dtype=np.int64)
    for k in range(y.shape[0]):
        r = int(math.floor((y[k, 0] - base0) / cs0))
        c = int(math.floor((y[k, 1] - base1) / cs1))
        r = min(max(r, 0), g - 1)
        c = min(max(c, 0), g - 1)
        cells[k, 0] = r
        cells[k, 1] = c
        counts[r, c] += 1
    return counts, cells
