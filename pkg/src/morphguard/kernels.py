"""Hot numeric kernels with a numba path and a pure-numpy fallback.

Each kernel exists twice: ``<name>_numpy`` and ``<name>_numba``. The public
``<name>`` is bound to whichever backend ``morphguard._backend`` selected at
import time. The variants agree exactly on the integer and order-statistic
kernels and to rounding (summation order) on the floating-point ones; the
test-suite runs them side by side and ``benchmarks/bench_kernels.py`` times them.
"""

import math

import numpy as np

from ._backend import HAS_NUMBA, USE_NUMBA

__all__ = [
    "wood_proposals",
    "householder_rotate",
    "segment_min",
    "segment_kth_smallest",
    "uniform_histogram",
    "KERNELS",
]


# -- Wood rejection step ---------------------------------------------------


def wood_proposals_numpy(z, u, kappa, m):
    """Evaluate Wood's rejection test on a batch of proposals.

    ``z`` are Beta(m/2, m/2) draws, ``u`` uniform(0, 1) draws and ``m = d - 1``.
    Returns ``(w, s, accept)`` where ``w`` is the component along the mean
    direction, ``s = sqrt(1 - w**2)`` and ``accept`` the boolean mask.
    Written in terms of ``1 - w`` so that very large kappa keeps precision.
    """
    z = np.asarray(z, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    b = m / (2.0 * kappa + math.sqrt(4.0 * kappa * kappa + m * m))
    x0 = (1.0 - b) / (1.0 + b)
    one_minus_x0 = 2.0 * b / (1.0 + b)
    log_one_minus_x0sq = math.log(4.0 * b) - 2.0 * math.log1p(b)

    omw = 2.0 * b * z / (1.0 - (1.0 - b) * z)
    w = 1.0 - omw
    s = np.sqrt(np.maximum(omw * (2.0 - omw), 0.0))
    lhs = (
        kappa * (one_minus_x0 - omw)
        + m * np.log(one_minus_x0 + x0 * omw)
        - m * log_one_minus_x0sq
    )
    with np.errstate(divide="ignore"):
        accept = lhs >= np.log(u)
    return w, s, accept


def householder_rotate_numpy(x, mu):
    """Reflect rows of ``x`` so that e1 maps onto the unit vector ``mu``."""
    x = np.asarray(x, dtype=np.float64)
    v = -np.asarray(mu, dtype=np.float64)
    v[0] += 1.0
    vv = float(v @ v)
    if vv < 1e-30:
        return x.copy()
    return x - np.outer((x @ v) * (2.0 / vv), v)


def segment_min_numpy(values, bounds):
    """Minimum of each contiguous segment ``values[bounds[i]:bounds[i+1]]``.

    Empty segments yield ``inf``.
    """
    values = np.asarray(values, dtype=np.float64)
    bounds = np.asarray(bounds, dtype=np.int64)
    n = len(bounds) - 1
    out = np.full(n, np.inf)
    sizes = np.diff(bounds)
    nonempty = sizes > 0
    if values.size and nonempty.any():
        out[nonempty] = np.minimum.reduceat(values, bounds[:-1][nonempty])
    return out


def segment_kth_smallest_numpy(values, bounds, k):
    """k-th smallest (1-based) value of each segment, ``inf`` if it has < k."""
    values = np.asarray(values, dtype=np.float64)
    bounds = np.asarray(bounds, dtype=np.int64)
    n = len(bounds) - 1
    out = np.full(n, np.inf)
    if n == 0:
        return out
    seg = np.repeat(np.arange(n), np.diff(bounds))
    order = np.lexsort((values, seg))
    ranked = values[order]
    idx = bounds[:-1] + (k - 1)
    ok = np.diff(bounds) >= k
    out[ok] = ranked[idx[ok]]
    return out


def uniform_histogram_numpy(values, lo, hi, bins):
    """Counts over ``bins`` equal-width bins on [lo, hi]; last bin is closed."""
    values = np.asarray(values, dtype=np.float64)
    counts, _ = np.histogram(values, bins=bins, range=(lo, hi))
    return counts.astype(np.int64)


# -- numba variants --------------------------------------------------------

if HAS_NUMBA:
    from numba import njit

    @njit(cache=True)
    def wood_proposals_numba(z, u, kappa, m):
        b = m / (2.0 * kappa + math.sqrt(4.0 * kappa * kappa + m * m))
        x0 = (1.0 - b) / (1.0 + b)
        one_minus_x0 = 2.0 * b / (1.0 + b)
        log_one_minus_x0sq = math.log(4.0 * b) - 2.0 * math.log1p(b)
        n = z.shape[0]
        w = np.empty(n)
        s = np.empty(n)
        accept = np.empty(n, dtype=np.bool_)
        for i in range(n):
            omw = 2.0 * b * z[i] / (1.0 - (1.0 - b) * z[i])
            w[i] = 1.0 - omw
            t = omw * (2.0 - omw)
            s[i] = math.sqrt(t) if t > 0.0 else 0.0
            lhs = (
                kappa * (one_minus_x0 - omw)
                + m * math.log(one_minus_x0 + x0 * omw)
                - m * log_one_minus_x0sq
            )
            if u[i] <= 0.0:
                accept[i] = True
            else:
                accept[i] = lhs >= math.log(u[i])
        return w, s, accept

    @njit(cache=True)
    def _householder_rotate_numba(x, mu):
        n, d = x.shape
        v = -mu.copy()
        v[0] += 1.0
        vv = 0.0
        for j in range(d):
            vv += v[j] * v[j]
        out = x.copy()
        if vv < 1e-30:
            return out
        scale = 2.0 / vv
        for i in range(n):
            dot = 0.0
            for j in range(d):
                dot += x[i, j] * v[j]
            dot *= scale
            for j in range(d):
                out[i, j] = x[i, j] - dot * v[j]
        return out

    def householder_rotate_numba(x, mu):
        x = np.ascontiguousarray(x, dtype=np.float64)
        mu = np.ascontiguousarray(mu, dtype=np.float64)
        return _householder_rotate_numba(x, mu)

    @njit(cache=True)
    def _segment_min_numba(values, bounds):
        n = bounds.shape[0] - 1
        out = np.empty(n)
        for i in range(n):
            best = np.inf
            for j in range(bounds[i], bounds[i + 1]):
                if values[j] < best:
                    best = values[j]
            out[i] = best
        return out

    def segment_min_numba(values, bounds):
        return _segment_min_numba(
            np.ascontiguousarray(values, dtype=np.float64),
            np.ascontiguousarray(bounds, dtype=np.int64),
        )

    @njit(cache=True)
    def _segment_kth_smallest_numba(values, bounds, k):
        n = bounds.shape[0] - 1
        out = np.empty(n)
        for i in range(n):
            lo = bounds[i]
            hi = bounds[i + 1]
            if hi - lo < k:
                out[i] = np.inf
            else:
                seg = np.sort(values[lo:hi])
                out[i] = seg[k - 1]
        return out

    def segment_kth_smallest_numba(values, bounds, k):
        return _segment_kth_smallest_numba(
            np.ascontiguousarray(values, dtype=np.float64),
            np.ascontiguousarray(bounds, dtype=np.int64),
            int(k),
        )

    @njit(cache=True)
    def _uniform_histogram_numba(values, lo, hi, bins):
        counts = np.zeros(bins, dtype=np.int64)
        width = (hi - lo) / bins
        for v in values:
            if v < lo or v > hi:
                continue
            if v == hi:
                idx = bins - 1
            else:
                idx = int((v - lo) / width)
                if idx >= bins:
                    idx = bins - 1
                # match numpy's edge placement for values sitting on an edge
                while idx > 0 and v < lo + idx * width:
                    idx -= 1
                while idx < bins - 1 and v >= lo + (idx + 1) * width:
                    idx += 1
            counts[idx] += 1
        return counts

    def uniform_histogram_numba(values, lo, hi, bins):
        return _uniform_histogram_numba(
            np.ascontiguousarray(values, dtype=np.float64), float(lo), float(hi), int(bins)
        )

    def _wood_proposals_numba_entry(z, u, kappa, m):
        return wood_proposals_numba(
            np.ascontiguousarray(z, dtype=np.float64),
            np.ascontiguousarray(u, dtype=np.float64),
            float(kappa),
            float(m),
        )

else:  # pragma: no cover - exercised only without numba installed
    wood_proposals_numba = None
    _wood_proposals_numba_entry = None
    householder_rotate_numba = None
    segment_min_numba = None
    segment_kth_smallest_numba = None
    uniform_histogram_numba = None


KERNELS = {
    "wood_proposals": (wood_proposals_numpy, _wood_proposals_numba_entry),
    "householder_rotate": (householder_rotate_numpy, householder_rotate_numba),
    "segment_min": (segment_min_numpy, segment_min_numba),
    "segment_kth_smallest": (segment_kth_smallest_numpy, segment_kth_smallest_numba),
    "uniform_histogram": (uniform_histogram_numpy, uniform_histogram_numba),
}


def _select(name):
    numpy_impl, numba_impl = KERNELS[name]
    return numba_impl if USE_NUMBA and numba_impl is not None else numpy_impl


wood_proposals = _select("wood_proposals")
householder_rotate = _select("householder_rotate")
segment_min = _select("segment_min")
segment_kth_smallest = _select("segment_kth_smallest")
uniform_histogram = _select("uniform_histogram")
