# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled lattice-sum kernels with a deterministic parallel reduction.

The term range is cut into fixed blocks (BLOCK terms).  Worker threads
process whole blocks; inside a block the terms are summed sequentially
with Kahan compensation, and the per-block partials are folded in block
order afterwards, again with compensation.  Neither the block layout nor
the fold order depends on the thread count, so results are bit-identical
for any ``num_threads``.

Compiled without -ffast-math on purpose: the compensated sums rely on
strict IEEE semantics.
"""

import numpy as np

from cython.parallel cimport prange
cimport openmp
from libc.math cimport sin, cos, sqrt

cdef enum:
    BLOCK = 65536

cdef double TWO_PI = 6.283185307179586476925287

# Series of cos(x)/x^2 - sin(x)/x^3 (degree 2m-2 term has coefficient
# (-1)^m * 2m/(2m+1)!); protects against the small-x cancellation.
cdef double H0 = -0.3333333333333333
cdef double H1 = 0.03333333333333333
cdef double H2 = -0.0011904761904761906
cdef double H3 = 2.2045855379188714e-05
cdef double H4 = -2.505210838544172e-07
cdef double H5 = 1.9270852604185937e-09
cdef double H6 = -1.0706029224547743e-11
cdef double H7 = 4.498331606952833e-14
cdef double H8 = -1.4797143443923793e-16
cdef double H9 = 3.9145882126782523e-19
cdef double H10 = -8.509974375387503e-22


cdef inline void _fg(double xi, double cos2, double *f, double *g) noexcept nogil:
    cdef double alpha = 1.0 - cos2
    cdef double beta = 1.0 - 3.0 * cos2
    cdef double s = sin(xi)
    cdef double c = cos(xi)
    cdef double xi2 = xi * xi
    cdef double xi3 = xi2 * xi
    cdef double h, x2
    if xi < 0.5:
        x2 = xi2
        h = H10
        h = h * x2 + H9
        h = h * x2 + H8
        h = h * x2 + H7
        h = h * x2 + H6
        h = h * x2 + H5
        h = h * x2 + H4
        h = h * x2 + H3
        h = h * x2 + H2
        h = h * x2 + H1
        h = h * x2 + H0
    else:
        h = c / xi2 - s / xi3
    f[0] = alpha * s / xi + beta * h
    g[0] = -alpha * c / xi + beta * (s / xi2 + c / xi3)


cdef inline void _kadd(double *sums, double *comp, int idx, double value) noexcept nogil:
    cdef double y = value - comp[idx]
    cdef double t = sums[idx] + y
    comp[idx] = (t - sums[idx]) - y
    sums[idx] = t


cdef void _chain_block(double d, double dphi, double cos2,
                       long long lo, long long hi, double wc, double ws,
                       double *out) noexcept nogil:
    cdef double sums[6]
    cdef double comp[6]
    cdef int q
    cdef long long n
    cdef double f, g, om, ga, ph, cp, sp
    for q in range(6):
        sums[q] = 0.0
        comp[q] = 0.0
    for n in range(lo, hi):
        _fg(TWO_PI * d * n, cos2, &f, &g)
        om = 0.75 * g
        ga = 1.5 * f
        ph = n * dphi
        cp = cos(ph)
        sp = sin(ph)
        _kadd(sums, comp, 0, om * wc)
        _kadd(sums, comp, 1, ga * wc)
        _kadd(sums, comp, 2, om * (wc * cp))
        _kadd(sums, comp, 3, om * (ws * sp))
        _kadd(sums, comp, 4, ga * (wc * cp))
        _kadd(sums, comp, 5, ga * (ws * sp))
    for q in range(6):
        out[q] = sums[q]


cdef void _class_block(double d, double dphi,
                       const long long *r2u, const double *cos2,
                       const long long *nphase, const long long *mcos,
                       const long long *msin, long long lo, long long hi,
                       double *out) noexcept nogil:
    cdef double sums[6]
    cdef double comp[6]
    cdef int q
    cdef long long idx
    cdef double f, g, om, ga, ph, cp, sp, mc, ms
    for q in range(6):
        sums[q] = 0.0
        comp[q] = 0.0
    for idx in range(lo, hi):
        _fg(TWO_PI * d * sqrt(<double> r2u[idx]), cos2[idx], &f, &g)
        om = 0.75 * g
        ga = 1.5 * f
        ph = (<double> nphase[idx]) * dphi
        cp = cos(ph)
        sp = sin(ph)
        mc = <double> mcos[idx]
        ms = <double> msin[idx]
        _kadd(sums, comp, 0, om * mc)
        _kadd(sums, comp, 1, ga * mc)
        _kadd(sums, comp, 2, om * (mc * cp))
        _kadd(sums, comp, 3, om * (ms * sp))
        _kadd(sums, comp, 4, ga * (mc * cp))
        _kadd(sums, comp, 5, ga * (ms * sp))
    for q in range(6):
        out[q] = sums[q]


cdef void _cubic_block(double d, long long m,
                       const long long *pi_, const long long *pj_,
                       long long lo, long long hi, double *out) noexcept nogil:
    cdef double sums[2]
    cdef double comp[2]
    cdef int q
    cdef long long p, i, j, k, r2
    cdef double f, g, mult, base, cos2
    for q in range(2):
        sums[q] = 0.0
        comp[q] = 0.0
    for p in range(lo, hi):
        i = pi_[p]
        j = pj_[p]
        base = 1.0
        if i < j:
            base = base * 2.0
        if i > 0:
            base = base * 2.0
        if j > 0:
            base = base * 2.0
        for k in range(0, m + 1):
            r2 = i * i + j * j + k * k
            if r2 == 0:
                continue
            mult = base
            if k > 0:
                mult = mult * 2.0
            cos2 = (<double> (k * k)) / (<double> r2)
            _fg(TWO_PI * d * sqrt(<double> r2), cos2, &f, &g)
            _kadd(sums, comp, 0, 0.75 * g * mult)
            _kadd(sums, comp, 1, 1.5 * f * mult)
    for q in range(2):
        out[q] = sums[q]


cdef void _combine(double[:, ::1] partials, double[::1] total) noexcept nogil:
    cdef long long b
    cdef int q
    cdef double comp[6]
    cdef double y, t
    for q in range(6):
        total[q] = 0.0
        comp[q] = 0.0
    for b in range(partials.shape[0]):
        for q in range(6):
            y = partials[b, q] - comp[q]
            t = total[q] + y
            comp[q] = (t - total[q]) - y
            total[q] = t


cdef int _resolve_threads(int num_threads) noexcept:
    if num_threads > 0:
        return num_threads
    return openmp.omp_get_max_threads()


def chain_range_sum(double d, double delta_phi, double cos2_theta,
                    long long n_lo, long long n_hi, double w_cos, double w_sin,
                    int num_threads=0):
    """Sum chain shells n in [n_lo, n_hi) at separations n*d (see fallback)."""
    out = np.zeros(6)
    if n_hi <= n_lo:
        return out
    cdef long long nblocks = (n_hi - n_lo + BLOCK - 1) // BLOCK
    partials_arr = np.zeros((nblocks, 6))
    cdef double[:, ::1] partials = partials_arr
    cdef double[::1] total = out
    cdef long long b, lo, hi
    cdef int nt = _resolve_threads(num_threads)
    with nogil:
        for b in prange(nblocks, num_threads=nt, schedule='static'):
            lo = n_lo + b * BLOCK
            hi = n_lo + (b + 1) * BLOCK
            if hi > n_hi:
                hi = n_hi
            _chain_block(d, delta_phi, cos2_theta, lo, hi, w_cos, w_sin,
                         &partials[b, 0])
        _combine(partials, total)
    return out


def class_sum(double d, double delta_phi,
              long long[::1] r2_units, double[::1] cos2_theta,
              long long[::1] n_phase, long long[::1] m_cos, long long[::1] m_sin,
              int num_threads=0):
    """Sum precomputed shell classes at separations d*sqrt(r2_units)."""
    out = np.zeros(6)
    cdef long long n_classes = r2_units.shape[0]
    if n_classes == 0:
        return out
    cdef long long nblocks = (n_classes + BLOCK - 1) // BLOCK
    partials_arr = np.zeros((nblocks, 6))
    cdef double[:, ::1] partials = partials_arr
    cdef double[::1] total = out
    cdef long long b, lo, hi
    cdef int nt = _resolve_threads(num_threads)
    with nogil:
        for b in prange(nblocks, num_threads=nt, schedule='static'):
            lo = b * BLOCK
            hi = (b + 1) * BLOCK
            if hi > n_classes:
                hi = n_classes
            _class_block(d, delta_phi, &r2_units[0], &cos2_theta[0],
                         &n_phase[0], &m_cos[0], &m_sin[0], lo, hi,
                         &partials[b, 0])
        _combine(partials, total)
    return out


def cubic_center_sum(double d, long long half_extent,
                     long long[::1] pair_i, long long[::1] pair_j,
                     int num_threads=0):
    """Innermost-site sums for a (2M+1)^3 cube, dipoles along z, no phases."""
    out = np.zeros(6)
    cdef long long n_pairs = pair_i.shape[0]
    if n_pairs == 0:
        return out
    cdef long long ppb = BLOCK // (half_extent + 1)
    if ppb < 1:
        ppb = 1
    cdef long long nblocks = (n_pairs + ppb - 1) // ppb
    partials_arr = np.zeros((nblocks, 6))
    cdef double[:, ::1] partials = partials_arr
    cdef double[::1] total = out
    cdef long long b, lo, hi
    cdef int nt = _resolve_threads(num_threads)
    with nogil:
        for b in prange(nblocks, num_threads=nt, schedule='static'):
            lo = b * ppb
            hi = (b + 1) * ppb
            if hi > n_pairs:
                hi = n_pairs
            _cubic_block(d, half_extent, &pair_i[0], &pair_j[0], lo, hi,
                         &partials[b, 0])
            partials[b, 2] = partials[b, 0]
            partials[b, 4] = partials[b, 1]
        _combine(partials, total)
    return out
