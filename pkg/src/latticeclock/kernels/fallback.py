"""Pure-numpy lattice-sum kernels (fallback when the compiled core is absent).

All kernels share the blocked reduction contract of the compiled core: the
term range is cut into fixed blocks of BLOCK_SIZE terms, each block is
summed independently, and the per-block partials are combined sequentially
in block order with Kahan compensation.  Because the block decomposition
and the combination order never depend on the worker count, results are
bit-identical across thread counts within a backend.  Across backends
(compiled vs numpy) the within-block summation order differs, so results
agree only to roundoff (~1e-14 relative).

Every kernel returns the six accumulators

    [omega_eff, gamma_eff, omega_cos, omega_sin, gamma_cos, gamma_sin]

where the cos/sin components carry the excitation-phase weights
cos(n*delta_phi) / sin(n*delta_phi) with integer multiplicities mcos/msin
(msin counts the imbalance between negative- and positive-offset partners,
so symmetric shells contribute exactly zero to the sine sums).
"""

import numpy as np

from ..couplings import _fg_from_cos2

BLOCK_SIZE = 1 << 16
TWO_PI = 2.0 * np.pi


def _kahan_combine(partials):
    """Sequentially fold (nblocks, 6) partials, compensating per component."""
    total = np.zeros(6)
    comp = np.zeros(6)
    for row in partials:
        y = row - comp
        t = total + y
        comp = (t - total) - y
        total = t
    return total


def _accumulate(omega, gamma, cos_w, sin_w):
    """Six component sums of one block from coupling values and phase weights."""
    return np.array(
        [
            np.sum(omega * cos_w[0]),
            np.sum(gamma * cos_w[0]),
            np.sum(omega * cos_w[1]),
            np.sum(omega * sin_w),
            np.sum(gamma * cos_w[1]),
            np.sum(gamma * sin_w),
        ]
    )


def chain_range_sum(d, delta_phi, cos2_theta, n_lo, n_hi, w_cos, w_sin, num_threads=0):
    """Sum chain shells n in [n_lo, n_hi) at separations n*d.

    w_cos is the partner count per shell (2 for symmetric shells, 1 for a
    lone partner on the longer side); w_sin the signed sine weight.
    """
    if n_hi <= n_lo:
        return np.zeros(6)
    n_blocks = (n_hi - n_lo + BLOCK_SIZE - 1) // BLOCK_SIZE
    partials = np.zeros((n_blocks, 6))
    for b in range(n_blocks):
        lo = n_lo + b * BLOCK_SIZE
        hi = min(n_hi, lo + BLOCK_SIZE)
        n = np.arange(lo, hi, dtype=np.float64)
        f, g = _fg_from_cos2(TWO_PI * d * n, cos2_theta)
        omega = 0.75 * g
        gamma = 1.5 * f
        ph = n * delta_phi
        cp = np.cos(ph)
        sp = np.sin(ph)
        partials[b] = _accumulate(
            omega, gamma, (np.full_like(n, w_cos), w_cos * cp), w_sin * sp
        )
    return _kahan_combine(partials)


def class_sum(d, delta_phi, r2_units, cos2_theta, n_phase, m_cos, m_sin, num_threads=0):
    """Sum precomputed shell classes at separations d*sqrt(r2_units)."""
    n_classes = len(r2_units)
    if n_classes == 0:
        return np.zeros(6)
    n_blocks = (n_classes + BLOCK_SIZE - 1) // BLOCK_SIZE
    partials = np.zeros((n_blocks, 6))
    for b in range(n_blocks):
        sl = slice(b * BLOCK_SIZE, min(n_classes, (b + 1) * BLOCK_SIZE))
        r = np.sqrt(r2_units[sl].astype(np.float64))
        f, g = _fg_from_cos2(TWO_PI * d * r, cos2_theta[sl])
        omega = 0.75 * g
        gamma = 1.5 * f
        ph = n_phase[sl].astype(np.float64) * delta_phi
        mc = m_cos[sl].astype(np.float64)
        ms = m_sin[sl].astype(np.float64)
        partials[b] = _accumulate(omega, gamma, (mc, mc * np.cos(ph)), ms * np.sin(ph))
    return _kahan_combine(partials)


def cubic_center_sum(d, half_extent, pair_i, pair_j, num_threads=0):
    """Innermost-site sums for a (2M+1)^3 cube, dipoles along z, no phases.

    pair_i/pair_j enumerate the 0 <= i <= j <= M fundamental domain; the
    inner loop runs k = 0..M with sign-flip and swap multiplicities.  Blocks
    are fixed runs of pairs so the reduction stays thread-count independent.
    """
    m = half_extent
    n_pairs = len(pair_i)
    pairs_per_block = max(1, BLOCK_SIZE // (m + 1))
    n_blocks = (n_pairs + pairs_per_block - 1) // pairs_per_block
    partials = np.zeros((n_blocks, 6))
    k = np.arange(0, m + 1, dtype=np.int64)
    k2 = k * k
    k_mult = np.where(k > 0, 2.0, 1.0)
    for b in range(n_blocks):
        sl = slice(b * pairs_per_block, min(n_pairs, (b + 1) * pairs_per_block))
        i = pair_i[sl].astype(np.int64)[:, None]
        j = pair_j[sl].astype(np.int64)[:, None]
        r2 = i * i + j * j + k2[None, :]
        mult = (
            np.where(i < j, 2.0, 1.0)
            * np.where(i > 0, 2.0, 1.0)
            * np.where(j > 0, 2.0, 1.0)
            * k_mult[None, :]
        )
        valid = r2 > 0
        r2v = r2[valid]
        cos2 = np.broadcast_to(k2[None, :], r2.shape)[valid] / r2v
        f, g = _fg_from_cos2(TWO_PI * d * np.sqrt(r2v.astype(np.float64)), cos2)
        mv = mult[valid]
        block = np.zeros(6)
        block[0] = np.sum(0.75 * g * mv)
        block[1] = np.sum(1.5 * f * mv)
        block[2] = block[0]
        block[4] = block[1]
        partials[b] = block
    return _kahan_combine(partials)
