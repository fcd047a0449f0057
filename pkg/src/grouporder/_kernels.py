"""Compiled inner loop for the CDF-index bootstrap."""

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def cdf_bootstrap_integrals(idx, bin_i, bin_j, n_grid, sign, r_hat, w):
    """Recentred integrals for every bootstrap draw of a CDF-index pair.

    ``idx[b]`` lists the units drawn in replicate ``b``. ``bin_i[u]`` is the
    first grid index whose indicator counts unit ``u`` for agent ``i`` (or
    -1 when ``i`` is absent from the unit), so the weighted ECDF at grid point
    ``g`` is the share of drawn units with ``0 <= bin <= g``. Returns a
    ``(B, 3)`` array of (plus, minus, absolute) integrals of ``r* - r_hat``.
    """
    B, L = idx.shape
    out = np.zeros((B, 3))
    hi = np.empty(n_grid + 1)
    hj = np.empty(n_grid + 1)
    for b in range(B):
        hi[:] = 0.0
        hj[:] = 0.0
        ni = 0.0
        nj = 0.0
        for t in range(L):
            u = idx[b, t]
            c = bin_i[u]
            if c >= 0:
                hi[c] += 1.0
                ni += 1.0
            c = bin_j[u]
            if c >= 0:
                hj[c] += 1.0
                nj += 1.0
        if ni == 0.0 or nj == 0.0:
            continue
        ci = 0.0
        cj = 0.0
        p = 0.0
        m = 0.0
        for g in range(n_grid):
            ci += hi[g]
            cj += hj[g]
            d = sign * (cj / nj - ci / ni) - r_hat[g]
            if d > 0.0:
                p += d * w[g]
            else:
                m -= d * w[g]
        out[b, 0] = p
        out[b, 1] = m
        out[b, 2] = p + m
    return out
