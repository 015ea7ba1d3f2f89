"""Compiled inner loops for the factorization iteration.

Arrays are row-major with columns as independent signals, so every loop keeps
the column index innermost.  Filters are cascades of second-order sections in
transposed direct form II.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def _sos_row(sos, z, row):
    n = row.size
    for s in range(sos.shape[0]):
        b0 = sos[s, 0]
        b1 = sos[s, 1]
        b2 = sos[s, 2]
        a1 = sos[s, 4]
        a2 = sos[s, 5]
        z1 = z[s, 0]
        z2 = z[s, 1]
        for j in range(n):
            u = row[j]
            y = b0 * u + z1[j]
            z1[j] = b1 * u - a1 * y + z2[j]
            z2[j] = b2 * u - a2 * y
            row[j] = y


@njit(cache=True)
def sos_filter_columns(sos, U, out, reverse):
    """Filter every column of ``U`` (bottom to top if ``reverse``)."""
    n_rows, n = U.shape
    z = np.zeros((sos.shape[0], 2, n))
    for step in range(n_rows):
        i = n_rows - 1 - step if reverse else step
        for j in range(n):
            out[i, j] = U[i, j]
        _sos_row(sos, z, out[i])


@njit(cache=True)
def _times_banded_row(zr, q, orow):
    # orow = zr @ Q with Q symmetric Toeplitz, half-band q[K:]
    n = zr.size
    K = (q.size - 1) // 2
    qc = q[K]
    for i in range(n):
        orow[i] = qc * zr[i]
    for d in range(1, K + 1):
        qd = q[K + d]
        for i in range(n - d):
            orow[i] += qd * zr[i + d]
            orow[i + d] += qd * zr[i]


@njit(cache=True)
def times_banded(Z, q, out):
    """``out = Z Q`` where ``Q`` is the symmetric banded Toeplitz with half-band ``q[K:]``."""
    for r in range(Z.shape[0]):
        _times_banded_row(Z[r], q, out[r])


@njit(cache=True, fastmath=True)
def _sos_block(sos, z, v, wb):
    """Advance the cascade state ``z`` (``2 * sections`` rows) over ``v[:wb]`` in place."""
    for s in range(sos.shape[0]):
        b0 = sos[s, 0]
        b1 = sos[s, 1]
        b2 = sos[s, 2]
        a1 = sos[s, 4]
        a2 = sos[s, 5]
        z1 = z[2 * s]
        z2 = z[2 * s + 1]
        for c in range(wb):
            u = v[c]
            y = b0 * u + z1[c]
            z1[c] = b1 * u - a1 * y + z2[c]
            z2[c] = b2 * u - a2 * y
            v[c] = y


@njit(cache=True)
def free_response_maps(sos, N):
    """Linear maps describing a reverse pass that rings down with zero input.

    For a reverse cascade state ``xi`` reached at row ``r`` (so rows
    ``r-1 .. 0`` see only its free response):

    * ``Gam[r] @ xi`` is the forward cascade state after filtering those rows
      from rest;
    * ``xi @ Om[r] @ xi`` is the energy of those free-response rows.

    States are flattened as ``2 * section + k``.
    """
    ns = sos.shape[0]
    dim = 2 * ns
    Gam = np.zeros((N + 1, dim, dim))
    Om = np.zeros((N + 1, dim, dim))
    seq = np.zeros((dim, N))
    one = np.zeros(1)
    zr = np.zeros((dim, 1))
    zf = np.zeros((dim, 1))
    for m in range(dim):
        zr[:] = 0.0
        zr[m, 0] = 1.0
        for t in range(N):
            one[0] = 0.0
            _sos_block(sos, zr, one, 1)
            seq[m, t] = one[0]
    for r in range(1, N + 1):
        t = r - 1
        for e in range(dim):
            for m in range(dim):
                Om[r, e, m] = Om[r - 1, e, m] + seq[e, t] * seq[m, t]
    for m in range(dim):
        for r in range(1, N + 1):
            # rows 0..r-1 receive seq[r-1], ..., seq[0]
            zf[:] = 0.0
            for t in range(r):
                one[0] = seq[m, r - 1 - t]
                _sos_block(sos, zf, one, 1)
            for e in range(dim):
                Gam[r, e, m] = zf[e, 0]
    return Gam, Om


@njit(cache=True)
def _ring_in(Gam_r, zr, zf, wb):
    dim = zr.shape[0]
    for e in range(dim):
        for c in range(wb):
            zf[e, c] = 0.0
        for m in range(dim):
            g = Gam_r[e, m]
            for c in range(wb):
                zf[e, c] += g * zr[m, c]


@njit(cache=True, fastmath=True)
def apgd_sweep(Xc, Xp, Zl, a, b, invL, sos, st, h, Gam, Om, Zn, width):
    """One accelerated projected-gradient iteration over lower-triangular iterates.

    With ``Y = Xc + a (Zl - Xc) + b (Xc - Xp)``, writes the lower triangle of
    ``Zn = tril(Y - G G^T (Y D - G) D^T / L)`` and returns
    ``||G^T (G - Zn D)||_F^2``.  ``G`` is the lower-triangular Toeplitz matrix
    of ``h`` realized by the cascade ``sos``; ``D`` has stencil ``st``.

    Columns are handled in blocks of ``width`` so intermediate arrays stay in
    cache.  A block's inputs vanish above row ``j0 - K``; the reverse passes
    stop there and ``Gam``/``Om`` account for the rows above.
    """
    N, n = Xc.shape
    K = st.size - 1
    dim = 2 * sos.shape[0]
    Yh = np.zeros((N, width + 2 * K))
    A1 = np.zeros((N, width + K))
    Zh = np.zeros((N, width + 2 * K))
    tmp = np.zeros(width + K)
    zr = np.zeros((dim, width + K))
    zf = np.zeros((dim, width + K))
    cost = 0.0
    for j0 in range(0, n, width):
        j1 = min(n, j0 + width)
        wb = j1 - j0
        r0 = max(0, j0 - K)
        yo = j0 - K
        # gradient columns j0 .. j1+K-1 in D-space
        gw = min(N, j1 + K) - j0
        # cost columns j0 .. j1-1, or through N-1 for the last block
        cw = (N if j1 == n else j1) - j0

        # extrapolated point on columns yo .. j1+K-1 (zero outside 0..min(n, r+1))
        for r in range(r0, N):
            xc = Xc[r]
            xp = Xp[r]
            zl = Zl[r]
            yh = Yh[r]
            lo = max(0, yo) - yo
            hi = min(n, r + 1, j1 + K) - yo
            for lc in range(lo):
                yh[lc] = 0.0
            for lc in range(lo, max(lo, hi)):
                c = lc + yo
                yh[lc] = xc[c] + a * (zl[c] - xc[c]) + b * (xc[c] - xp[c])
            for lc in range(max(lo, hi), wb + 2 * K):
                yh[lc] = 0.0

        # A1 = G G^T (Y D - G) on the gradient columns
        zr[:, :gw] = 0.0
        for step in range(N - r0):
            r = N - 1 - step
            yh = Yh[r]
            row = A1[r]
            for lc in range(gw):
                row[lc] = 0.0
            for k in range(K + 1):
                sk = st[k]
                for lc in range(gw):
                    row[lc] += sk * yh[lc + K - k]
            base = r - j0
            for lc in range(min(gw, base + 1)):
                row[lc] -= h[base - lc]
            _sos_block(sos, zr, row, gw)
        if r0 > 0:
            _ring_in(Gam[r0], zr, zf, gw)
        else:
            zf[:, :gw] = 0.0
        for r in range(r0, N):
            _sos_block(sos, zf, A1[r], gw)

        # candidate on this block, with K columns of left halo for the cost
        for r in range(r0, N):
            row = A1[r]
            yh = Yh[r]
            zh = Zh[r]
            zn = Zn[r]
            for lc in range(K):
                c = yo + lc
                zh[lc] = zn[c] if (c >= 0 and c <= r) else 0.0
            m = max(0, min(wb, r - j0 + 1))
            for i in range(m):
                tmp[i] = 0.0
            for k in range(K + 1):
                sk = st[k]
                for i in range(m):
                    tmp[i] += sk * row[i + k]
            for i in range(m):
                z = yh[i + K] - invL * tmp[i]
                zh[i + K] = z
                zn[j0 + i] = z
            for lc in range(K + m, wb + 2 * K):
                zh[lc] = 0.0

        # cost: reverse pass over G - Zn D on the cost columns
        zr[:, :cw] = 0.0
        for step in range(N - r0):
            r = N - 1 - step
            zh = Zh[r]
            row = A1[r]
            for lc in range(cw):
                row[lc] = 0.0
            for k in range(K + 1):
                sk = st[k]
                for lc in range(cw):
                    row[lc] -= sk * zh[lc + K - k]
            base = r - j0
            for lc in range(min(cw, base + 1)):
                row[lc] += h[base - lc]
            _sos_block(sos, zr, row, cw)
            for lc in range(cw):
                cost += row[lc] * row[lc]
        if r0 > 0:
            om = Om[r0]
            for e in range(dim):
                for m2 in range(dim):
                    w = om[e, m2]
                    for c in range(cw):
                        cost += w * zr[e, c] * zr[m2, c]
    return cost


@njit(cache=True)
def tv1d(y, lam, out):
    """Exact 1-D total-variation denoising by Condat's direct method.

    Minimizes ``0.5 ||x - y||^2 + lam * sum |x[i+1] - x[i]|`` in one pass,
    tracking the taut-string tube bounds ``vmin``/``vmax``.
    """
    n = y.size
    if n == 0:
        return
    k = 0
    k0 = 0
    kplus = 0
    kminus = 0
    umin = lam
    umax = -lam
    vmin = y[0] - lam
    vmax = y[0] + lam
    twolam = 2.0 * lam
    while True:
        while k == n - 1:
            if umin < 0.0:
                while True:
                    out[k0] = vmin
                    k0 += 1
                    if k0 > kminus:
                        break
                k = k0
                kminus = k
                vmin = y[k]
                umin = lam
                umax = vmin + umin - vmax
            elif umax > 0.0:
                while True:
                    out[k0] = vmax
                    k0 += 1
                    if k0 > kplus:
                        break
                k = k0
                kplus = k
                vmax = y[k]
                umax = -lam
                umin = vmax + umax - vmin
            else:
                vmin += umin / (k - k0 + 1)
                while True:
                    out[k0] = vmin
                    k0 += 1
                    if k0 > k:
                        break
                return
        umin += y[k + 1] - vmin
        if umin < -lam:
            while True:
                out[k0] = vmin
                k0 += 1
                if k0 > kminus:
                    break
            k = k0
            kplus = k
            kminus = k
            vmin = y[k]
            vmax = vmin + twolam
            umin = lam
            umax = -lam
            continue
        umax += y[k + 1] - vmax
        if umax > lam:
            while True:
                out[k0] = vmax
                k0 += 1
                if k0 > kplus:
                    break
            k = k0
            kplus = k
            kminus = k
            vmax = y[k]
            vmin = vmax - twolam
            umin = lam
            umax = -lam
            continue
        k += 1
        if umin >= lam:
            kminus = k
            vmin += (umin - lam) / (kminus - k0 + 1)
            umin = lam
        if umax <= -lam:
            kplus = k
            vmax += (umax + lam) / (kplus - k0 + 1)
            umax = -lam
