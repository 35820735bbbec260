"""Hot numerical kernels in two interchangeable implementations.

Every kernel exists as a numba loop (``*_nb``) and as a vectorised numpy
expression (``*_np``).  The public name is bound to one of them at import time
according to :data:`ekahler._accel.USE_NUMBA`, so callers never branch.
"""

from __future__ import annotations

import numpy as np

from ._accel import USE_NUMBA, njit

# ---------------------------------------------------------------- jet product


@njit
def jet_mul_nb(x, y, out_idx, a_idx, b_idx, n):
    out = np.zeros(n)
    for t in range(out_idx.shape[0]):
        out[out_idx[t]] += x[a_idx[t]] * y[b_idx[t]]
    return out


def jet_mul_np(x, y, out_idx, a_idx, b_idx, n):
    return np.bincount(out_idx, weights=x[a_idx] * y[b_idx], minlength=n)


# ----------------------------------------------------------------- Christoffel


@njit
def christoffel_nb(ginv, dg):
    # dg[a, b, c] = d_c g_ab
    d = ginv.shape[0]
    low = np.empty((d, d, d))
    for l in range(d):
        for i in range(d):
            for j in range(d):
                low[l, i, j] = 0.5 * (dg[l, i, j] + dg[l, j, i] - dg[i, j, l])
    gam = np.zeros((d, d, d))
    for k in range(d):
        for l in range(d):
            c = ginv[k, l]
            if c != 0.0:
                for i in range(d):
                    for j in range(d):
                        gam[k, i, j] += c * low[l, i, j]
    return gam


def christoffel_np(ginv, dg):
    low = 0.5 * (dg + dg.transpose(0, 2, 1) - dg.transpose(2, 0, 1))
    return np.einsum("kl,lij->kij", ginv, low)


# ------------------------------------------------------ geodesic / transport


@njit
def geodesic_accel_nb(gam, v):
    d = v.shape[0]
    acc = np.zeros(d)
    for k in range(d):
        s = 0.0
        for i in range(d):
            vi = v[i]
            if vi != 0.0:
                for j in range(d):
                    s += gam[k, i, j] * vi * v[j]
        acc[k] = -s
    return acc


def geodesic_accel_np(gam, v):
    return -np.einsum("kij,i,j->k", gam, v, v)


@njit
def transport_rate_nb(gam, v, frame):
    # d/dt E^k = -Gamma^k_ij v^i E^j, frame columns are the transported vectors
    d = v.shape[0]
    ncol = frame.shape[1]
    out = np.zeros((d, ncol))
    for k in range(d):
        for i in range(d):
            vi = v[i]
            if vi != 0.0:
                for j in range(d):
                    c = gam[k, i, j] * vi
                    if c != 0.0:
                        for a in range(ncol):
                            out[k, a] -= c * frame[j, a]
    return out


def transport_rate_np(gam, v, frame):
    return -np.einsum("kij,i,ja->ka", gam, v, frame)


# --------------------------------------------- first Bianchi constraint rows


@njit
def bianchi_rows_nb(m, pair_index, sign_table, param_index, n_params):
    """Rows expressing R_abcd + R_bcad + R_cabd = 0 for a<b<c and all d.

    ``pair_index[a, b]`` gives the Lambda^2 index of (a, b), ``sign_table[a, b]``
    the orientation sign, and ``param_index[P, Q]`` the parameter slot of the
    (P, Q) block entry.
    """
    nrows = 0
    for a in range(m):
        for b in range(a + 1, m):
            for c in range(b + 1, m):
                nrows += m
    rows = np.zeros((nrows, n_params))
    r = 0
    for a in range(m):
        for b in range(a + 1, m):
            for c in range(b + 1, m):
                for d in range(m):
                    # three cyclic terms (a b | c d), (b c | a d), (c a | b d)
                    for t in range(3):
                        if t == 0:
                            x, y, z = a, b, c
                        elif t == 1:
                            x, y, z = b, c, a
                        else:
                            x, y, z = c, a, b
                        if z == d:
                            continue
                        s = sign_table[x, y] * sign_table[z, d]
                        rows[r, param_index[pair_index[x, y], pair_index[z, d]]] += s
                    r += 1
    return rows


def bianchi_rows_np(m, pair_index, sign_table, param_index, n_params):
    a, b, c = np.array(
        [(a, b, c) for a in range(m) for b in range(a + 1, m) for c in range(b + 1, m)],
        dtype=np.int64,
    ).reshape(-1, 3).T
    ntri = a.size
    d = np.arange(m)
    rows = np.zeros((ntri * m, n_params))
    row_id = (np.arange(ntri)[:, None] * m + d[None, :]).ravel()
    for x, y, z in ((a, b, c), (b, c, a), (c, a, b)):
        xx = np.repeat(x, m)
        yy = np.repeat(y, m)
        zz = np.repeat(z, m)
        dd = np.tile(d, ntri)
        keep = zz != dd
        s = sign_table[xx, yy] * sign_table[zz, dd]
        col = param_index[pair_index[xx, yy], pair_index[zz, dd]]
        np.add.at(rows, (row_id[keep], col[keep]), s[keep])
    return rows


if USE_NUMBA:
    jet_mul = jet_mul_nb
    christoffel = christoffel_nb
    geodesic_accel = geodesic_accel_nb
    transport_rate = transport_rate_nb
    bianchi_rows = bianchi_rows_nb
else:
    jet_mul = jet_mul_np
    christoffel = christoffel_np
    geodesic_accel = geodesic_accel_np
    transport_rate = transport_rate_np
    bianchi_rows = bianchi_rows_np


def warmup() -> None:
    """Trigger compilation of every kernel so later timings exclude the JIT."""
    if not USE_NUMBA:
        return
    idx = np.zeros(1, dtype=np.int64)
    jet_mul(np.ones(1), np.ones(1), idx, idx, idx, 1)
    g = np.eye(2)
    gam = christoffel(g, np.zeros((2, 2, 2)))
    geodesic_accel(gam, np.ones(2))
    transport_rate(gam, np.ones(2), np.eye(2))
    pi = np.zeros((2, 2), dtype=np.int64)
    bianchi_rows(2, pi, np.zeros((2, 2)), np.zeros((1, 1), dtype=np.int64), 1)
