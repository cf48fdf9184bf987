"""Compiled inner loops of the symmetric eigensolver.

Same algorithms as the reference implementations in ``linalg``; these
exist purely for speed (the per-band matrix logarithms dominate the
pipeline).  Every arithmetic constant is derived from the input arrays
so each instantiation computes entirely in that dtype; no fused
multiply-adds or reassociation are permitted, so results are
bit-identical to the numpy reference loop.  Kernels return an operation
tally instead of raising: a negative tally signals non-convergence.
"""

import numba
import numpy as np


@numba.njit(cache=True)
def tridiag_qr(d, e, q, tol, max_iter):
    """Implicit-Wilkinson-shift QR on (d, e); rotations applied to q rows.

    Mutates d, e, q in place.  Returns the number of Givens rotations,
    or -1 if a single eigenvalue exceeded ``max_iter`` sweeps.
    """
    n = d.shape[0]
    zero = d[0] * 0
    one = zero + 1
    two = one + one
    half = one / two
    nrot = 0
    hi = n - 1
    sweeps = 0
    while hi > 0:
        if abs(e[hi - 1]) <= tol * (abs(d[hi - 1]) + abs(d[hi])):
            e[hi - 1] = zero
            hi -= 1
            sweeps = 0
            continue
        lo = hi - 1
        while lo > 0 and abs(e[lo - 1]) > tol * (abs(d[lo - 1]) + abs(d[lo])):
            lo -= 1
        sweeps += 1
        if sweeps > max_iter:
            return -1

        delta = (d[hi - 1] - d[hi]) * half
        eh = e[hi - 1]
        sgn = one if delta >= zero else -one
        mu = d[hi] - sgn * eh * eh / (abs(delta) + np.sqrt(delta * delta + eh * eh))

        x = d[lo] - mu
        z = e[lo]
        for k in range(lo, hi):
            # givens coefficients, overflow-safe scaled form
            if x == zero and z == zero:
                c = one
                s = zero
                r = zero
            else:
                ax = abs(x)
                az = abs(z)
                scale = ax if ax >= az else az
                na = x / scale
                nb = z / scale
                r = scale * np.sqrt(na * na + nb * nb)
                c = x / r
                s = z / r
            if k > lo:
                e[k - 1] = r
            dk = d[k]
            dk1 = d[k + 1]
            ek = e[k]
            cc = c * c
            ss = s * s
            cs2 = two * c * s * ek
            d[k] = cc * dk + cs2 + ss * dk1
            d[k + 1] = ss * dk - cs2 + cc * dk1
            e[k] = (cc - ss) * ek + c * s * (dk1 - dk)
            if k < hi - 1:
                z = s * e[k + 1]
                e[k + 1] = c * e[k + 1]
            for j in range(n):
                qk = q[k, j]
                qk1 = q[k + 1, j]
                q[k, j] = c * qk + s * qk1
                q[k + 1, j] = -s * qk + c * qk1
            x = e[k]
            nrot += 1
    return nrot


@numba.njit(cache=True)
def householder_improved(A, qt):
    """Rank-2-update Householder tridiagonalization, in place.

    On return A's tridiagonal part holds the result and qt the
    accumulated transform (T = qt A0 qt^T).  Returns the multiply-add
    tally matching the reference implementation's accounting.
    """
    n = A.shape[0]
    zero = A[0, 0] * 0
    one = zero + 1
    two = one + one
    flops = 0
    v = np.empty(n, dtype=A.dtype)
    p = np.empty(n, dtype=A.dtype)
    w = np.empty(n, dtype=A.dtype)
    for k in range(n - 2):
        m = n - k - 1
        tail_zero = True
        for i in range(k + 2, n):
            if A[i, k] != zero:
                tail_zero = False
                break
        if tail_zero:
            continue
        # scaled norm of the column tail
        scale = zero
        for i in range(k + 1, n):
            ai = abs(A[i, k])
            if ai > scale:
                scale = ai
        norm2 = zero
        for i in range(k + 1, n):
            y = A[i, k] / scale
            norm2 += y * y
        norm = scale * np.sqrt(norm2)
        sign = one if A[k + 1, k] >= zero else -one
        for i in range(m):
            v[i] = A[k + 1 + i, k]
        v[0] += sign * norm
        h = zero
        for i in range(m):
            h += v[i] * v[i]
        h /= two
        beta = -sign * norm

        # p = A[k+1:, k+1:] @ v / h ; kappa = v.p / 2h ; w = p - kappa v
        for i in range(m):
            acc = zero
            for j in range(m):
                acc += A[k + 1 + i, k + 1 + j] * v[j]
            p[i] = acc / h
        kappa = zero
        for i in range(m):
            kappa += v[i] * p[i]
        kappa /= two * h
        for i in range(m):
            w[i] = p[i] - kappa * v[i]
        for i in range(m):
            for j in range(m):
                A[k + 1 + i, k + 1 + j] -= v[i] * w[j] + w[i] * v[j]
        for j in range(k + 1, n):
            A[k, j] = zero
            A[j, k] = zero
        A[k, k + 1] = beta
        A[k + 1, k] = beta
        # qt[k+1:, :] -= (v / h) outer (v @ qt[k+1:, :])
        for j in range(n):
            acc = zero
            for i in range(m):
                acc += v[i] * qt[k + 1 + i, j]
            p[j] = acc  # reuse as the projected row
        for i in range(m):
            vi = v[i] / h
            for j in range(n):
                qt[k + 1 + i, j] -= vi * p[j]
        flops += 3 * m * m + 2 * m * n + 4 * m
    return flops
