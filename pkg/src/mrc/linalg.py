"""Symmetric eigensolver and SPD matrix functions built on it.

The whitened covariance matrices classified by this package are dense
and symmetric, which allows a two-stage eigendecomposition:

  1. Householder reflections reduce the matrix to tridiagonal form
     (``T = Qt A Qt^T``).  Two variants are provided: a basic one that
     applies each reflector as a dense similarity product, and an
     improved one that uses the symmetric rank-2 update
     ``w = p - (v^T p / 2h) v;  A <- A - v w^T - w v^T``
     together with the sparsity of the reflectors, which lowers the
     operation count by an order of magnitude at typical sizes.

  2. QR iteration with an implicit Wilkinson shift diagonalizes the
     tridiagonal matrix.  The bulge chase uses Givens rotations whose
     coefficients are computed from multiplications, divisions,
     additions and one square root only (no trigonometric calls), in an
     overflow-safe scaled form.

Everything accepts a ``dtype`` switch: float64 is the reference mode,
float32 mimics the reduced-precision production path and is what the
quantized pipeline runs.  Matrix logarithm and inverse square root clip
eigenvalues at ``lambda_min`` before applying the scalar function, so
inputs that lost positive definiteness to quantization noise are
repaired rather than rejected.

All functions are pure; per-band calls may run concurrently and return
identical results regardless of scheduling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .counters import FlopCounter

try:  # compiled inner loops; the numpy path below is the fallback/reference
    from . import _kernels
except ImportError:  # pragma: no cover - numba not installed
    _kernels = None

__all__ = [
    "Tridiagonal",
    "EigenDecomposition",
    "ConvergenceError",
    "givens_coeffs",
    "householder_tridiagonalize_basic",
    "householder_tridiagonalize_improved",
    "qr_wilkinson",
    "symmetric_eig",
    "matrix_logarithm",
    "inv_sqrtm",
    "DEFLATE_TOL",
    "MAX_SWEEPS",
]

# Deflation threshold is relative to the neighbouring diagonal entries;
# the float32 value sits just below that format's epsilon.
DEFLATE_TOL = {np.dtype(np.float32): 1e-7, np.dtype(np.float64): 1e-12}
MAX_SWEEPS = 30


class ConvergenceError(RuntimeError):
    pass


@dataclass
class Tridiagonal:
    """Tridiagonal form of a symmetric matrix: ``T = qt @ A @ qt.T``."""

    diag: np.ndarray
    offdiag: np.ndarray
    qt: np.ndarray


@dataclass
class EigenDecomposition:
    """Eigenpairs of a symmetric matrix: ``A = q.T @ diag(w) @ q``.

    Rows of ``q`` are the eigenvectors; eigenvalues are in deflation
    order (unsorted).
    """

    eigenvalues: np.ndarray
    q: np.ndarray


def givens_coeffs(a, b):
    """Plane-rotation coefficients (c, s, r) zeroing b against a.

    Satisfies c^2 + s^2 = 1, c*a + s*b = r and -s*a + c*b = 0 with
    r >= 0.  The inputs are scaled by their max magnitude before the
    square root, so no intermediate can overflow.  (0, 0) -> (1, 0, 0).
    """
    if a == 0 and b == 0:
        zero = a * 0
        return zero + 1, zero, zero
    aa = abs(a)
    ab = abs(b)
    scale = aa if aa >= ab else ab
    na = a / scale
    nb = b / scale
    r = scale * np.sqrt(na * na + nb * nb)
    return a / r, b / r, r


def _make_reflector(x):
    """Householder vector v and half-norm h = v.v/2 for a column tail x.

    Returns (v, h, beta) where beta is the value the subdiagonal takes
    after reflection; (None, 0, x[0]) when the tail below the first
    entry is already zero and no reflection is needed.
    """
    if x.size == 0 or not np.any(x[1:]):
        return None, None, x[0] if x.size else None
    scale = np.max(np.abs(x))
    y = x / scale
    norm = scale * np.sqrt(y @ y)
    sign = x.dtype.type(1) if x[0] >= 0 else x.dtype.type(-1)
    v = x.copy()
    v[0] += sign * norm
    h = (v @ v) / 2
    return v, h, -sign * norm


def householder_tridiagonalize_basic(A, dtype=np.float64, ops: FlopCounter | None = None):
    """Tridiagonalize by applying each reflector as dense products.

    Column-by-column reflector construction; every step performs full
    n x n similarity and accumulator products, which keeps the code
    close to the defining algebra at an O(n^4) total cost.
    """
    A = np.array(A, dtype=dtype)
    _require_symmetric(A)
    n = A.shape[0]
    qt = np.eye(n, dtype=dtype)
    for k in range(n - 2):
        v, h, beta = _make_reflector(A[k + 1:, k])
        if v is None:
            continue
        H = np.eye(n, dtype=dtype)
        H[k + 1:, k + 1:] -= np.outer(v, v) / h
        A = H @ A @ H
        qt = H @ qt
        if ops is not None:
            m = n - k - 1
            ops.add(3 * n ** 3 + m * m + 2 * m)
    return Tridiagonal(A.diagonal().copy(), np.diagonal(A, 1).copy(), qt)


def householder_tridiagonalize_improved(A, dtype=np.float64, ops: FlopCounter | None = None,
                                        compiled: bool | None = None):
    """Tridiagonalize via symmetric rank-2 updates on the trailing block.

    Same contract as the basic variant; the reflector is never formed
    as a matrix and only the (n-k-1)-sized trailing block is touched,
    so the operation count drops to O(n^3).  ``compiled`` selects the
    jitted kernel (default: use it when available).
    """
    A = np.array(A, dtype=dtype)
    _require_symmetric(A)
    n = A.shape[0]
    qt = np.eye(n, dtype=dtype)
    if compiled is None:
        compiled = _kernels is not None
    if compiled:
        if _kernels is None:
            raise RuntimeError("compiled kernels unavailable")
        flops = _kernels.householder_improved(A, qt)
        if ops is not None:
            ops.add(flops)
        return Tridiagonal(A.diagonal().copy(), np.diagonal(A, 1).copy(), qt)
    for k in range(n - 2):
        v, h, beta = _make_reflector(A[k + 1:, k])
        if v is None:
            continue
        m = n - k - 1
        block = A[k + 1:, k + 1:]
        p = block @ v / h
        kappa = (v @ p) / (2 * h)
        w = p - kappa * v
        block -= np.outer(v, w) + np.outer(w, v)
        A[k, k + 1:] = 0
        A[k + 1:, k] = 0
        A[k, k + 1] = beta
        A[k + 1, k] = beta
        # reflector acts on rows k+1.. of the accumulator only
        qt[k + 1:, :] -= np.outer(v / h, v @ qt[k + 1:, :])
        if ops is not None:
            ops.add(3 * m * m + 2 * m * n + 4 * m)
    return Tridiagonal(A.diagonal().copy(), np.diagonal(A, 1).copy(), qt)


def _require_symmetric(A):
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("square matrix required")
    if not np.array_equal(A, A.T):
        raise ValueError("matrix is not exactly symmetric; symmetrize upstream")


def qr_wilkinson(tri: Tridiagonal, dtype=None,
                 deflate_tol: float | None = None,
                 max_iter: int = MAX_SWEEPS,
                 ops: FlopCounter | None = None,
                 compiled: bool | None = None) -> EigenDecomposition:
    """Diagonalize a symmetric tridiagonal matrix by implicit-shift QR.

    The Wilkinson shift is taken from the trailing 2x2 block of the
    active window; when its discriminant term is zero the shift closer
    to the last diagonal entry with positive sign convention is used.
    An offdiagonal entry deflates when it is at most ``deflate_tol``
    times the sum of magnitudes of its diagonal neighbours.  Raises
    ConvergenceError after ``max_iter`` sweeps on a single eigenvalue.
    """
    if dtype is None:
        dtype = tri.diag.dtype
    dtype = np.dtype(dtype)
    if deflate_tol is None:
        deflate_tol = DEFLATE_TOL[dtype]
    tol = dtype.type(deflate_tol)
    d = np.array(tri.diag, dtype=dtype)
    e = np.array(tri.offdiag, dtype=dtype)
    q = np.array(tri.qt, dtype=dtype)
    n = d.size
    if compiled is None:
        compiled = _kernels is not None
    if compiled and n > 1:
        if _kernels is None:
            raise RuntimeError("compiled kernels unavailable")
        nrot = _kernels.tridiag_qr(d, e, q, tol, max_iter)
        if nrot < 0:
            raise ConvergenceError("QR failed to converge")
        if ops is not None:
            ops.add(nrot * (4 * n + 24))
        return EigenDecomposition(d, q)
    one = dtype.type(1)
    two = dtype.type(2)

    hi = n - 1
    sweeps = 0
    while hi > 0:
        if abs(e[hi - 1]) <= tol * (abs(d[hi - 1]) + abs(d[hi])):
            e[hi - 1] = 0
            hi -= 1
            sweeps = 0
            continue
        lo = hi - 1
        while lo > 0 and abs(e[lo - 1]) > tol * (abs(d[lo - 1]) + abs(d[lo])):
            lo -= 1
        sweeps += 1
        if sweeps > max_iter:
            raise ConvergenceError("QR failed to converge")

        # Wilkinson shift from the trailing 2x2 of the active block.
        delta = (d[hi - 1] - d[hi]) / two
        eh = e[hi - 1]
        sgn = one if delta >= 0 else -one
        mu = d[hi] - sgn * eh * eh / (abs(delta) + np.sqrt(delta * delta + eh * eh))

        # Bulge chase over the block [lo, hi].
        x = d[lo] - mu
        z = e[lo]
        for k in range(lo, hi):
            c, s, r = givens_coeffs(x, z)
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
            rowk = c * q[k] + s * q[k + 1]
            q[k + 1] = -s * q[k] + c * q[k + 1]
            q[k] = rowk
            x = e[k]
            if ops is not None:
                ops.add(4 * n + 24)
    return EigenDecomposition(d, q)


def symmetric_eig(A, dtype=np.float64, improved: bool = True,
                  ops: FlopCounter | None = None,
                  compiled: bool | None = None) -> EigenDecomposition:
    """Full symmetric EVD: tridiagonalize, then implicit-shift QR."""
    if improved:
        tri = householder_tridiagonalize_improved(A, dtype=dtype, ops=ops,
                                                  compiled=compiled)
    else:
        tri = householder_tridiagonalize_basic(A, dtype=dtype, ops=ops)
    return qr_wilkinson(tri, dtype=dtype, ops=ops, compiled=compiled)


def _spd_function(W, fn, lambda_min, dtype, ops, improved=True):
    dec = symmetric_eig(W, dtype=dtype, improved=improved, ops=ops)
    dtype = np.dtype(dtype)
    vals = np.maximum(dec.eigenvalues, dtype.type(lambda_min))
    fvals = fn(vals).astype(dtype, copy=False)
    L = (dec.q.T * fvals) @ dec.q
    if ops is not None:
        n = L.shape[0]
        ops.add(n ** 3 + 2 * n * n + n)
    return (L + L.T) / 2


def matrix_logarithm(W, lambda_min: float = 1e-3, dtype=np.float64,
                     ops: FlopCounter | None = None):
    """Log of a symmetric matrix through its EVD, eigenvalues clipped.

    Eigenvalues are raised to at least ``lambda_min`` before taking the
    log, so near-singular or slightly indefinite inputs (as produced by
    the quantized whitening) always yield a real result.  The output is
    exactly symmetric.
    """
    return _spd_function(W, np.log, lambda_min, dtype, ops)


def _inv_sqrt(vals):
    return 1.0 / np.sqrt(vals)


def inv_sqrtm(C, lambda_min: float = 1e-3, dtype=np.float64,
              ops: FlopCounter | None = None):
    """Inverse matrix square root via the same clipped EVD route."""
    return _spd_function(C, _inv_sqrt, lambda_min, dtype, ops)
