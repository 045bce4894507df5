"""Compiled helpers for symmetric banded generalized eigenproblems.

Storage convention: ``bands[k, i] = A[i, i + k]`` for ``k = 0..b`` (upper
diagonals, left aligned, unused tail entries ignored).
"""

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def inertia(bands, w, sigma):
    """Number of negative pivots of ``A - sigma diag(w)`` (banded LDL^T).

    By Sylvester's law this is the number of generalized eigenvalues of the
    pencil ``(A, diag(w))`` below ``sigma`` when ``w > 0``. No pivoting is
    used; an exactly zero pivot is nudged to the smallest positive double.
    """
    b = bands.shape[0] - 1
    n = bands.shape[1]
    lb = np.zeros((b + 1, n))  # lb[k, p] = L[p + k, p]
    d = np.zeros(n)
    count = 0
    for j in range(n):
        s = bands[0, j] - sigma * w[j]
        for k in range(1, b + 1):
            p = j - k
            if p < 0:
                break
            s -= lb[k, p] * lb[k, p] * d[p]
        if s == 0.0:
            s = 1e-300
        d[j] = s
        if s < 0.0:
            count += 1
        for k in range(1, b + 1):
            i = j + k
            if i >= n:
                break
            t = bands[k, j]
            # subtract sum_p L[i,p] D[p] L[j,p] over p in [i-b, j-1]
            for p in range(max(0, i - b), j):
                t -= lb[i - p, p] * d[p] * lb[j - p, p]
            lb[k, j] = t / s
    return count


@njit(cache=True, nogil=True)
def bisect_eigenvalue(bands, w, index, lo, hi, rtol, atol, max_iter):
    """Eigenvalue number ``index`` (0-based, ascending) inside ``[lo, hi]``.

    Requires ``inertia(lo) <= index < inertia(hi)``.
    """
    it = 0
    while it < max_iter:
        mid = 0.5 * (lo + hi)
        if inertia(bands, w, mid) > index:
            hi = mid
        else:
            lo = mid
        if hi - lo <= rtol * max(abs(lo), abs(hi)) + atol:
            break
        it += 1
    return 0.5 * (lo + hi), it


@njit(cache=True, nogil=True)
def banded_matvec(bands, v):
    b = bands.shape[0] - 1
    n = bands.shape[1]
    out = bands[0] * v
    for k in range(1, b + 1):
        for i in range(n - k):
            out[i] += bands[k, i] * v[i + k]
            out[i + k] += bands[k, i] * v[i]
    return out
