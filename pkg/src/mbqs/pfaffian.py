"""Pfaffian of a skew-symmetric matrix.

Parlett-Reid style reduction: the matrix is brought to skew tridiagonal form
by Gauss transformations with pivoting, after which the Pfaffian is the
product of every other superdiagonal entry. Cost is O(n^3).
"""

import numpy as np

from .errors import PfaffianError


def pfaffian(A, atol=1e-10):
    """Return the Pfaffian of the antisymmetric matrix ``A``.

    Parameters
    ----------
    A : array_like, shape (n, n)
        Real or complex antisymmetric matrix. ``n`` must be even.
    atol : float
        Tolerance on ``max|A + A.T|`` relative to ``max(1, max|A|)``.

    Returns
    -------
    complex or float
        Pf(A). The empty matrix has Pfaffian 1.
    """
    A = np.array(A, copy=True)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    n = A.shape[0]
    if n % 2:
        raise ValueError(f"Pfaffian needs an even dimension, got {n}")
    if n == 0:
        return A.dtype.type(1.0) if A.dtype.kind in "fc" else 1.0
    if not np.issubdtype(A.dtype, np.inexact):
        A = A.astype(float)

    if not np.all(np.isfinite(A)):
        raise PfaffianError("matrix has non-finite entries (condition number undefined)")
    scale = max(1.0, float(np.max(np.abs(A))))
    asym = float(np.max(np.abs(A + A.T)))
    if asym > atol * scale:
        raise ValueError(f"matrix is not antisymmetric (max|A+A^T| = {asym:.3e})")

    pf = A.dtype.type(1.0)
    for k in range(0, n - 1, 2):
        # bring the largest entry of column k (below row k) to row k+1
        kp = k + 1 + int(np.argmax(np.abs(A[k + 1:, k])))
        if kp != k + 1:
            A[[k + 1, kp], :] = A[[kp, k + 1], :]
            A[:, [k + 1, kp]] = A[:, [kp, k + 1]]
            pf = -pf

        pivot = A[k + 1, k]
        if pivot == 0.0:
            return A.dtype.type(0.0)
        pf *= A[k, k + 1]

        if k + 2 < n:
            tau = A[k, k + 2:] / A[k, k + 1]
            # skew rank-2 update of the trailing block
            A[k + 2:, k + 2:] += np.outer(tau, A[k + 2:, k + 1])
            A[k + 2:, k + 2:] -= np.outer(A[k + 2:, k + 1], tau)

    if not np.isfinite(pf):
        cond = np.linalg.cond(np.asarray(A))
        raise PfaffianError(f"non-finite Pfaffian (condition number ~ {cond:.3e})")
    return pf
