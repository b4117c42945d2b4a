"""Small dense linear-algebra helpers shared across modules."""

import numpy as np

EIG_FLOOR = 1e-9
COND_LIMIT = 1e12


def herm(a):
    """Return the Hermitian part (A + A^H)/2 of the trailing two axes."""
    return 0.5 * (a + np.conj(np.swapaxes(a, -1, -2)))


def ct(a):
    """Conjugate transpose over the trailing two axes."""
    return np.conj(np.swapaxes(a, -1, -2))


def psd_sqrt(a, tol=1e-10):
    """Hermitian square root of a Hermitian PSD matrix.

    Small negative eigenvalues down to -tol * max|eig| are clipped to zero.
    """
    a = herm(np.asarray(a))
    vals, vecs = np.linalg.eigh(a)
    scale = max(np.max(np.abs(vals)), 1e-300)
    if vals.min() < -tol * scale:
        raise np.linalg.LinAlgError("matrix is not positive semidefinite")
    vals = np.clip(vals, 0.0, None)
    out = (vecs * np.sqrt(vals)) @ ct(vecs)
    return out.real if np.isrealobj(a) else out


def spd_sqrt_pair(a, floor=EIG_FLOOR):
    """Square root and inverse square root of a real symmetric PD matrix.

    Every eigenvalue must exceed floor * max eigenvalue.

    Returns:
        (a^{1/2}, a^{-1/2}) as real arrays.
    """
    a = 0.5 * (a + a.T)
    vals, vecs = np.linalg.eigh(a)
    if vals.max() <= 0 or vals.min() <= floor * vals.max():
        raise np.linalg.LinAlgError("matrix is not positive definite")
    root = np.sqrt(vals)
    s, si = (vecs * root) @ vecs.T, (vecs / root) @ vecs.T
    return 0.5 * (s + s.T), 0.5 * (si + si.T)


def checked_solve(a, b, what="singular system"):
    """Solve a x = b, raising when a is numerically singular."""
    if np.linalg.cond(a) > COND_LIMIT:
        raise np.linalg.LinAlgError(what)
    return np.linalg.solve(a, b)


def rel_err(a, b):
    """Relative Frobenius error between two arrays, safe at zero."""
    a = np.asarray(a)
    b = np.asarray(b)
    den = max(np.linalg.norm(b), np.linalg.norm(a), 1e-300)
    return float(np.linalg.norm(a - b) / den)
