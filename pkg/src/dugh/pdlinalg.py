"""Dense symmetric positive-definite matrix utilities.

All routines take plain ``numpy`` arrays and return new arrays; nothing is
modified in place. Matrices that are nominally symmetric on output are
symmetrized as ``(R + R.T) / 2``.
"""
import numpy as np
import scipy.linalg as sla
from scipy.linalg import lapack

JITTER = 1e-10
SYM_TOL = 1e-10


class NotSymmetricError(ValueError):
    pass


class SingularMatrixError(np.linalg.LinAlgError):
    pass


def symmetrize(a):
    return 0.5 * (a + a.T)


def _check_square(a, name="matrix"):
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be square, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite entries")
    return a


def check_symmetric(a, name="matrix"):
    """Return ``a`` as a float array, raising if it is not symmetric.

    The tolerance is absolute (``SYM_TOL``) for entries of order one and
    scales with the largest entry magnitude otherwise.
    """
    a = _check_square(a, name)
    scale = max(1.0, float(np.max(np.abs(a))) if a.size else 1.0)
    if a.size and np.max(np.abs(a - a.T)) > SYM_TOL * scale:
        raise NotSymmetricError(f"{name} is not symmetric")
    return a


def jitter_level(a, eps=JITTER):
    """Diagonal loading used when ``a`` is close to singular."""
    dim = a.shape[0]
    mean_diag = np.trace(a) / dim
    return eps * mean_diag if mean_diag > 0 else eps


def _eigh_desc(a):
    w, v = np.linalg.eigh(a)
    order = np.argsort(-w, kind="stable")  # ties keep LAPACK's order
    return w[order], v[:, order]


def _jittered_eigh(a, eps=JITTER):
    # Load the diagonal only when the spectrum falls below the jitter level.
    w, v = _eigh_desc(a)
    level = jitter_level(a, eps)
    if w[-1] < level:
        w = w + level
    if w[-1] <= 0:
        raise SingularMatrixError(
            f"matrix is not positive definite (min eigenvalue {w[-1]:.3e} after jitter)"
        )
    return w, v


def sym_eig(a):
    """Eigendecomposition of a symmetric matrix.

    Parameters
    ----------
    a : ndarray, shape (n, n)
        Symmetric matrix.

    Returns
    -------
    eigvecs : ndarray, shape (n, n)
        Orthonormal eigenvectors stored column-wise.
    eigvals : ndarray, shape (n,)
        Eigenvalues sorted in descending order.
    """
    a = symmetrize(check_symmetric(a))
    w, v = _eigh_desc(a)
    return v, w


def pd_sqrt(a):
    """Principal square root of a positive-definite matrix."""
    a = symmetrize(check_symmetric(a))
    w, v = _jittered_eigh(a)
    return symmetrize((v * np.sqrt(w)) @ v.T)


def pd_inv_sqrt(a):
    a = symmetrize(check_symmetric(a))
    w, v = _jittered_eigh(a)
    return symmetrize((v / np.sqrt(w)) @ v.T)


def geometric_mean(a, m):
    """Midpoint of the affine-invariant geodesic from ``a`` to ``m``.

    Computes ``a^{1/2} (a^{-1/2} m a^{-1/2})^{1/2} a^{1/2}``, the unique
    positive-definite solution ``G`` of ``G a^{-1} G = m``.
    """
    a = symmetrize(check_symmetric(a, "a"))
    m = symmetrize(check_symmetric(m, "m"))
    if a.shape != m.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {m.shape}")
    w, v = _jittered_eigh(a)
    a_half = (v * np.sqrt(w)) @ v.T
    a_ihalf = (v / np.sqrt(w)) @ v.T
    inner = symmetrize(a_ihalf @ m @ a_ihalf)
    # m may be PSD but rank deficient (fewer samples than dimensions); round-off
    # then leaves slightly negative eigenvalues, which are clipped to the
    # jitter level rather than treated as an indefinite input.
    wi, vi = _eigh_desc(inner)
    wi = np.maximum(wi, jitter_level(inner))
    inner_half = (vi * np.sqrt(wi)) @ vi.T
    return symmetrize(a_half @ inner_half @ a_half)


def _cholesky(a):
    try:
        return sla.cho_factor(a, lower=True, check_finite=False)
    except np.linalg.LinAlgError:
        pass
    loaded = a + jitter_level(a) * np.eye(a.shape[0])
    try:
        return sla.cho_factor(loaded, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError("matrix is singular beyond jitter repair") from exc


def pd_factor(a):
    """Cholesky factor (``scipy.linalg.cho_factor`` tuple) with jitter fallback."""
    a = symmetrize(check_symmetric(a))
    w_min = np.linalg.eigvalsh(a)[0]
    if w_min < jitter_level(a):
        a = a + jitter_level(a) * np.eye(a.shape[0])
    return _cholesky(a)


def pd_solve(a, b):
    """Solve ``a x = b`` for positive-definite ``a``."""
    return sla.cho_solve(pd_factor(a), np.asarray(b, dtype=float), check_finite=False)


def safe_inverse(a):
    """Inverse of a symmetric positive-definite matrix.

    A diagonal load of ``1e-10 * trace(a) / n`` is added first when the
    smallest eigenvalue is below that level. Raises
    :class:`SingularMatrixError` when even the loaded matrix has no
    Cholesky factor.
    """
    c, lower = pd_factor(a)
    # LAPACK potri forms the inverse from the factor in one symmetric pass;
    # it keeps ||A A^-1 - I|| smaller than solving against I and symmetrizing.
    inv, info = lapack.dpotri(c, lower=lower)
    if info != 0:
        raise SingularMatrixError(f"potri failed with info={info}")
    tri = np.tril(inv) if lower else np.triu(inv)
    return tri + (np.tril(inv, -1).T if lower else np.triu(inv, 1).T)


def pd_logdet(a):
    c, _ = pd_factor(a)
    return 2.0 * float(np.sum(np.log(np.diag(c))))
