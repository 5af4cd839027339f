"""Geometry of the manifold of N x d matrices with orthogonal nonzero columns.

Unlike the Stiefel manifold the columns are not normalised: a point is any
``X`` with ``X^T X`` diagonal and positive.  The normal space at ``X`` is
``{X L : L symmetric with zero diagonal}``; tangent vectors satisfy
``offdiag(zeta^T X + X^T zeta) = 0``.  The retraction is the orthogonal factor
of the modified QR decomposition.
"""

import numpy as np

from .exceptions import ManifoldError, RankDeficiencyError, RetractionError
from .linalg import modified_qr

MEMBERSHIP_TOL = 1e-9
ZERO_COLUMN_TOL = 1e-12


def _offdiag(S):
    return S - np.diag(np.diag(S))


def constraint_violation(X):
    """Largest off-diagonal Gram entry relative to ``||X||_F^2``."""
    X = np.asarray(X, dtype=float)
    G = X.T @ X
    scale = float(np.trace(G))
    if scale == 0:
        return np.inf
    return float(np.abs(_offdiag(G)).max(initial=0.0)) / scale


def is_on_manifold(X, tol=MEMBERSHIP_TOL):
    """True iff ``X`` has no zero column and ``X^T X`` is diagonal to ``tol``."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] > X.shape[0]:
        return False
    if np.any(np.linalg.norm(X, axis=0) <= ZERO_COLUMN_TOL):
        return False
    return constraint_violation(X) <= tol


def _check_point(X):
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or np.any(np.linalg.norm(X, axis=0) <= ZERO_COLUMN_TOL):
        raise ManifoldError("base point has a zero column")
    return X


def symmetrize_hollow(S):
    """``(S + S^T)/2 - diag(S)``: the symmetric zero-diagonal part used by the projection."""
    return 0.5 * (S + S.T) - np.diag(np.diag(S))


def normal_coefficients(X, Z):
    """Symmetric hollow ``L`` with ``project_normal(X, Z) == X @ L``.

    With ``D = (X^T X)^(1/2)`` (diagonal), ``E_ij = D_jj^2 + D_ii^2`` and
    ``F = 1/E`` entrywise, ``L = s(2 D ((D^-1 X^T Z) o F))``.
    """
    X = _check_point(X)
    dsq = np.sum(X * X, axis=0)
    dvec = np.sqrt(dsq)
    F = 1.0 / (dsq[None, :] + dsq[:, None])
    L = ((X.T @ Z) / dvec[:, None]) * F
    return symmetrize_hollow(2.0 * dvec[:, None] * L)


def project_normal(X, Z):
    """Orthogonal projection of ``Z`` onto the normal space at ``X``."""
    X = _check_point(X)
    return X @ normal_coefficients(X, Z)


def project_tangent(X, Z):
    """Orthogonal projection of ``Z`` onto the tangent space at ``X``."""
    return Z - project_normal(X, Z)


def riemannian_grad(X, euclid_grad):
    """Riemannian gradient under the induced trace metric: the tangent projection."""
    return project_tangent(X, euclid_grad)


def tangent_violation(X, zeta):
    """Largest off-diagonal entry of ``zeta^T X + X^T zeta``."""
    S = zeta.T @ X
    return float(np.abs(_offdiag(S + S.T)).max(initial=0.0))


def retract(X, zeta):
    """Retraction ``qf~(X + zeta)``, the modified-QR orthogonal factor.

    A zero step returns ``X`` unchanged.

    Raises
    ------
    RetractionError
        If ``X + zeta`` is rank deficient; callers should shrink the step.
    """
    X = np.asarray(X, dtype=float)
    if not np.any(zeta):
        return X.copy()
    try:
        return modified_qr(X + zeta).Q
    except RankDeficiencyError as exc:
        raise RetractionError(str(exc)) from None


def to_manifold(Z):
    """Map a full-rank matrix onto the manifold (modified-QR orthogonal factor)."""
    return modified_qr(Z).Q


def constraint_operator(X):
    """Matrix of the linear map ``zeta -> offdiag(zeta^T X + X^T zeta)``.

    Rows index the ``d(d-1)/2`` strictly upper-triangular entries, columns the
    entries of ``zeta`` in C order.  Its null space is the tangent space.
    """
    X = np.asarray(X, dtype=float)
    n, d = X.shape
    iu, ju = np.triu_indices(d, 1)
    C = np.zeros((iu.size, n * d))
    for col in range(n * d):
        E = np.zeros(n * d)
        E[col] = 1.0
        E = E.reshape(n, d)
        S = E.T @ X
        C[:, col] = (S + S.T)[iu, ju]
    return C


def tangent_space_dimension(X, rtol=1e-10):
    """Numerical dimension of the tangent space at ``X`` (nullity of the constraint map)."""
    C = constraint_operator(X)
    s = np.linalg.svd(C, compute_uv=False)
    rank = int(np.sum(s > rtol * max(1.0, s.max(initial=0.0))))
    return C.shape[1] - rank


def manifold_dimension(n, d):
    return n * d - d * (d - 1) // 2
