"""Dense linear-algebra kernels shared by the solvers.

Spectral decompositions with a deterministic sign convention, the modified
QR decomposition (orthogonal but not normalised Q), small SPD solves and
orthogonal Procrustes alignment.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .exceptions import ContractError, InvalidSizeError, RankDeficiencyError, SingularSystemError

#: Relative tolerance on |R_ii| below which modified_qr declares rank deficiency.
QR_RANK_TOL = 1e-12


@dataclass
class SpectralPair:
    """Leading spectral components.

    ``vectors`` holds eigenvectors or left singular vectors; ``right`` is only
    set for SVDs.
    """

    values: np.ndarray
    vectors: np.ndarray
    right: np.ndarray = None


@dataclass
class ModifiedQr:
    """``Z = Q @ R`` with ``Q`` having orthogonal columns and ``diag(R) == 1``."""

    Q: np.ndarray
    R: np.ndarray


def _sign_flips(V):
    """+1/-1 per column so the largest-magnitude entry of each column is positive."""
    if V.shape[0] == 0:
        return np.ones(V.shape[1])
    idx = np.argmax(np.abs(V), axis=0)
    signs = np.sign(V[idx, np.arange(V.shape[1])])
    signs[signs == 0] = 1.0
    return signs


def _check_dim(n, d):
    if not 1 <= d <= n:
        raise InvalidSizeError(f"need 1 <= d <= N, got d={d}, N={n}")


def is_symmetric(A, rtol=1e-10):
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        return False
    scale = max(1.0, float(np.abs(A).max(initial=0.0)))
    return bool(np.abs(A - A.T).max(initial=0.0) <= rtol * scale)


def top_eigen(A, d, order="magnitude"):
    """Leading ``d`` eigenpairs of a symmetric matrix.

    Parameters
    ----------
    A : ndarray of shape (n, n)
        Symmetric matrix.
    d : int
        Number of eigenpairs, ``1 <= d <= n``.
    order : {"magnitude", "algebraic"}
        Rank eigenvalues by absolute value or by signed value (largest first).

    Returns
    -------
    SpectralPair
        Eigenvectors have their largest-magnitude entry positive.
    """
    A = np.asarray(A, dtype=float)
    if not is_symmetric(A):
        raise ContractError("top_eigen requires a symmetric matrix")
    n = A.shape[0]
    _check_dim(n, d)
    if order == "algebraic":
        w, V = scipy.linalg.eigh(A, subset_by_index=[n - d, n - 1])
        keep = np.argsort(-w, kind="stable")
    elif order == "magnitude":
        if 2 * d >= n:
            w, V = scipy.linalg.eigh(A)
        else:
            w_lo, V_lo = scipy.linalg.eigh(A, subset_by_index=[0, d - 1])
            w_hi, V_hi = scipy.linalg.eigh(A, subset_by_index=[n - d, n - 1])
            w = np.concatenate([w_lo, w_hi])
            V = np.hstack([V_lo, V_hi])
        # ties in magnitude favour the positive eigenvalue
        keep = np.lexsort((-w, -np.abs(w)))[:d]
    else:
        raise ValueError(f"unknown eigenvalue order {order!r}")
    w = w[keep][:d]
    V = V[:, keep][:, :d]
    V = V * _sign_flips(V)
    return SpectralPair(values=w, vectors=V)


def top_svd(A, d):
    """Leading ``d`` singular triplets.

    The sign convention of :func:`top_eigen` is applied to the left vectors
    and the right vectors are flipped along with them, so ``A ~ U S V^T`` is
    preserved.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2:
        raise InvalidSizeError("top_svd expects a matrix")
    _check_dim(min(A.shape), d)
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    U, s, V = U[:, :d], s[:d], Vt[:d].T
    flips = _sign_flips(U)
    return SpectralPair(values=s, vectors=U * flips, right=V * flips)


def modified_qr(Z):
    """Modified QR: ``Z = Q~ R~`` with orthogonal ``Q~`` and unit-diagonal ``R~``.

    Computed from the Householder QR ``Z = Q R`` as ``Q~ = Q diag(R)`` and
    ``R~ = diag(R)^-1 R``, which moves the column normalisation into the
    orthogonal factor.  The decomposition is unique for full column rank.

    Raises
    ------
    RankDeficiencyError
        If some ``|R_ii| < 1e-12 * ||Z||_F``.
    """
    Z = np.asarray(Z, dtype=float)
    if Z.ndim != 2 or Z.shape[1] > Z.shape[0]:
        raise InvalidSizeError(f"modified_qr needs a tall matrix, got shape {Z.shape}")
    Q, R = np.linalg.qr(Z)
    r = np.diag(R).copy()
    scale = np.linalg.norm(Z)
    if scale == 0 or np.any(np.abs(r) < QR_RANK_TOL * scale):
        raise RankDeficiencyError("matrix does not have full column rank")
    Rt = R / r[:, None]
    np.fill_diagonal(Rt, 1.0)
    return ModifiedQr(Q=Q * r, R=Rt)


def procrustes_distance(X, Y):
    """Squared distance ``min_W ||X W - Y||_F^2`` over orthonormal ``W``.

    Returns
    -------
    dist2 : float
    W : ndarray of shape (d, d)
        The minimiser ``U V^T`` where ``X^T Y = U S V^T``.
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if X.shape != Y.shape:
        raise InvalidSizeError(f"shape mismatch: {X.shape} vs {Y.shape}")
    U, _, Vt = np.linalg.svd(X.T @ Y)
    W = U @ Vt
    dist2 = float(np.sum((X @ W - Y) ** 2))
    return max(dist2, 0.0), W


def solve_spd(R, b):
    """Solve ``R x = b`` for symmetric positive definite ``R`` via Cholesky.

    Raises
    ------
    SingularSystemError
        If the Cholesky factorisation hits a nonpositive pivot.
    """
    try:
        c = scipy.linalg.cho_factor(R, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(f"system matrix is not positive definite: {exc}") from None
    x = scipy.linalg.cho_solve(c, b, check_finite=False)
    if not np.all(np.isfinite(x)):
        raise SingularSystemError("system matrix is numerically singular")
    return x


def solve_spd_ridge(R, b, ridge=1e-8):
    """:func:`solve_spd` with a relative ridge fallback.

    Returns ``(x, used_ridge)``.  The ridge added on failure is
    ``ridge * trace(R) / d``.
    """
    try:
        return solve_spd(R, b), False
    except SingularSystemError:
        d = R.shape[0]
        tr = np.trace(R)
        lam = ridge * (tr / d if tr > 0 else 1.0)
        return solve_spd(R + lam * np.eye(d), b), True
