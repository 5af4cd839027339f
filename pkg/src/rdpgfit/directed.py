"""Embedding directed graphs with orthogonality-constrained factors.

Each node gets an outgoing (left) and an incoming (right) position.  The
factors are kept on the manifold of matrices with orthogonal columns during
Riemannian gradient descent, and their column norms are equalised once at
the end so that ``Xl^T Xl == Xr^T Xr`` is diagonal.
"""

from dataclasses import dataclass

import numpy as np
import scipy.optimize

from .exceptions import (
    ContractError,
    DegenerateColumnError,
    DimensionError,
    InvalidConfigError,
    InvalidSizeError,
    RetractionError,
    SingularSystemError,
)
from .graph import as_rng
from .linalg import top_svd
from .manifold import constraint_violation, is_on_manifold, project_tangent, retract, to_manifold
from .undirected import SolveReport


@dataclass
class DirectedEmbedding:
    Xl: np.ndarray
    Xr: np.ndarray
    node_ids: list = None

    def __post_init__(self):
        self.Xl = np.asarray(self.Xl, dtype=float)
        self.Xr = np.asarray(self.Xr, dtype=float)
        if self.Xl.shape != self.Xr.shape or self.Xl.ndim != 2:
            raise InvalidSizeError(f"factor shapes differ: {self.Xl.shape} vs {self.Xr.shape}")
        if self.node_ids is None:
            self.node_ids = [str(i) for i in range(self.Xl.shape[0])]
        if len(self.node_ids) != self.Xl.shape[0]:
            raise InvalidSizeError("node-id table length does not match embedding rows")

    @property
    def n(self):
        return self.Xl.shape[0]

    @property
    def d(self):
        return self.Xl.shape[1]


@dataclass
class ArmijoConfig:
    """Backtracking line search: try ``initial_step``, shrink by ``beta``."""

    initial_step: float = 1.0
    beta: float = 0.5
    c: float = 1e-4
    max_backtracks: int = 30

    def __post_init__(self):
        if self.initial_step <= 0:
            raise InvalidConfigError("initial step must be positive")
        if not 0 < self.beta < 1 or not 0 < self.c < 1:
            raise InvalidConfigError("Armijo beta and c must lie in (0, 1)")
        if self.max_backtracks < 0:
            raise InvalidConfigError("max_backtracks must be nonnegative")


def _check_shapes(A, M, Xl, Xr):
    n = A.shape[0]
    if A.shape != (n, n) or M.shape != (n, n) or Xl.shape != Xr.shape or Xl.shape[0] != n:
        raise InvalidSizeError(
            f"inconsistent shapes: A {A.shape}, M {M.shape}, Xl {Xl.shape}, Xr {Xr.shape}"
        )


def cost_directed(A, M, Xl, Xr):
    """``||M o (A - Xl Xr^T)||_F^2``."""
    _check_shapes(A, M, Xl, Xr)
    R = M * (A - Xl @ Xr.T)
    return float(np.sum(R * R))


def grad_directed(A, M, Xl, Xr):
    """Euclidean gradients of :func:`cost_directed` with respect to each factor.

    ``Gl = 2 [M o (Xl Xr^T - A)] Xr`` and ``Gr = 2 [M o (Xl Xr^T - A)]^T Xl``.
    """
    _check_shapes(A, M, Xl, Xr)
    E = 2.0 * (M * (Xl @ Xr.T - A))
    return E @ Xr, E.T @ Xl


def ase_directed(A, d, node_ids=None):
    """Directed ASE: ``Xl = U sqrt(S)``, ``Xr = V sqrt(S)`` from the top-d SVD."""
    pair = top_svd(A, d)
    if pair.values[-1] <= 0:
        usable = int(np.sum(pair.values > 0))
        raise DimensionError(f"only {usable} nonzero singular values for d={d}", usable=usable)
    root = np.sqrt(pair.values)
    return DirectedEmbedding(pair.vectors * root, pair.right * root, node_ids)


def rescale_columns(Xl, Xr, node_ids=None):
    """Equalise matching column norms without changing ``Xl Xr^T``.

    With ``s_i = ||xl_i|| / ||xr_i||`` the columns become ``xl_i / sqrt(s_i)``
    and ``xr_i * sqrt(s_i)``.
    """
    nl = np.linalg.norm(Xl, axis=0)
    nr = np.linalg.norm(Xr, axis=0)
    if np.any(nl == 0) or np.any(nr == 0):
        raise DegenerateColumnError("cannot rescale a factor with a zero column")
    root = np.sqrt(nl / nr)
    return DirectedEmbedding(Xl / root, Xr * root, node_ids)


def pair_constraint_violation(Xl, Xr):
    """Relative violation of "Gram matrices diagonal and equal".

    Returns the largest of the off-diagonal Gram entries and the diagonal
    mismatch, divided by the larger Gram trace.
    """
    Gl = Xl.T @ Xl
    Gr = Xr.T @ Xr
    scale = max(np.trace(Gl), np.trace(Gr))
    if scale == 0:
        return 0.0
    off = max(
        np.abs(Gl - np.diag(np.diag(Gl))).max(initial=0.0),
        np.abs(Gr - np.diag(np.diag(Gr))).max(initial=0.0),
    )
    mismatch = np.abs(np.diag(Gl) - np.diag(Gr)).max(initial=0.0)
    return float(max(off, mismatch) / scale)


def max_offdiag_gram(Xl, Xr):
    """Largest absolute off-diagonal entry of either factor's Gram matrix."""
    out = 0.0
    for X in (Xl, Xr):
        G = X.T @ X
        out = max(out, float(np.abs(G - np.diag(np.diag(G))).max(initial=0.0)))
    return out


def verify_ambiguity_reduction(Xl, Xr, T, tol=1e-6):
    """Is ``T`` an admissible change of basis for a constrained pair?

    Applies ``(Xl T, Xr T^-T)``, which leaves ``Xl Xr^T`` unchanged, and checks
    that the two Gram matrices are still equal.  For a pair with
    ``Xl^T Xl == Xr^T Xr == D`` diagonal and positive this holds exactly when
    ``T`` is orthonormal: equality means ``S D S = D`` with ``S = T T^T``
    SPD, whose only solution is ``S = I``.  Diagonality itself is kept only
    by signed permutations when ``D`` has distinct entries, so it is not part
    of the test.

    Raises
    ------
    ContractError
        If the input pair does not satisfy the constraint to ``tol``.
    SingularSystemError
        If ``T`` is (numerically) singular.
    """
    if pair_constraint_violation(Xl, Xr) > tol:
        raise ContractError("input pair does not have equal diagonal Gram matrices")
    T = np.asarray(T, dtype=float)
    if np.linalg.cond(T) > 1e12:
        raise SingularSystemError("transformation T is singular")
    Yl = Xl @ T
    Yr = Xr @ np.linalg.inv(T).T
    Gl = Yl.T @ Yl
    Gr = Yr.T @ Yr
    scale = max(np.trace(Gl), np.trace(Gr))
    return bool(np.abs(Gl - Gr).max() <= tol * scale)


def orthogonalize_pair(Xl, Xr, reference=None):
    """Re-orthogonalise a factor pair without changing ``Xl Xr^T``.

    Returns factors with orthogonal, equal-norm columns spanning the same
    rank-d product (via QR of each factor and an SVD of the small core).
    Columns are permuted and sign-flipped to best match ``reference`` (a pair;
    defaults to the input), so warm starts keep their orientation.
    """
    Ql, Rl = np.linalg.qr(Xl)
    Qr, Rr = np.linalg.qr(Xr)
    U, s, Vt = np.linalg.svd(Rl @ Rr.T)
    root = np.sqrt(s)
    Yl = Ql @ U * root
    Yr = Qr @ Vt.T * root
    ref_l, ref_r = (Xl, Xr) if reference is None else reference
    C = Yl.T @ ref_l + Yr.T @ ref_r
    rows, cols = scipy.optimize.linear_sum_assignment(-np.abs(C))
    perm = np.empty_like(cols)
    perm[cols] = rows
    signs = np.sign(C[perm, np.arange(C.shape[1])])
    signs[signs == 0] = 1.0
    return Yl[:, perm] * signs, Yr[:, perm] * signs


def random_manifold_init(A, M, d, scale=None, seed=None):
    """Gaussian factors mapped onto the manifold by modified QR."""
    n = A.shape[0]
    rng = as_rng(seed)
    if scale is None:
        mean_degree = float(np.sum(M * A)) / n
        scale = np.sqrt(mean_degree / (n * d)) if mean_degree > 0 else 1.0 / np.sqrt(n * d)
    Xl = to_manifold(rng.normal(0.0, scale, size=(n, d)))
    Xr = to_manifold(rng.normal(0.0, scale, size=(n, d)))
    return Xl, Xr


def _initial_pair(A, M, cfg):
    init = cfg.init
    if isinstance(init, DirectedEmbedding):
        Xl, Xr = init.Xl.copy(), init.Xr.copy()
    elif isinstance(init, tuple):
        Xl, Xr = (np.array(x, dtype=float) for x in init)
    elif init == "spectral":
        emb = ase_directed(M * A, cfg.d)
        Xl, Xr = emb.Xl, emb.Xr
    elif init == "random":
        Xl, Xr = random_manifold_init(A, M, cfg.d, cfg.init_scale, cfg.seed)
    else:
        raise InvalidConfigError(f"unknown init {init!r}")
    if Xl.shape != (A.shape[0], cfg.d) or Xr.shape != Xl.shape:
        raise InvalidSizeError("initial factors have the wrong shape")
    # warm starts drift off the manifold when rows are added or removed
    if not (is_on_manifold(Xl) and is_on_manifold(Xr)):
        Xl, Xr = orthogonalize_pair(Xl, Xr)
    return Xl, Xr


def _step(Xl, Xr, gl, gr, alpha):
    return retract(Xl, -alpha * gl), retract(Xr, -alpha * gr)


def solve_riemannian_gd(A, M=None, cfg=None, armijo=None, rescale=True, node_ids=None):
    """Riemannian gradient descent on the product of two orthogonal-column manifolds.

    Each iteration projects the Euclidean gradients onto the tangent spaces
    and retracts both factors along the negative Riemannian gradient.  The
    step is chosen by Armijo backtracking unless ``armijo`` is None and
    ``cfg.step_size`` is set, in which case that fixed step is used.  The
    first trial step of each iteration is the previous accepted step divided
    by ``beta``, capped at ``initial_step``.

    If the line search is exhausted the current iterate is returned with
    ``converged=False``.  When ``rescale`` is true the column norms are
    equalised after the loop.

    Returns
    -------
    DirectedEmbedding, SolveReport
        ``report.max_violation`` is the largest relative off-diagonal Gram
        entry seen over all iterates; ``report.violations`` lists it per
        iterate.
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    M = np.ones_like(A) - np.eye(n) if M is None else np.asarray(M, dtype=float)
    if cfg is None:
        raise InvalidConfigError("solve_riemannian_gd needs a SolverConfig")
    fixed_step = armijo is None and cfg.step_size is not None
    if armijo is None:
        armijo = ArmijoConfig()

    Xl, Xr = _initial_pair(A, M, cfg)
    f = cost_directed(A, M, Xl, Xr)
    trace = [f]
    violations = [max(constraint_violation(Xl), constraint_violation(Xr))]
    converged = False
    message = ""
    alpha_prev = armijo.initial_step
    k = 0
    while k < cfg.max_iters:
        Gl, Gr = grad_directed(A, M, Xl, Xr)
        gl = project_tangent(Xl, Gl)
        gr = project_tangent(Xr, Gr)
        gnorm2 = float(np.sum(gl * gl) + np.sum(gr * gr))
        if gnorm2 == 0.0 or f == 0.0:
            converged = True
            break
        if fixed_step:
            try:
                Yl, Yr = _step(Xl, Xr, gl, gr, cfg.step_size)
            except RetractionError:
                message = "retraction failed at the fixed step size"
                break
            f_new = cost_directed(A, M, Yl, Yr)
        else:
            alpha = min(armijo.initial_step, alpha_prev / armijo.beta)
            accepted = False
            for _ in range(armijo.max_backtracks + 1):
                try:
                    Yl, Yr = _step(Xl, Xr, gl, gr, alpha)
                    f_new = cost_directed(A, M, Yl, Yr)
                    if f_new <= f - armijo.c * alpha * gnorm2:
                        accepted = True
                        break
                except RetractionError:
                    pass
                alpha *= armijo.beta
            if not accepted:
                message = "Armijo line search exhausted"
                break
            alpha_prev = alpha
        k += 1
        Xl, Xr = Yl, Yr
        trace.append(f_new)
        violations.append(max(constraint_violation(Xl), constraint_violation(Xr)))
        decrease = f - f_new
        f = f_new
        if 0.0 <= decrease < cfg.tol_rel_cost * (f + decrease):
            converged = True
            break

    if rescale:
        emb = rescale_columns(Xl, Xr, node_ids)
    else:
        emb = DirectedEmbedding(Xl, Xr, node_ids)
    report = SolveReport(
        final_cost=cost_directed(A, M, emb.Xl, emb.Xr),
        iters=k,
        converged=converged,
        trace=trace if cfg.record_trace else [],
        step_size=cfg.step_size if fixed_step else alpha_prev,
        max_violation=float(max(violations)),
        message=message,
        violations=violations,
    )
    return emb, report
