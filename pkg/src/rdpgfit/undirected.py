"""Embedding undirected graphs: ASE, factored gradient descent and BCD.

All solvers minimise the masked least-squares cost
``||M o (A - X X^T)||_F^2`` whose hollow default mask discards the diagonal
residuals that the plain spectral embedding has to fit.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg

from .exceptions import DimensionError, InvalidConfigError, InvalidSizeError, StepSizeError
from .graph import as_rng, is_hollow_mask
from .linalg import solve_spd, solve_spd_ridge, top_eigen

#: Default GD step is 1 / (STEP_SCALE * lambda_max(A)).  The cost Hessian near
#: a solution has spectral norm close to 8 lambda_max, so 4 is the stability edge.
STEP_SCALE = 6.0
#: GD aborts once the cost exceeds this multiple of the initial cost.
DIVERGENCE_FACTOR = 1e3


@dataclass
class Embedding:
    """Latent positions, one row per node."""

    X: np.ndarray
    node_ids: list = None

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        if self.X.ndim != 2:
            raise InvalidSizeError("embedding must be a 2-D array")
        if not np.all(np.isfinite(self.X)):
            raise ValueError("embedding has non-finite entries")
        if self.node_ids is None:
            self.node_ids = [str(i) for i in range(self.X.shape[0])]
        if len(self.node_ids) != self.X.shape[0]:
            raise InvalidSizeError("node-id table length does not match embedding rows")

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def d(self):
        return self.X.shape[1]


@dataclass
class SolverConfig:
    """Settings shared by the iterative solvers.

    ``init`` is ``"spectral"``, ``"random"`` or a warm-start array /
    :class:`Embedding`.  ``step_size`` is only used by gradient descent; when
    None a default derived from the data is chosen.
    """

    d: int
    max_iters: int = 1000
    tol_rel_cost: float = 1e-7
    step_size: float = None
    init: object = "spectral"
    init_scale: float = None
    seed: int = 0
    record_trace: bool = True

    def __post_init__(self):
        if self.d < 1:
            raise InvalidConfigError("embedding dimension must be >= 1")
        if self.step_size is not None and self.step_size <= 0:
            raise InvalidConfigError("step size must be positive")
        if self.tol_rel_cost <= 0:
            raise InvalidConfigError("tol_rel_cost must be positive")
        if self.max_iters < 0:
            raise InvalidConfigError("max_iters must be nonnegative")


@dataclass
class SolveReport:
    final_cost: float
    iters: int
    converged: bool
    trace: list = field(default_factory=list)
    warnings: int = 0
    step_size: float = None
    max_violation: float = None
    message: str = ""
    violations: list = field(default_factory=list)

    def to_dict(self):
        out = {
            "final_cost": self.final_cost,
            "iters": self.iters,
            "converged": self.converged,
            "warnings": self.warnings,
        }
        if self.step_size is not None:
            out["step_size"] = self.step_size
        if self.max_violation is not None:
            out["max_violation"] = self.max_violation
        if self.message:
            out["message"] = self.message
        return out


def _check_shapes(A, M, X):
    n = A.shape[0]
    if A.shape != (n, n) or M.shape != (n, n) or X.ndim != 2 or X.shape[0] != n:
        raise InvalidSizeError(
            f"inconsistent shapes: A {A.shape}, M {M.shape}, X {np.shape(X)}"
        )


def cost_undirected(A, M, X):
    """``||M o (A - X X^T)||_F^2``."""
    _check_shapes(A, M, X)
    R = M * (A - X @ X.T)
    return float(np.sum(R * R))


def grad_undirected(A, M, X):
    """Gradient ``4 [M o (X X^T - A)] X`` of :func:`cost_undirected` (symmetric M)."""
    _check_shapes(A, M, X)
    return 4.0 * (M * (X @ X.T - A)) @ X


def ase(A, d, node_ids=None):
    """Adjacency spectral embedding ``V sqrt(Lambda)``.

    Uses the ``d`` largest algebraic eigenvalues, which must all be positive
    for the square root to exist.

    Raises
    ------
    DimensionError
        If fewer than ``d`` eigenvalues are positive.
    """
    pair = top_eigen(A, d, order="algebraic")
    usable = int(np.sum(pair.values > 0))
    if usable < d:
        raise DimensionError(
            f"ASE needs {d} positive eigenvalues but only {usable} are available",
            usable=usable,
        )
    return Embedding(pair.vectors * np.sqrt(pair.values), node_ids)


def largest_eigenvalue(A):
    """Largest algebraic eigenvalue of a symmetric matrix."""
    n = A.shape[0]
    if n <= 64:
        return float(np.linalg.eigvalsh(A)[-1])
    w = scipy.sparse.linalg.eigsh(A, k=1, which="LA", v0=np.ones(n), return_eigenvectors=False)
    return float(w[0])


def default_step_size(A, M):
    lam = largest_eigenvalue(M * A)
    if lam <= 0:
        return 1.0
    return 1.0 / (STEP_SCALE * lam)


def random_init(A, M, d, scale=None, seed=None):
    """I.i.d. Gaussian rows whose Gram diagonal matches the graph density."""
    n = A.shape[0]
    if scale is None:
        mean_degree = float(np.sum(M * A)) / n
        scale = np.sqrt(mean_degree / (n * d)) if mean_degree > 0 else 1.0 / np.sqrt(n * d)
    return as_rng(seed).normal(0.0, scale, size=(n, d))


def initial_embedding(A, M, cfg):
    init = cfg.init
    if isinstance(init, Embedding):
        X = init.X.copy()
    elif isinstance(init, np.ndarray):
        X = np.array(init, dtype=float)
    elif init == "spectral":
        X = ase(M * A, cfg.d).X
    elif init == "random":
        X = random_init(A, M, cfg.d, cfg.init_scale, cfg.seed)
    else:
        raise InvalidConfigError(f"unknown init {init!r}")
    if X.shape != (A.shape[0], cfg.d):
        raise InvalidSizeError(f"initial embedding has shape {X.shape}, expected {(A.shape[0], cfg.d)}")
    return X


def _prepare(A, M):
    A = np.asarray(A, dtype=float)
    if M is None:
        M = np.ones_like(A) - np.eye(A.shape[0])
    return A, np.asarray(M, dtype=float)


def solve_gd(A, M=None, cfg=None, node_ids=None):
    """Factored gradient descent ``X <- X - alpha grad f(X)``.

    Stops when the relative cost decrease over one iteration drops below
    ``cfg.tol_rel_cost`` or after ``cfg.max_iters`` iterations.

    Returns
    -------
    Embedding, SolveReport

    Raises
    ------
    StepSizeError
        If the cost grows beyond 1e3 times its initial value.
    """
    A, M = _prepare(A, M)
    if cfg is None:
        raise InvalidConfigError("solve_gd needs a SolverConfig")
    X = initial_embedding(A, M, cfg)
    alpha = cfg.step_size if cfg.step_size is not None else default_step_size(A, M)
    f = cost_undirected(A, M, X)
    f0 = f
    trace = [f]
    converged = f == 0.0
    k = 0
    while not converged and k < cfg.max_iters:
        k += 1
        X = X - alpha * grad_undirected(A, M, X)
        f_new = cost_undirected(A, M, X)
        if not np.isfinite(f_new) or f_new > DIVERGENCE_FACTOR * max(f0, 1e-300):
            raise StepSizeError(
                f"gradient descent diverged at iteration {k} (cost {f_new:.3g}); "
                f"try a step size smaller than {alpha:.3g}"
            )
        if cfg.record_trace:
            trace.append(f_new)
        decrease = f - f_new
        converged = f_new == 0.0 or 0.0 <= decrease < cfg.tol_rel_cost * f
        f = f_new
    report = SolveReport(
        final_cost=f,
        iters=k,
        converged=converged,
        trace=trace if cfg.record_trace else [],
        step_size=alpha,
    )
    return Embedding(X, node_ids), report


def _row_cost(A, m, X, i, xi):
    r = m * (A[i] - X @ xi)
    r[i] = 0.0
    return float(r @ r)


def bcd_row_update(A, X, i, M=None):
    """Exact minimiser of the cost over row ``i`` with the other rows fixed.

    Solves ``R x = X^T A_i^T`` with ``R = X^T X - x_i x_i^T`` (or the masked
    Gram ``sum_j M_ij x_j x_j^T`` when a mask is given).  Raises
    :class:`~rdpgfit.exceptions.SingularSystemError` if ``R`` is singular.
    """
    R, b = _row_system(A, X, i, M)
    return solve_spd(R, b)


def _row_system(A, X, i, M=None):
    if M is None:
        xi = X[i]
        R = X.T @ X - np.outer(xi, xi)
        b = A[i] @ X
    else:
        m = M[i].copy()
        m[i] = 0.0
        Xm = X * m[:, None]
        R = Xm.T @ X
        b = (m * A[i]) @ X
    return R, b


def solve_bcd(A, cfg, M=None, node_ids=None, check_descent=False):
    """Block coordinate descent: cyclic exact row minimisation.

    With the hollow mask the Gram matrix ``R = X^T X`` is kept up to date by
    rank-one downdates/updates around each row solve (recomputed once per
    cycle to stop drift).  A general symmetric mask is also accepted, at
    ``O(N d^2)`` per row.  Singular row systems fall back to a small ridge
    and are counted in ``report.warnings``.

    A cycle that ends with a higher cost (possible only through rounding
    once converged) is discarded and the solver stops, so the reported trace
    is non-increasing.  ``check_descent=True`` also asserts after every row
    update that the row cost did not increase.
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    hollow = M is None or is_hollow_mask(np.asarray(M))
    Mfull = np.ones_like(A) - np.eye(n) if M is None else np.asarray(M, dtype=float)
    X = initial_embedding(A, Mfull, cfg)
    f = cost_undirected(A, Mfull, X)
    trace = [f]
    warnings = 0
    converged = False
    k = 0
    while not converged and k < cfg.max_iters:
        k += 1
        X_prev = X.copy()
        R = X.T @ X
        for i in range(n):
            xi = X[i]
            if check_descent:
                m = Mfull[i]
                before = _row_cost(A, m, X, i, xi)
            if hollow:
                R -= np.outer(xi, xi)
                b = A[i] @ X
                x_new, ridged = solve_spd_ridge(R, b)
            else:
                Ri, b = _row_system(A, X, i, Mfull)
                x_new, ridged = solve_spd_ridge(Ri, b)
            warnings += ridged
            X[i] = x_new
            if hollow:
                R += np.outer(x_new, x_new)
            if check_descent:
                after = _row_cost(A, m, X, i, x_new)
                assert after <= before + 1e-9 * max(1.0, before), (
                    f"row {i} update increased the cost: {before} -> {after}"
                )
        f_new = cost_undirected(A, Mfull, X)
        if f_new > f:
            # only rounding can raise the cost; keep the better iterate and stop
            X = X_prev
            converged = True
            break
        trace.append(f_new)
        converged = f_new == 0.0 or (f - f_new) < cfg.tol_rel_cost * f
        f = f_new
    report = SolveReport(
        final_cost=f,
        iters=k,
        converged=converged,
        trace=trace if cfg.record_trace else [],
        warnings=int(warnings),
    )
    return Embedding(X, node_ids), report


def elbow_dimension(A, d_max):
    """Embedding dimension at the largest gap of the magnitude scree.

    Looks at the ``d_max + 1`` largest-magnitude eigenvalues (fewer if ``N``
    is small) and returns the 1-based position of the largest drop.
    Degenerate inputs return 1.
    """
    n = A.shape[0]
    if d_max < 1 or d_max > n:
        raise InvalidSizeError(f"need 1 <= d_max <= N, got {d_max}")
    k = min(d_max + 1, n)
    mags = np.abs(top_eigen(A, k, order="magnitude").values)
    gaps = mags[:-1] - mags[1:]
    if gaps.size == 0 or not np.any(gaps > 0):
        return 1
    return int(np.argmax(gaps[:d_max])) + 1
