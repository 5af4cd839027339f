"""Online tracking of embeddings over a stream of graph snapshots.

Each snapshot is passed through an entrywise filter and the solver is then
run for a few iterations warm-started at the previous embedding.  Nodes can
join (initialised by an out-of-sample least-squares fit) or leave (their row
is dropped) between snapshots.
"""

import copy
from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np

from .directed import (
    ArmijoConfig,
    DirectedEmbedding,
    cost_directed,
    solve_riemannian_gd,
)
from .exceptions import (
    ContractError,
    InvalidConfigError,
    InvalidSizeError,
    RetractionError,
    StepSizeError,
    UnknownNodeError,
)
from .graph import check_mask
from .linalg import solve_spd_ridge
from .undirected import (
    Embedding,
    SolveReport,
    SolverConfig,
    cost_undirected,
    default_step_size,
    solve_bcd,
    solve_gd,
)

FILTER_MODES = ("passthrough", "moving-average", "single-pole")
TRACK_METHODS = ("gd", "bcd", "rgd")
#: Inner iterations per snapshot when none are configured.
DEFAULT_STEPS = {"gd": 10, "bcd": 1, "rgd": 10}
#: Relative-decrease tolerance of the inner solves: small enough that the
#: configured iteration count is what normally ends them.
INNER_TOL = 1e-12


@dataclass
class FilterState:
    """Entrywise smoothing of the adjacency stream.

    ``mode`` is ``"passthrough"`` (``B_t = A_t``), ``"moving-average"`` (mean
    of the last ``m`` snapshots) or ``"single-pole"``
    (``B_t = beta B_{t-1} + (1 - beta) A_t`` with ``B_0 = A_0``).
    """

    mode: str = "passthrough"
    m: int = 1
    beta: float = 0.9
    B: np.ndarray = None
    window: deque = field(default_factory=deque)

    def __post_init__(self):
        if self.mode not in FILTER_MODES:
            raise InvalidConfigError(f"unknown filter mode {self.mode!r}")
        if self.m < 1:
            raise InvalidConfigError("moving-average window must be >= 1")
        if not 0 < self.beta < 1:
            raise InvalidConfigError("single-pole beta must lie in (0, 1)")

    @property
    def n(self):
        return None if self.B is None else self.B.shape[0]

    def grow(self, A):
        """Pad the state to the size of ``A`` using ``A``'s entries for the new rows/columns."""
        n_old, n_new = self.B.shape[0], A.shape[0]
        if n_new == n_old:
            return
        if n_new < n_old:
            raise InvalidSizeError(
                f"snapshot has {n_new} nodes but the filter holds {n_old}; drop nodes first"
            )

        def pad(S):
            out = np.array(A, dtype=float)
            out[:n_old, :n_old] = S
            return out

        self.B = pad(self.B)
        self.window = deque((pad(S) for S in self.window), maxlen=self.window.maxlen)

    def drop(self, idx):
        """Remove rows/columns ``idx`` from the state."""
        if self.B is None:
            return
        keep = np.setdiff1d(np.arange(self.B.shape[0]), np.atleast_1d(idx))
        sub = np.ix_(keep, keep)
        self.B = self.B[sub]
        self.window = deque((S[sub] for S in self.window), maxlen=self.window.maxlen)


def filter_step(state, A_t):
    """Feed ``A_t`` into ``state`` (in place) and return the filtered matrix ``B_t``.

    Raises
    ------
    InvalidSizeError
        If ``A_t`` is smaller than the filter state (removals must go
        through :meth:`FilterState.drop` first).
    """
    A_t = np.asarray(A_t, dtype=float)
    if A_t.ndim != 2 or A_t.shape[0] != A_t.shape[1]:
        raise InvalidSizeError(f"snapshot must be square, got shape {A_t.shape}")
    if state.B is None:
        state.B = A_t.copy()
        if state.mode == "moving-average":
            state.window = deque([A_t.copy()], maxlen=state.m)
        return state.B.copy()
    state.grow(A_t)
    if state.mode == "passthrough":
        state.B = A_t.copy()
    elif state.mode == "single-pole":
        state.B = state.beta * state.B + (1.0 - state.beta) * A_t
    else:
        state.window.append(A_t.copy())
        state.B = sum(state.window) / len(state.window)
    return state.B.copy()


@dataclass
class TrackerState:
    """Embedding, filter and inner-solver settings of one tracker.

    ``steps`` is the number of inner iterations per snapshot (GD/RGD
    iterations or BCD cycles; defaults 10, 1 and 10).  ``step_size`` fixes the
    GD/RGD step; when None GD uses ``1/(6 lambda_max)`` of the filtered
    snapshot and RGD uses Armijo backtracking.
    """

    embedding: object
    filter: FilterState = field(default_factory=FilterState)
    method: str = "gd"
    steps: int = None
    step_size: float = None
    armijo: ArmijoConfig = field(default_factory=ArmijoConfig)
    t: int = -1
    report: SolveReport = None

    def __post_init__(self):
        if self.method not in TRACK_METHODS:
            raise InvalidConfigError(f"unknown tracking method {self.method!r}")
        if self.steps is None:
            self.steps = DEFAULT_STEPS[self.method]
        if self.steps < 1:
            raise InvalidConfigError("inner steps per snapshot must be >= 1")
        if self.step_size is not None and self.step_size <= 0:
            raise InvalidConfigError("step size must be positive")
        if self.directed != (self.method == "rgd"):
            raise InvalidConfigError("method 'rgd' requires a DirectedEmbedding and vice versa")

    @property
    def directed(self):
        return isinstance(self.embedding, DirectedEmbedding)

    @property
    def node_ids(self):
        return list(self.embedding.node_ids)

    @property
    def n(self):
        return self.embedding.n

    @property
    def d(self):
        return self.embedding.d


def start_tracker(
    A_0,
    d,
    method="gd",
    M=None,
    filter=None,
    steps=None,
    step_size=None,
    node_ids=None,
    max_iters=1000,
):
    """Embed the first snapshot to convergence and prime the filter with it.

    GD and BCD start from ASE; RGD starts from the directed ASE and uses
    Armijo steps.  Returns the :class:`TrackerState` at ``t = 0``.
    """
    A_0 = np.asarray(A_0, dtype=float)
    filt = FilterState() if filter is None else copy.deepcopy(filter)
    B = filter_step(filt, A_0)
    M = check_mask(M, A_0.shape[0], method == "rgd")
    cfg = SolverConfig(d=d, max_iters=max_iters, record_trace=False)
    if method == "gd":
        emb, report = solve_gd(B, M, cfg, node_ids=node_ids)
    elif method == "bcd":
        emb, report = solve_bcd(B, cfg, M=M, node_ids=node_ids)
    elif method == "rgd":
        emb, report = solve_riemannian_gd(B, M, cfg, armijo=ArmijoConfig(), node_ids=node_ids)
    else:
        raise InvalidConfigError(f"unknown tracking method {method!r}")
    return TrackerState(
        embedding=emb,
        filter=filt,
        method=method,
        steps=steps,
        step_size=step_size,
        t=0,
        report=report,
    )


def _cost(state, B, M):
    emb = state.embedding
    if state.directed:
        return cost_directed(B, M, emb.Xl, emb.Xr)
    return cost_undirected(B, M, emb.X)


def track_step(state, A_t, M_t=None):
    """Filter ``A_t`` and refine the embedding with warm-started inner iterations.

    The input state is not modified.  If the inner solver diverges the
    previous embedding and filter are returned with ``report.converged`` False
    and the failure in ``report.message``.

    Returns
    -------
    TrackerState
    """
    A_t = np.asarray(A_t, dtype=float)
    n = state.n
    if A_t.shape != (n, n):
        raise InvalidSizeError(
            f"snapshot is {A_t.shape} but the tracker has {n} nodes; add or remove nodes first"
        )
    M = check_mask(M_t, n, state.directed)
    filt = copy.deepcopy(state.filter)
    B = filter_step(filt, A_t)
    emb = state.embedding
    cfg = SolverConfig(
        d=state.d,
        max_iters=state.steps,
        tol_rel_cost=INNER_TOL,
        step_size=state.step_size,
        record_trace=False,
    )
    try:
        if state.method == "gd":
            if cfg.step_size is None:
                cfg.step_size = default_step_size(B, M)
            new, report = solve_gd(B, M, replace(cfg, init=emb.X), node_ids=emb.node_ids)
        elif state.method == "bcd":
            new, report = solve_bcd(B, replace(cfg, init=emb.X), M=M, node_ids=emb.node_ids)
        else:
            armijo = None if state.step_size is not None else state.armijo
            new, report = solve_riemannian_gd(
                B, M, replace(cfg, init=(emb.Xl, emb.Xr)), armijo=armijo, node_ids=emb.node_ids
            )
    except (StepSizeError, RetractionError) as exc:
        flagged = SolveReport(
            final_cost=_cost(state, B, M),
            iters=0,
            converged=False,
            message=f"inner solver failed at step {state.t + 1}: {exc}",
        )
        return replace(state, report=flagged)
    return replace(state, embedding=new, filter=filt, t=state.t + 1, report=report)


def out_of_sample(X, a):
    """Least-squares positions ``argmin_theta ||a - X theta||`` for new nodes.

    Parameters
    ----------
    X : ndarray of shape (n, d)
    a : ndarray of shape (n,) or (k, n)
        Connections of one or ``k`` new nodes to the existing ``n`` nodes.

    Returns
    -------
    theta : ndarray of shape (d,) or (k, d)
    ridged : bool
        Whether the normal equations needed the ridge fallback.
    """
    X = np.asarray(X, dtype=float)
    a = np.asarray(a, dtype=float)
    if a.shape[-1] != X.shape[0]:
        raise InvalidSizeError(f"incidence vector has length {a.shape[-1]}, expected {X.shape[0]}")
    theta, ridged = solve_spd_ridge(X.T @ X, X.T @ a.T)
    return theta.T, ridged


def _as_rows(v, k, n, what):
    v = np.asarray(v, dtype=float)
    if v.ndim == 1:
        v = v[None, :]
    if v.shape != (k, n):
        raise InvalidSizeError(f"{what} must have shape ({k}, {n}), got {v.shape}")
    return v


def add_node(state, node_id, a_out, a_in=None):
    """Append new node(s), initialised by out-of-sample least squares.

    ``node_id`` is one id or a list of ``k`` ids; ``a_out`` holds their
    connections to the existing nodes (length ``N`` or shape ``(k, N)``).
    Directed trackers also take ``a_in``, the existing nodes' edges towards
    the newcomers; the outgoing row is fitted against ``Xr`` and the incoming
    row against ``Xl``.  Rows are fitted independently, which ignores edges
    among the newcomers.  The filter is not touched: the next snapshot fills
    the new rows and columns.
    """
    ids = [node_id] if isinstance(node_id, (str, int, np.integer)) else list(node_id)
    ids = [str(v) for v in ids]
    if state.n == 0:
        raise ContractError("cannot extend an empty embedding")
    clash = set(ids) & set(state.node_ids)
    if clash or len(set(ids)) != len(ids):
        raise ContractError(f"node ids already present or repeated: {sorted(clash) or ids}")
    n, k = state.n, len(ids)
    a_out = _as_rows(a_out, k, n, "a_out")
    emb = state.embedding
    if state.directed:
        if a_in is None:
            raise ContractError("directed trackers need the incoming edges a_in")
        a_in = _as_rows(a_in, k, n, "a_in")
        theta_l, _ = out_of_sample(emb.Xr, a_out)
        theta_r, _ = out_of_sample(emb.Xl, a_in)
        new = DirectedEmbedding(
            np.vstack([emb.Xl, theta_l]), np.vstack([emb.Xr, theta_r]), emb.node_ids + ids
        )
    else:
        theta, _ = out_of_sample(emb.X, a_out)
        new = Embedding(np.vstack([emb.X, theta]), emb.node_ids + ids)
    return replace(state, embedding=new)


def remove_node(state, node_id):
    """Drop node(s) from the embedding and the filter state.

    Raises
    ------
    UnknownNodeError
        If an id is not tracked.
    """
    ids = [node_id] if isinstance(node_id, (str, int, np.integer)) else list(node_id)
    lookup = {v: i for i, v in enumerate(state.node_ids)}
    missing = [str(v) for v in ids if str(v) not in lookup]
    if missing:
        raise UnknownNodeError(f"unknown node id(s): {missing}")
    idx = sorted(lookup[str(v)] for v in ids)
    keep = np.setdiff1d(np.arange(state.n), idx)
    kept_ids = [state.node_ids[i] for i in keep]
    emb = state.embedding
    if state.directed:
        new = DirectedEmbedding(emb.Xl[keep], emb.Xr[keep], kept_ids)
    else:
        new = Embedding(emb.X[keep], kept_ids)
    filt = copy.deepcopy(state.filter)
    filt.drop(idx)
    return replace(state, embedding=new, filter=filt)


def tracking_error(X, P, normalized=False, Xr=None):
    """``||X X^T - P||_F``, or ``||X Xr^T - P||_F`` for a directed pair.

    ``normalized`` divides by ``sqrt(N)``.
    """
    X = np.asarray(X, dtype=float)
    Xr = X if Xr is None else np.asarray(Xr, dtype=float)
    P = np.asarray(P, dtype=float)
    n = X.shape[0]
    if P.shape != (n, n) or Xr.shape != X.shape:
        raise InvalidSizeError(f"shape mismatch: X {X.shape}, P {P.shape}")
    err = float(np.linalg.norm(X @ Xr.T - P))
    return err / np.sqrt(n) if normalized else err
