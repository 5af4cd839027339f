"""Reproducible synthetic experiments built from the generators and solvers.

Each function runs one seeded replicate and returns plain arrays/dicts so
that tests, the CLI and notebooks can aggregate them.
"""

import numpy as np

from .directed import ArmijoConfig, ase_directed, cost_directed, solve_riemannian_gd
from .graph import (
    STABILITY_PI_1,
    STABILITY_PI_2,
    SbmConfig,
    as_rng,
    block_probability,
    community_labels,
    dynamic_sbm_step,
    sample_rdpg,
    sample_sbm,
    sbm_latent_positions,
)
from .linalg import procrustes_distance
from .streaming import add_node, out_of_sample, start_tracker, track_step, tracking_error
from .undirected import SolverConfig, ase, cost_undirected, solve_bcd

#: Two-block dynamic SBM used for the tracking experiment.
TRACKING_PI = np.array([[0.5, 0.2], [0.2, 0.5]])


def dynamic_sbm_tracking(
    n=200, Pi=TRACKING_PI, d=2, n_steps=100, seed=0, method="gd", steps=None, filter=None
):
    """Track a two-block SBM in which one node switches community per step.

    Returns a dict with the per-step unnormalised errors
    ``||X_t X_t^T - P_t||_F`` (``t = 0..n_steps``), the flipped node of each
    step and the Procrustes distance between consecutive embeddings
    restricted to the nodes that did not move, relative to ``||X_t||_F``.
    """
    rng = as_rng(seed)
    k = np.asarray(Pi).shape[0]
    labels = community_labels([n // k + (i < n % k) for i in range(k)])
    P = block_probability(labels, Pi)
    state = start_tracker(sample_rdpg(P, seed=rng), d, method=method, steps=steps, filter=filter)
    errors = [tracking_error(state.embedding.X, P)]
    flipped, drift = [], []
    for _ in range(n_steps):
        new_labels = dynamic_sbm_step(labels, seed=rng, n_communities=k)
        moved = int(np.flatnonzero(new_labels != labels)[0])
        labels = new_labels
        P = block_probability(labels, Pi)
        prev = state.embedding.X
        state = track_step(state, sample_rdpg(P, seed=rng))
        X = state.embedding.X
        keep = np.arange(n) != moved
        dist2, _ = procrustes_distance(X[keep], prev[keep])
        drift.append(np.sqrt(dist2) / np.linalg.norm(X))
        errors.append(tracking_error(X, P))
        flipped.append(moved)
    return {"errors": np.array(errors), "flipped": np.array(flipped), "drift": np.array(drift)}


def bounded_error_ratio(errors, early=(0, 10), late=(10, 100)):
    """Median error over ``late`` steps divided by the median over ``early`` steps (inclusive)."""
    errors = np.asarray(errors)
    return float(np.median(errors[late[0] : late[1] + 1]) / np.median(errors[early[0] : early[1] + 1]))


def growing_er_tracking(n0=100, p=0.1, n_steps=200, d=1, seed=0, steps=None):
    """Grow an ER graph by one node per step and track it two ways.

    Existing edges persist; each newcomer links to every current node with
    probability ``p``.  The online tracker adds the node by least squares and
    then refines all rows with warm-started GD; the baseline freezes the
    initial embedding and only appends least-squares rows.

    Returns a dict of normalised errors ``||X X^T - p 11^T||_F / sqrt(N)`` for
    both arms at ``t = 0..n_steps``.
    """
    rng = as_rng(seed)
    n_total = n0 + n_steps
    upper = np.triu(rng.random((n_total, n_total)) < p, 1).astype(float)
    A_full = upper + upper.T
    A = A_full[:n0, :n0]
    state = start_tracker(A, d, method="gd", steps=steps)
    baseline = state.embedding.X.copy()
    online_err = [tracking_error(state.embedding.X, np.full((n0, n0), p), normalized=True)]
    ls_err = [online_err[0]]
    for t in range(1, n_steps + 1):
        n = n0 + t
        a = A_full[n - 1, : n - 1]
        state = add_node(state, f"n{n - 1}", a)
        state = track_step(state, A_full[:n, :n])
        theta, _ = out_of_sample(baseline, a)
        baseline = np.vstack([baseline, theta])
        P = np.full((n, n), p)
        online_err.append(tracking_error(state.embedding.X, P, normalized=True))
        ls_err.append(tracking_error(baseline, P, normalized=True))
    return {"online": np.array(online_err), "baseline": np.array(ls_err)}


def batch_stability(Pi1=STABILITY_PI_1, Pi2=STABILITY_PI_2, sizes=(100, 100, 100, 100), d=2, seed=0):
    """Two-snapshot SBM embedded by independent ASE and by warm-restarted BCD.

    BCD runs to convergence on the first graph from ASE, then on the second
    graph from the first solution.  Returns masked costs of both methods per
    graph and the raw (unaligned) row displacement of each node between the
    two BCD embeddings.
    """
    rng = as_rng(seed)
    labels = community_labels(list(sizes))
    graphs = [sample_rdpg(block_probability(labels, Pi), seed=rng) for Pi in (Pi1, Pi2)]
    M = np.ones_like(graphs[0]) - np.eye(len(labels))
    out = {"labels": labels, "ase_cost": [], "bcd_cost": [], "bcd": []}
    init = "spectral"
    for A in graphs:
        out["ase_cost"].append(cost_undirected(A, M, ase(A, d).X))
        emb, _ = solve_bcd(A, SolverConfig(d=d, init=init))
        out["bcd_cost"].append(cost_undirected(A, M, emb.X))
        out["bcd"].append(emb.X)
        init = emb.X
    out["displacement"] = np.linalg.norm(out["bcd"][1] - out["bcd"][0], axis=1)
    return out


def latent_recovery(n, seed=0, Pi=TRACKING_PI, d=2):
    """Normalised Procrustes error ``min_W ||X_hat W - X|| / N`` of BCD on a 2-block SBM."""
    k = Pi.shape[0]
    cfg = SbmConfig(sizes=[n // k] * (k - 1) + [n - (k - 1) * (n // k)], Pi=Pi, seed=seed)
    X = sbm_latent_positions(cfg.labels, Pi, d)
    emb, _ = solve_bcd(sample_sbm(cfg), SolverConfig(d=d))
    dist2, _ = procrustes_distance(emb.X, X)
    return np.sqrt(dist2) / n


#: Directed four-block SBM used for the initialisation-robustness study.
ROBUSTNESS_PI = np.array(
    [
        [0.50, 0.10, 0.20, 0.05],
        [0.05, 0.40, 0.10, 0.20],
        [0.20, 0.05, 0.45, 0.10],
        [0.10, 0.20, 0.05, 0.35],
    ]
)


def init_robustness(n_inits=20, sizes=(100, 100, 100, 100), Pi=ROBUSTNESS_PI, d=4, seed=7, tol=1e-9):
    """Final RGD costs from ``n_inits`` random manifold starts, plus the directed-ASE cost."""
    cfg = SbmConfig(sizes=list(sizes), Pi=Pi, directed=True, seed=seed)
    A = sample_sbm(cfg)
    M = np.ones_like(A) - np.eye(A.shape[0])
    base = ase_directed(A, d)
    costs = []
    for s in range(n_inits):
        solver_cfg = SolverConfig(
            d=d, max_iters=20000, tol_rel_cost=tol, init="random", seed=s, record_trace=False
        )
        _, report = solve_riemannian_gd(A, M, solver_cfg, armijo=ArmijoConfig())
        costs.append(report.final_cost)
    return {"costs": np.array(costs), "ase_cost": cost_directed(A, M, base.Xl, base.Xr)}
