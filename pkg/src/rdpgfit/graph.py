"""Graph data model, RDPG samplers and the synthetic generators.

Adjacency matrices, masks and probability matrices are plain ``numpy``
arrays.  The helpers in this module validate them and build the graphs used
throughout the experiments (SBMs, the bipartite senate digraph, dynamic SBMs
and growing Erdos-Renyi graphs).
"""

from dataclasses import dataclass, field

import numpy as np

from .exceptions import ContractError, DomainError, InvalidConfigError, InvalidSizeError

#: Senate example: communities are Party-1 senators, Party-2 senators,
#: Party-1 laws, Party-2 laws and bipartisan laws.
SENATE_PI = np.array(
    [
        [0.0, 0.0, 0.9, 0.01, 0.2],
        [0.0, 0.0, 0.1, 0.8, 0.3],
        [0.0, 0.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 0.0, 0.0],
    ]
)

#: Two-snapshot dynamic SBM (batch stability experiment), time 1.
STABILITY_PI_1 = np.array(
    [
        [0.08, 0.02, 0.18, 0.10],
        [0.02, 0.20, 0.04, 0.10],
        [0.18, 0.04, 0.02, 0.02],
        [0.10, 0.10, 0.02, 0.06],
    ]
)

#: Time 2: communities 1 and 2 merge, community 3 moves, community 4 is unchanged.
STABILITY_PI_2 = np.array(
    [
        [0.16, 0.16, 0.04, 0.10],
        [0.16, 0.16, 0.04, 0.10],
        [0.04, 0.04, 0.09, 0.02],
        [0.10, 0.10, 0.02, 0.06],
    ]
)


def as_rng(seed=None):
    """Return a ``numpy`` Generator for ``seed`` (int, None or a Generator)."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def hollow_mask(n, directed=False):
    """Observation mask with ones everywhere except on the diagonal.

    ``directed`` is accepted for symmetry with the other constructors; the
    hollow mask is symmetric either way.
    """
    if n < 1:
        raise InvalidSizeError(f"node count must be >= 1, got {n}")
    return np.ones((n, n)) - np.eye(n)


def is_hollow_mask(M):
    n = M.shape[0]
    return bool(np.array_equal(M, hollow_mask(n)))


def check_adjacency(A, directed=False):
    """Validate an adjacency matrix and return it as a float array.

    Raises
    ------
    InvalidSizeError
        If ``A`` is not square.
    DomainError
        If an entry is negative or not finite.
    ContractError
        If the diagonal is nonzero or, for undirected graphs, ``A`` is not
        symmetric.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InvalidSizeError(f"adjacency matrix must be square, got shape {A.shape}")
    if not np.all(np.isfinite(A)) or np.any(A < 0):
        raise DomainError("adjacency entries must be finite and nonnegative")
    if np.any(np.diag(A) != 0):
        raise ContractError("adjacency matrix must have a zero diagonal (no self loops)")
    if not directed and not np.array_equal(A, A.T):
        raise ContractError("undirected adjacency matrix must be symmetric")
    return A


def check_mask(M, n, directed=False):
    """Validate a binary observation mask of size ``n``; ``None`` means hollow."""
    if M is None:
        return hollow_mask(n)
    M = np.asarray(M, dtype=float)
    if M.shape != (n, n):
        raise InvalidSizeError(f"mask shape {M.shape} does not match node count {n}")
    if not np.all((M == 0) | (M == 1)):
        raise DomainError("mask entries must be 0 or 1")
    if np.any(np.diag(M) != 0):
        raise ContractError("mask must have a zero diagonal")
    if not directed and not np.array_equal(M, M.T):
        raise ContractError("undirected mask must be symmetric")
    return M


def sample_rdpg(P, directed=False, seed=None):
    """Sample an adjacency matrix with independent Bernoulli(P_ij) entries.

    Undirected graphs draw each unordered pair once and mirror it, so the
    result is exactly symmetric.  The diagonal of ``P`` is ignored.

    Parameters
    ----------
    P : ndarray of shape (n, n)
        Edge probabilities in [0, 1]; symmetric when ``directed`` is False.
    directed : bool
    seed : int, Generator or None

    Returns
    -------
    ndarray of shape (n, n)
        Binary adjacency matrix with a zero diagonal.
    """
    P = np.asarray(P, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise InvalidSizeError(f"probability matrix must be square, got shape {P.shape}")
    if not np.all(np.isfinite(P)) or np.any(P < 0) or np.any(P > 1):
        raise DomainError("edge probabilities must lie in [0, 1]")
    if not directed and not np.array_equal(P, P.T):
        raise ContractError("undirected sampling requires a symmetric probability matrix")
    rng = as_rng(seed)
    n = P.shape[0]
    U = rng.random((n, n))
    A = (U < P).astype(float)
    if directed:
        np.fill_diagonal(A, 0.0)
    else:
        A = np.triu(A, 1)
        A = A + A.T
    return A


@dataclass
class SbmConfig:
    """Stochastic block model: community sizes and block probabilities."""

    sizes: list
    Pi: np.ndarray
    directed: bool = False
    seed: int = 0

    def __post_init__(self):
        self.sizes = [int(s) for s in self.sizes]
        self.Pi = np.asarray(self.Pi, dtype=float)
        k = len(self.sizes)
        if k == 0 or any(s <= 0 for s in self.sizes):
            raise InvalidConfigError("community sizes must be positive")
        if self.Pi.shape != (k, k):
            raise InvalidConfigError(f"Pi must be {k}x{k}, got shape {self.Pi.shape}")
        if np.any(self.Pi < 0) or np.any(self.Pi > 1):
            raise DomainError("Pi entries must lie in [0, 1]")
        if not self.directed and not np.array_equal(self.Pi, self.Pi.T):
            raise InvalidConfigError("Pi must be symmetric for undirected SBMs")

    @property
    def labels(self):
        return community_labels(self.sizes)

    @property
    def n(self):
        return sum(self.sizes)


def community_labels(sizes):
    """Contiguous community labels: ``[0]*sizes[0] + [1]*sizes[1] + ...``."""
    return np.repeat(np.arange(len(sizes)), sizes)


def block_probability(labels, Pi):
    """``P_ij = Pi[labels[i], labels[j]]`` (diagonal kept, zeroed at sampling)."""
    Pi = np.asarray(Pi, dtype=float)
    if np.any(Pi < 0) or np.any(Pi > 1):
        raise DomainError("Pi entries must lie in [0, 1]")
    labels = np.asarray(labels)
    return Pi[np.ix_(labels, labels)]


def sbm_probability(cfg):
    """Block-constant probability matrix of an :class:`SbmConfig`."""
    return block_probability(cfg.labels, cfg.Pi)


def sample_sbm(cfg):
    """Sample an adjacency matrix from ``cfg`` using ``cfg.seed``."""
    return sample_rdpg(sbm_probability(cfg), directed=cfg.directed, seed=cfg.seed)


def block_latent_positions(Pi, d=None):
    """Per-community latent vectors ``nu`` with ``nu @ nu.T == Pi``.

    Only defined for positive semidefinite ``Pi``; ``d`` defaults to the
    numerical rank.
    """
    Pi = np.asarray(Pi, dtype=float)
    w, V = np.linalg.eigh(Pi)
    tol = 1e-12 * max(1.0, np.abs(w).max())
    if w.min() < -tol:
        raise DomainError("Pi is indefinite; it has no RDPG latent positions")
    order = np.argsort(w)[::-1]
    w, V = w[order], V[:, order]
    if d is None:
        d = int(np.sum(w > tol))
    return V[:, :d] * np.sqrt(np.clip(w[:d], 0.0, None))


def sbm_latent_positions(labels, Pi, d=None):
    """Node latent positions ``X`` such that ``X @ X.T`` is the SBM's P."""
    return block_latent_positions(Pi, d)[np.asarray(labels)]


def erdos_renyi(n, p, seed=None):
    """Undirected ER graph: a one-block SBM."""
    return sample_rdpg(np.full((n, n), float(p)), directed=False, seed=seed)


def senate_graph(
    n_party1_senators=50,
    n_party2_senators=50,
    n_laws_by_class=(50, 200, 40),
    Pi=SENATE_PI,
    seed=None,
):
    """Bipartite senator-to-law vote digraph.

    Nodes are ordered Party-1 senators, Party-2 senators, Party-1 laws,
    Party-2 laws and bipartisan laws.  Column 5 of ``Pi`` gives each party's
    probability of voting for a bipartisan law.  Edges only go from senators
    to laws.

    Returns
    -------
    A : ndarray
        Directed adjacency matrix of size ``n_senators + n_laws``.
    labels : ndarray
        Community label (0..4) of each node.
    """
    Pi = np.asarray(Pi, dtype=float)
    if Pi.shape != (5, 5):
        raise InvalidConfigError("senate Pi must be 5x5")
    if np.any(Pi[:, :2] != 0) or np.any(Pi[2:, :] != 0):
        raise DomainError("senate Pi may only be nonzero in the senator->law block")
    sizes = [n_party1_senators, n_party2_senators, *n_laws_by_class]
    cfg = SbmConfig(sizes=sizes, Pi=Pi, directed=True, seed=0)
    A = sample_rdpg(sbm_probability(cfg), directed=True, seed=seed)
    return A, cfg.labels


def dynamic_sbm_step(labels, seed=None, n_communities=None):
    """Move one uniformly chosen node to a uniformly chosen different community.

    ``n_communities`` defaults to ``max(labels) + 1``.  Returns a new label
    array; the input is not modified.
    """
    labels = np.asarray(labels).copy()
    k = int(labels.max()) + 1 if n_communities is None else int(n_communities)
    if k < 2:
        raise InvalidConfigError("a community flip needs at least two communities")
    rng = as_rng(seed)
    i = rng.integers(labels.size)
    shift = rng.integers(1, k)
    labels[i] = (labels[i] + shift) % k
    return labels


@dataclass
class Graph:
    """An adjacency matrix together with its mask and node-id table."""

    A: np.ndarray
    node_ids: list
    directed: bool = False
    M: np.ndarray = field(default=None)

    def __post_init__(self):
        self.A = check_adjacency(self.A, self.directed)
        self.node_ids = [str(v) for v in self.node_ids]
        if len(self.node_ids) != self.A.shape[0]:
            raise InvalidSizeError("node-id table length does not match adjacency size")
        if len(set(self.node_ids)) != len(self.node_ids):
            raise ContractError("node ids must be unique")
        self.M = check_mask(self.M, self.A.shape[0], self.directed)

    @property
    def n(self):
        return self.A.shape[0]
