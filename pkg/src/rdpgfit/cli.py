"""Command-line interface: ``rdpgfit {generate,embed,track,eval,elbow}``.

Exit codes
----------
0   success (solver converged)
1   unreadable or invalid input
2   solver stopped at the iteration limit
3   embedding dimension not supported by the data
4   solver diverged
64  command-line usage error
"""

import argparse
import concurrent.futures
import contextlib
import copy
import json
import platform
import sys
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .directed import (
    ArmijoConfig,
    DirectedEmbedding,
    ase_directed,
    cost_directed,
    solve_riemannian_gd,
)
from .exceptions import (
    ContractError,
    DimensionError,
    DomainError,
    FormatError,
    InvalidConfigError,
    InvalidSizeError,
    RdpgError,
    StepSizeError,
    UnknownNodeError,
)
from .graph import (
    SENATE_PI,
    SbmConfig,
    as_rng,
    block_latent_positions,
    block_probability,
    community_labels,
    dynamic_sbm_step,
    sample_rdpg,
    senate_graph,
)
from .io import (
    directed_paths,
    read_edge_list,
    read_embedding_csv,
    read_manifest,
    read_mask,
    read_positions,
    write_edge_list,
    write_embedding_csv,
    write_json,
    write_manifest,
    write_rows_csv,
    write_trace_csv,
)
from .linalg import procrustes_distance
from .streaming import (
    FilterState,
    TrackerState,
    add_node,
    filter_step,
    out_of_sample,
    remove_node,
    track_step,
    tracking_error,
)
from .undirected import (
    Embedding,
    SolverConfig,
    ase,
    cost_undirected,
    elbow_dimension,
    solve_bcd,
    solve_gd,
)

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_MAX_ITERS = 2
EXIT_DIMENSION = 3
EXIT_DIVERGED = 4
EXIT_USAGE = 64


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _floats(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text):
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _matrix(text):
    """``"a,b;c,d"`` -> 2-D array."""
    rows = [_floats(r) for r in text.split(";")]
    if len({len(r) for r in rows}) != 1:
        raise argparse.ArgumentTypeError("matrix rows have different lengths")
    return np.array(rows)


def _dim(text):
    if text == "auto":
        return text
    try:
        d = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError("--d must be a positive integer or 'auto'") from None
    if d < 1:
        raise argparse.ArgumentTypeError("--d must be >= 1")
    return d


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("global options")
    g.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    g.add_argument("--out", type=Path, default=Path("."), help="output directory")
    g.add_argument("--json", action="store_true", help="print a JSON summary on stdout")
    g.add_argument(
        "--deterministic", action="store_true", help="single-threaded BLAS for reproducible runs"
    )
    g.add_argument(
        "--replicates", type=int, default=1, help="independent runs with seeds seed..seed+k-1"
    )
    g.add_argument("--workers", type=int, default=1, help="processes used for replicates")

    solver = argparse.ArgumentParser(add_help=False)
    s = solver.add_argument_group("solver options")
    s.add_argument("--d", type=_dim, default=2, help="embedding dimension or 'auto' (elbow)")
    s.add_argument("--d-max", type=int, default=10, help="largest dimension considered by 'auto'")
    s.add_argument("--max-iters", type=int, default=1000)
    s.add_argument("--tol", type=float, default=1e-7, help="relative cost decrease tolerance")
    s.add_argument("--step-size", type=float, default=None, help="fixed GD/RGD step")
    s.add_argument("--armijo-initial", type=float, default=1.0)
    s.add_argument("--armijo-beta", type=float, default=0.5)
    s.add_argument("--armijo-c", type=float, default=1e-4)
    s.add_argument("--armijo-backtracks", type=int, default=30)

    p = _Parser(prog="rdpgfit", description="First-order RDPG embedding solvers.")
    p.add_argument("--version", action="version", version=f"rdpgfit {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    gen = sub.add_parser("generate", parents=[common], help="sample synthetic graphs")
    gen.add_argument(
        "kind", choices=["er", "sbm", "directed-sbm", "dynamic-sbm", "senate", "growing-er"]
    )
    gen.add_argument("--n", type=int, default=100, help="node count (er, growing-er initial)")
    gen.add_argument("--p", type=float, default=0.1, help="ER probability or SBM within-block")
    gen.add_argument("--q", type=float, default=0.2, help="SBM between-block probability")
    gen.add_argument("--blocks", type=int, default=2)
    gen.add_argument("--sizes", type=_ints, default=None, help="community sizes, e.g. 67,133")
    gen.add_argument("--pi", type=_matrix, default=None, help="block matrix 'a,b;c,d'")
    gen.add_argument("--steps", type=int, default=100, help="time steps (dynamic kinds)")

    emb = sub.add_parser("embed", parents=[common, solver], help="embed one graph")
    emb.add_argument("--input", type=Path, required=True, help="edge-list file")
    emb.add_argument("--method", choices=["ase", "gd", "bcd", "rgd"], default="gd")
    emb.add_argument("--mask", type=Path, default=None, help="file listing unobserved pairs")
    emb.add_argument("--directed", action="store_true", help="treat the edge list as directed")
    emb.add_argument("--init", choices=["spectral", "random"], default="spectral")
    emb.add_argument("--trace", action="store_true", help="write the cost trace CSV")

    trk = sub.add_parser("track", parents=[common, solver], help="track a snapshot stream")
    trk.add_argument("--manifest", type=Path, required=True)
    trk.add_argument("--method", choices=["gd", "bcd", "rgd"], default="gd")
    trk.add_argument("--steps", type=int, default=None, help="inner iterations per snapshot")
    trk.add_argument(
        "--filter", choices=["passthrough", "moving-average", "single-pole"], default="passthrough"
    )
    trk.add_argument("--window", type=int, default=2, help="moving-average length")
    trk.add_argument("--beta", type=float, default=0.9, help="single-pole coefficient")
    trk.add_argument("--baseline", choices=["none", "ls"], default="none")
    trk.add_argument(
        "--save-embeddings", action="store_true", help="write an embedding CSV for every step"
    )

    ev = sub.add_parser("eval", parents=[common], help="compare embeddings")
    ev.add_argument("--embedding", type=Path, required=True)
    ev.add_argument("--reference", type=Path, default=None, help="embedding or true positions")
    ev.add_argument("--graph", type=Path, default=None, help="edge list for the masked cost")
    ev.add_argument("--mask", type=Path, default=None)
    ev.add_argument("--directed", action="store_true", help="paths are *_out/_in.csv prefixes")

    el = sub.add_parser("elbow", parents=[common], help="scree-plot dimension choice")
    el.add_argument("--input", type=Path, required=True)
    el.add_argument("--d-max", type=int, default=10)
    el.add_argument("--directed", action="store_true")
    return p


def _provenance(args, argv, extra=None):
    config = {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items()}
    config = {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in config.items()}
    out = {
        "command": args.command,
        "argv": list(argv),
        "config": config,
        "seed": args.seed,
        "version": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "python": platform.python_version(),
    }
    if extra:
        out.update(extra)
    return out


def _log(msg):
    print(msg, file=sys.stderr)


# ---------------------------------------------------------------- generate


def _write_positions(path, X, node_ids):
    if isinstance(X, tuple):
        for p, F in zip(directed_paths(path), X):
            write_embedding_csv(p, F, node_ids)
    else:
        write_embedding_csv(path, X, node_ids)


def _sbm_pi(args):
    if args.pi is not None:
        return args.pi
    Pi = np.full((args.blocks, args.blocks), args.q)
    np.fill_diagonal(Pi, args.p)
    return Pi


def _sbm_sizes(args, k):
    if args.sizes is not None:
        if len(args.sizes) != k:
            raise UsageError(f"--sizes lists {len(args.sizes)} blocks but Pi has {k}")
        return args.sizes
    return [args.n // k + (i < args.n % k) for i in range(k)]


def _directed_positions(P, d=None):
    """Exact factors of a (block) probability matrix via its SVD."""
    U, s, Vt = np.linalg.svd(P)
    d = int(np.sum(s > 1e-12 * max(1.0, s[0]))) if d is None else d
    root = np.sqrt(s[:d])
    return U[:, :d] * root, Vt[:d].T * root


def cmd_generate(args):
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    rng = as_rng(args.seed)
    summary = {"kind": args.kind}
    if args.kind == "er":
        P = np.full((args.n, args.n), args.p)
        A = sample_rdpg(P, seed=rng)
        ids = [str(i) for i in range(args.n)]
        write_edge_list(out / "graph.tsv", A, ids)
        _write_positions(out / "positions.csv", np.full((args.n, 1), np.sqrt(args.p)), ids)
        summary.update(n=args.n, edges=int(A.sum() / 2))
    elif args.kind in ("sbm", "directed-sbm"):
        directed = args.kind == "directed-sbm"
        Pi = _sbm_pi(args)
        sizes = _sbm_sizes(args, Pi.shape[0])
        cfg = SbmConfig(sizes=sizes, Pi=Pi, directed=directed, seed=args.seed)
        A = sample_rdpg(block_probability(cfg.labels, Pi), directed=directed, seed=rng)
        ids = [str(i) for i in range(cfg.n)]
        write_edge_list(out / "graph.tsv", A, ids, directed=directed)
        write_rows_csv(out / "labels.csv", ["node_id", "community"], zip(ids, cfg.labels.tolist()))
        if directed:
            Yl, Yr = _directed_positions(Pi)
            _write_positions(out / "positions", (Yl[cfg.labels], Yr[cfg.labels]), ids)
        else:
            try:
                _write_positions(out / "positions.csv", block_latent_positions(Pi)[cfg.labels], ids)
            except DomainError:
                _log("Pi is indefinite; no latent positions written")
        summary.update(n=cfg.n, edges=int(A.sum() if directed else A.sum() / 2), sizes=sizes)
    elif args.kind == "senate":
        A, labels = senate_graph(seed=rng)
        ids = [str(i) for i in range(A.shape[0])]
        write_edge_list(out / "graph.tsv", A, ids, directed=True)
        write_rows_csv(out / "labels.csv", ["node_id", "community"], zip(ids, labels.tolist()))
        Yl, Yr = _directed_positions(SENATE_PI)
        _write_positions(out / "positions", (Yl[labels], Yr[labels]), ids)
        summary.update(n=A.shape[0], edges=int(A.sum()))
    elif args.kind == "dynamic-sbm":
        summary.update(_generate_dynamic_sbm(args, rng))
    else:
        summary.update(_generate_growing_er(args, rng))
    write_json(out / "provenance.json", _provenance(args, sys.argv[1:], {"summary": summary}))
    return EXIT_OK, summary


def _generate_dynamic_sbm(args, rng):
    Pi = _sbm_pi(args)
    k = Pi.shape[0]
    labels = community_labels(_sbm_sizes(args, k))
    nu = block_latent_positions(Pi)
    ids = [str(i) for i in range(labels.size)]
    snap_dir = args.out / "snapshots"
    snap_dir.mkdir(exist_ok=True)
    snaps = []
    for t in range(args.steps + 1):
        if t > 0:
            labels = dynamic_sbm_step(labels, seed=rng, n_communities=k)
        A = sample_rdpg(block_probability(labels, Pi), seed=rng)
        edges, pos = snap_dir / f"t{t:04d}.tsv", snap_dir / f"t{t:04d}_pos.csv"
        write_edge_list(edges, A, ids)
        write_embedding_csv(pos, nu[labels], ids)
        snaps.append({"t": t, "edges": edges, "positions": pos})
    write_manifest(args.out / "manifest.json", snaps)
    return {"n": labels.size, "steps": args.steps}


def _generate_growing_er(args, rng):
    n_total = args.n + args.steps
    upper = np.triu(rng.random((n_total, n_total)) < args.p, 1).astype(float)
    A_full = upper + upper.T
    ids = [str(i) for i in range(n_total)]
    snap_dir = args.out / "snapshots"
    snap_dir.mkdir(exist_ok=True)
    snaps = []
    for t in range(args.steps + 1):
        n = args.n + t
        edges, pos = snap_dir / f"t{t:04d}.tsv", snap_dir / f"t{t:04d}_pos.csv"
        write_edge_list(edges, A_full[:n, :n], ids[:n])
        write_embedding_csv(pos, np.full((n, 1), np.sqrt(args.p)), ids[:n])
        snaps.append({"t": t, "edges": edges, "positions": pos})
    write_manifest(args.out / "manifest.json", snaps)
    return {"n_initial": args.n, "n_final": n_total, "steps": args.steps}


# ------------------------------------------------------------------- embed


def _solver_config(args, d, init="spectral"):
    return SolverConfig(
        d=d,
        max_iters=args.max_iters,
        tol_rel_cost=args.tol,
        step_size=args.step_size,
        init=init,
        seed=args.seed,
    )


def _armijo(args):
    return ArmijoConfig(
        initial_step=args.armijo_initial,
        beta=args.armijo_beta,
        c=args.armijo_c,
        max_backtracks=args.armijo_backtracks,
    )


def _elbow(A, d_max, directed):
    """Elbow dimension and the scree values it was read from."""
    d_max = min(d_max, A.shape[0])
    if d_max < 1:
        raise UsageError("--d-max must be >= 1")
    if directed:
        scree = np.linalg.svd(A, compute_uv=False)[: d_max + 1]
        gaps = scree[:-1] - scree[1:]
        d = int(np.argmax(gaps)) + 1 if gaps.size and np.any(gaps > 0) else 1
    else:
        d = elbow_dimension(A, d_max)
        scree = np.sort(np.abs(np.linalg.eigvalsh(A)))[::-1][: d_max + 1]
    return d, scree


def _resolve_dim(args, A, directed):
    if args.d != "auto":
        return args.d
    return _elbow(A, args.d_max, directed)[0]


def cmd_embed(args):
    directed = args.directed or args.method == "rgd"
    graph = read_edge_list(args.input, directed=directed)
    A, ids = graph.A, graph.node_ids
    M = graph.M if args.mask is None else read_mask(args.mask, ids, directed)
    d = _resolve_dim(args, A, directed)
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    if args.method == "ase":
        if directed:
            emb = ase_directed(M * A, d, ids)
            cost = cost_directed(A, M, emb.Xl, emb.Xr)
        else:
            emb = ase(M * A, d, ids)
            cost = cost_undirected(A, M, emb.X)
        report = {"final_cost": cost, "iters": 0, "converged": True}
        trace = [cost]
        violations = None
    else:
        cfg = _solver_config(args, d, args.init)
        if args.method == "gd":
            emb, rep = solve_gd(A, M, cfg, node_ids=ids)
        elif args.method == "bcd":
            emb, rep = solve_bcd(A, cfg, M=M, node_ids=ids)
        else:
            armijo = None if args.step_size is not None else _armijo(args)
            emb, rep = solve_riemannian_gd(A, M, cfg, armijo=armijo, node_ids=ids)
        report = rep.to_dict()
        trace = rep.trace
        violations = rep.violations if args.method == "rgd" else None
    report.update(method=args.method, d=d, n=len(ids), directed=directed)
    if isinstance(emb, DirectedEmbedding):
        out_path, in_path = directed_paths(out / "embedding")
        write_embedding_csv(out_path, emb.Xl, ids)
        write_embedding_csv(in_path, emb.Xr, ids)
    else:
        write_embedding_csv(out / "embedding.csv", emb.X, ids)
    write_json(out / "report.json", report)
    if args.trace:
        write_trace_csv(out / "trace.csv", trace)
    if violations is not None:
        write_rows_csv(out / "violations.csv", ["iter", "max_violation"], enumerate(violations))
    write_json(out / "provenance.json", _provenance(args, sys.argv[1:]))
    code = EXIT_OK if report["converged"] else EXIT_MAX_ITERS
    return code, report


# ------------------------------------------------------------------- track


def _load_snapshot(snap, directed):
    graph = read_edge_list(snap["edges"], directed=directed)
    M = None
    if snap.get("mask") is not None:
        M = read_mask(snap["mask"], graph.node_ids, directed)
    return graph, M


def _reorder(A, src_ids, dst_ids):
    index = {v: i for i, v in enumerate(src_ids)}
    idx = [index[v] for v in dst_ids]
    return A[np.ix_(idx, idx)]


def _initial_state(args, A, M, ids, directed, filt):
    d = _resolve_dim(args, A, directed)
    cfg = _solver_config(args, d)
    if args.method == "gd":
        emb, rep = solve_gd(A, M, cfg, node_ids=ids)
    elif args.method == "bcd":
        emb, rep = solve_bcd(A, cfg, M=M, node_ids=ids)
    else:
        emb, rep = solve_riemannian_gd(A, M, cfg, armijo=_armijo(args), node_ids=ids)
    return TrackerState(
        embedding=emb,
        filter=filt,
        method=args.method,
        steps=args.steps,
        step_size=args.step_size,
        armijo=_armijo(args),
        t=0,
        report=rep,
    )


def _pair(emb):
    if isinstance(emb, DirectedEmbedding):
        return emb.Xl, emb.Xr
    return emb.X, emb.X


def cmd_track(args):
    directed, snaps = read_manifest(args.manifest)
    if not snaps:
        raise FormatError(f"{args.manifest}: manifest lists no snapshots")
    if args.method == "rgd" and not directed:
        directed = True
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    if args.save_embeddings:
        (out / "embeddings").mkdir(exist_ok=True)
    filt = FilterState(mode=args.filter, m=args.window, beta=args.beta)
    rows = []
    state = baseline = None
    flagged = 0
    for snap in snaps:
        t = snap["t"]
        try:
            graph, M = _load_snapshot(snap, directed)
        except (FormatError, ContractError, DomainError, OSError) as exc:
            raise FormatError(f"step {t}: {exc}") from None
        A, ids = graph.A, graph.node_ids
        if state is None:
            Mi = graph.M if M is None else M
            B = filter_step(filt, A)
            state = _initial_state(args, B, Mi, ids, directed, filt)
            if args.baseline == "ls":
                baseline = copy.deepcopy(state.embedding)
        else:
            current = set(state.node_ids)
            gone = [v for v in state.node_ids if v not in set(ids)]
            if gone:
                state = remove_node(state, gone)
                if baseline is not None:
                    baseline = _drop_rows(baseline, gone)
            new = [v for v in ids if v not in current]
            order = state.node_ids + new
            A = _reorder(A, ids, order)
            if M is not None:
                M = _reorder(M, ids, order)
            if new:
                n_old = state.n
                a_out = A[n_old:, :n_old]
                a_in = A[:n_old, n_old:].T
                state = add_node(state, new, a_out, a_in if directed else None)
                if baseline is not None:
                    baseline = _append_ls(baseline, new, a_out, a_in, directed)
            state = track_step(state, A, M)
            if not state.report.converged and state.report.message:
                flagged += 1
                _log(state.report.message)
            ids = order
        Xl, Xr = _pair(state.embedding)
        Mm = graph.M if M is None else M
        cost = cost_directed(A, Mm, Xl, Xr) if directed else cost_undirected(A, Mm, Xl)
        row = [t, cost]
        P = _truth(snap, ids, directed)
        for X in [state.embedding] + ([baseline] if baseline is not None else []):
            if P is None:
                row += [float("nan"), float("nan")]
            else:
                L, R = _pair(X)
                row += [tracking_error(L, P, Xr=R), tracking_error(L, P, True, Xr=R)]
        row.append(len(ids))
        rows.append(row)
        if args.save_embeddings:
            _save_embedding(out / "embeddings" / f"t{t:04d}", state.embedding)
    header = ["t", "cost", "error", "error_normalized"]
    if baseline is not None:
        header += ["error_ls", "error_ls_normalized"]
    header.append("n_nodes")
    write_rows_csv(out / "metrics.csv", header, rows)
    _save_embedding(out / "embedding", state.embedding)
    errors = np.array([r[2] for r in rows])
    summary = {"steps": len(rows), "final_cost": rows[-1][1], "flagged_steps": flagged}
    if len(errors) > 11 and np.all(np.isfinite(errors)):
        summary["bounded_error_ratio"] = float(np.median(errors[10:]) / np.median(errors[:11]))
    write_json(out / "report.json", summary)
    write_json(out / "provenance.json", _provenance(args, sys.argv[1:]))
    return (EXIT_DIVERGED if flagged else EXIT_OK), summary


def _truth(snap, ids, directed):
    if snap.get("positions") is None:
        return None
    Y = read_positions(snap["positions"], ids)
    if isinstance(Y, tuple):
        return Y[0] @ Y[1].T
    return Y @ Y.T


def _drop_rows(emb, gone):
    keep = [i for i, v in enumerate(emb.node_ids) if v not in set(gone)]
    ids = [emb.node_ids[i] for i in keep]
    if isinstance(emb, DirectedEmbedding):
        return DirectedEmbedding(emb.Xl[keep], emb.Xr[keep], ids)
    return Embedding(emb.X[keep], ids)


def _append_ls(emb, new, a_out, a_in, directed):
    if directed:
        tl, _ = out_of_sample(emb.Xr, a_out)
        tr, _ = out_of_sample(emb.Xl, a_in)
        return DirectedEmbedding(
            np.vstack([emb.Xl, tl]), np.vstack([emb.Xr, tr]), emb.node_ids + list(new)
        )
    theta, _ = out_of_sample(emb.X, a_out)
    return Embedding(np.vstack([emb.X, theta]), emb.node_ids + list(new))


def _save_embedding(prefix, emb):
    if isinstance(emb, DirectedEmbedding):
        out_path, in_path = directed_paths(prefix)
        write_embedding_csv(out_path, emb.Xl, emb.node_ids)
        write_embedding_csv(in_path, emb.Xr, emb.node_ids)
    else:
        write_embedding_csv(f"{prefix}.csv", emb.X, emb.node_ids)


# -------------------------------------------------------------------- eval


def _load_embedding(path, directed):
    if directed:
        out_path, in_path = directed_paths(path)
        Xl, ids = read_embedding_csv(out_path)
        Xr, ids_r = read_embedding_csv(in_path)
        if ids != ids_r:
            raise ContractError(f"{path}: outgoing and incoming files list different nodes")
        return (Xl, Xr), ids
    return read_embedding_csv(path)


def cmd_eval(args):
    X, ids = _load_embedding(args.embedding, args.directed)
    result = {"procrustes_sq": None, "cost": None, "error": None, "error_normalized": None}
    if args.reference is not None:
        Y, ref_ids = _load_embedding(args.reference, args.directed)
        if set(ref_ids) != set(ids):
            raise ContractError("node ids differ between the embedding and the reference")
        index = {v: i for i, v in enumerate(ref_ids)}
        idx = [index[v] for v in ids]
        if args.directed:
            Y = (Y[0][idx], Y[1][idx])
            if Y[0].shape != X[0].shape:
                raise ContractError("embedding and reference dimensions differ")
            dist2, _ = procrustes_distance(np.vstack(X), np.vstack(Y))
            P = Y[0] @ Y[1].T
            L, R = X
        else:
            Y = Y[idx]
            if Y.shape != X.shape:
                raise ContractError("embedding and reference dimensions differ")
            dist2, _ = procrustes_distance(X, Y)
            P = Y @ Y.T
            L = R = X
        result.update(
            procrustes_sq=dist2,
            error=tracking_error(L, P, Xr=R),
            error_normalized=tracking_error(L, P, True, Xr=R),
        )
    if args.graph is not None:
        graph = read_edge_list(args.graph, directed=args.directed, node_ids=ids)
        M = graph.M if args.mask is None else read_mask(args.mask, ids, args.directed)
        if args.directed:
            result["cost"] = cost_directed(graph.A, M, X[0], X[1])
        else:
            result["cost"] = cost_undirected(graph.A, M, X)
    args.out.mkdir(parents=True, exist_ok=True)
    write_json(args.out / "eval.json", result)
    write_json(args.out / "provenance.json", _provenance(args, sys.argv[1:]))
    return EXIT_OK, result


# ------------------------------------------------------------------- elbow


def cmd_elbow(args):
    graph = read_edge_list(args.input, directed=args.directed)
    d, scree = _elbow(graph.A, args.d_max, args.directed)
    result = {"d": d, "scree": scree.tolist()}
    args.out.mkdir(parents=True, exist_ok=True)
    write_json(args.out / "elbow.json", result)
    write_json(args.out / "provenance.json", _provenance(args, sys.argv[1:]))
    return EXIT_OK, result


COMMANDS = {
    "generate": cmd_generate,
    "embed": cmd_embed,
    "track": cmd_track,
    "eval": cmd_eval,
    "elbow": cmd_elbow,
}


def _run_one(args):
    """Run a single command and map errors to exit codes."""
    ctx = contextlib.nullcontext()
    if args.deterministic:
        from threadpoolctl import threadpool_limits

        ctx = threadpool_limits(limits=1)
    try:
        with ctx:
            return COMMANDS[args.command](args)
    except UsageError as exc:
        return EXIT_USAGE, {"error": str(exc)}
    except DimensionError as exc:
        return EXIT_DIMENSION, {"error": str(exc)}
    except StepSizeError as exc:
        return EXIT_DIVERGED, {"error": str(exc)}
    except (InvalidConfigError, InvalidSizeError) as exc:
        return EXIT_USAGE, {"error": str(exc)}
    except (OSError, FormatError, ContractError, DomainError, UnknownNodeError) as exc:
        return EXIT_INPUT, {"error": str(exc)}
    except RdpgError as exc:
        return EXIT_INPUT, {"error": f"{type(exc).__name__}: {exc}"}


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.replicates < 1 or args.workers < 1:
        parser.error("--replicates and --workers must be >= 1")
    if args.replicates == 1:
        runs = [args]
    else:
        runs = []
        for r in range(args.replicates):
            a = copy.copy(args)
            a.seed = args.seed + r
            a.out = args.out / f"rep{r:03d}"
            runs.append(a)
    if args.workers > 1 and len(runs) > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=args.workers) as pool:
            results = list(pool.map(_run_one, runs))
    else:
        results = [_run_one(a) for a in runs]
    code = max(c for c, _ in results)
    for (c, summary), a in zip(results, runs):
        if c in (EXIT_OK, EXIT_MAX_ITERS):
            if c == EXIT_MAX_ITERS:
                _log(f"rdpgfit {a.command}: stopped at the iteration limit without converging")
        else:
            _log(f"rdpgfit {a.command}: {summary['error']}")
    payload = results[0][1] if len(results) == 1 else [s for _, s in results]
    if args.json:
        print(json.dumps({"exit_code": code, "result": payload}, default=_jsonable, sort_keys=True))
    elif code in (EXIT_OK, EXIT_MAX_ITERS):
        print(json.dumps(payload, default=_jsonable, sort_keys=True))
    return code


def _jsonable(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return str(obj)


if __name__ == "__main__":
    sys.exit(main())
