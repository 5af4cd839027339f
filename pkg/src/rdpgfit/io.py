"""Plain-text file formats: edge lists, masks, snapshot manifests, embeddings and reports.

Edge lists are UTF-8, one ``src<TAB>dst[<TAB>weight]`` per line; node ids are
arbitrary strings indexed in order of first appearance.  A line holding a
single id declares an isolated node and ``#`` starts a comment.  Mask files
use the same syntax and list the UNOBSERVED pairs.
"""

import csv
import json
import os
from pathlib import Path

import numpy as np

from .exceptions import ContractError, FormatError
from .graph import Graph, check_mask, hollow_mask


def _lines(path):
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if line and not line.startswith("#"):
                yield lineno, line.split("\t") if "\t" in line else line.split()


def _parse_pairs(path):
    pairs, order = [], {}
    for lineno, parts in _lines(path):
        if len(parts) == 1:
            order.setdefault(parts[0], len(order))
            continue
        if len(parts) > 3:
            raise FormatError(f"{path}:{lineno}: expected 'src dst [weight]'")
        src, dst = parts[0], parts[1]
        try:
            w = float(parts[2]) if len(parts) == 3 else 1.0
        except ValueError:
            raise FormatError(f"{path}:{lineno}: weight {parts[2]!r} is not a number") from None
        order.setdefault(src, len(order))
        order.setdefault(dst, len(order))
        pairs.append((src, dst, w, lineno))
    return pairs, order


def read_edge_list(path, directed=False, node_ids=None):
    """Read an edge list into a :class:`~rdpgfit.graph.Graph`.

    Parameters
    ----------
    path : str or Path
    directed : bool
        Undirected files may list each edge once or in both directions.
    node_ids : list of str, optional
        Fixed node order; ids in the file must all be listed.

    Raises
    ------
    FormatError
        On malformed lines, self loops or negative weights.
    """
    pairs, order = _parse_pairs(path)
    if node_ids is None:
        node_ids = sorted(order, key=order.get)
    else:
        node_ids = [str(v) for v in node_ids]
        unknown = set(order) - set(node_ids)
        if unknown:
            raise FormatError(f"{path}: node ids not in the node table: {sorted(unknown)[:5]}")
    index = {v: i for i, v in enumerate(node_ids)}
    n = len(node_ids)
    if n == 0:
        raise FormatError(f"{path}: no nodes")
    A = np.zeros((n, n))
    for src, dst, w, lineno in pairs:
        i, j = index[src], index[dst]
        if i == j:
            raise FormatError(f"{path}:{lineno}: self loop on {src!r}")
        if w < 0 or not np.isfinite(w):
            raise FormatError(f"{path}:{lineno}: weights must be finite and nonnegative")
        if not directed and A[j, i] not in (0.0, w):
            raise FormatError(f"{path}:{lineno}: conflicting weights for {src!r}-{dst!r}")
        A[i, j] = w
        if not directed:
            A[j, i] = w
    return Graph(A, node_ids, directed=directed)


def write_edge_list(path, A, node_ids=None, directed=False):
    """Write nonzero entries of ``A`` (upper triangle only when undirected).

    Every node is first declared on its own line so that reading the file
    back recovers the same node table.  Unit weights are omitted.
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    node_ids = [str(i) for i in range(n)] if node_ids is None else [str(v) for v in node_ids]
    src, dst = np.nonzero(A if directed else np.triu(A, 1))
    with open(path, "w", encoding="utf-8") as fh:
        # declare every node first to pin the index order
        for v in node_ids:
            fh.write(f"{v}\n")
        for i, j in zip(src, dst):
            w = A[i, j]
            suffix = "" if w == 1.0 else f"\t{w:.17g}"
            fh.write(f"{node_ids[i]}\t{node_ids[j]}{suffix}\n")


def read_mask(path, node_ids, directed=False):
    """Observation mask with the pairs listed in ``path`` set to 0.

    Undirected masks are symmetrised.  Weights, if present, are ignored.
    """
    pairs, _ = _parse_pairs(path)
    index = {v: i for i, v in enumerate(node_ids)}
    M = hollow_mask(len(node_ids))
    for src, dst, _, lineno in pairs:
        if src not in index or dst not in index:
            raise FormatError(f"{path}:{lineno}: unknown node in mask pair {src!r}-{dst!r}")
        i, j = index[src], index[dst]
        M[i, j] = 0.0
        if not directed:
            M[j, i] = 0.0
    return M


def write_mask(path, M, node_ids=None, directed=False):
    """List the unobserved off-diagonal pairs of ``M``."""
    M = check_mask(M, np.shape(M)[0], directed)
    n = M.shape[0]
    node_ids = [str(i) for i in range(n)] if node_ids is None else [str(v) for v in node_ids]
    U = (M == 0) & ~np.eye(n, dtype=bool)
    if not directed:
        U = np.triu(U, 1)
    with open(path, "w", encoding="utf-8") as fh:
        for i, j in zip(*np.nonzero(U)):
            fh.write(f"{node_ids[i]}\t{node_ids[j]}\n")


def write_embedding_csv(path, X, node_ids=None):
    """CSV with header ``node_id,dim_0,...``."""
    X = np.asarray(X, dtype=float)
    node_ids = [str(i) for i in range(X.shape[0])] if node_ids is None else node_ids
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["node_id"] + [f"dim_{k}" for k in range(X.shape[1])])
        for v, row in zip(node_ids, X):
            w.writerow([v] + [f"{x:.17g}" for x in row])


def read_embedding_csv(path):
    """Inverse of :func:`write_embedding_csv`; returns ``(X, node_ids)``."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or not rows[0] or rows[0][0] != "node_id":
        raise FormatError(f"{path}: missing 'node_id,dim_0,...' header")
    d = len(rows[0]) - 1
    ids, X = [], []
    for lineno, row in enumerate(rows[1:], 2):
        if not row:
            continue
        if len(row) != d + 1:
            raise FormatError(f"{path}:{lineno}: expected {d + 1} fields")
        ids.append(row[0])
        try:
            X.append([float(x) for x in row[1:]])
        except ValueError:
            raise FormatError(f"{path}:{lineno}: non-numeric coordinate") from None
    return np.array(X, dtype=float).reshape(len(ids), d), ids


def directed_paths(prefix):
    """File names ``<prefix>_out.csv`` and ``<prefix>_in.csv`` of a directed embedding."""
    prefix = str(prefix)
    if prefix.endswith(".csv"):
        prefix = prefix[:-4]
    return f"{prefix}_out.csv", f"{prefix}_in.csv"


def write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"{type(obj).__name__} is not JSON serialisable")


def write_trace_csv(path, trace):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["iter", "cost"])
        for k, f in enumerate(trace):
            w.writerow([k, f"{f:.17g}"])


def write_rows_csv(path, header, rows):
    """Generic CSV writer used for per-step metrics."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([f"{x:.17g}" if isinstance(x, float) else x for x in row])


def read_manifest(path):
    """Resolve a snapshot manifest into ``(directed, snapshots)``.

    ``path`` is either a JSON file
    ``{"directed": bool, "snapshots": [{"t", "edges", "mask"?, "positions"?}]}``
    with paths relative to the file, or a directory holding one
    subdirectory per step (sorted by name) with ``edges.tsv`` and optional
    ``mask.tsv`` / ``positions.csv``.  Each snapshot dict carries absolute
    paths (``None`` when absent).
    """
    path = Path(path)
    if path.is_dir():
        directed = False
        meta = path / "manifest.json"
        if meta.exists():
            return read_manifest(meta)
        snaps = []
        for t, sub in enumerate(sorted(p for p in path.iterdir() if p.is_dir())):
            edges = sub / "edges.tsv"
            if not edges.exists():
                raise FormatError(f"step {t} ({sub.name}): missing edges.tsv")
            snaps.append(
                {
                    "t": t,
                    "edges": edges,
                    "mask": sub / "mask.tsv" if (sub / "mask.tsv").exists() else None,
                    "positions": sub / "positions.csv" if (sub / "positions.csv").exists() else None,
                }
            )
        return directed, snaps
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: invalid JSON ({exc})") from None
    if "snapshots" not in doc or not isinstance(doc["snapshots"], list):
        raise FormatError(f"{path}: manifest needs a 'snapshots' list")
    root = path.parent
    snaps = []
    for k, entry in enumerate(doc["snapshots"]):
        if "edges" not in entry:
            raise FormatError(f"{path}: snapshot {k} has no 'edges' file")
        t = entry.get("t", k)
        if snaps and t <= snaps[-1]["t"]:
            raise FormatError(f"{path}: snapshot {k} has non-increasing t={t}")
        resolved = {"t": t}
        for key in ("edges", "mask", "positions"):
            val = entry.get(key)
            resolved[key] = None if val is None else root / val
            if val is not None and not resolved[key].exists():
                raise FormatError(f"step {t}: {key} file {val!r} does not exist")
        snaps.append(resolved)
    return bool(doc.get("directed", False)), snaps


def write_manifest(path, snapshots, directed=False):
    """Write a JSON manifest; snapshot paths are stored relative to its directory."""
    root = Path(path).parent
    entries = []
    for s in snapshots:
        e = {"t": s["t"]}
        for key in ("edges", "mask", "positions"):
            if s.get(key) is not None:
                e[key] = os.path.relpath(s[key], root)
        entries.append(e)
    write_json(path, {"directed": bool(directed), "snapshots": entries})


def read_positions(path, node_ids):
    """Ground-truth latent positions aligned to ``node_ids``.

    Directed positions are stored as a pair ``<stem>_out.csv``/``<stem>_in.csv``
    next to ``path``; otherwise ``path`` itself is read.
    Returns ``X`` or ``(Xl, Xr)``.
    """
    path = Path(path)
    if path.exists():
        X, ids = read_embedding_csv(path)
        return _align(X, ids, node_ids, path)
    out_path, in_path = directed_paths(path)
    if os.path.exists(out_path) and os.path.exists(in_path):
        Xl, ids_l = read_embedding_csv(out_path)
        Xr, ids_r = read_embedding_csv(in_path)
        return _align(Xl, ids_l, node_ids, out_path), _align(Xr, ids_r, node_ids, in_path)
    raise FileNotFoundError(str(path))


def _align(X, ids, node_ids, path):
    index = {v: i for i, v in enumerate(ids)}
    missing = [v for v in node_ids if v not in index]
    if missing:
        raise ContractError(f"{path}: no positions for node(s) {missing[:5]}")
    return X[[index[v] for v in node_ids]]

