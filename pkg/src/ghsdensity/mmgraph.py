"""Finite metric measure graphs and the shortest-path primitives built on them.

A :class:`MetricMeasureGraph` carries the ambient space (all vertices), the
domain (non-boundary vertices), vertex masses and edge lengths. Curves are
edge paths, so every length-type quantity is a graph shortest path:

* distance to the boundary runs through the full graph;
* the internal metric only uses domain vertices.
"""
from __future__ import annotations

import hashlib
import json
import re
import threading
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from . import _kernels
from .errors import ArgumentError, ConfigurationError, GraphFormatError

REL_TOL = 1e-9


class MetricMeasureGraph:
    """Immutable weighted graph with vertex measure and a boundary flag.

    Parameters
    ----------
    mu : (n,) array of positive vertex masses
    boundary : (n,) bool array, True for vertices on the boundary
    edges : (m, 2) int array of undirected edges
    lengths : (m,) array of positive edge lengths
    xy : optional (n, 2) coordinates, carried for plotting only
    """

    def __init__(self, mu, boundary, edges, lengths, xy=None):
        mu = np.asarray(mu, dtype=np.float64)
        boundary = np.asarray(boundary, dtype=bool)
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        lengths = np.asarray(lengths, dtype=np.float64)
        n = mu.shape[0]
        _validate(n, mu, boundary, edges, lengths)

        self.n = n
        self.mu = mu
        self.boundary = boundary
        self.edges = edges
        self.lengths = lengths
        self.xy = None if xy is None else np.asarray(xy, dtype=np.float64)
        for arr in (self.mu, self.boundary, self.edges, self.lengths):
            arr.setflags(write=False)

        self.domain = ~boundary
        self.domain.setflags(write=False)
        self.domain_ids = np.flatnonzero(self.domain)
        self.boundary_ids = np.flatnonzero(boundary)

        # CSR with both orientations; neighbours sorted by id within each row
        rows = np.concatenate([edges[:, 0], edges[:, 1]])
        cols = np.concatenate([edges[:, 1], edges[:, 0]])
        eid = np.concatenate([np.arange(len(edges)), np.arange(len(edges))])
        order = np.lexsort((cols, rows))
        self.indices = cols[order]
        self.slot_edge = eid[order]
        self.slot_row = rows[order]
        self.indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(rows, minlength=n), out=self.indptr[1:])
        self.slot_length = lengths[self.slot_edge]

        self.h = float(lengths.min()) if len(lengths) else 0.0
        self._local = threading.local()
        self._cache = {}
        self.diameter = self._estimate_diameter()
        self.tol = REL_TOL * max(self.diameter, self.h, 1e-300)

    # -- search plumbing -------------------------------------------------
    def _workspace(self):
        ws = getattr(self._local, "ws", None)
        if ws is None:
            ws = (np.full(self.n, np.inf), np.zeros(self.n, dtype=np.int64),
                  np.zeros(self.n, dtype=bool))
            self._local.ws = ws
        return ws

    def search(self, sources, limit=np.inf, *, offsets=None, allowed=None, weights=None,
               target=-1):
        """Bounded multi-source shortest-path search.

        Returns ``(ids, dist, label)`` for every vertex settled within
        ``limit``; ``label`` indexes the source that reached the vertex.
        ``allowed`` defaults to the whole graph, ``weights`` (one per CSR
        slot) to the edge lengths.
        """
        sources = np.atleast_1d(np.asarray(sources, dtype=np.int64))
        if offsets is None:
            offsets = np.zeros(len(sources))
        else:
            offsets = np.asarray(offsets, dtype=np.float64)
        if allowed is None:
            allowed = self._all_mask()
        if weights is None:
            weights = self.slot_length
        dist_ws, label_ws, done_ws = self._workspace()
        return _kernels.bounded_search(self.indptr, self.indices, weights, allowed, sources,
                                       offsets, float(limit), int(target), dist_ws, label_ws,
                                       done_ws)

    def field(self, sources, limit=np.inf, *, offsets=None, allowed=None, weights=None):
        """Dense version of :meth:`search`; unreached vertices get ``inf``."""
        ids, d, _ = self.search(sources, limit, offsets=offsets, allowed=allowed, weights=weights)
        out = np.full(self.n, np.inf)
        out[ids] = d
        return out

    def ball_means(self, values, radius, allowed=None):
        if allowed is None:
            allowed = self.domain
        dist_ws, label_ws, done_ws = self._workspace()
        return _kernels.ball_means(self.indptr, self.indices, self.slot_length, allowed,
                                   np.asarray(values, dtype=np.float64), self.mu, float(radius),
                                   dist_ws, label_ws, done_ws)

    def reachable(self, sources, allowed=None):
        """Mask of vertices joined to ``sources`` by paths through ``allowed`` vertices."""
        if allowed is None:
            allowed = self.domain
        out = np.zeros(self.n, dtype=bool)
        _kernels.flood_fill(self.indptr, self.indices, allowed,
                            np.atleast_1d(np.asarray(sources, dtype=np.int64)), out)
        return out

    def _all_mask(self):
        mask = self._cache.get("all")
        if mask is None:
            mask = np.ones(self.n, dtype=bool)
            self._cache["all"] = mask
        return mask

    def _estimate_diameter(self):
        if self.n <= 1 or len(self.edges) == 0:
            return 0.0
        start = int(self.domain_ids[0]) if len(self.domain_ids) else 0
        d0 = self.field([start])
        far = int(np.argmax(np.where(np.isfinite(d0), d0, -1.0)))
        d1 = self.field([far])
        return float(d1[np.isfinite(d1)].max())

    def neighbors(self, v):
        return self.indices[self.indptr[v]:self.indptr[v + 1]]

    def domain_adjacency(self):
        """Sparse adjacency of the domain-induced subgraph (cached)."""
        adj = self._cache.get("domain_adj")
        if adj is None:
            keep = self.domain[self.slot_row] & self.domain[self.indices]
            adj = csr_matrix((np.ones(int(keep.sum())), (self.slot_row[keep], self.indices[keep])),
                             shape=(self.n, self.n))
            self._cache["domain_adj"] = adj
        return adj

    def domain_edges(self):
        """Undirected edges with both endpoints in the domain: ``(u, v, length)``."""
        keep = self.domain[self.edges[:, 0]] & self.domain[self.edges[:, 1]]
        return self.edges[keep, 0], self.edges[keep, 1], self.lengths[keep]

    def mask(self, ids):
        out = np.zeros(self.n, dtype=bool)
        out[np.asarray(ids, dtype=np.int64)] = True
        return out

    def measure(self, ids_or_mask):
        arr = np.asarray(ids_or_mask)
        if arr.dtype == bool:
            return float(self.mu[arr].sum())
        return float(self.mu[arr.astype(np.int64)].sum())

    # -- derived graphs and serialisation -----------------------------------
    def rescaled(self, factor):
        return MetricMeasureGraph(self.mu, self.boundary, self.edges, self.lengths * factor,
                                  None if self.xy is None else self.xy * factor)

    def to_json(self):
        lines = ['{"vertices": [']
        for v in range(self.n):
            rec = {"id": v, "mu": float(self.mu[v]), "boundary": bool(self.boundary[v])}
            if self.xy is not None:
                rec["xy"] = [float(self.xy[v, 0]), float(self.xy[v, 1])]
            lines.append(json.dumps(rec) + ("," if v < self.n - 1 else ""))
        lines.append('],')
        lines.append('"edges": [')
        m = len(self.edges)
        for i in range(m):
            rec = {"u": int(self.edges[i, 0]), "v": int(self.edges[i, 1]),
                   "len": float(self.lengths[i])}
            lines.append(json.dumps(rec) + ("," if i < m - 1 else ""))
        lines.append(']}')
        return "\n".join(lines) + "\n"

    def content_hash(self):
        h = self._cache.get("hash")
        if h is None:
            h = hashlib.sha256(self.to_json().encode()).hexdigest()
            self._cache["hash"] = h
        return h

    def __repr__(self):
        return (f"MetricMeasureGraph(n={self.n}, domain={len(self.domain_ids)}, "
                f"edges={len(self.edges)}, h={self.h:g})")


def _validate(n, mu, boundary, edges, lengths):
    if boundary.shape != (n,):
        raise GraphFormatError("boundary flags do not match vertex count")
    if lengths.shape[0] != edges.shape[0]:
        raise GraphFormatError("edge lengths do not match edge count")
    bad = np.flatnonzero(~(mu > 0))
    if len(bad):
        raise GraphFormatError(f"vertex {bad[0]}: measure must be positive, got {mu[bad[0]]!r}")
    bad = np.flatnonzero(~(lengths > 0) | ~np.isfinite(lengths))
    if len(bad):
        raise GraphFormatError(f"edge {bad[0]}: length must be positive, got {lengths[bad[0]]!r}")
    if len(edges) and (edges.min() < 0 or edges.max() >= n):
        raise GraphFormatError("edge endpoint out of range")
    if np.any(edges[:, 0] == edges[:, 1]):
        raise GraphFormatError(f"edge {np.flatnonzero(edges[:, 0] == edges[:, 1])[0]} is a loop")
    key = np.sort(edges, axis=1)
    _, first = np.unique(key, axis=0, return_index=True)
    if len(first) != len(edges):
        dup = np.setdiff1d(np.arange(len(edges)), first)[0]
        raise GraphFormatError(f"edge {dup} duplicates an earlier edge")
    if boundary.all():
        raise GraphFormatError("domain (non-boundary vertices) is empty")
    deg = np.bincount(edges.ravel(), minlength=n)
    lonely = np.flatnonzero(boundary & (deg == 0))
    if len(lonely):
        raise GraphFormatError(f"boundary vertex {lonely[0]} has no edge")
    if boundary.any():
        touches = boundary[edges[:, 0]] != boundary[edges[:, 1]]
        if not touches.any():
            raise GraphFormatError("no boundary vertex is adjacent to the domain")


# -- JSON loading with line-precise diagnostics --------------------------------

_WS = re.compile(r"\s*")


def _element_line(text, key, index):
    """Line number of element ``index`` of the top-level array stored under ``key``."""
    m = re.search(r'"%s"\s*:\s*\[' % re.escape(key), text)
    if m is None:
        return None
    dec = json.JSONDecoder()
    pos = m.end()
    for _ in range(index):
        pos = _WS.match(text, pos).end()
        _, pos = dec.raw_decode(text, pos)
        pos = _WS.match(text, pos).end() + 1  # skip the comma
    pos = _WS.match(text, pos).end()
    return text.count("\n", 0, pos) + 1


def graph_from_json(text):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GraphFormatError(f"malformed JSON: {exc.msg}", line=exc.lineno) from None
    try:
        verts = doc["vertices"]
        edges = doc["edges"]
    except (KeyError, TypeError):
        raise GraphFormatError("expected an object with 'vertices' and 'edges'") from None

    n = len(verts)
    mu = np.empty(n)
    boundary = np.zeros(n, dtype=bool)
    have_xy = n > 0 and all("xy" in v for v in verts)
    xy = np.empty((n, 2)) if have_xy else None
    seen = np.zeros(n, dtype=bool)
    for i, rec in enumerate(verts):
        try:
            vid = int(rec["id"])
            if not 0 <= vid < n or seen[vid]:
                raise ValueError(f"vertex id {vid} is not a fresh dense id")
            seen[vid] = True
            mu[vid] = float(rec["mu"])
            boundary[vid] = bool(rec.get("boundary", False))
            if have_xy:
                xy[vid] = [float(c) for c in rec["xy"]]
            if not mu[vid] > 0:
                raise ValueError(f"vertex {vid}: measure must be positive, got {rec['mu']!r}")
        except (KeyError, TypeError, ValueError) as exc:
            raise GraphFormatError(str(exc), line=_element_line(text, "vertices", i)) from None

    m = len(edges)
    ed = np.empty((m, 2), dtype=np.int64)
    ln = np.empty(m)
    for i, rec in enumerate(edges):
        try:
            ed[i] = int(rec["u"]), int(rec["v"])
            ln[i] = float(rec["len"])
            if not ln[i] > 0:
                raise ValueError(f"edge {i}: length must be positive, got {rec['len']!r}")
        except (KeyError, TypeError, ValueError) as exc:
            raise GraphFormatError(str(exc), line=_element_line(text, "edges", i)) from None
    return MetricMeasureGraph(mu, boundary, ed, ln, xy)


def load_graph(path):
    with open(path, encoding="utf-8") as fh:
        return graph_from_json(fh.read())


# -- distance fields --------------------------------------------------------------


@dataclass
class DistanceField:
    """Per-vertex distances from a source set, with a predecessor map.

    ``pred[v]`` is the smallest-id neighbour lying on a shortest path to
    ``v`` (``-1`` for sources and unreachable vertices).
    """

    sources: np.ndarray
    dist: np.ndarray
    pred: np.ndarray

    def __getitem__(self, v):
        return self.dist[v]

    def path_to(self, v):
        if not np.isfinite(self.dist[v]):
            raise ArgumentError(f"vertex {v} is not reachable from the sources")
        path = [int(v)]
        while self.pred[path[-1]] >= 0:
            path.append(int(self.pred[path[-1]]))
        return path[::-1]


def predecessors(g, dist, weights=None, allowed=None, tol=None):
    """Smallest-id predecessor on a shortest path, vectorised over CSR slots."""
    if weights is None:
        weights = g.slot_length
    if tol is None:
        tol = g.tol
    r, c = g.slot_row, g.indices
    ok = np.isfinite(dist[r]) & np.isfinite(dist[c]) & (dist[c] > 0)
    if allowed is not None:
        ok &= allowed[r] & allowed[c]
    with np.errstate(invalid="ignore"):
        ok &= np.abs(dist[r] + weights - dist[c]) <= tol
    pred = np.full(g.n, g.n, dtype=np.int64)
    np.minimum.at(pred, c[ok], r[ok])
    pred[pred == g.n] = -1
    return pred


def boundary_distance(g):
    """Distance to the boundary through the full graph (boundary edges usable)."""
    cached = g._cache.get("bdist")
    if cached is not None:
        return cached
    if len(g.boundary_ids) == 0:
        raise ConfigurationError("graph has no boundary vertices")
    dist = g.field(g.boundary_ids)
    df = DistanceField(g.boundary_ids.copy(), dist, predecessors(g, dist))
    df.dist.setflags(write=False)
    g._cache["bdist"] = df
    return df


def _as_ids(g, subset):
    arr = np.asarray(subset)
    if arr.dtype == bool:
        return np.flatnonzero(arr)
    return np.unique(arr.astype(np.int64))


def internal_distance(g, sources, limit=np.inf):
    """Shortest-path distance from ``sources`` using domain vertices only."""
    src = _as_ids(g, np.atleast_1d(sources))
    if len(src) and g.boundary[src].any():
        raise ArgumentError(f"source {src[g.boundary[src]][0]} lies on the boundary")
    dist = g.field(src, limit, allowed=g.domain)
    return DistanceField(src, dist, predecessors(g, dist, allowed=g.domain))


def path_components(g, subset):
    """Connected components of the subgraph induced by ``subset`` (within the domain).

    Components come back as sorted id arrays ordered by their smallest member.
    """
    ids = _as_ids(g, subset)
    if len(ids) == 0:
        return []
    if g.boundary[ids].any():
        raise ArgumentError("subset must lie in the domain")
    sub = g.domain_adjacency()[ids][:, ids]
    ncomp, labels = connected_components(sub, directed=False)
    _, first = np.unique(labels, return_index=True)
    order = np.argsort(first)
    rank = np.empty(ncomp, dtype=np.int64)
    rank[labels[first[order]]] = np.arange(ncomp)
    lab = rank[labels]
    sort = np.argsort(lab, kind="stable")
    cuts = np.searchsorted(lab[sort], np.arange(1, ncomp))
    return np.split(ids[sort], cuts)


# -- inner balls -------------------------------------------------------------------


@dataclass
class InnerBall:
    center: int
    radius: float
    members: np.ndarray
    kind: str = "open"
    scale: float | None = None
    _diam: float | None = field(default=None, repr=False)

    def diameter(self, g):
        if self._diam is None:
            self._diam = set_diameter(g, self.members, self.center, reach=self.radius)
        return self._diam

    def __contains__(self, v):
        i = np.searchsorted(self.members, v)
        return i < len(self.members) and self.members[i] == v


def ball_members(g, center, radius, kind="open"):
    if kind == "open":
        ids, d, _ = g.search([center], radius, allowed=g.domain)
        keep = d < radius - g.tol
    else:
        ids, d, _ = g.search([center], radius + g.tol, allowed=g.domain)
        keep = d <= radius + g.tol
    return np.sort(ids[keep])


def inner_ball(g, center, radius, kind="open"):
    """Ball of the internal metric. ``kind`` is ``"open"`` (strict) or ``"closed"``."""
    if kind not in ("open", "closed"):
        raise ArgumentError(f"unknown ball kind {kind!r}")
    center = int(center)
    if g.boundary[center]:
        raise ArgumentError(f"ball center {center} lies on the boundary")
    if radius < 0:
        raise ArgumentError("radius must be non-negative")
    members = ball_members(g, center, radius, kind)
    if kind == "open" and len(members) == 0:
        members = np.array([center])
    return InnerBall(center, float(radius), members, kind)


def scaled_ball(g, ball, c):
    """The relatively closed scaled ball: points within ``c * diam(ball)`` of its center."""
    radius = c * ball.diameter(g)
    return InnerBall(ball.center, radius, ball_members(g, ball.center, radius, "closed"),
                     "scaled", c)


def _sweep_center(g, members, k=4):
    """Central start vertex for :func:`set_diameter` and a lower bound on the diameter.

    ``k`` members are picked by farthest-point sampling in the internal metric;
    the start is the domain vertex minimising the largest distance to them.
    A central start keeps the fringe bound tight on elongated or ring-shaped
    sets, where an arbitrary member is a poor start.
    """
    d0 = g.field([int(members[0])], allowed=g.domain)
    if not np.isfinite(d0[members]).all():
        return int(members[0]), 0.0
    nearest = np.full(g.n, np.inf)
    worst = np.zeros(g.n)
    x, lower = int(members[np.argmax(d0[members])]), 0.0
    for _ in range(k):
        dx = g.field([x], allowed=g.domain)
        lower = max(lower, float(dx[members].max()))
        nearest = np.minimum(nearest, dx)
        worst = np.maximum(worst, dx)
        x = int(members[np.argmax(nearest[members])])
    worst[~g.domain] = np.inf
    return int(np.argmin(worst)), lower


def set_diameter(g, members, center=None, reach=None):
    """Exact internal diameter of a vertex set.

    Uses the fringe-bound sweep: members are processed by decreasing distance
    from ``center`` and the sweep stops once twice that distance cannot beat
    the best eccentricity found. ``reach`` bounds the distance from ``center``
    to any member when known.
    """
    members = np.asarray(members, dtype=np.int64)
    if len(members) <= 1:
        return 0.0
    best = 0.0
    if center is None:
        center, best = _sweep_center(g, members)
    limit = np.inf if reach is None else reach + g.tol
    ids, d, _ = g.search([center], limit, allowed=g.domain)
    inside = np.isin(ids, members, assume_unique=True)
    if inside.sum() < len(members):
        return np.inf
    far_ids, far_d = ids[inside], d[inside]
    reach = float(far_d.max())
    order = np.argsort(-far_d, kind="stable")
    for idx in order:
        if 2.0 * far_d[idx] <= best + g.tol:
            break
        x = far_ids[idx]
        xi, xd, _ = g.search([x], far_d[idx] + reach + g.tol, allowed=g.domain)
        sel = np.isin(xi, members, assume_unique=True)
        best = max(best, float(xd[sel].max()))
    return best
