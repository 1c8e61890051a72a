"""Quasihyperbolic weights, distances, geodesics and a Gromov delta probe."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateVertexError, NoPathError
from .mmgraph import boundary_distance, predecessors

QH_REL_TOL = 1e-12


def qh_weights(g):
    """Quasihyperbolic weight of every CSR slot (``inf`` if an endpoint is on the boundary).

    Each edge gets the trapezoidal value ``len * (1/d(u) + 1/d(v)) / 2`` with
    ``d`` the distance to the boundary.
    """
    w = g._cache.get("qh_weights")
    if w is not None:
        return w
    d = boundary_distance(g).dist
    bad = g.domain & ~((d > 0) & np.isfinite(d))
    if bad.any():
        v = int(np.flatnonzero(bad)[0])
        raise DegenerateVertexError(f"vertex {v} has boundary distance {d[v]!r}")
    inv = np.zeros(g.n)
    inv[g.domain] = 1.0 / d[g.domain]
    r, c = g.slot_row, g.indices
    w = np.where(g.domain[r] & g.domain[c], g.slot_length * (inv[r] + inv[c]) / 2, np.inf)
    w.setflags(write=False)
    g._cache["qh_weights"] = w
    return w


def qh_weight(g, u, v):
    """Weight of the single edge ``(u, v)``."""
    d = boundary_distance(g).dist
    for x in (u, v):
        if g.boundary[x] or not d[x] > 0:
            raise DegenerateVertexError(f"vertex {x} has zero boundary distance")
    nb = g.neighbors(u)
    i = np.searchsorted(nb, v)
    if i >= len(nb) or nb[i] != v:
        raise NoPathError(f"({u}, {v}) is not an edge")
    ell = g.slot_length[g.indptr[u] + i]
    return float(ell * (1.0 / d[u] + 1.0 / d[v]) / 2)


@dataclass
class QhField:
    """Quasihyperbolic distance from ``source`` (dense, ``inf`` where unreached)."""

    source: np.ndarray
    dist: np.ndarray
    pred: np.ndarray
    boundary_dist: np.ndarray


def qh_field(g, sources, limit=np.inf):
    w = qh_weights(g)
    src = np.atleast_1d(np.asarray(sources, dtype=np.int64))
    dist = g.field(src, limit, allowed=g.domain, weights=w)
    scale = dist[np.isfinite(dist)].max(initial=1.0)
    pred = predecessors(g, dist, weights=w, allowed=g.domain, tol=QH_REL_TOL * max(scale, 1.0))
    return QhField(src, dist, pred, boundary_distance(g).dist)


def _trace_back(g, w, settled, target):
    """Walk predecessors from ``target``; the smallest-id tight neighbour wins."""
    path = [int(target)]
    v = int(target)
    while settled[v] > 0:
        dv = settled[v]
        tol = QH_REL_TOL * max(dv, 1.0)
        best = -1
        for p in range(g.indptr[v], g.indptr[v + 1]):
            u = g.indices[p]
            du = settled[u]
            if not du < dv:
                continue
            if abs(du + w[p] - dv) <= tol:
                best = int(u)
                break  # neighbours are sorted by id
        if best < 0:
            raise NoPathError(f"no tight predecessor at vertex {v}")
        path.append(best)
        v = best
    return path[::-1]


def qh_geodesic(g, x, y):
    """Quasihyperbolic distance and a geodesic vertex path from ``x`` to ``y``.

    The search always runs from the smaller id so the distance is exactly
    symmetric; the path is reversed when needed.
    """
    x, y = int(x), int(y)
    for v in (x, y):
        if g.boundary[v]:
            raise NoPathError(f"vertex {v} lies on the boundary")
    if x == y:
        return 0.0, [x]
    a, b = min(x, y), max(x, y)
    w = qh_weights(g)
    ids, d, _ = g.search([a], allowed=g.domain, weights=w, target=b)
    if len(ids) == 0 or ids[-1] != b:
        raise NoPathError(f"vertices {x} and {y} lie in different components")
    settled = np.full(g.n, np.inf)
    settled[ids] = d
    path = _trace_back(g, w, settled, b)
    if path[0] != a:
        raise NoPathError("predecessor walk did not return to the source")
    if x > y:
        path = path[::-1]
    return float(d[-1]), path


def path_length(g, path, weights=None):
    """Sum of slot weights along a vertex path (edge lengths by default)."""
    if weights is None:
        weights = g.slot_length
    total = 0.0
    for u, v in zip(path[:-1], path[1:]):
        nb = g.neighbors(u)
        i = np.searchsorted(nb, v)
        total += weights[g.indptr[u] + i]
    return total


@dataclass
class GromovReport:
    n_samples: int
    seed: int
    delta: float
    worst_triple: tuple
    note: str = ("lower-bound probe: one geodesic per pair is sampled "
                 "(smallest-id predecessor rule)")

    def as_dict(self):
        return {"n_samples": self.n_samples, "seed": self.seed, "delta": self.delta,
                "worst_triple": list(self.worst_triple), "note": self.note}


def triangle_thinness(g, x, y, z):
    """max over w on the x-y geodesic of its qh distance to the other two sides."""
    if x == y:
        return 0.0
    _, gxy = qh_geodesic(g, x, y)
    _, gzy = qh_geodesic(g, z, y)
    _, gxz = qh_geodesic(g, x, z)
    others = np.unique(np.array(gzy + gxz, dtype=np.int64))
    field = g.field(others, allowed=g.domain, weights=qh_weights(g))
    return float(field[np.array(gxy)].max())


def gromov_delta(g, n_samples, seed):
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    rng = np.random.default_rng(seed)
    triples = rng.choice(g.domain_ids, size=(n_samples, 3))
    best, worst = -1.0, None
    for x, y, z in triples:
        delta = triangle_thinness(g, int(x), int(y), int(z))
        if delta > best:
            best, worst = delta, (int(x), int(y), int(z))
    return GromovReport(n_samples, seed, max(best, 0.0), worst)
