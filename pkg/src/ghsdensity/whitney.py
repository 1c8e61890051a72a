"""Whitney-type covering by inner balls and chains of covering balls.

Vertices are grouped into dyadic annuli ``A_k`` by their distance to the
boundary, ``d in [2^-k, 2^-k+1)``. In every annulus a greedy maximal
``2^-k-3``-separated net is picked (ascending vertex id) and each net point
becomes the center of an open inner ball of radius ``2^-k-2``.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .errors import HypothesisViolation, InternalError, ScaleError
from .mmgraph import boundary_distance, set_diameter
from .qhyp import qh_geodesic

SHRINK = 7 / 8
ENLARGE = 8 / 7
DEFAULT_OVERLAP_CAP = 100
DEFAULT_CHAIN_CAP = 200


def annulus_index(d, tol=0.0):
    """Integer ``k`` with ``d`` in ``[2^-k, 2^-k+1)``; rounding noise below a power of two is absorbed."""
    _, e = np.frexp(np.asarray(d, dtype=np.float64) + tol)
    return 1 - e


@dataclass
class WhitneyCover:
    g: object
    k: np.ndarray
    center: np.ndarray
    radius: np.ndarray
    diameter: np.ndarray
    members: list
    shrunk_count: np.ndarray
    triple_count: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False)

    def __len__(self):
        return len(self.center)

    @property
    def N(self):
        return int(self.triple_count.max())

    @property
    def base_ball(self):
        """Ball of maximal diameter (smallest id on ties)."""
        return int(np.argmax(self.diameter))

    def incidence(self):
        """Sparse ball-by-vertex membership matrix."""
        M = self._cache.get("incidence")
        if M is None:
            sizes = np.array([len(m) for m in self.members])
            rows = np.repeat(np.arange(len(self)), sizes)
            cols = np.concatenate(self.members) if len(self.members) else np.zeros(0, np.int64)
            M = csr_matrix((np.ones(len(cols), dtype=np.int32), (rows, cols)),
                           shape=(len(self), self.g.n))
            self._cache["incidence"] = M
        return M

    def vertex_balls(self):
        """CSR (vertex-by-ball) giving the balls containing each vertex."""
        T = self._cache.get("vertex_balls")
        if T is None:
            T = self.incidence().T.tocsr()
            self._cache["vertex_balls"] = T
        return T

    def intersection_graph(self):
        """Sparse adjacency: balls sharing at least one vertex (no self loops)."""
        A = self._cache.get("intersections")
        if A is None:
            M = self.incidence()
            A = (M @ M.T).tocsr()
            A.setdiag(0)
            A.eliminate_zeros()
            A.sort_indices()
            self._cache["intersections"] = A
        return A

    def balls_meeting(self, ids):
        """Sorted ball ids containing at least one vertex of ``ids``."""
        T = self.vertex_balls()
        ids = np.asarray(ids, dtype=np.int64)
        if len(ids) == 0:
            return np.zeros(0, dtype=np.int64)
        return np.unique(T[ids].indices).astype(np.int64)

    def to_dict(self):
        return {
            "n_balls": len(self),
            "N": self.N,
            "base_ball": self.base_ball,
            "balls": [
                {"id": i, "k": int(self.k[i]), "center": int(self.center[i]),
                 "radius": float(self.radius[i]), "diameter": float(self.diameter[i]),
                 "members": self.members[i].tolist()}
                for i in range(len(self))
            ],
        }

    @classmethod
    def from_dict(cls, g, doc):
        balls = doc["balls"]
        members = [np.asarray(b["members"], dtype=np.int64) for b in balls]
        k = np.array([b["k"] for b in balls], dtype=np.int64)
        center = np.array([b["center"] for b in balls], dtype=np.int64)
        radius = np.array([b["radius"] for b in balls], dtype=np.float64)
        diam = np.array([b["diameter"] for b in balls], dtype=np.float64)
        shrunk, triple = _coverage_counts(g, center, radius)
        return cls(g, k, center, radius, diam, members, shrunk, triple)


def _coverage_counts(g, centers, radii):
    shrunk = np.zeros(g.n, dtype=np.int64)
    triple = np.zeros(g.n, dtype=np.int64)
    for c, r in zip(centers, radii):
        ids, d, _ = g.search([c], 3 * r, allowed=g.domain)
        shrunk[ids[d < SHRINK * r - g.tol]] += 1
        triple[ids[d < 3 * r - g.tol]] += 1
    return shrunk, triple


def build_cover(g):
    """Greedy Whitney-type cover of the domain.

    Every non-empty annulus gets a net, so every domain vertex with a finite
    positive boundary distance is covered by a shrunk ball.
    """
    bd = boundary_distance(g).dist
    ok = g.domain & np.isfinite(bd) & (bd > 0)
    if not ok.any():
        raise ScaleError("empty cover: no domain vertex has a positive boundary distance")
    kk = np.full(g.n, np.iinfo(np.int64).min)
    kk[ok] = annulus_index(bd[ok], g.tol)
    tol = g.tol

    ks, centers, radii, diams, members = [], [], [], [], []
    shrunk = np.zeros(g.n, dtype=np.int64)
    triple = np.zeros(g.n, dtype=np.int64)
    covered = np.zeros(g.n, dtype=bool)
    for k in np.unique(kk[ok]):
        annulus = np.flatnonzero(kk == k)
        r = 2.0 ** (-k - 2)
        sep = 2.0 ** (-k - 3)
        for v in annulus:
            if covered[v]:
                continue
            ids, d, _ = g.search([v], 3 * r, allowed=g.domain)
            ball = np.sort(ids[d < r - tol])
            shrunk[ids[d < SHRINK * r - tol]] += 1
            triple[ids[d < 3 * r - tol]] += 1
            near = ids[d < sep - tol]
            covered[near[kk[near] == k]] = True
            ks.append(int(k))
            centers.append(int(v))
            radii.append(r)
            members.append(ball)
            diams.append(set_diameter(g, ball, int(v), reach=r))
    return WhitneyCover(g, np.array(ks), np.array(centers), np.array(radii), np.array(diams),
                        members, shrunk, triple)


# -- verification ------------------------------------------------------------------


def _slack(cover):
    """Additive diameter slack per ball: ``(4h / 2^-k) * 2^-k-1 = 2h``."""
    return 4 * cover.g.h / 2.0 ** (-cover.k) * 2.0 ** (-cover.k - 1)


def ball_boundary_distance(cover):
    bd = boundary_distance(cover.g).dist
    return np.array([bd[m].min() for m in cover.members])


def verify_cover(cover, overlap_cap=DEFAULT_OVERLAP_CAP):
    """Check the four covering properties; returns a dict of pass/fail entries with witnesses."""
    g = cover.g
    tol = g.tol
    report = {}

    uncovered = np.flatnonzero(g.domain & (cover.shrunk_count == 0))
    report["coverage"] = {"pass": len(uncovered) == 0, "violations": int(len(uncovered)),
                          "witness": int(uncovered[0]) if len(uncovered) else None}

    N = cover.N
    worst_v = int(np.argmax(cover.triple_count))
    # the covering property only asks for some finite N; the cap is informational
    report["overlap"] = {"pass": bool(np.isfinite(N) and N > 0), "N": N, "cap": overlap_cap,
                         "within_cap": N <= overlap_cap, "witness": worst_v}

    diam = cover.diameter
    hi = diam + _slack(cover)
    A = cover.intersection_graph().tocoo()
    i, j = A.row, A.col
    bad = diam[j] > 2 * hi[i] + tol
    pairs = np.stack([i[bad], j[bad]], axis=1)
    worst = None
    if len(pairs):
        ratio = diam[pairs[:, 1]] / np.maximum(hi[pairs[:, 0]], 1e-300)
        worst = [int(x) for x in pairs[np.argmax(ratio)]]
    report["comparability"] = {"pass": len(pairs) == 0, "violations": int(len(pairs)),
                               "witness": worst}

    dB = ball_boundary_distance(cover)
    s = 4 * g.h / 2.0 ** (-cover.k)
    lower = diam > (1 + s) * dB + tol
    upper = dB > 4 * hi + tol
    bad = np.flatnonzero(lower | upper)
    witness = None
    if len(bad):
        excess = np.maximum(diam / np.maximum((1 + s) * dB, 1e-300), dB / np.maximum(4 * hi, 1e-300))
        witness = int(bad[np.argmax(excess[bad])])
    report["sandwich"] = {"pass": len(bad) == 0, "violations": int(len(bad)), "witness": witness,
                          "lower_violations": int(lower.sum()),
                          "upper_violations": int(upper.sum())}
    report["pass"] = all(v["pass"] for v in report.values())
    return report


# -- chains --------------------------------------------------------------------------


@dataclass
class Chain:
    balls: list
    enlarged: bool
    link_measure: list
    link_ratio: list
    expanded: bool = False

    @property
    def n_balls(self):
        return len(self.balls)

    def as_dict(self):
        return {"balls": self.balls, "n_balls": self.n_balls, "enlarged": self.enlarged,
                "link_measure": self.link_measure, "link_ratio": self.link_ratio,
                "expanded": self.expanded}


def set_distance(g, a_ids, b_ids, limit=np.inf):
    """Internal distance between two vertex sets (``inf`` if beyond ``limit``)."""
    b_mask = g.mask(b_ids)
    ids, d, _ = g.search(a_ids, limit, allowed=g.domain)
    hit = b_mask[ids]
    return float(d[hit].min()) if hit.any() else np.inf


def check_chain_hypotheses(cover, a, b, c):
    """Raise :class:`HypothesisViolation` unless the two balls satisfy the chain hypotheses."""
    g = cover.g
    da, db = cover.diameter[a], cover.diameter[b]
    slack = 2 * g.h
    if db > c * (da + slack) + g.tol or da > c * (db + slack) + g.tol:
        raise HypothesisViolation(f"balls {a} and {b} have incomparable diameters {da:g}, {db:g}")
    limit = c * da + g.tol
    if a != b and set_distance(g, cover.members[a], cover.members[b], limit) > limit:
        raise HypothesisViolation(f"balls {a} and {b} are farther apart than {c} * diam")
    large = cover.diameter >= da / c - g.tol
    A = cover.intersection_graph()
    idx = np.flatnonzero(large)
    _, lab = connected_components(A[idx][:, idx], directed=False)
    pos = {int(x): i for i, x in enumerate(idx)}
    if a not in pos or b not in pos or lab[pos[a]] != lab[pos[b]]:
        raise HypothesisViolation(f"balls {a} and {b} are not joined by balls of diameter >= diam/{c}")


def _bfs_chain(A, allowed, a, b):
    parent = {a: -1}
    queue = deque([a])
    while queue:
        v = queue.popleft()
        if v == b:
            break
        for u in A.indices[A.indptr[v]:A.indptr[v + 1]]:
            u = int(u)
            if allowed[u] and u not in parent:
                parent[u] = v
                queue.append(u)
    if b not in parent:
        return None
    path = [b]
    while parent[path[-1]] >= 0:
        path.append(parent[path[-1]])
    return path[::-1]


def enlarged_members(cover, i, factor=ENLARGE):
    g = cover.g
    r = factor * cover.radius[i]
    ids, d, _ = g.search([cover.center[i]], r, allowed=g.domain)
    return np.sort(ids[d < r - g.tol])


def build_chain(cover, a, b, c=4.0, cap=DEFAULT_CHAIN_CAP, check=True):
    """Minimal chain of intersecting cover balls from ball ``a`` to ball ``b``.

    Balls meeting the quasihyperbolic geodesic between the two centers are
    collected and a shortest path in their intersection graph is extracted
    (so non-consecutive links are disjoint). Link measures refer to the balls
    enlarged by 8/7.
    """
    a, b = int(a), int(b)
    if check:
        check_chain_hypotheses(cover, a, b, c)
    g = cover.g
    A = cover.intersection_graph()
    expanded = False
    if a == b:
        path = [a]
    else:
        _, geo = qh_geodesic(g, cover.center[a], cover.center[b])
        allowed = np.zeros(len(cover), dtype=bool)
        allowed[cover.balls_meeting(geo)] = True
        allowed[[a, b]] = True
        path = _bfs_chain(A, allowed, a, b)
        if path is None:
            expanded = True
            ring = np.unique(A[np.flatnonzero(allowed)].indices)
            allowed[ring] = True
            path = _bfs_chain(A, allowed, a, b)
            if path is None:
                raise InternalError(f"no chain of intersecting balls joins {a} and {b}")
    if len(path) > cap:
        raise HypothesisViolation(f"chain from {a} to {b} needs {len(path)} balls (cap {cap})")

    big = [enlarged_members(cover, i) for i in path]
    link_measure, link_ratio = [], []
    for i in range(len(path) - 1):
        common = np.intersect1d(big[i], big[i + 1], assume_unique=True)
        mu = g.measure(common)
        link_measure.append(mu)
        link_ratio.append(mu / g.measure(big[i]))
    return Chain([int(x) for x in path], True, link_measure, link_ratio, expanded)


def chain_qh_bound(cover, chain, kappa=2.0):
    """Compare the qh distance of the end centers with ``kappa * N_G``."""
    g = cover.g
    a, b = chain.balls[0], chain.balls[-1]
    dist, _ = qh_geodesic(g, cover.center[a], cover.center[b])
    n = chain.n_balls
    return {"dist_qh": dist, "n_balls": n, "ratio": dist / n, "kappa": kappa,
            "pass": bool(dist <= kappa * n + 1e-9)}
