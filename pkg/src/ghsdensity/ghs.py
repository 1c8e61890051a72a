"""Sampling estimators for the constants the density argument assumes.

All estimators draw their samples one at a time from a seeded generator, so
the first ``n`` samples of a longer run coincide with a run of ``n`` samples
and the reported maxima can only grow with the sample count.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import _kernels
from .errors import ArgumentError, HypothesisViolation
from .mmgraph import ball_members, boundary_distance, set_diameter
from .qhyp import path_length, qh_geodesic
from .sobolev import ball_average

EXHAUSTIVE_LIMIT = 2000


def domain_diameter(g):
    """Double-sweep estimate of the internal diameter of the domain."""
    d = g._cache.get("domain_diam")
    if d is None:
        d0 = g.field([g.domain_ids[0]], allowed=g.domain)
        far = int(np.argmax(np.where(np.isfinite(d0), d0, -1.0)))
        d1 = g.field([far], allowed=g.domain)
        d = float(d1[np.isfinite(d1)].max())
        g._cache["domain_diam"] = d
    return d


def _sample_ball(g, rng):
    x = int(g.domain_ids[rng.integers(len(g.domain_ids))])
    lo, hi = 2 * g.h, max(domain_diameter(g) / 4, 2 * g.h)
    r = float(rng.uniform(lo, hi))
    return x, r


def internal_pair_distance(g, x, y):
    ids, d, _ = g.search([min(x, y)], allowed=g.domain, target=max(x, y))
    if len(ids) == 0 or ids[-1] != max(x, y):
        return np.inf
    return float(d[-1])


# -- doubling --------------------------------------------------------------------------


@dataclass
class DoublingReport:
    constant: float
    n_samples: int
    seed: int
    worst: dict
    radius_range: tuple

    def as_dict(self):
        return asdict(self)


def doubling_constant(g, n_samples, seed):
    rng = np.random.default_rng(seed)
    best, worst = 1.0, {}
    for _ in range(n_samples):
        x, r = _sample_ball(g, rng)
        small = g.measure(ball_members(g, x, r))
        big = g.measure(ball_members(g, x, 2 * r))
        ratio = big / small
        if ratio > best or not worst:
            best = max(best, ratio)
            worst = {"center": x, "radius": r, "ratio": ratio}
    return DoublingReport(best, n_samples, seed, worst,
                          (2 * g.h, max(domain_diameter(g) / 4, 2 * g.h)))


# -- Poincare --------------------------------------------------------------------------


@dataclass
class PoincareReport:
    constant: float
    p: float
    q: float
    sigma: float
    n_balls: int
    seed: int
    per_ball: list
    violations: list = field(default_factory=list)

    def as_dict(self):
        return asdict(self)


def poincare_ratio(g, u, grad, members, p, diam=None):
    """Mean oscillation over ``diam * (mean grad^p)^(1/p)``; returns ``(ratio, lhs, rhs)``."""
    members = np.asarray(members, dtype=np.int64)
    w = g.mu[members]
    mass = w.sum()
    uB = np.dot(u[members], w) / mass
    lhs = float(np.dot(np.abs(u[members] - uB), w) / mass)
    if diam is None:
        diam = set_diameter(g, members)
    rhs = float(diam * (np.dot(grad[members] ** p, w) / mass) ** (1.0 / p))
    if rhs == 0.0:
        return (0.0 if lhs <= 1e-14 else np.inf), lhs, rhs
    return lhs / rhs, lhs, rhs


def poincare_constant(g, functions, p, n_balls, seed):
    """Strong (sigma = 1) 1-p Poincare constant over sampled open balls.

    ``functions`` maps a name to ``(values, upper_gradient)``.
    """
    rng = np.random.default_rng(seed)
    best, per_ball, violations = 0.0, [], []
    for _ in range(n_balls):
        x, r = _sample_ball(g, rng)
        members = ball_members(g, x, r)
        diam = set_diameter(g, members, x, reach=r)
        worst = 0.0
        for name, (u, grad) in functions.items():
            ratio, lhs, rhs = poincare_ratio(g, u, grad, members, p, diam)
            if np.isinf(ratio):
                violations.append({"center": x, "radius": r, "function": name, "lhs": lhs})
                continue
            worst = max(worst, ratio)
        per_ball.append({"center": x, "radius": r, "ratio": worst})
        best = max(best, worst)
    return PoincareReport(best, p, 1.0, 1.0, n_balls, seed, per_ball, violations)


# -- Gehring-Hayman and ball separation ------------------------------------------------------


def _pairs(g, n_samples, seed, exhaustive):
    ids = g.domain_ids
    if exhaustive:
        if len(ids) >= EXHAUSTIVE_LIMIT:
            raise ArgumentError(f"exhaustive mode needs fewer than {EXHAUSTIVE_LIMIT} domain vertices")
        for i in range(len(ids)):
            for j in range(i + 1, len(ids)):
                yield int(ids[i]), int(ids[j])
        return
    rng = np.random.default_rng(seed)
    for _ in range(n_samples):
        x, y = rng.integers(len(ids), size=2)
        yield int(ids[x]), int(ids[y])


def gh_ratio(g, x, y):
    """Metric length of the qh geodesic divided by the internal distance."""
    if x == y:
        return 1.0
    _, path = qh_geodesic(g, x, y)
    return path_length(g, path) / internal_pair_distance(g, x, y)


def gehring_hayman(g, n_samples, seed, exhaustive=False):
    best, worst, count = -np.inf, None, 0
    for x, y in _pairs(g, n_samples, seed, exhaustive):
        count += 1
        if x == y:
            continue
        ratio = gh_ratio(g, x, y)
        if ratio > best:
            best, worst = ratio, (x, y)
    return {"C_GH": float(max(best, 1.0)) if worst is None else float(best),
            "witness": worst, "n_pairs": count}


def separates(g, x, y, removed):
    """True if deleting ``removed`` (mask) disconnects ``x`` from ``y`` inside the domain."""
    if removed[x] or removed[y]:
        return True
    allowed = g.domain & ~removed
    ids, _, _ = g.search([x], allowed=allowed, target=y)
    return len(ids) == 0 or ids[-1] != y


def minimal_separating_scale(g, x, y, z):
    """Smallest ``c`` such that the closed ball ``B(z, c dist(z, boundary))`` separates x from y.

    Deleting the closed ball of radius ``rho`` separates the pair exactly when
    every x-y path passes within ``rho`` of ``z``, so the minimal radius is the
    bottleneck (max-min) value of ``d(z, .)`` over x-y paths.
    """
    dz = boundary_distance(g).dist[z]
    dist = g.field([z], allowed=g.domain)
    _, _, done_ws = g._workspace()
    rho = _kernels.bottleneck_value(g.indptr, g.indices, g.domain, dist, x, y, done_ws)
    if rho == -np.inf:
        return np.inf
    return float(rho / dz)


def minimal_separating_scale_bisect(g, x, y, z):
    """Same quantity as :func:`minimal_separating_scale` by bisection over the
    distinct distances from ``z``, deleting the ball and re-running the search."""
    dz = boundary_distance(g).dist[z]
    ids, d, _ = g.search([z], allowed=g.domain)
    radii = np.unique(d)
    order = np.argsort(d, kind="stable")
    ids_sorted, d_sorted = ids[order], d[order]
    lo, hi = 0, len(radii) - 1
    removed = np.zeros(g.n, dtype=bool)

    def test(i):
        removed[:] = False
        cut = np.searchsorted(d_sorted, radii[i] + g.tol, side="right")
        removed[ids_sorted[:cut]] = True
        return separates(g, x, y, removed)

    if not test(hi):
        return np.inf
    while lo < hi:
        mid = (lo + hi) // 2
        if test(mid):
            hi = mid
        else:
            lo = mid + 1
    return float(radii[lo] / dz)


def ball_separation(g, n_samples, seed, exhaustive=False):
    rng = np.random.default_rng(seed + 1)
    best, worst, count = 0.0, None, 0
    for x, y in _pairs(g, n_samples, seed, exhaustive):
        count += 1
        _, path = qh_geodesic(g, x, y)
        z = int(path[rng.integers(len(path))])
        c = minimal_separating_scale(g, x, y, z)
        if c > best or worst is None:
            best, worst = max(best, c), {"x": x, "y": y, "z": z, "c": c}
    return {"C_BS": float(best), "witness": worst, "n_pairs": count}


def round_up_half(c):
    return math.ceil(2 * c - 1e-12) / 2


@dataclass
class GhsReport:
    C_GH: float
    C_BS: float
    n_samples: int
    seed: int
    gh_witness: object
    bs_witness: object

    @property
    def C(self):
        """GHS constant used downstream: the larger estimate, rounded up to a multiple of 0.5."""
        return round_up_half(max(1.0, self.C_GH, self.C_BS))

    def as_dict(self):
        out = asdict(self)
        out["C"] = self.C
        return out


def ghs_report(g, n_samples, seed, exhaustive=False):
    gh = gehring_hayman(g, n_samples, seed, exhaustive)
    bs = ball_separation(g, n_samples, seed, exhaustive)
    return GhsReport(gh["C_GH"], bs["C_BS"], gh["n_pairs"], seed, gh["witness"], bs["witness"])


# -- Poincare along chains ----------------------------------------------------------------------


def chain_poincare(cover, chain, u, grad, p, m, bound=np.inf):
    """Both sides of the chain estimate ``2^(mp) int_{B_j} |a_j - a_k|^p <= C int_G |grad|^p``.

    ``a_j``, ``a_k`` are the averages of ``u`` over the two end balls and ``G``
    is the union of the (enlarged) chain balls.
    """
    from .whitney import enlarged_members

    g = cover.g
    j, k = chain.balls[0], chain.balls[-1]
    aj = ball_average(g, u, cover.members[j])
    ak = ball_average(g, u, cover.members[k])
    lhs = 2.0 ** (m * p) * g.measure(cover.members[j]) * abs(aj - ak) ** p
    region = np.unique(np.concatenate([enlarged_members(cover, i) for i in chain.balls]))
    rhs = float(np.dot(grad[region] ** p, g.mu[region]))
    if rhs == 0.0:
        ratio = 0.0 if lhs <= 1e-14 else np.inf
    else:
        ratio = lhs / rhs
    out = {"lhs": float(lhs), "rhs": rhs, "ratio": float(ratio), "bound": bound,
           "pass": bool(np.isfinite(ratio) and ratio <= bound)}
    if not np.isfinite(ratio):
        out["witness"] = {"balls": [j, k]}
    return out


def check_hypotheses(g, n_samples, seed):
    """Raise if the sampled GHS constants are not finite."""
    rep = ghs_report(g, n_samples, seed)
    if not (np.isfinite(rep.C_GH) and np.isfinite(rep.C_BS)):
        raise HypothesisViolation("sampled GHS constants are not finite")
    return rep


def chain_pairs(cover, balls, n_pairs, seed, c=4.0):
    """Seeded pairs of ``balls`` that satisfy the chain hypotheses with constant ``c``.

    For each draw the first ball is uniform over ``balls`` and the second is
    uniform over the members of ``balls`` within ``c * diam`` of it whose
    diameter is comparable; draws with no admissible partner are retried.
    """
    from .whitney import set_distance

    g = cover.g
    balls = np.asarray(sorted(balls), dtype=np.int64)
    if len(balls) == 0:
        return []
    rng = np.random.default_rng(seed)
    pairs, tries = [], 0
    vb = cover.vertex_balls()
    while len(pairs) < n_pairs and tries < 20 * n_pairs:
        tries += 1
        a = int(balls[rng.integers(len(balls))])
        da = cover.diameter[a]
        limit = c * da + g.tol
        ids, _, _ = g.search(cover.members[a], limit, allowed=g.domain)
        near = np.unique(vb[ids].indices) if len(ids) else np.zeros(0, np.int64)
        near = np.intersect1d(near, balls)
        slack = 2 * g.h
        ok = [int(b) for b in near
              if cover.diameter[b] <= c * (da + slack) + g.tol
              and da <= c * (cover.diameter[b] + slack) + g.tol
              and set_distance(g, cover.members[a], cover.members[b], limit) <= limit]
        if not ok:
            continue
        pairs.append((a, ok[int(rng.integers(len(ok)))]))
    return pairs


def chain_poincare_sweep(cover, balls, functions, p, m, n_pairs, seed, c=4.0):
    """Largest chain-Poincare ratio over sampled ball pairs and test functions.

    ``functions`` maps a name to ``(values, upper_gradient)``.
    """
    from .errors import HypothesisViolation as _HV
    from .whitney import build_chain

    worst, records, skipped = 0.0, [], 0
    for a, b in chain_pairs(cover, balls, n_pairs, seed, c):
        try:
            chain = build_chain(cover, a, b, c=c)
        except _HV:
            skipped += 1
            continue
        for name, (u, grad) in functions.items():
            res = chain_poincare(cover, chain, u, grad, p, m)
            records.append({"a": a, "b": b, "function": name, "ratio": res["ratio"],
                            "n_balls": chain.n_balls})
            if res["ratio"] > worst or not np.isfinite(res["ratio"]):
                worst = res["ratio"]
    return {"max_ratio": float(worst), "n_pairs": len(records) // max(len(functions), 1),
            "skipped": skipped, "all_finite": bool(all(np.isfinite(r["ratio"]) for r in records)),
            "records": records}
