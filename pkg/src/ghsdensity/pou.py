"""Lipschitz partition of unity subordinate to the scale-m decomposition.

The raw cutoffs are clamped affine functions of internal distance:
``phi_j = max(1 - 2^(m+6) d(., S_j), 0)``, the same for ``T_j``, and
``psi = min(2^(m+8) d(., E_m u F_m), 1)``. Cutoffs are stored sparsely since
each one vanishes outside a thin neighbourhood of its piece.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import PartitionGapError

SUM_TOL = 1e-12


@dataclass
class Cutoff:
    """Sparse vertex function: ``values`` on ``ids`` (sorted), zero elsewhere."""
    ids: np.ndarray
    values: np.ndarray

    def dense(self, n):
        out = np.zeros(n)
        out[self.ids] = self.values
        return out

    def support(self):
        return self.ids[self.values > 0]


@dataclass
class PartitionOfUnity:
    m: int
    psi: np.ndarray
    phi: dict                         # label -> Cutoff
    varphi: dict                      # label -> Cutoff
    raw_psi: np.ndarray
    raw_phi: dict = field(default_factory=dict)
    raw_varphi: dict = field(default_factory=dict)
    raw_sum: np.ndarray = None

    def functions(self):
        """Iterate ``(name, Cutoff or dense array)`` over the normalized family."""
        yield "psi", self.psi
        for j, c in self.phi.items():
            yield f"phi:{j}", c
        for j, c in self.varphi.items():
            yield f"varphi:{j}", c

    def total(self, n):
        s = self.psi.copy()
        for fam in (self.phi, self.varphi):
            for c in fam.values():
                s[c.ids] += c.values
        return s

    def to_dict(self):
        def enc(fam):
            return {str(j): {"ids": c.ids.tolist(), "values": c.values.tolist()}
                    for j, c in fam.items()}
        nz = np.flatnonzero(self.psi)
        return {"m": self.m,
                "psi": {"ids": nz.tolist(), "values": self.psi[nz].tolist()},
                "phi": enc(self.phi), "varphi": enc(self.varphi)}


def _clamped_cutoff(g, sources, slope):
    """``max(1 - slope * d(., sources), 0)`` on the vertices where it is positive."""
    sources = np.asarray(sources, dtype=np.int64)
    if len(sources) == 0:
        return Cutoff(np.zeros(0, np.int64), np.zeros(0))
    ids, d, _ = g.search(sources, 1.0 / slope, allowed=g.domain)
    vals = np.maximum(1.0 - slope * d, 0.0)
    keep = vals > 0
    order = np.argsort(ids[keep], kind="stable")
    return Cutoff(ids[keep][order], vals[keep][order])


def raw_cutoffs(g, dec):
    """Raw ``psi`` (dense) and the sparse raw ``phi_j``, ``varphi_j`` families."""
    m = dec.m
    EF = dec.E | dec.F
    psi = np.zeros(g.n)
    if EF.any():
        slope = 2.0 ** (m + 8)
        ids, d, _ = g.search(np.flatnonzero(EF), 1.0 / slope, allowed=g.domain)
        psi[g.domain] = 1.0
        psi[ids] = np.minimum(slope * d, 1.0)
    else:
        psi[g.domain] = 1.0
    slope = 2.0 ** (m + 6)
    phi = {j: _clamped_cutoff(g, dec.S[j], slope) for j in dec.D if len(dec.S[j])}
    varphi = {j: _clamped_cutoff(g, dec.T[j], slope) for j in dec.D if len(dec.T[j])}
    return psi, phi, varphi


def build_pou(dec):
    g = dec.g
    psi, phi, varphi = raw_cutoffs(g, dec)
    raw_sum = psi.copy()
    for fam in (phi, varphi):
        for c in fam.values():
            raw_sum[c.ids] += c.values
    dom = g.domain_ids
    low = dom[raw_sum[dom] < 1.0 - SUM_TOL]
    if len(low):
        v = int(low[0])
        raise PartitionGapError(f"raw cutoff sum {raw_sum[v]:.3g} < 1 at vertex {v}",
                                witness={"vertex": v, "sum": float(raw_sum[v])})
    inv = np.zeros(g.n)
    inv[dom] = 1.0 / raw_sum[dom]

    def norm(c):
        return Cutoff(c.ids, c.values * inv[c.ids])

    return PartitionOfUnity(dec.m, psi * inv, {j: norm(c) for j, c in phi.items()},
                            {j: norm(c) for j, c in varphi.items()}, psi, phi, varphi, raw_sum)


def edge_lipschitz(g, f):
    """Largest difference quotient of ``f`` over domain edges."""
    a, b, ell = g.domain_edges()
    if isinstance(f, Cutoff):
        f = f.dense(g.n)
    if len(a) == 0:
        return 0.0
    return float(np.max(np.abs(f[a] - f[b]) / ell))


def verify_pou(pou, dec, raw_sum_cap=None):
    """Sum, support, Lipschitz and raw-sum checks; failures are report entries."""
    from .decomp import neighborhood

    g = dec.g
    m = dec.m
    dom = g.domain_ids
    total = pou.total(g.n)
    sum_err = float(np.max(np.abs(total[dom] - 1.0))) if len(dom) else 0.0
    r = dec.neighborhood_radius
    bad_support = []
    for fam, pieces, tag in ((pou.phi, dec.S, "phi"), (pou.varphi, dec.T, "varphi")):
        for j, c in fam.items():
            nb = neighborhood(g, pieces[j], r)
            if not np.isin(c.support(), nb).all():
                bad_support.append(f"{tag}:{j}")
    if (pou.psi[~dec.omega] > 0).any():
        bad_support.append("psi")
    lip = {name: edge_lipschitz(g, f) for name, f in pou.functions()}
    raw_lip = max([edge_lipschitz(g, c) for fam in (pou.raw_phi, pou.raw_varphi)
                   for c in fam.values()] + [0.0])
    lip_max = max(lip.values())
    raw_max = float(pou.raw_sum[dom].max()) if len(dom) else 0.0
    cap = dec.config.overlap_cap if raw_sum_cap is None else raw_sum_cap
    checks = {
        "sum": sum_err <= SUM_TOL,
        "support": not bad_support,
        "raw_lipschitz": raw_lip <= 2.0 ** (m + 6) * (1 + 1e-9),
        "raw_sum_cap": raw_max <= cap,
    }
    return {"m": m, "sum_error": sum_err, "support_violations": bad_support,
            "lipschitz_max": lip_max, "lipschitz_sum": float(sum(lip.values())),
            "kappa": lip_max / 2.0 ** m, "raw_cutoff_lipschitz": raw_lip,
            "raw_sum_max": raw_max, "raw_sum_cap": cap, "checks": checks,
            "pass": all(checks.values())}


def lipschitz_growth(reports):
    """Ratios of the maximal Lipschitz constants between consecutive scales."""
    reports = sorted(reports, key=lambda r: r["m"])
    return [b["lipschitz_max"] / a["lipschitz_max"] if a["lipschitz_max"] > 0 else np.inf
            for a, b in zip(reports, reports[1:])]
