"""Density construction: approximants ``u_m`` built from the partition of unity.

``u_m = u psi + sum_j a_j phi_j + sum_j a_j varphi_j`` where ``u`` is a
bounded Lipschitz surrogate of the target ``v`` (truncated, normalized and
mollified at scale ``2^(-m-4)``) and ``a_j`` is the average of ``u`` over the
boundary ball ``B_j`` that owns the piece ``S_j`` / ``T_j``.
"""
from __future__ import annotations

import csv
import io
from collections import deque
from dataclasses import asdict, dataclass, field

import numpy as np

from .decomp import DecompositionConfig, decompose
from .errors import ArgumentError, DecompositionError
from .pou import build_pou
from .sobolev import ball_average, discrete_gradient, lp_norm, n1p_norm

DEFAULT_N0 = 5


def truncate_normalize(g, v, T=None):
    """Clamp ``v`` to ``[-T, T]`` (default ``T = max |v|`` on the domain) and divide by ``T``."""
    v = np.asarray(v, dtype=np.float64)
    if T is None:
        T = float(np.max(np.abs(v[g.domain]))) if g.domain.any() else 0.0
    if T <= 0:
        return np.where(g.domain, 0.0, v)
    out = np.clip(v, -T, T) / T
    out[~g.domain] = 0.0
    return out


def mollify(g, v, m):
    """Average of ``v`` over the open inner ball of radius ``2^(-m-4)`` around each vertex."""
    out = np.asarray(v, dtype=np.float64).copy()
    radius = 2.0 ** (-m - 4)
    means = g.ball_means(out, radius)
    out[g.domain] = means[g.domain]
    return out


def build_Dm_prime(cover, dec, N0=DEFAULT_N0):
    """Balls within ``N0`` steps of the boundary family in the intersection graph.

    Returns ``(vertex mask, ball ids)``.
    """
    A = cover.intersection_graph()
    depth = np.full(len(cover), -1)
    queue = deque()
    for b in dec.B:
        depth[b] = 0
        queue.append(b)
    while queue:
        i = queue.popleft()
        if N0 is not None and depth[i] >= N0:
            continue
        for k in A.indices[A.indptr[i]:A.indptr[i + 1]]:
            if depth[k] < 0:
                depth[k] = depth[i] + 1
                queue.append(k)
    balls = np.flatnonzero(depth >= 0)
    mask = np.zeros(cover.g.n, dtype=bool)
    for b in balls:
        mask[cover.members[b]] = True
    return mask, balls


def ball_averages(cover, dec, u):
    """``a_j`` over every labelled boundary ball that owns a nonempty piece."""
    g = cover.g
    out = {}
    for j in dec.D:
        if len(dec.S.get(j, ())) or len(dec.T.get(j, ())):
            out[j] = ball_average(g, u, cover.members[j])
    return out


def build_approximant(u, pou, dec, averages):
    g = dec.g
    um = np.asarray(u, dtype=np.float64) * pou.psi
    for fam in (pou.phi, pou.varphi):
        for j, c in fam.items():
            if j not in averages:
                raise DecompositionError(f"no average a_{j} for a nonempty piece",
                                         witness={"label": int(j)})
            um[c.ids] += averages[j] * c.values
    um[~g.domain] = 0.0
    return um


@dataclass
class ApproximantRow:
    m: int
    err_lp: float
    err_grad_lp: float
    err_total: float
    grad_inf: float
    sup_norm: float
    mu_EF: float
    Dprime_mass: float
    term_outside: float
    term_grad_near: float
    term_v_near: float
    term_inside: float
    terms_sum: float
    mollify_error: float
    n_D: int
    C: float

    def as_dict(self):
        return asdict(self)


@dataclass
class ApproximantReport:
    p: float
    v: str
    rows: list = field(default_factory=list)
    averages: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)

    def as_dict(self):
        return {"p": self.p, "v": self.v, "rows": [r.as_dict() for r in self.rows],
                "averages": {str(m): {str(j): a for j, a in av.items()}
                             for m, av in self.averages.items()},
                "checks": self.checks}

    def to_csv(self):
        buf = io.StringIO()
        names = list(ApproximantRow.__dataclass_fields__)
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(names)
        for r in self.rows:
            w.writerow([repr(getattr(r, k)) if isinstance(getattr(r, k), float) else getattr(r, k)
                        for k in names])
        return buf.getvalue()


def approximation_row(cover, v, p, m, C, N0=DEFAULT_N0, config=None):
    """Run decomposition, partition of unity and the approximant at one scale."""
    g = cover.g
    cfg = config if config is not None else DecompositionConfig(m, C=C)
    dec = decompose(cover, cfg)
    pou = build_pou(dec)
    u = mollify(g, v, m)
    av = ball_averages(cover, dec, u)
    um = build_approximant(u, pou, dec, av)

    v_grad = discrete_gradient(g, v)
    um_grad = discrete_gradient(g, um)
    diff = um - v
    diff_grad = discrete_gradient(g, diff)
    u_diff = u - v
    EF = dec.E | dec.F
    Dp, _ = build_Dm_prime(cover, dec, N0)
    near = (Dp | EF) & g.domain
    outside = g.domain & ~dec.omega

    t1 = lp_norm(g, um, p, outside)
    t2 = lp_norm(g, um_grad, p, near)
    t3 = n1p_norm(g, v, p, near, v_grad)
    t4 = n1p_norm(g, diff, p, dec.omega, diff_grad)
    err_lp = lp_norm(g, diff, p)
    err_grad = lp_norm(g, diff_grad, p)
    row = ApproximantRow(
        m=m, err_lp=err_lp, err_grad_lp=err_grad, err_total=err_lp + err_grad,
        grad_inf=lp_norm(g, um_grad, np.inf), sup_norm=lp_norm(g, um, np.inf),
        mu_EF=g.measure(EF), Dprime_mass=g.measure(Dp & g.domain),
        term_outside=t1, term_grad_near=t2, term_v_near=t3, term_inside=t4,
        terms_sum=t1 + t2 + t3 + t4,
        mollify_error=n1p_norm(g, u_diff, p, dec.omega, discrete_gradient(g, u_diff)),
        n_D=len(dec.D), C=cfg.C)
    return row, av, um


def parse_m_range(text):
    """``"4:7"`` -> ``[4, 5, 6, 7]``; a single integer gives one scale."""
    try:
        if ":" in str(text):
            a, b = str(text).split(":")
            lo, hi = int(a), int(b)
        else:
            lo = hi = int(text)
    except ValueError:
        raise ArgumentError(f"bad scale range {text!r}") from None
    if hi < lo:
        raise ArgumentError(f"empty scale range {text!r}")
    return list(range(lo, hi + 1))


def convergence_experiment(cover, v, p, m_range, C, v_name="", N0=DEFAULT_N0):
    """Rows of the error decomposition for each scale, with the consistency checks."""
    if not 1 < p < np.inf:
        raise ArgumentError("the experiment needs 1 < p < inf")
    g = cover.g
    v = truncate_normalize(g, v)
    rep = ApproximantReport(p=p, v=v_name)
    v_sup = lp_norm(g, v, np.inf)
    for m in m_range:
        row, av, _ = approximation_row(cover, v, p, m, C, N0)
        rep.rows.append(row)
        rep.averages[m] = av
    rows = rep.rows
    rep.checks = {
        "triangle": all(r.err_total <= r.terms_sum + 1e-9 for r in rows),
        "grad_inf_finite": all(np.isfinite(r.grad_inf) for r in rows),
        "sup_norm": all(r.sup_norm <= v_sup + 1e-12 for r in rows),
        "strictly_decreasing": all(b.err_total < a.err_total for a, b in zip(rows, rows[1:])),
        "mu_EF_quarter": (rows[-1].mu_EF <= rows[0].mu_EF / 4) if len(rows) > 1 else True,
    }
    return rep
