"""Discrete Sobolev machinery on a metric measure graph.

The gradient of a vertex function is its largest incident difference quotient
over domain edges, which is an upper gradient along every edge path.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError, InternalError
from .mmgraph import boundary_distance


def discrete_gradient(g, u):
    """``grad[x] = max |u(x) - u(y)| / len(x, y)`` over domain edges at ``x`` (0 if none)."""
    u = np.asarray(u, dtype=np.float64)
    a, b, ell = g.domain_edges()
    q = np.abs(u[a] - u[b]) / ell
    grad = np.zeros(g.n)
    np.maximum.at(grad, a, q)
    np.maximum.at(grad, b, q)
    return grad


def _region_mask(g, region):
    if region is None:
        return g.domain
    arr = np.asarray(region)
    if arr.dtype == bool:
        return arr
    return g.mask(arr)


def lp_norm(g, f, p, region=None):
    """``(sum |f|^p mu)^(1/p)`` over ``region`` (default: the domain); max for ``p = inf``."""
    mask = _region_mask(g, region)
    vals = np.abs(np.asarray(f, dtype=np.float64)[mask])
    if vals.size == 0:
        return 0.0
    if np.isinf(p):
        return float(vals.max())
    if p <= 0:
        raise ArgumentError("p must be positive")
    return float(np.sum(vals ** p * g.mu[mask]) ** (1.0 / p))


def n1p_norm(g, f, p, region=None, grad=None):
    """Newtonian norm on ``region``; the gradient is always taken on the whole domain."""
    if grad is None:
        grad = discrete_gradient(g, f)
    return lp_norm(g, f, p, region) + lp_norm(g, grad, p, region)


def ball_average(g, u, members):
    members = np.asarray(members, dtype=np.int64)
    if len(members) == 0:
        raise InternalError("average over an empty ball")
    w = g.mu[members]
    return float(np.dot(np.asarray(u)[members], w) / w.sum())


@dataclass
class SobolevFunction:
    values: np.ndarray
    grad: np.ndarray
    p: float = 2.0

    @classmethod
    def from_values(cls, g, values, p=2.0):
        values = np.asarray(values, dtype=np.float64)
        return cls(values, discrete_gradient(g, values), p)

    def norm(self, g, region=None):
        return lp_norm(g, self.values, self.p, region) + lp_norm(g, self.grad, self.p, region)


def named_function(g, name):
    """Named vertex functions used by the experiments.

    ``coord-x`` / ``coord-y`` (needs coordinates), ``dist``,
    ``dist-alpha:<a>`` for ``dist(., boundary)**a`` and ``const:<c>``.
    """
    kind, _, arg = name.partition(":")
    if kind in ("coord-x", "coord-y"):
        if g.xy is None:
            raise ArgumentError(f"{name} needs vertex coordinates")
        out = g.xy[:, 0 if kind == "coord-x" else 1].copy()
    elif kind == "dist":
        out = boundary_distance(g).dist.copy()
    elif kind == "dist-alpha":
        try:
            alpha = float(arg)
        except ValueError:
            raise ArgumentError(f"bad exponent in {name!r}") from None
        out = boundary_distance(g).dist ** alpha
    elif kind == "const":
        out = np.full(g.n, float(arg or 1.0))
    else:
        raise ArgumentError(f"unknown test function {name!r}")
    return out
