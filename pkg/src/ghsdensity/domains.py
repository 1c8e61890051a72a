"""Grid discretisations of planar test domains.

Every generator samples the lattice ``h * Z^2`` and classifies a lattice point
by its Euclidean distance ``delta`` to the complement of the shape:

* domain vertex if ``delta >= h`` (up to rounding),
* boundary vertex if ``delta < h`` and some 8-neighbour is a domain vertex,
* dropped otherwise.

Kept vertices are joined by 4-neighbour edges of length ``h`` and carry the
mass ``h**2``.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
import shapely
from shapely.geometry import box
from shapely.ops import unary_union

from .errors import GenerationError
from .mmgraph import MetricMeasureGraph

SHAPES = ("square", "disk", "slit-disk", "comb")


@dataclass(frozen=True)
class DomainSpec:
    shape: str
    h: float
    side: float = 1.0
    radius: float = 1.0
    slit_depth: float = 0.9
    slit_width: float = 0.0
    teeth: int = 3
    tooth_width: float = 0.15
    tooth_height: float = 0.65
    corridor_width: float = 0.35

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise GenerationError(f"unknown shape {self.shape!r}; expected one of {SHAPES}")
        if not self.h > 0:
            raise GenerationError("mesh size h must be positive")
        for name in ("side", "radius", "tooth_width", "corridor_width"):
            if not getattr(self, name) > 0:
                raise GenerationError(f"{name} must be positive")
        if self.slit_depth < 0 or self.slit_width < 0 or self.tooth_height < 0:
            raise GenerationError("slit and tooth sizes must be non-negative")
        if self.teeth < 0:
            raise GenerationError("tooth count must be non-negative")

    def as_dict(self):
        return asdict(self)


def _lattice(lo, hi, h):
    i = np.arange(int(np.floor(lo[0] / h)) - 1, int(np.ceil(hi[0] / h)) + 2)
    j = np.arange(int(np.floor(lo[1] / h)) - 1, int(np.ceil(hi[1] / h)) + 2)
    return i, j


def _segment_distance(x, y, a, b):
    ax, ay = a
    bx, by = b
    dx, dy = bx - ax, by - ay
    L2 = dx * dx + dy * dy
    if L2 == 0:
        return np.hypot(x - ax, y - ay)
    t = np.clip(((x - ax) * dx + (y - ay) * dy) / L2, 0.0, 1.0)
    return np.hypot(x - ax - t * dx, y - ay - t * dy)


def comb_polygon(spec):
    side = spec.side
    gap = (side - spec.teeth * spec.tooth_width) / (spec.teeth + 1)
    if gap <= 0:
        raise GenerationError("teeth do not fit along the spine")
    parts = [box(0.0, 0.0, side, spec.corridor_width)]
    for t in range(spec.teeth):
        x0 = gap + t * (spec.tooth_width + gap)
        parts.append(box(x0, 0.0, x0 + spec.tooth_width, spec.corridor_width + spec.tooth_height))
    return unary_union(parts)


def complement_distance(spec, x, y):
    """Euclidean distance from lattice points to the complement of the shape."""
    if spec.shape == "square":
        L = spec.side
        return np.maximum(np.minimum(np.minimum(x, L - x), np.minimum(y, L - y)), 0.0)
    if spec.shape == "disk":
        return np.maximum(spec.radius - np.hypot(x, y), 0.0)
    if spec.shape == "slit-disk":
        r = spec.radius
        disk = np.maximum(r - np.hypot(x, y), 0.0)
        slit = _segment_distance(x, y, (r - spec.slit_depth, 0.0), (r, 0.0)) - spec.slit_width / 2
        return np.maximum(np.minimum(disk, slit), 0.0)
    poly = comb_polygon(spec)
    inside = shapely.contains_xy(poly, x, y)
    d = shapely.distance(poly.boundary, shapely.points(x, y))
    return np.where(inside, d, 0.0)


def _bbox(spec):
    if spec.shape == "square":
        return (0.0, 0.0), (spec.side, spec.side)
    if spec.shape in ("disk", "slit-disk"):
        r = spec.radius
        return (-r, -r), (r, r)
    return (0.0, 0.0), (spec.side, spec.corridor_width + spec.tooth_height)


def generate(spec: DomainSpec) -> MetricMeasureGraph:
    h = spec.h
    lo, hi = _bbox(spec)
    ii, jj = _lattice(lo, hi, h)
    I, J = np.meshgrid(ii, jj)  # rows follow y, so ravel() is row-major in (y, x)
    x, y = I * h, J * h
    delta = complement_distance(spec, x.ravel(), y.ravel()).reshape(x.shape)

    inner = delta >= h * (1 - 1e-9)
    if not inner.any():
        raise GenerationError(f"{spec.shape} at h={h} has no domain vertex")
    near = np.zeros_like(inner)
    pad = np.pad(inner, 1)
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            near |= pad[1 + dj:1 + dj + inner.shape[0], 1 + di:1 + di + inner.shape[1]]
    keep = inner | near

    index = np.full(keep.shape, -1, dtype=np.int64)
    index[keep] = np.arange(int(keep.sum()))
    edges = []
    for a, b in ((index[:, :-1], index[:, 1:]), (index[:-1, :], index[1:, :])):
        ok = (a >= 0) & (b >= 0)
        edges.append(np.stack([a[ok], b[ok]], axis=1))
    edges = np.concatenate(edges)
    edges = edges[np.lexsort((edges[:, 1], edges[:, 0]))]

    n = int(keep.sum())
    xy = np.stack([x[keep], y[keep]], axis=1)
    return MetricMeasureGraph(np.full(n, h * h), ~inner[keep], edges, np.full(len(edges), h), xy)
