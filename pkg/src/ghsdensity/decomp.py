"""Scale-m decomposition of the domain into a central region and boundary pieces.

Starting from the component of the union of Whitney balls with diameter at
least ``2^-m`` that contains the largest ball ``B_0``, blocked regions behind
dilated boundary balls are peeled away one ball at a time. The remainder
``Omega_m`` is complemented by ``E_m`` (near the boundary balls) and ``F_m``
(everything else), which are split into disjoint pieces ``S_j`` and ``T_j``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix

from .errors import ArgumentError, DecompositionError, ScaleError
from .mmgraph import ball_members, path_components, set_diameter

U_SCALE, KEEP_SCALE, CONTAIN_SCALE, E_SCALE, V_SCALE = 5, 25, 60, 70, 71
DEFAULT_OVERLAP_CAP = 64


@dataclass
class DecompositionConfig:
    m: int
    C: float = 2.0
    b0_policy: str = "relax"          # "relax" | "strict"
    recomponent: str = "after-each-peel"  # "after-each-peel" | "at-end"
    order: object = None               # None/"ascending", "descending" or explicit list of labels
    overlap_cap: int = DEFAULT_OVERLAP_CAP

    def __post_init__(self):
        if self.b0_policy not in ("relax", "strict"):
            raise ArgumentError(f"unknown b0 policy {self.b0_policy!r}")
        if self.recomponent not in ("after-each-peel", "at-end"):
            raise ArgumentError(f"unknown recomponent policy {self.recomponent!r}")
        if not self.C >= 1:
            raise ArgumentError("the GHS constant C must be at least 1")

    def as_dict(self):
        order = self.order if self.order is None or isinstance(self.order, str) else list(self.order)
        return {"m": self.m, "C": self.C, "b0_policy": self.b0_policy,
                "recomponent": self.recomponent, "order": order,
                "overlap_cap": self.overlap_cap}


@dataclass
class Decomposition:
    cover: object
    config: DecompositionConfig
    base_ball: int
    omega0: np.ndarray              # mask of Omega_{m,0}
    omega: np.ndarray               # mask of Omega_m
    family: np.ndarray              # ball ids of C_{m,N}
    D0: list                        # labelled boundary balls of Omega_{m,0}
    D: list                         # final boundary family D_m (subset of D0)
    B: list                         # boundary balls B_m of Omega_m
    U: dict                         # ball id -> vertex ids of (5C) B_j
    K: dict                         # ball id -> vertex ids of the block K_j
    peeled: list                    # labels whose block removed at least one ball
    b0_conflicts: list
    E: np.ndarray = None
    F: np.ndarray = None
    S: dict = field(default_factory=dict)
    T: dict = field(default_factory=dict)
    history: list = field(default_factory=list)

    @property
    def m(self):
        return self.config.m

    @property
    def g(self):
        return self.cover.g

    @property
    def neighborhood_radius(self):
        return 2.0 ** (-5 - self.m)


# -- helpers ------------------------------------------------------------------------


def nominal_diameter(cover):
    """``2 r`` per ball; dilations use it because balls with ``r < h`` collapse to a vertex."""
    return 2.0 * cover.radius


def scaled_members(cover, j, c):
    """Vertex ids of the relatively closed ball ``(c)_Omega B_j``."""
    return ball_members(cover.g, cover.center[j], c * nominal_diameter(cover)[j], "closed")


def union_of_scaled(cover, balls, c):
    """Mask of the union of ``(c)_Omega B_j`` over ``balls`` via one offset search."""
    g = cover.g
    out = np.zeros(g.n, dtype=bool)
    balls = np.asarray(balls, dtype=np.int64)
    if len(balls) == 0:
        return out
    R = c * nominal_diameter(cover)[balls]
    Rmax = float(R.max())
    ids, _, _ = g.search(cover.center[balls], Rmax + g.tol, offsets=Rmax - R, allowed=g.domain)
    out[ids] = True
    return out


def relative_boundary(g, region):
    """Vertices of ``region`` having a domain neighbour outside it."""
    r, c = g.slot_row, g.indices
    hit = region[r] & g.domain[c] & ~region[c]
    out = np.zeros(g.n, dtype=bool)
    out[r[hit]] = True
    return out


def _members_mask_all(cover, balls, mask):
    return [j for j in balls if mask[cover.members[j]].all()]


def check_mesh_window(g, m):
    if 2.0 ** (-m) < g.h * (1 - 1e-12):
        raise ScaleError(f"scale m={m} is below the mesh window (2^-m = {2.0 ** -m:g} < h = {g.h:g})")


def large_balls(cover, m):
    """Balls whose nominal diameter ``2 r`` is at least ``2^-m``.

    The lattice diameter of a ball falls short of ``2 r`` by less than ``2h``;
    the nominal value keeps the scale-m family equal to the annuli ``k < m``.
    """
    return np.flatnonzero(2 * cover.radius >= 2.0 ** (-m) * (1 - 1e-12))


def core_component(cover, m):
    """``(Omega_{m,0} mask, ball family C_{m,0}, D_{m,0})``."""
    g = cover.g
    check_mesh_window(g, m)
    large = large_balls(cover, m)
    if len(large) == 0:
        raise ScaleError(f"no Whitney ball of diameter >= 2^-{m}")
    b0 = cover.base_ball
    union = np.zeros(g.n, dtype=bool)
    for j in large:
        union[cover.members[j]] = True
    omega0 = g.reachable([cover.center[b0]], union)
    family = np.array([j for j in large if omega0[cover.center[j]]], dtype=np.int64)
    bnd = relative_boundary(g, omega0)
    D0 = [int(j) for j in family if bnd[cover.members[j]].any()]
    return omega0, family, D0


def block(g, U_mask, b0_members, policy="relax", bdist=None):
    """Vertex ids of the block behind ``U``: components of Omega minus U missing the reference.

    The reference is ``B_0``; when ``U`` meets ``B_0`` the ``strict`` policy
    raises, ``relax`` uses the component of the deepest vertex of ``B_0``
    outside ``U`` (or the heaviest component if ``U`` swallows ``B_0``).
    Returns ``(ids, conflict)``.
    """
    rest = g.domain & ~U_mask
    if not U_mask.any():
        return np.zeros(0, dtype=np.int64), False
    outside = b0_members[~U_mask[b0_members]]
    conflict = len(outside) < len(b0_members)
    if conflict and policy == "strict":
        raise ScaleError("U_j meets B_0; choose a larger m")
    if len(outside):
        if conflict and bdist is not None:
            ref = int(outside[np.argmax(bdist[outside])])
        else:
            ref = int(outside[0])
        reached = g.reachable([ref], rest)
    else:
        comps = path_components(g, rest)
        if not comps:
            return np.zeros(0, dtype=np.int64), True
        masses = [g.measure(c) for c in comps]
        best = comps[int(np.argmax(masses))]
        reached = g.mask(best)
    return np.flatnonzero(rest & ~reached), conflict


# -- the decomposition -------------------------------------------------------------------


def _peel_order(D0, order):
    if order is None or order == "ascending":
        return list(D0)
    if order == "descending":
        return list(D0[::-1])
    order = [int(j) for j in order]
    if sorted(order) != sorted(D0):
        raise ArgumentError("peel order must be a permutation of the boundary balls")
    return order


def decompose(cover, config, build_pieces=True, verify=True):
    from .mmgraph import boundary_distance

    g = cover.g
    m, C = config.m, config.C
    bdist = boundary_distance(g).dist
    omega0, family0, D0 = core_component(cover, m)
    b0 = cover.base_ball
    b0_members = cover.members[b0]

    count = np.zeros(g.n, dtype=np.int64)
    alive = np.zeros(len(cover), dtype=bool)
    alive[family0] = True
    for j in family0:
        count[cover.members[j]] += 1

    def drop(balls):
        for j in balls:
            if alive[j]:
                alive[j] = False
                count[cover.members[j]] -= 1

    def restrict_to_base():
        region = count > 0
        comp = g.reachable([cover.center[b0]], region)
        drop([j for j in np.flatnonzero(alive) if not comp[cover.center[j]]])

    U, K, conflicts, peeled, history = {}, {}, [], [], []
    D = list(D0)
    for j in _peel_order(D0, config.order):
        if j not in D:
            continue
        U_ids = scaled_members(cover, j, U_SCALE * C)
        U_mask = g.mask(U_ids)
        K_ids, conflict = block(g, U_mask, b0_members, config.b0_policy, bdist)
        U[j], K[j] = U_ids, K_ids
        if conflict:
            conflicts.append(j)
        if len(K_ids) == 0:
            continue
        X = g.mask(K_ids)
        X[scaled_members(cover, j, KEEP_SCALE * C)] = False
        cand = [i for i in cover.balls_meeting(K_ids) if alive[i]]
        removed = _members_mask_all(cover, cand, X)
        if not removed:
            continue
        drop(removed)
        if config.recomponent == "after-each-peel":
            restrict_to_base()
        region = count > 0
        bnd = relative_boundary(g, region)
        D = [i for i in D if alive[i] and bnd[cover.members[i]].any()]
        peeled.append(j)
        history.append({"label": j, "removed_balls": len(removed),
                        "omega_measure": g.measure(region)})
    if config.recomponent == "at-end":
        restrict_to_base()
        region = count > 0
        bnd = relative_boundary(g, region)
        D = [i for i in D if alive[i] and bnd[cover.members[i]].any()]

    omega = count > 0
    bnd = relative_boundary(g, omega)
    family = np.flatnonzero(alive)
    Bm = [int(i) for i in family if bnd[cover.members[i]].any()]
    for j in D:
        if j not in U:
            U[j] = scaled_members(cover, j, U_SCALE * C)
            K[j], conflict = block(g, g.mask(U[j]), b0_members, config.b0_policy, bdist)
            if conflict:
                conflicts.append(j)
    dec = Decomposition(cover, config, b0, omega0, omega, family, D0, D, Bm,
                        {j: U[j] for j in D}, {j: K[j] for j in D}, peeled,
                        sorted(set(conflicts)), history=history)
    if not omega[b0_members].all():
        raise DecompositionError("B_0 is not contained in Omega_m", witness={"ball": b0})
    if verify:
        verify_containment(dec)
    if build_pieces:
        build_EFST(dec)
    return dec


def verify_containment(dec):
    """Boundary balls of ``Omega_m`` sit in ``(60C) B_j`` for some ``j`` in ``D_m``, and every
    boundary ball meeting a block ``K_j`` sits in that ``(60C) B_j``.

    A triangle-inequality test on centers settles most balls; the rest are
    checked against the exact member sets of the dilated balls.
    """
    cover, g = dec.cover, dec.g
    c = CONTAIN_SCALE * dec.config.C
    if not dec.B:
        return
    if not dec.D:
        raise DecompositionError("Omega_m has boundary balls but D_m is empty",
                                 witness={"ball": dec.B[0]})
    cache = {}

    def inside(j):
        if j not in cache:
            cache[j] = g.mask(scaled_members(cover, j, c))
        return cache[j]

    def contained(k, j):
        return bool(inside(j)[cover.members[k]].all())

    D = np.array(dec.D)
    R = c * nominal_diameter(cover)[D]
    Rmax = float(R.max())
    ids, d, lab = g.search(cover.center[D], np.inf, offsets=Rmax - R, allowed=g.domain)
    slack = np.full(g.n, np.inf)
    owner = np.full(g.n, -1)
    slack[ids] = d - Rmax
    owner[ids] = D[lab]
    pending = []
    for k in dec.B:
        ck = cover.center[k]
        if slack[ck] + cover.radius[k] <= g.tol:
            continue
        if owner[ck] >= 0 and contained(k, owner[ck]):
            continue
        pending.append(k)
    for j in dec.D:
        if not pending:
            break
        pending = [k for k in pending if not contained(k, j)]
    if pending:
        raise DecompositionError(f"boundary ball {pending[0]} is not inside any (60C) B_j",
                                 witness={"ball": int(pending[0])})
    Binc = _incidence(g, [cover.members[k] for k in dec.B])
    Kinc = _incidence(g, [dec.K[j] for j in dec.D])
    meet = (Binc @ Kinc.T).tocoo()
    for a, b in sorted(zip(meet.row.tolist(), meet.col.tolist())):
        k, j = dec.B[a], dec.D[b]
        if not contained(k, j):
            raise DecompositionError(f"ball {k} meets K_{j} but is not inside (60C) B_{j}",
                                     witness={"ball": int(k), "label": int(j)})


def _incidence(g, sets):
    sizes = np.array([len(s) for s in sets], dtype=np.int64)
    rows = np.repeat(np.arange(len(sets)), sizes)
    cols = np.concatenate(sets) if len(sets) else np.zeros(0, np.int64)
    return csr_matrix((np.ones(len(cols), dtype=np.int32), (rows, cols.astype(np.int64))),
                      shape=(len(sets), g.n))


def build_EFST(dec):
    """Split the complement of ``Omega_m`` into ``E_m`` / ``F_m`` and their disjoint pieces."""
    g, cover, C = dec.g, dec.cover, dec.config.C
    E = union_of_scaled(cover, dec.D, E_SCALE * C) & ~dec.omega & g.domain
    F = g.domain & ~dec.omega & ~E
    S, claimed = {}, np.zeros(g.n, dtype=bool)
    for j in dec.D:
        if claimed[E].all():
            S[j] = np.zeros(0, dtype=np.int64)
            continue
        V = g.mask(scaled_members(cover, j, V_SCALE * C))
        piece = V & E & ~claimed
        S[j] = np.flatnonzero(piece)
        claimed |= piece
    T, taken = {}, np.zeros(g.n, dtype=bool)
    for j in dec.D:
        Tj = g.mask(dec.K[j]) & F
        T[j] = np.flatnonzero(Tj & ~taken)
        taken |= Tj
    dec.E, dec.F, dec.S, dec.T = E, F, S, T
    if (claimed != E).any():
        v = int(np.flatnonzero(claimed != E)[0])
        raise DecompositionError("the S_j do not cover E_m exactly", witness={"vertex": v})
    if (taken != F).any():
        v = int(np.flatnonzero(taken != F)[0])
        raise DecompositionError("the T_j do not cover F_m exactly", witness={"vertex": v})
    gap = set_distance_masks(g, F, dec.omega)
    if gap < 2.0 ** (-dec.m) - g.h - g.tol:
        raise DecompositionError(f"dist(F_m, Omega_m) = {gap:g} is below 2^-m - h",
                                 witness={"distance": gap})
    return dec


def set_distance_masks(g, A, B):
    if not A.any() or not B.any():
        return np.inf
    ids, d, _ = g.search(np.flatnonzero(A), allowed=g.domain)
    hit = B[ids]
    return float(d[hit].min()) if hit.any() else np.inf


# -- checks and reports -----------------------------------------------------------------


def cover_identity(dec, exclude=()):
    """Check ``Omega = Omega_m u U_j u K_j`` (over ``D_m``); ``exclude`` drops some ``U_j``."""
    g = dec.g
    union = dec.omega.copy()
    for j in dec.D:
        if j not in exclude:
            union[dec.U[j]] = True
        union[dec.K[j]] = True
    missing = np.flatnonzero(g.domain & ~union)
    extra = np.flatnonzero(union & ~g.domain)
    return {"pass": len(missing) == 0 and len(extra) == 0, "missing": int(len(missing)),
            "witness": int(missing[0]) if len(missing) else None}


def block_consistency(dec):
    """If ``U_j`` and ``U_k`` are disjoint and ``K_j`` meets ``U_k`` then ``U_k`` lies in ``K_j``."""
    g = dec.g
    D = dec.D
    Uinc = _incidence(g, [dec.U[j] for j in D])
    Kinc = _incidence(g, [dec.K[j] for j in D])
    UU = (Uinc @ Uinc.T).tocsr()
    KU = (Kinc @ Uinc.T).tocsr()
    sizes = np.array([len(dec.U[j]) for j in D])
    bad = []
    KU = KU.tocoo()
    for a, b, cnt in zip(KU.row, KU.col, KU.data):
        if a == b or UU[a, b] != 0:
            continue
        if cnt != sizes[b]:
            bad.append((int(D[a]), int(D[b])))
    return {"pass": not bad, "violations": len(bad), "witness": bad[0] if bad else None}


def piece_diameters(dec):
    out = {}
    for j, s in dec.S.items():
        if len(s):
            out[j] = set_diameter(dec.g, s)
    return out


def neighborhood(g, ids, radius):
    ids = np.asarray(ids, dtype=np.int64)
    if len(ids) == 0:
        return ids
    found, d, _ = g.search(ids, radius + g.tol, allowed=g.domain)
    return np.sort(found[d <= radius + g.tol])


def overlap_report(dec):
    """Maximum counts of the five neighbourhood overlap families."""
    g = dec.g
    r = dec.neighborhood_radius
    NS = [neighborhood(g, dec.S[j], r) for j in dec.D]
    NT = [neighborhood(g, dec.T[j], r) for j in dec.D]
    Sinc, Tinc = _incidence(g, NS), _incidence(g, NT)
    Binc = _incidence(g, [dec.cover.members[k] for k in dec.B])

    def max_count(A, Bm):
        if A.shape[0] == 0 or Bm.shape[0] == 0:
            return 0
        P = (A @ Bm.T).tocsr()
        P.data = (P.data > 0).astype(np.int32)
        return int(np.diff(P.indptr).max()) if P.nnz else 0

    counts = {
        "ball_vs_S": max_count(Binc, Sinc),
        "S_vs_S": max_count(Sinc, Sinc),
        "S_vs_T": max_count(Sinc, Tinc),
        "T_vs_S": max_count(Tinc, Sinc),
        "T_vs_T": max_count(Tinc, Tinc),
    }
    cap = dec.config.overlap_cap
    return {"counts": counts, "cap": cap, "pass": all(v <= cap for v in counts.values()),
            "neighborhood_radius": r}


def summary(dec):
    g = dec.g
    return {
        "m": dec.m,
        "C": dec.config.C,
        "base_ball": dec.base_ball,
        "n_D0": len(dec.D0),
        "n_D": len(dec.D),
        "n_B": len(dec.B),
        "peeled": dec.peeled,
        "b0_conflicts": dec.b0_conflicts,
        "omega_measure": g.measure(dec.omega),
        "E_measure": g.measure(dec.E) if dec.E is not None else None,
        "F_measure": g.measure(dec.F) if dec.F is not None else None,
    }


def nesting(dec_a, dec_b):
    """Is ``Omega_a`` (coarser scale) inside ``Omega_b`` with positive internal distance
    to the complement of ``Omega_b``?  Returns ``(contained, gap)``."""
    g = dec_a.g
    contained = not (dec_a.omega & ~dec_b.omega).any()
    gap = set_distance_masks(g, dec_a.omega, g.domain & ~dec_b.omega)
    return contained, gap


# -- serialization ------------------------------------------------------------------------


def _ids(mask_or_ids):
    arr = np.asarray(mask_or_ids)
    return np.flatnonzero(arr).tolist() if arr.dtype == bool else np.sort(arr).tolist()


def to_dict(dec):
    """All vertex sets by role. ``V_j`` is recorded by center and radius only, since
    the ``(71C)`` dilations typically cover most of the domain for every label."""
    cover, C = dec.cover, dec.config.C
    nd = nominal_diameter(cover)
    per_label = []
    for j in dec.D:
        per_label.append({
            "label": int(j), "center": int(cover.center[j]),
            "U": _ids(dec.U[j]), "K": _ids(dec.K[j]),
            "V": {"center": int(cover.center[j]), "radius": float(V_SCALE * C * nd[j])},
            "S": _ids(dec.S.get(j, [])), "T": _ids(dec.T.get(j, [])),
        })
    return {
        "m": dec.m, "C": C, "base_ball": dec.base_ball,
        "neighborhood_radius": dec.neighborhood_radius,
        "omega0": _ids(dec.omega0), "omega": _ids(dec.omega),
        "E": _ids(dec.E), "F": _ids(dec.F),
        "family": [int(i) for i in dec.family],
        "D0": dec.D0, "D": dec.D, "B": dec.B,
        "peeled": dec.peeled, "b0_conflicts": dec.b0_conflicts,
        "history": dec.history, "labels": per_label,
    }


def from_dict(cover, doc, config):
    g = cover.g

    def mask(ids):
        return g.mask(np.asarray(ids, dtype=np.int64))

    def arr(ids):
        return np.asarray(ids, dtype=np.int64)

    labels = doc["labels"]
    dec = Decomposition(
        cover, config, int(doc["base_ball"]), mask(doc["omega0"]), mask(doc["omega"]),
        arr(doc["family"]), list(doc["D0"]), list(doc["D"]), list(doc["B"]),
        {r["label"]: arr(r["U"]) for r in labels}, {r["label"]: arr(r["K"]) for r in labels},
        list(doc["peeled"]), list(doc["b0_conflicts"]),
        E=mask(doc["E"]), F=mask(doc["F"]),
        S={r["label"]: arr(r["S"]) for r in labels}, T={r["label"]: arr(r["T"]) for r in labels},
        history=list(doc.get("history", [])))
    return dec


def full_report(dec):
    """Every structural check of a built decomposition in one dictionary."""
    g = dec.g
    ident = cover_identity(dec)
    blocks = block_consistency(dec)
    overlap = overlap_report(dec)
    diams = piece_diameters(dec)
    kappa = max([d / 2.0 ** (-dec.m) for d in diams.values()] + [0.0])
    s_total = int(sum(len(s) for s in dec.S.values()))
    t_total = int(sum(len(t) for t in dec.T.values()))
    gap = set_distance_masks(g, dec.F, dec.omega)
    checks = {
        "cover_identity": ident["pass"],
        "block_consistency": blocks["pass"],
        "S_cover": s_total == int(dec.E.sum()),
        "T_cover": t_total == int(dec.F.sum()),
        "F_gap": bool(gap >= 2.0 ** (-dec.m) - g.h - g.tol),
        "B0_inside": bool(dec.omega[dec.cover.members[dec.base_ball]].all()),
        "overlap_cap": overlap["pass"],
    }
    return {"summary": summary(dec), "cover_identity": ident, "block_consistency": blocks,
            "overlap": overlap, "S_diameter_ratio": kappa, "F_to_omega_distance": gap,
            "checks": checks, "pass": all(checks.values())}
