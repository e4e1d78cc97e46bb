"""Quasihyperbolic-metric engine on polygonal domains.

Whitney cube decomposition with exactly verified two-sided distance bounds,
quasihyperbolic distances and geodesics on a fine grid graph, shadows of
Whitney cubes under the shortest-path tree, and the shadow-sum diagnostic
comparing sum s(Q)^n with the integral of the quasihyperbolic distance.

Domain boundaries are polygons whose vertices are snapped to a dyadic grid,
so all Whitney invariants are decided in exact rational arithmetic relative
to the represented boundary.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import dijkstra
from scipy.spatial import cKDTree

from .geom import DomainError, PolyCurve

_SNAP = 2 ** 24   # vertex coordinates are multiples of 1/_SNAP


# ---------------------------------------------------------------------------
# Polygonal domains


class PolygonDomain:
    """Open region bounded by a simple polygon (optionally with holes)."""

    def __init__(self, outer, holes=(), name: str = ""):
        self.outer = _snap(np.asarray(outer, float))
        self.holes = [_snap(np.asarray(h, float)) for h in holes]
        self.name = name
        segs = [_ring_segments(self.outer)]
        segs += [_ring_segments(h) for h in self.holes]
        self.segments = np.concatenate(segs, axis=0)
        self._seg_a = self.segments[:, 0, :]
        self._seg_b = self.segments[:, 1, :]

    def bbox(self):
        return self.outer.min(axis=0), self.outer.max(axis=0)

    def contains(self, pts: np.ndarray) -> np.ndarray:
        """Crossing-number membership, vectorized over query points."""
        pts = np.atleast_2d(np.asarray(pts, float))
        inside = _crossing_number(pts, self.outer)
        for h in self.holes:
            inside &= ~_crossing_number(pts, h)
        return inside

    def boundary_distance(self, pts: np.ndarray) -> np.ndarray:
        """Euclidean distance to the boundary polygon(s), vectorized."""
        pts = np.atleast_2d(np.asarray(pts, float))
        out = np.full(len(pts), np.inf)
        chunk = 2048
        for i in range(0, len(pts), chunk):
            out[i:i + chunk] = _points_segments_dist(
                pts[i:i + chunk], self._seg_a, self._seg_b)
        return out

    def boundary_length(self) -> float:
        return float(np.linalg.norm(self.segments[:, 1] - self.segments[:, 0],
                                    axis=1).sum())

    def boundary_samples(self, spacing: float) -> np.ndarray:
        pts = []
        for a, b in self.segments:
            L = float(np.linalg.norm(b - a))
            n = max(1, int(math.ceil(L / spacing)))
            t = np.arange(n) / n
            pts.append(a[None] + t[:, None] * (b - a)[None])
        return np.concatenate(pts, axis=0)

    def to_json(self) -> dict:
        return {"outer": self.outer.tolist(),
                "holes": [h.tolist() for h in self.holes],
                "orientation": "ccw", "name": self.name}

    @staticmethod
    def from_json(obj: dict) -> "PolygonDomain":
        return PolygonDomain(obj["outer"], obj.get("holes", ()),
                             obj.get("name", ""))


def _snap(v: np.ndarray) -> np.ndarray:
    return np.round(v * _SNAP) / _SNAP


def _ring_segments(ring: np.ndarray) -> np.ndarray:
    nxt = np.roll(ring, -1, axis=0)
    return np.stack([ring, nxt], axis=1)


def _crossing_number(pts: np.ndarray, ring: np.ndarray) -> np.ndarray:
    x, y = pts[:, 0], pts[:, 1]
    inside = np.zeros(len(pts), bool)
    n = len(ring)
    for i in range(n):
        x1, y1 = ring[i]
        x2, y2 = ring[(i + 1) % n]
        cond = (y1 > y) != (y2 > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            xcross = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
        inside ^= cond & (x < np.where(cond, xcross, np.inf))
    return inside


def _points_segments_dist(pts: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    d = b - a
    L2 = (d ** 2).sum(1)
    L2 = np.where(L2 == 0, 1e-300, L2)
    w = pts[:, None, :] - a[None, :, :]
    t = np.clip((w * d[None]).sum(-1) / L2[None], 0.0, 1.0)
    proj = a[None] + t[..., None] * d[None]
    return np.sqrt(((pts[:, None, :] - proj) ** 2).sum(-1)).min(axis=1)


# --- builders ---------------------------------------------------------------


def disk_domain(radius: float = 1.0, n_vertices: int = 128,
                center=(0.0, 0.0)) -> PolygonDomain:
    th = np.linspace(0, 2 * math.pi, n_vertices, endpoint=False)
    c = np.asarray(center, float)
    return PolygonDomain(c + radius * np.stack([np.cos(th), np.sin(th)], axis=1),
                         name=f"disk(r={radius})")


def square_domain(side: float = 1.0, corner=(0.0, 0.0)) -> PolygonDomain:
    x0, y0 = corner
    s = side
    return PolygonDomain([(x0, y0), (x0 + s, y0), (x0 + s, y0 + s), (x0, y0 + s)],
                         name="square")


def cusp_domain(exponent: float = 8.0, x_min: float = 0.35,
                mouth: float = 1.5, n_profile: int = 40) -> PolygonDomain:
    """Square body with a power-law cusp: half-width (x/mouth)^exponent / 2.

    For exponent > 3 the quasihyperbolic distance fails to be square
    integrable on the ideal cusp, so the k^2 quadrature keeps growing as the
    grid resolves deeper into the corridor; the polygon truncates the tip at
    x_min, which is beyond any resolution used here.
    """
    xs = np.geomspace(x_min, mouth, n_profile)
    w = 0.5 * (xs / mouth) ** exponent
    upper = np.stack([xs, w], axis=1)[::-1]
    lower = np.stack([xs, -w], axis=1)
    verts = [(mouth + 0.5, 0.5), (mouth, 0.5)]
    verts += [tuple(p) for p in upper[1:]]
    verts += [tuple(p) for p in lower]
    verts += [(mouth + 0.5, -0.5)]
    return PolygonDomain(list(reversed(verts)), name="cusp")


def comb_domain(teeth: int = 4, slit_width: float = 0.02,
                slit_depth: float = 0.75) -> PolygonDomain:
    """Rectangle [0,2] x [0,1] with thin slits descending from the top edge."""
    verts = [(0.0, 0.0), (2.0, 0.0), (2.0, 1.0)]
    xs = np.linspace(0.25, 1.75, teeth)
    for x in sorted(xs, reverse=True):
        verts += [(x + slit_width / 2, 1.0),
                  (x + slit_width / 2, 1.0 - slit_depth),
                  (x - slit_width / 2, 1.0 - slit_depth),
                  (x - slit_width / 2, 1.0)]
    verts += [(0.0, 1.0)]
    return PolygonDomain(verts, name="comb")


# ---------------------------------------------------------------------------
# Whitney decomposition


@dataclass
class WhitneyCube:
    depth: int
    ij: tuple
    corner: np.ndarray
    side: float
    dist: float

    @property
    def diam(self) -> float:
        return self.side * math.sqrt(2)

    @property
    def center(self) -> np.ndarray:
        return self.corner + self.side / 2


@dataclass
class WhitneyDecomposition:
    domain: PolygonDomain
    cubes: list
    adjacency: list
    truncated: int
    root_corner: np.ndarray
    root_side: float
    max_depth: int

    def to_csv(self, path) -> None:
        """One row per cube: corner, side, boundary distance."""
        with open(path, "w") as fh:
            fh.write("corner_x,corner_y,side,dist\n")
            for q in self.cubes:
                fh.write(f"{q.corner[0]:.12g},{q.corner[1]:.12g},"
                         f"{q.side:.12g},{q.dist:.12g}\n")

    def verify_exact(self) -> dict:
        """Exact rational check of both Whitney inequalities for every cube,
        plus the neighbor side-ratio bound over the adjacency edges."""
        segs = _exact_segments(self.domain)
        bad_low, bad_high = [], []
        for k, q in enumerate(self.cubes):
            d2 = _exact_cube_dist2(q, segs, self.root_corner, self.root_side)
            side = _exact_side(q, self.root_side)
            diam2 = 2 * side * side
            if not diam2 <= d2:
                bad_low.append(k)
            if not d2 <= 16 * diam2:
                bad_high.append(k)
        ratio_ok = all(0.25 <= 2.0 ** (self.cubes[i].depth - self.cubes[j].depth) <= 4
                       for i, j in self.adjacency)
        return {"cubes": len(self.cubes),
                "lower_violations": bad_low,
                "upper_violations": bad_high,
                "neighbor_ratio_ok": bool(ratio_ok)}


def whitney_decompose(domain: PolygonDomain, max_depth: int = 7) -> WhitneyDecomposition:
    """Dyadic Whitney cubes of the domain: diam(Q) <= dist(Q, bd) <= 4 diam(Q).

    A cube is emitted at the first (coarsest) generation where
    diam <= dist(Q, boundary); since its parent failed that test, the upper
    bound dist <= 4 diam holds automatically.  Cubes still failing at
    max_depth are truncated (counted, not emitted).  Decisions near the
    float precision margin fall back to exact rational arithmetic.
    """
    lo, hi = domain.bbox()
    span = float((hi - lo).max()) * 1.001
    root_side = 2.0 ** math.ceil(math.log2(span))
    root_corner = _snap(np.asarray(lo, float) - (root_side - span) / 2)
    segs = _exact_segments(domain)
    cubes: list[WhitneyCube] = []
    truncated = 0
    stack = [(0, (0, 0))]
    margin = 1e-9 * max(1.0, root_side)
    while stack:
        depth, ij = stack.pop()
        side = root_side / 2 ** depth
        corner = root_corner + np.array(ij, float) * side
        center = corner + side / 2
        d_cube = _cube_boundary_dist_float(corner, side, domain)
        inside = bool(domain.contains(center[None])[0])
        if d_cube > 0 and not inside:
            continue                      # entirely outside
        diam = side * math.sqrt(2)
        accept = None
        if inside:
            if d_cube - diam > margin:
                accept = True
            elif d_cube - diam < -margin:
                accept = False
            else:
                q = WhitneyCube(depth, ij, corner, side, d_cube)
                d2 = _exact_cube_dist2(q, segs, root_corner, root_side)
                s_exact = _exact_side(q, root_side)
                accept = bool(2 * s_exact * s_exact <= d2) and d2 > 0
        else:
            accept = False
        if accept:
            cubes.append(WhitneyCube(depth, ij, corner, side, d_cube))
            continue
        if depth >= max_depth:
            truncated += 1
            continue
        for di in (0, 1):
            for dj in (0, 1):
                stack.append((depth + 1, (2 * ij[0] + di, 2 * ij[1] + dj)))
    if not cubes:
        raise DomainError("domain has no interior at this depth")
    cubes.sort(key=lambda q: (q.depth, q.ij))
    adjacency = _build_adjacency(cubes, max_depth)
    return WhitneyDecomposition(domain, cubes, adjacency, truncated,
                                root_corner, root_side, max_depth)


def _cube_boundary_dist_float(corner: np.ndarray, side: float,
                              domain: PolygonDomain) -> float:
    """Float distance from the closed cube to the boundary segments.

    Exact segment-to-segment formula (up to float rounding): zero when some
    boundary segment meets the cube, else the minimum over cube-edge versus
    boundary-segment pairs of endpoint-to-segment distances.
    """
    a, b = domain._seg_a, domain._seg_b
    lo = corner
    hi = corner + side
    # any boundary segment intersecting the cube -> distance 0
    if _any_segment_hits_box(a, b, lo, hi):
        return 0.0
    corners = np.array([lo, [hi[0], lo[1]], hi, [lo[0], hi[1]]])
    best = float(_points_segments_dist(corners, a, b).min())
    ends = np.concatenate([a, b], axis=0)
    for edge_a, edge_b in ((corners[0], corners[1]), (corners[1], corners[2]),
                           (corners[3], corners[2]), (corners[0], corners[3])):
        d = _points_segments_dist(ends, edge_a[None], edge_b[None])
        best = min(best, float(d.min()))
    return best


def _any_segment_hits_box(a: np.ndarray, b: np.ndarray, lo, hi) -> bool:
    t0 = np.zeros(len(a))
    t1 = np.ones(len(a))
    d = b - a
    ok = np.ones(len(a), bool)
    for ax in range(2):
        with np.errstate(divide="ignore", invalid="ignore"):
            ta = (lo[ax] - a[:, ax]) / d[:, ax]
            tb = (hi[ax] - a[:, ax]) / d[:, ax]
        swap = ta > tb
        ta2 = np.where(swap, tb, ta)
        tb2 = np.where(swap, ta, tb)
        flat = d[:, ax] == 0
        outside_flat = flat & ((a[:, ax] < lo[ax]) | (a[:, ax] > hi[ax]))
        ok &= ~outside_flat
        t0 = np.where(flat, t0, np.maximum(t0, ta2))
        t1 = np.where(flat, t1, np.minimum(t1, tb2))
    return bool((ok & (t0 <= t1)).any())


def _exact_segments(domain: PolygonDomain):
    segs = []
    for a, b in domain.segments:
        segs.append(((Fraction(float(a[0])), Fraction(float(a[1]))),
                     (Fraction(float(b[0])), Fraction(float(b[1])))))
    return segs


def _exact_side(q: WhitneyCube, root_side: float) -> Fraction:
    return Fraction(float(root_side)) / 2 ** q.depth


def _exact_cube_dist2(q: WhitneyCube, segs, root_corner, root_side) -> Fraction:
    side = Fraction(float(root_side)) / 2 ** q.depth
    cx = Fraction(float(root_corner[0])) + q.ij[0] * side
    cy = Fraction(float(root_corner[1])) + q.ij[1] * side
    corners = [(cx, cy), (cx + side, cy), (cx + side, cy + side), (cx, cy + side)]
    edges = [(corners[i], corners[(i + 1) % 4]) for i in range(4)]
    # float prefilter: only segments that can realize the minimum
    ccx, ccy = float(cx + side / 2), float(cy + side / 2)
    mids = np.array([[(float(a[0]) + float(b[0])) / 2,
                      (float(a[1]) + float(b[1])) / 2] for a, b in segs])
    lens = np.array([math.hypot(float(b[0]) - float(a[0]),
                                float(b[1]) - float(a[1])) for a, b in segs])
    lower = np.hypot(mids[:, 0] - ccx, mids[:, 1] - ccy) - lens / 2 \
        - float(side) * math.sqrt(2) / 2
    cutoff = float(lower.min()) + float(side) + 1e-9
    cand = np.where(lower <= cutoff)[0]
    best: Fraction | None = None
    for s in cand:
        a, b = segs[s]
        if _seg_in_cube_exact(a, b, cx, cy, side):
            return Fraction(0)
        for (ea, eb) in edges:
            d2 = _seg_seg_dist2_exact(ea, eb, a, b)
            if best is None or d2 < best:
                best = d2
    return best if best is not None else Fraction(10 ** 12)


def _seg_in_cube_exact(a, b, cx, cy, side) -> bool:
    """Does segment [a,b] meet the closed cube? Exact clip."""
    t0, t1 = Fraction(0), Fraction(1)
    for ax, lo in ((0, cx), (1, cy)):
        hi = lo + side
        d = b[ax] - a[ax]
        if d == 0:
            if a[ax] < lo or a[ax] > hi:
                return False
            continue
        ta, tb = (lo - a[ax]) / d, (hi - a[ax]) / d
        if ta > tb:
            ta, tb = tb, ta
        t0, t1 = max(t0, ta), min(t1, tb)
        if t0 > t1:
            return False
    return True


def _point_seg_dist2_exact(p, a, b) -> Fraction:
    dx, dy = b[0] - a[0], b[1] - a[1]
    L2 = dx * dx + dy * dy
    if L2 == 0:
        return (p[0] - a[0]) ** 2 + (p[1] - a[1]) ** 2
    t = ((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / L2
    t = min(max(t, Fraction(0)), Fraction(1))
    qx, qy = a[0] + t * dx, a[1] + t * dy
    return (p[0] - qx) ** 2 + (p[1] - qy) ** 2


def _segments_cross_exact(p, q, a, b) -> bool:
    def orient(u, v, w):
        return (v[0] - u[0]) * (w[1] - u[1]) - (v[1] - u[1]) * (w[0] - u[0])

    o1, o2 = orient(p, q, a), orient(p, q, b)
    o3, o4 = orient(a, b, p), orient(a, b, q)
    if ((o1 > 0) != (o2 > 0) and o1 != 0 and o2 != 0
            and (o3 > 0) != (o4 > 0) and o3 != 0 and o4 != 0):
        return True
    for (u, v, w) in ((p, q, a), (p, q, b), (a, b, p), (a, b, q)):
        if orient(u, v, w) == 0:
            t_num = (w[0] - u[0]) * (v[0] - u[0]) + (w[1] - u[1]) * (v[1] - u[1])
            L2 = (v[0] - u[0]) ** 2 + (v[1] - u[1]) ** 2
            if L2 == 0:
                if u == w:
                    return True
            elif 0 <= t_num <= L2:
                return True
    return False


def _seg_seg_dist2_exact(p, q, a, b) -> Fraction:
    if _segments_cross_exact(p, q, a, b):
        return Fraction(0)
    return min(_point_seg_dist2_exact(p, a, b),
               _point_seg_dist2_exact(q, a, b),
               _point_seg_dist2_exact(a, p, q),
               _point_seg_dist2_exact(b, p, q))


def _build_adjacency(cubes: list, max_depth: int) -> list:
    """Face-sharing cube pairs via integer interval matching at unit scale."""
    unit = 2 ** max_depth
    spans = []
    for q in cubes:
        w = 2 ** (max_depth - q.depth)
        spans.append((q.ij[0] * w, (q.ij[0] + 1) * w, q.ij[1] * w, (q.ij[1] + 1) * w))
    edges = []
    by_xface: dict = {}
    by_yface: dict = {}
    for k, (x0, x1, y0, y1) in enumerate(spans):
        by_xface.setdefault(x0, []).append((k, y0, y1, "lo"))
        by_xface.setdefault(x1, []).append((k, y0, y1, "hi"))
        by_yface.setdefault(y0, []).append((k, x0, x1, "lo"))
        by_yface.setdefault(y1, []).append((k, x0, x1, "hi"))
    for table in (by_xface, by_yface):
        for coord, items in table.items():
            los = [(k, a, b) for k, a, b, s in items if s == "lo"]
            his = [(k, a, b) for k, a, b, s in items if s == "hi"]
            for k1, a1, b1 in his:
                for k2, a2, b2 in los:
                    if k1 != k2 and min(b1, b2) - max(a1, a2) > 0:
                        edges.append((min(k1, k2), max(k1, k2)))
    return sorted(set(edges))


# ---------------------------------------------------------------------------
# Quasihyperbolic grid metric


class QhGrid:
    """Fine grid graph with edge weight = length / boundary distance at the
    midpoint; Dijkstra fields reusable across queries."""

    def __init__(self, domain: PolygonDomain, pitch: float,
                 min_delta_factor: float = 1.0):
        self.domain = domain
        self.pitch = pitch
        lo, hi = domain.bbox()
        nx = int(math.ceil((hi[0] - lo[0]) / pitch)) + 1
        ny = int(math.ceil((hi[1] - lo[1]) / pitch)) + 1
        xs = lo[0] + pitch * np.arange(nx)
        ys = lo[1] + pitch * np.arange(ny)
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        pts = np.stack([X.ravel(), Y.ravel()], axis=1)
        delta = domain.boundary_distance(pts)
        # cells with delta below the pitch cannot support the midpoint
        # quadrature at this resolution; refinement admits them later
        ok = domain.contains(pts) & (delta > pitch * min_delta_factor)
        self.nodes = pts[ok]
        self.delta = delta[ok]
        self.index = -np.ones(nx * ny, np.int64)
        self.index[ok] = np.arange(len(self.nodes))
        self._shape = (nx, ny)
        self._tree = cKDTree(self.nodes)
        rows, cols, data = [], [], []
        grid_idx = self.index.reshape(nx, ny)
        for dx, dy in ((1, 0), (0, 1), (1, 1), (1, -1)):
            src = np.argwhere(grid_idx >= 0)
            dst = src + np.array([dx, dy])
            keep = np.all((dst >= 0) & (dst < np.array([nx, ny])), axis=1)
            src, dst = src[keep], dst[keep]
            si = grid_idx[src[:, 0], src[:, 1]]
            di = grid_idx[dst[:, 0], dst[:, 1]]
            keep2 = di >= 0
            si, di = si[keep2], di[keep2]
            mid = 0.5 * (self.nodes[si] + self.nodes[di])
            dmid = domain.boundary_distance(mid)
            inside = domain.contains(mid) & (dmid > 0)
            si, di, dmid = si[inside], di[inside], dmid[inside]
            w = math.hypot(dx, dy) * pitch / dmid
            rows += [si, di]
            cols += [di, si]
            data += [w, w]
        n = len(self.nodes)
        self.mat = sp.csr_matrix(
            (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
            shape=(n, n))

    def nearest_node(self, p) -> int:
        return int(self._tree.query(np.asarray(p, float))[1])

    def distance_field(self, x0) -> tuple[np.ndarray, np.ndarray]:
        src = self.nearest_node(x0)
        dist, pred = dijkstra(self.mat, directed=False, indices=src,
                              return_predecessors=True)
        return dist, pred


def qh_distance(domain: PolygonDomain, x1, x2, pitch: float = 0.01,
                grid: QhGrid | None = None) -> dict:
    """Quasihyperbolic distance and polygonal geodesic between two points.

    Upper estimate on the grid graph, converging under refinement; the metric
    is defined on unordered pairs, so the query is canonicalized and the
    result exactly symmetric.
    """
    a = np.asarray(x1, float)
    b = np.asarray(x2, float)
    if tuple(b.tolist()) < tuple(a.tolist()):
        a, b = b, a
    g = grid if grid is not None else QhGrid(domain, pitch)
    if not (g.domain.contains(a[None])[0] and g.domain.contains(b[None])[0]):
        raise DomainError("query points must be interior to the domain")
    # endpoints whose neighborhood is unresolved at this pitch are flagged,
    # not silently snapped to a distant node
    for p in (a, b):
        snap = float(g._tree.query(p)[0])
        if snap > 1.6 * g.pitch:
            return {"value": math.inf, "geodesic": None, "infeasible": True}
    dist, pred = g.distance_field(a)
    tgt = g.nearest_node(b)
    if not np.isfinite(dist[tgt]):
        return {"value": math.inf, "geodesic": None, "infeasible": True}
    path = [tgt]
    while pred[path[-1]] >= 0:
        path.append(int(pred[path[-1]]))
    path.reverse()
    return {"value": float(dist[tgt]),
            "geodesic": PolyCurve(g.nodes[path]),
            "infeasible": False}


# ---------------------------------------------------------------------------
# Shadows


@dataclass
class ShadowRecord:
    cube_index: int
    shadow_indices: np.ndarray
    s: float


def shadows(domain: PolygonDomain, x0, decomp: WhitneyDecomposition,
            boundary_spacing: float | None = None) -> dict:
    """Shadow of each Whitney cube under the shortest-path tree from x0.

    The tree lives on the cube adjacency graph with quasihyperbolic edge
    weights and deterministic lexicographic tie-breaking.  Each boundary
    sample is routed from its nearest cube to the root; SH(Q) collects the
    samples whose route passes through Q, and s(Q) = diam SH(Q).
    """
    cubes = decomp.cubes
    n = len(cubes)
    if n == 0:
        raise DomainError("empty decomposition")
    centers = np.array([q.center for q in cubes])
    dists = np.array([max(q.dist, 1e-12) for q in cubes])
    adj: list[list[int]] = [[] for _ in range(n)]
    for i, j in decomp.adjacency:
        adj[i].append(j)
        adj[j].append(i)
    x0 = np.asarray(x0, float)
    root = _cube_containing(cubes, x0)
    if root is None:
        root = int(np.linalg.norm(centers - x0, axis=1).argmin())
    # deterministic Dijkstra over cubes
    INF = math.inf
    dist = [INF] * n
    parent = [-1] * n
    dist[root] = 0.0
    heap = [(0.0, root)]
    done = [False] * n
    while heap:
        d, u = heapq.heappop(heap)
        if done[u]:
            continue
        done[u] = True
        for v in sorted(adj[u]):
            w = float(np.linalg.norm(centers[u] - centers[v])) \
                * 0.5 * (1 / dists[u] + 1 / dists[v])
            nd = d + w
            if nd < dist[v] - 1e-15 or (abs(nd - dist[v]) <= 1e-15 and u < parent[v]):
                dist[v] = nd
                parent[v] = u
                heapq.heappush(heap, (nd, v))
    if boundary_spacing is None:
        boundary_spacing = min(q.side for q in cubes)
    samples = domain.boundary_samples(boundary_spacing)
    tree = cKDTree(centers)
    _, near = tree.query(samples, k=min(8, n))
    near = np.atleast_2d(near)
    shadow_sets: list[list[int]] = [[] for _ in range(n)]
    for si in range(len(samples)):
        cands = near[si]
        best, best_key = None, None
        for c in cands:
            q = cubes[int(c)]
            dx = max(q.corner[0] - samples[si, 0], 0,
                     samples[si, 0] - q.corner[0] - q.side)
            dy = max(q.corner[1] - samples[si, 1], 0,
                     samples[si, 1] - q.corner[1] - q.side)
            key = (math.hypot(dx, dy), q.side, int(c))
            if best_key is None or key < best_key:
                best, best_key = int(c), key
        node = best
        seen = set()
        while node != -1 and node not in seen:
            shadow_sets[node].append(si)
            seen.add(node)
            node = parent[node]
    records = []
    for k in range(n):
        idx = np.array(sorted(set(shadow_sets[k])), int)
        if len(idx) >= 2:
            pts = samples[idx]
            from .geom import _cloud_diameter
            s = _cloud_diameter(pts)
        else:
            s = 0.0
        records.append(ShadowRecord(k, idx, float(s)))
    return {"records": records, "parent": parent, "root": root,
            "boundary_samples": samples, "tree_distances": dist}


def _cube_containing(cubes, p) -> int | None:
    for k, q in enumerate(cubes):
        if (q.corner[0] <= p[0] <= q.corner[0] + q.side
                and q.corner[1] <= p[1] <= q.corner[1] + q.side):
            return k
    return None


def tree_path_cubes(parent: list, start: int) -> list:
    out = [start]
    while parent[out[-1]] != -1:
        out.append(parent[out[-1]])
    return out


def shadow_table_json(decomp: WhitneyDecomposition, shadow_result: dict) -> dict:
    """Serializable shadow table: per cube, s(Q) and the sample count."""
    rows = []
    for rec in shadow_result["records"]:
        q = decomp.cubes[rec.cube_index]
        rows.append({"cube": rec.cube_index, "depth": q.depth,
                     "side": q.side, "s": rec.s,
                     "shadow_samples": int(len(rec.shadow_indices))})
    return {"root": shadow_result["root"],
            "boundary_samples": int(len(shadow_result["boundary_samples"])),
            "table": rows}


# ---------------------------------------------------------------------------
# Shadow-sum diagnostic


def shadow_sum_diagnostic(domain: PolygonDomain, x0, max_depth: int = 6,
                          qh_pitch: float = 0.02) -> dict:
    """Compare sum_Q s(Q)^n against the quasihyperbolic integral.

    lhs: shadow diameters from the tree on the Whitney cubes at this depth.
    rhs: midpoint quadrature of k(x, x0)^n over the cells of the metric grid
    (full domain coverage; cells the grid cannot reach are skipped and
    counted -- their k is beyond the resolution of this level).
    """
    decomp = whitney_decompose(domain, max_depth=max_depth)
    sh = shadows(domain, x0, decomp)
    n = 2
    lhs = float(sum(rec.s ** n for rec in sh["records"]))
    grid = QhGrid(domain, qh_pitch)
    dist, _ = grid.distance_field(x0)
    ok = np.isfinite(dist)
    rhs = float((dist[ok] ** n).sum() * qh_pitch ** n)
    return {"lhs": lhs, "rhs": rhs,
            "ratio": lhs / rhs if rhs > 0 else math.inf,
            "cubes": len(decomp.cubes),
            "unreachable_nodes": int((~ok).sum()),
            "truncated": decomp.truncated,
            "max_depth": max_depth,
            "qh_pitch": qh_pitch}
