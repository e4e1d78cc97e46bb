"""Curve families on sampling grids and the discrete conformal modulus solver.

The modulus of the family of grid paths joining two marked cell sets is the
minimum of the cell energy  sum rho^p h^n  over densities admissible for every
path (8-neighbor paths in 2D, 26-neighbor in 3D).  Admissibility over all
paths collapses to the single condition that the rho-shortest-path distance
between the marked sets is at least 1, which one Dijkstra pass certifies.

The solver builds a near-extremal candidate from the grid Dirichlet potential
of the scene (gradient magnitude of the capacity potential), certifies it by
shortest path, then runs the multiplicative polish loop (bump the binding
path, renormalize, harmonically decaying step) keeping the best certified
value.  Every reported value is the energy of an exactly admissible density,
hence a certified upper estimate of the discrete optimum.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy import ndimage
from scipy.sparse.csgraph import dijkstra
from scipy.sparse.linalg import spsolve

from .geom import DomainError, PolyCurve, line_integral


# ---------------------------------------------------------------------------
# Scene and density types


@dataclass
class GridScene:
    """Axis-aligned sampling grid with ambient mask and two marked continua."""

    spacing: float
    origin: np.ndarray
    u: np.ndarray
    f1: np.ndarray
    f2: np.ndarray
    name: str = ""
    # family-union scenes mark several continua at once; connectivity of each
    # marked set is only enforced for plain scenes
    single_continua: bool = True

    def __post_init__(self):
        self.origin = np.asarray(self.origin, float)
        self.u = np.asarray(self.u, bool)
        self.f1 = np.asarray(self.f1, bool) & self.u
        self.f2 = np.asarray(self.f2, bool) & self.u
        if self.dim not in (2, 3):
            raise DomainError("grid scenes support dimensions 2 and 3")
        if not self.f1.any() or not self.f2.any():
            raise DomainError("marked continua must be nonempty")
        if (self.f1 & self.f2).any():
            raise DomainError("marked continua must be disjoint")
        if self.single_continua:
            structure = np.ones((3,) * self.dim, int)
            for mask, label in ((self.f1, "F1"), (self.f2, "F2")):
                _, num = ndimage.label(mask, structure=structure)
                if num != 1:
                    raise DomainError(f"{label} must be connected in the grid graph")

    @property
    def dim(self) -> int:
        return self.u.ndim

    @property
    def shape(self) -> tuple:
        return self.u.shape

    def cell_centers(self, mask: np.ndarray | None = None) -> np.ndarray:
        idx = np.argwhere(self.u if mask is None else mask)
        return self.origin + (idx + 0.5) * self.spacing

    def to_json(self) -> dict:
        return {
            "schema": 1,
            "dimension": self.dim,
            "spacing": self.spacing,
            "origin": self.origin.tolist(),
            "shape": list(self.shape),
            "masks": {k: _rle_encode(getattr(self, k)) for k in ("u", "f1", "f2")},
            "name": self.name,
        }

    @staticmethod
    def from_json(obj: dict) -> "GridScene":
        shape = tuple(obj["shape"])
        masks = {k: _rle_decode(obj["masks"][k], shape) for k in ("u", "f1", "f2")}
        return GridScene(obj["spacing"], np.asarray(obj["origin"], float),
                         masks["u"], masks["f1"], masks["f2"], obj.get("name", ""))


def _rle_encode(mask: np.ndarray) -> list:
    flat = mask.ravel()
    runs = []
    start = None
    for i, v in enumerate(flat):
        if v and start is None:
            start = i
        elif not v and start is not None:
            runs.append([start, i - start])
            start = None
    if start is not None:
        runs.append([start, len(flat) - start])
    return runs


def _rle_decode(runs: list, shape: tuple) -> np.ndarray:
    flat = np.zeros(int(np.prod(shape)), bool)
    for start, length in runs:
        flat[start:start + length] = True
    return flat.reshape(shape)


@dataclass
class DensityField:
    """Nonnegative per-cell density with its energy exponent."""

    values: np.ndarray
    spacing: float
    origin: np.ndarray
    exponent: float

    def __post_init__(self):
        self.values = np.asarray(self.values, float)
        self.origin = np.asarray(self.origin, float)
        if (self.values < 0).any() or not np.isfinite(self.values).all():
            raise DomainError("density values must be finite and nonnegative")

    def energy(self) -> float:
        dim = self.values.ndim
        return float(np.sum(self.values ** self.exponent) * self.spacing ** dim)

    def value_at_cell(self, cell: tuple) -> float:
        if any(c < 0 or c >= s for c, s in zip(cell, self.values.shape)):
            return 0.0
        return float(self.values[cell])

    def __call__(self, p) -> float:
        cell = tuple(int(math.floor((x - o) / self.spacing))
                     for x, o in zip(np.asarray(p, float), self.origin))
        return self.value_at_cell(cell)

    def to_csv(self, path) -> None:
        idx = np.argwhere(self.values > 0)
        with open(path, "w") as fh:
            fh.write(",".join(f"i{k}" for k in range(self.values.ndim)) + ",value\n")
            for cell in idx:
                fh.write(",".join(str(int(c)) for c in cell)
                         + f",{self.values[tuple(cell)]:.12g}\n")


@dataclass(frozen=True)
class CurveConstraint:
    """Path constraint mode: unconstrained, avoid(E), or budget(E, K).

    ``cells`` rasterizes the obstacle set onto the scene grid.  In budget mode
    a path may enter obstacle cells at most ``budget`` times (entry events
    counted with multiplicity), the grid-scale surrogate for families meeting
    a set in finitely many points.
    """

    mode: str = "unconstrained"
    cells: np.ndarray | None = None
    budget: int = 0

    def __post_init__(self):
        if self.mode not in ("unconstrained", "avoid", "budget"):
            raise DomainError(f"unknown constraint mode {self.mode!r}")
        if self.mode != "unconstrained" and self.cells is None:
            raise DomainError(f"{self.mode} mode needs an obstacle raster")
        if self.budget < 0:
            raise DomainError("budget must be >= 0")


UNCONSTRAINED = CurveConstraint()


# ---------------------------------------------------------------------------
# Analytic reference formulas


_SPHERE_AREA = {2: 2 * math.pi, 3: 4 * math.pi}


def ring_modulus_exact(n: int, r: float, R: float) -> float:
    """Modulus of the family joining the boundary spheres of A(x; r, R)."""
    if n not in _SPHERE_AREA:
        raise DomainError("ring modulus implemented for n in {2, 3}")
    if not 0 < r < R:
        raise DomainError("need 0 < r < R")
    return _SPHERE_AREA[n] * math.log(R / r) ** (1 - n)


def square_ring_lower_bound(r: float, R: float) -> float:
    """Certified lower bound log(R/r)/4 for square-ring families (n = 2)."""
    if not 0 < r < R:
        raise DomainError("need 0 < r < R")
    return 0.25 * math.log(R / r)


# ---------------------------------------------------------------------------
# Scene builders


def annulus_scene(r: float, R: float, n_cells: int, pad: float = 1.04,
                  half: float | None = None, center=(0.0, 0.0)) -> GridScene:
    """2D annulus with marked bands centered on the boundary circles."""
    half = half if half is not None else R * pad
    h = 2 * half / n_cells
    cx, cy = center
    xs = (np.arange(n_cells) + 0.5) * h - half
    X, Y = np.meshgrid(xs + cx, xs + cy, indexing="ij")
    rad = np.hypot(X - cx, Y - cy)
    f1 = np.abs(rad - r) <= h / 2
    f2 = np.abs(rad - R) <= h / 2
    u = ((rad < R + h) & (rad > r - h)) | f1 | f2
    return GridScene(h, np.array([cx - half, cy - half]), u, f1, f2,
                     name=f"annulus[{r},{R}]x{n_cells}")


def rectangle_scene(width: float, height: float, n_cells: int) -> GridScene:
    """Rectangle with the family joining the two sides of length ``height``."""
    h = width / n_cells
    ny = max(2, int(round(height / h)))
    u = np.ones((n_cells, ny), bool)
    f1 = np.zeros_like(u)
    f2 = np.zeros_like(u)
    f1[0, :] = True
    f2[-1, :] = True
    return GridScene(h, np.zeros(2), u, f1, f2,
                     name=f"rect[{width}x{height}]x{n_cells}")


def square_ring_scene(r: float, R: float, n_cells: int, pad: float = 1.04) -> GridScene:
    """Region between concentric axis-aligned squares of half-sides r < R."""
    half = R * pad
    h = 2 * half / n_cells
    xs = (np.arange(n_cells) + 0.5) * h - half
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    sup = np.maximum(np.abs(X), np.abs(Y))
    f1 = np.abs(sup - r) <= h / 2
    f2 = np.abs(sup - R) <= h / 2
    u = ((sup < R + h) & (sup > r - h)) | f1 | f2
    return GridScene(h, np.array([-half, -half]), u, f1, f2,
                     name=f"sqring[{r},{R}]x{n_cells}")


def annulus_scene_3d(r: float, R: float, n_cells: int, pad: float = 1.08) -> GridScene:
    half = R * pad
    h = 2 * half / n_cells
    xs = (np.arange(n_cells) + 0.5) * h - half
    X, Y, Z = np.meshgrid(xs, xs, xs, indexing="ij")
    rad = np.sqrt(X ** 2 + Y ** 2 + Z ** 2)
    f1 = np.abs(rad - r) <= h * 0.87
    f2 = np.abs(rad - R) <= h * 0.87
    u = ((rad < R + h) & (rad > r - h)) | f1 | f2
    return GridScene(h, np.full(3, -half), u, f1, f2,
                     name=f"ball-shell[{r},{R}]x{n_cells}")


# ---------------------------------------------------------------------------
# Graph machinery


def _offsets(dim: int) -> list[tuple]:
    if dim == 2:
        return [(dx, dy) for dx in (-1, 0, 1) for dy in (-1, 0, 1)
                if (dx, dy) != (0, 0)]
    return [(dx, dy, dz) for dx in (-1, 0, 1) for dy in (-1, 0, 1)
            for dz in (-1, 0, 1) if (dx, dy, dz) != (0, 0, 0)]


class _Graph:
    """Directed edge lists over the active cells of a scene."""

    def __init__(self, active: np.ndarray, h: float):
        self.active = active
        self.h = h
        shape = active.shape
        self.idx = -np.ones(shape, np.int64)
        self.n = int(active.sum())
        self.idx[active] = np.arange(self.n)
        self.cells = np.argwhere(active)
        srcs, dsts, elens = [], [], []
        for off in _offsets(active.ndim):
            src = self.cells
            dst = src + np.array(off)
            ok = np.all((dst >= 0) & (dst < np.array(shape)), axis=1)
            src, dst = src[ok], dst[ok]
            ok2 = active[tuple(dst.T)]
            src, dst = src[ok2], dst[ok2]
            srcs.append(self.idx[tuple(src.T)])
            dsts.append(self.idx[tuple(dst.T)])
            elens.append(np.full(len(src), math.hypot(*off) * h))
        self.src = np.concatenate(srcs) if srcs else np.zeros(0, np.int64)
        self.dst = np.concatenate(dsts) if dsts else np.zeros(0, np.int64)
        self.elen = np.concatenate(elens) if elens else np.zeros(0)

    def weights(self, rho_flat: np.ndarray) -> np.ndarray:
        return 0.5 * (rho_flat[self.src] + rho_flat[self.dst]) * self.elen


def _shortest_distance(graph: _Graph, rho_flat: np.ndarray, f1_ids: np.ndarray,
                       f2_ids: np.ndarray, ecost: np.ndarray | None = None,
                       budget: int = 0, want_path: bool = False):
    """rho-shortest-path distance between the marked node sets.

    With ``ecost`` (per-node entry cost) a resource-constrained search over
    states (cell, entries used) enforces the crossing budget; label setting is
    realized on the layered product graph.
    """
    n = graph.n
    w = graph.weights(rho_flat)
    if ecost is None:
        S = n
        rows = np.concatenate([graph.src, np.full(len(f1_ids), S)])
        cols = np.concatenate([graph.dst, f1_ids])
        data = np.concatenate([w, np.zeros(len(f1_ids))])
        mat = sp.csr_matrix((data, (rows, cols)), shape=(n + 1, n + 1))
        dist, pred = dijkstra(mat, directed=True, indices=S,
                              return_predecessors=True)
        targets = f2_ids
        layer_of = None
    else:
        K = budget
        layers = K + 1
        edge_cost = ecost[graph.dst]
        rows, cols, data = [], [], []
        for k in range(layers):
            k2 = edge_cost + k
            ok = k2 <= K
            rows.append(graph.src[ok] + k * n)
            cols.append(graph.dst[ok] + k2[ok] * n)
            data.append(w[ok])
        S = n * layers
        start_cost = ecost[f1_ids]
        ok0 = start_cost <= K
        rows.append(np.full(int(ok0.sum()), S))
        cols.append(f1_ids[ok0] + start_cost[ok0] * n)
        data.append(np.zeros(int(ok0.sum())))
        mat = sp.csr_matrix(
            (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
            shape=(S + 1, S + 1))
        dist, pred = dijkstra(mat, directed=True, indices=S,
                              return_predecessors=True)
        targets = np.concatenate([f2_ids + k * n for k in range(layers)])
        layer_of = n
    finite = np.isfinite(dist[targets])
    if not finite.any():
        return math.inf, None
    tvals = dist[targets]
    best = int(targets[np.argmin(np.where(finite, tvals, np.inf))])
    d = float(dist[best])
    if not want_path:
        return d, None
    path = []
    node = best
    while node != S and node >= 0:
        cell_node = node % n if layer_of else node
        path.append(cell_node)
        node = pred[node]
    path.reverse()
    # collapse layered duplicates from consecutive layer hops
    dedup = [p for i, p in enumerate(path) if i == 0 or p != path[i - 1]]
    return d, dedup


# ---------------------------------------------------------------------------
# Dirichlet candidate


def _dirichlet_rho(active: np.ndarray, f1: np.ndarray, f2: np.ndarray,
                   h: float, p: float, irls_iters: int = 8) -> np.ndarray:
    """Gradient magnitude of the (p-)capacity potential: u=0 on F1, u=1 on F2."""
    shape = active.shape
    dim = active.ndim
    free = active & ~f1 & ~f2
    nfree = int(free.sum())
    idx = -np.ones(shape, np.int64)
    idx[free] = np.arange(nfree)
    uval = np.zeros(shape)
    uval[f2] = 1.0
    uval[~active] = np.nan

    fr = np.argwhere(free)
    axes_offs = []
    for ax in range(dim):
        for s in (-1, 1):
            off = np.zeros(dim, int)
            off[ax] = s
            axes_offs.append(off)

    def solve_with(cond_of_edge: Callable | None):
        rows, cols, data = [], [], []
        rhs = np.zeros(nfree)
        diag = np.zeros(nfree)
        for off in axes_offs:
            nb = fr + off
            inb = np.all((nb >= 0) & (nb < np.array(shape)), axis=1)
            exists = np.zeros(len(fr), bool)
            exists[inb] = active[tuple(nb[inb].T)]
            cond = np.ones(len(fr))
            if cond_of_edge is not None:
                cond = cond_of_edge(fr, nb, inb, exists)
            diag += exists * cond
            nbf = np.zeros(len(fr), bool)
            nbf[inb] = free[tuple(nb[inb].T)]
            src_ids = idx[tuple(fr[nbf].T)]
            dst_ids = idx[tuple(nb[nbf].T)]
            rows.append(src_ids)
            cols.append(dst_ids)
            data.append(-cond[nbf])
            fixed = exists & ~nbf
            np.add.at(rhs, idx[tuple(fr[fixed].T)],
                      cond[fixed] * uval[tuple(nb[fixed].T)])
        rows.append(np.arange(nfree))
        cols.append(np.arange(nfree))
        data.append(np.maximum(diag, 1e-12))
        L = sp.csr_matrix(
            (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
            shape=(nfree, nfree))
        if nfree > 60_000 or dim == 3:
            # 3D sparse LU fill-in is prohibitive; the system is SPD
            from scipy.sparse.linalg import cg
            precond = sp.diags(1.0 / L.diagonal())
            sol, info = cg(L, rhs, rtol=1e-8, maxiter=2000, M=precond)
            if info == 0:
                return sol
        return spsolve(L.tocsc(), rhs)

    if nfree:
        uval[free] = solve_with(None)
        if abs(p - 2) > 1e-12:
            for _ in range(irls_iters):
                grad = _grad_magnitude(uval, active, h)

                def cond_fn(fr_, nb_, inb_, exists_):
                    g = np.full(len(fr_), 1e-8)
                    mid = np.zeros(len(fr_))
                    ga = grad[tuple(fr_.T)]
                    gb = np.zeros(len(fr_))
                    gb[inb_] = grad[tuple(nb_[inb_].T)]
                    g = 0.5 * (ga + np.where(exists_, gb, ga))
                    return np.maximum(g, 1e-8) ** (p - 2)

                uval[free] = solve_with(cond_fn)
    return _grad_magnitude(uval, active, h)


def _grad_magnitude(uval: np.ndarray, active: np.ndarray, h: float) -> np.ndarray:
    shape = uval.shape
    dim = uval.ndim
    total = np.zeros(shape)
    for ax in range(dim):
        d2 = np.zeros(shape)
        cnt = np.zeros(shape)
        dfwd = np.full(shape, np.nan)
        sl_a = [slice(None)] * dim
        sl_b = [slice(None)] * dim
        sl_a[ax] = slice(0, -1)
        sl_b[ax] = slice(1, None)
        dfwd[tuple(sl_a)] = uval[tuple(sl_b)] - uval[tuple(sl_a)]
        ok = np.isfinite(dfwd)
        dd = np.where(ok, dfwd, 0.0) ** 2
        d2 += dd
        cnt += ok
        d2[tuple(sl_b)] += dd[tuple(sl_a)]
        cnt[tuple(sl_b)] += ok[tuple(sl_a)]
        total += np.where(cnt > 0, d2 / np.maximum(cnt, 1), 0.0)
    rho = np.sqrt(total) / h
    rho[~active] = 0.0
    rho[~np.isfinite(rho)] = 0.0
    return rho


# ---------------------------------------------------------------------------
# The solver


@dataclass
class ModulusResult:
    value: float
    density: DensityField | None
    witnesses: list[PolyCurve]
    gap: float
    iterations: int
    infeasible: bool = False
    diagnostics: dict = field(default_factory=dict)


def _active_masks(scene: GridScene, constraint: CurveConstraint):
    if constraint.mode == "avoid":
        active = scene.u & ~constraint.cells
    else:
        active = scene.u
    f1 = scene.f1 & active
    f2 = scene.f2 & active
    return active, f1, f2


def discrete_modulus(scene: GridScene, constraint: CurveConstraint = UNCONSTRAINED,
                     tol: float = 0.01, exponent: float | None = None,
                     polish_iters: int = 12,
                     extra_candidates: Sequence[np.ndarray] = ()) -> ModulusResult:
    """Discrete p-modulus of grid paths joining F1 to F2 under a constraint.

    Returns a certified upper estimate: the reported density is exactly
    admissible (its constrained shortest-path distance is >= 1) and the value
    is its energy.  ``extra_candidates`` lets callers share candidate
    densities across related runs, which keeps constraint-relaxation
    monotonicity structural.
    """
    if tol <= 0:
        raise DomainError("tolerance must be positive")
    p = exponent if exponent is not None else scene.dim
    h = scene.spacing
    active, f1m, f2m = _active_masks(scene, constraint)
    if not f1m.any() or not f2m.any():
        return ModulusResult(0.0, None, [], 0.0, 0, infeasible=True,
                             diagnostics={"reason": "marked set removed by constraint"})
    graph = _Graph(active, h)
    f1_ids = graph.idx[f1m]
    f2_ids = graph.idx[f2m]
    ecost = None
    budget = 0
    if constraint.mode == "budget":
        ecost = constraint.cells[active].astype(np.int64)
        budget = constraint.budget

    # reachability probe with unit density
    unit = np.ones(graph.n)
    d_probe, _ = _shortest_distance(graph, unit, f1_ids, f2_ids, ecost, budget)
    if not np.isfinite(d_probe):
        return ModulusResult(0.0, None, [], 0.0, 1, infeasible=True,
                             diagnostics={"reason": "no admissible path under constraint"})

    area = h ** scene.dim

    def certified(rho_grid: np.ndarray, want_path=False):
        rho_flat = rho_grid[active]
        d, path = _shortest_distance(graph, rho_flat, f1_ids, f2_ids, ecost,
                                     budget, want_path=want_path)
        if not np.isfinite(d) or d <= 0:
            return math.inf, None, None
        rho_norm = rho_grid / d
        energy = float(np.sum(rho_norm[active] ** p) * area)
        return energy, rho_norm, path

    candidates: list[np.ndarray] = [c for c in extra_candidates]
    candidates.append(_dirichlet_rho(active, f1m, f2m, h, p))
    if constraint.mode == "budget":
        # the avoid-mode potential covers the detour regime
        av_active = scene.u & ~constraint.cells
        if (scene.f1 & av_active).any() and (scene.f2 & av_active).any():
            candidates.append(_dirichlet_rho(av_active, scene.f1 & av_active,
                                             scene.f2 & av_active, h, p))

    best_val, best_rho, best_path = math.inf, None, None
    for cand in candidates:
        val, rho_norm, path = certified(np.where(active, cand, 0.0), want_path=True)
        if val < best_val:
            best_val, best_rho, best_path = val, rho_norm, path

    if best_rho is None:
        return ModulusResult(0.0, None, [], 0.0, 1, infeasible=True,
                             diagnostics={"reason": "all candidates infeasible"})

    # multiplicative polish: bump the binding path, renormalize, keep the best
    rho = best_rho.copy()
    iterations = len(candidates)
    prev_energy = best_val
    gap = 1.0
    for t in range(1, polish_iters + 1):
        val, rho_norm, path = certified(rho, want_path=True)
        iterations += 1
        if val < best_val:
            best_val, best_rho, best_path = val, rho_norm, path
        rel_change = abs(val - prev_energy) / max(val, 1e-300)
        gap = rel_change
        prev_energy = val
        if rel_change < tol:
            break
        eta = 0.25 / t
        rho = rho_norm.copy()
        if path:
            cells = graph.cells[path]
            rho[tuple(cells.T)] *= (1 + eta)

    witnesses = []
    if best_path:
        centers = scene.origin + (graph.cells[best_path] + 0.5) * h
        witnesses.append(PolyCurve(centers))
    density = DensityField(best_rho, h, scene.origin, p)
    return ModulusResult(best_val, density, witnesses, gap, iterations,
                         diagnostics={"candidates": len(candidates),
                                      "constraint": constraint.mode})


# ---------------------------------------------------------------------------
# Admissibility checking


@dataclass
class AdmissibilityReport:
    violations: list
    checked: int

    @property
    def ok(self) -> bool:
        return not self.violations


def admissible_check(rho, curves: Sequence[PolyCurve],
                     tol: float = 1e-9) -> AdmissibilityReport:
    """List curves whose rho-length falls short of 1."""
    violations = []
    for i, gamma in enumerate(curves):
        length = line_integral(rho, gamma)
        if length < 1 - tol:
            violations.append({"index": i, "rho_length": length,
                               "shortfall": 1 - length})
    return AdmissibilityReport(violations, len(curves))


# ---------------------------------------------------------------------------
# Averaged line integral (Lebesgue differentiation check)


def avg_line_integral(rho, curve: PolyCurve, r: float, samples: int,
                      seed: int = 0) -> dict:
    """Monte Carlo average of the line integral over ball translates.

    Estimates the mean of  integral_{curve+x} rho ds  for x uniform in
    B(0, r), reporting the standard error of the estimate.
    """
    if r <= 0:
        raise DomainError("averaging radius must be positive")
    rng = np.random.default_rng(seed)
    dim = curve.dim
    vals = np.empty(samples)
    got = 0
    while got < samples:
        x = rng.uniform(-r, r, size=dim)
        if np.dot(x, x) > r * r:
            continue
        vals[got] = line_integral(rho, curve.translate(x))
        got += 1
    mean = float(vals.mean())
    stderr = float(vals.std(ddof=1) / math.sqrt(samples)) if samples > 1 else 0.0
    return {"mean": mean, "stderr": stderr, "radius": r, "samples": samples}


# ---------------------------------------------------------------------------
# Intersection surveys


def translation_survey(E, curve: PolyCurve, n_max: int, samples: int,
                       seed: int = 0, box_pad: float = 0.0) -> dict:
    """Monte Carlo estimates of m*(F_N): translates meeting E at >= N points.

    F_N is the set of translates x with #((curve+x) cap E) >= N.  The sampling
    box is the Minkowski envelope in which intersections are possible; the
    table reports measure estimates with normal-approximation confidence
    intervals, together with the geometric F_1 envelope bound
    max(len(curve), diam E) * diam(E)^(n-1).
    """
    if curve.length() <= 0:
        raise DomainError("survey curve must be non-constant")
    rng = np.random.default_rng(seed)
    elo, ehi = E.bbox()
    clo = curve.vertices.min(axis=0)
    chi = curve.vertices.max(axis=0)
    lo = np.asarray(elo, float) - chi - box_pad
    hi = np.asarray(ehi, float) - clo + box_pad
    vol = float(np.prod(hi - lo))
    xs = rng.uniform(lo, hi, size=(samples, curve.dim))
    counts = _batched_counts(E, curve, xs)
    diam_e = float(np.linalg.norm(np.asarray(ehi, float) - np.asarray(elo, float)))
    table = []
    for N in range(1, n_max + 1):
        p_hat = float((counts >= N).mean())
        m_hat = p_hat * vol
        se = math.sqrt(max(p_hat * (1 - p_hat), 0.0) / samples) * vol
        table.append({"N": N, "measure": m_hat, "ci95": 1.96 * se})
    f1_bound = max(curve.length(), diam_e) * diam_e ** (curve.dim - 1)
    out = {"table": table, "f1_envelope_bound": f1_bound,
           "box_volume": vol, "samples": samples}
    h_n1 = getattr(E, "h_n1_measure", None)
    if callable(h_n1):
        out["hausdorff_bound_scale"] = curve.length() * h_n1()
    return out


def radial_survey(E, x, r: float, R: float, n_max: int, samples: int,
                  seed: int = 0) -> dict:
    """Directional measure of w with #(segment [x+rw, x+Rw] cap E) >= N."""
    if not 0 < r < R:
        raise DomainError("need 0 < r < R")
    rng = np.random.default_rng(seed)
    x = np.asarray(x, float)
    dim = len(x)
    w = rng.normal(size=(samples, dim))
    w /= np.linalg.norm(w, axis=1, keepdims=True)
    starts = x + r * w
    ends = x + R * w
    counts = E.count_segment_hits_batch(starts, ends)
    omega = _SPHERE_AREA[dim]
    table = []
    for N in range(1, n_max + 1):
        p_hat = float((counts >= N).mean())
        se = math.sqrt(max(p_hat * (1 - p_hat), 0.0) / samples)
        table.append({"N": N, "measure": p_hat * omega, "ci95": 1.96 * se * omega})
    return {"table": table, "sphere_area": omega, "samples": samples}


def _batched_counts(E, curve: PolyCurve, offsets: np.ndarray) -> np.ndarray:
    batch = getattr(E, "count_curve_hits_batch", None)
    if callable(batch):
        return batch(curve, offsets)
    total = np.zeros(len(offsets), float)
    for a, b in curve.segments():
        total += E.count_segment_hits_batch(offsets + a, offsets + b)
    return total
