"""Distortion functionals for sampled homeomorphisms.

Metric distortion (sup/inf image-displacement ratios over radius ladders),
the eccentric-distortion estimator over uncentered candidate sets, and the
ring-modulus quasiconformality test.  The eccentric estimator searches two
candidate families, Euclidean balls and pullbacks of range balls, so the
reported number is always a certified upper estimate of the infimum over all
open sets; for anisotropic affine maps both families meet at the singular
value ratio.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.spatial import cKDTree

from .geom import DomainError, eccentricity_of_boundary
from . import modfam
from .modfam import GridScene, discrete_modulus, ring_modulus_exact


# ---------------------------------------------------------------------------
# Sampled maps


class SampledMap:
    """Forward point correspondences on a regular grid, bilinear in between.

    Stores node values f(x) on an (nx+1) x (ny+1) lattice over a box; the
    inverse is evaluated by nearest-image lookup refined with Newton steps on
    the bilinear patch.
    """

    def __init__(self, origin, pitch: float, values: np.ndarray, name: str = ""):
        self.origin = np.asarray(origin, float)
        self.pitch = float(pitch)
        self.values = np.asarray(values, float)
        if self.values.ndim != 3 or self.values.shape[2] != 2:
            raise DomainError("sampled maps store (nx, ny, 2) node values")
        self.name = name
        self._node_pts = self.node_points().reshape(-1, 2)
        self._img_tree = cKDTree(self.values.reshape(-1, 2))

    @staticmethod
    def from_function(f: Callable, lo, hi, pitch: float, name: str = "") -> "SampledMap":
        lo = np.asarray(lo, float)
        hi = np.asarray(hi, float)
        nx = int(round((hi[0] - lo[0]) / pitch)) + 1
        ny = int(round((hi[1] - lo[1]) / pitch)) + 1
        xs = lo[0] + pitch * np.arange(nx)
        ys = lo[1] + pitch * np.arange(ny)
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        pts = np.stack([X.ravel(), Y.ravel()], axis=1)
        vals = np.asarray(f(pts), float).reshape(nx, ny, 2)
        return SampledMap(lo, pitch, vals, name=name)

    @property
    def shape(self) -> tuple:
        return self.values.shape[:2]

    def node_points(self) -> np.ndarray:
        nx, ny = self.shape
        xs = self.origin[0] + self.pitch * np.arange(nx)
        ys = self.origin[1] + self.pitch * np.arange(ny)
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        return np.stack([X, Y], axis=-1)

    @property
    def domain_lo(self) -> np.ndarray:
        return self.origin

    @property
    def domain_hi(self) -> np.ndarray:
        return self.origin + self.pitch * (np.array(self.shape) - 1)

    def in_domain(self, pts: np.ndarray, margin: float = 0.0) -> np.ndarray:
        pts = np.atleast_2d(pts)
        return np.all((pts >= self.domain_lo + margin)
                      & (pts <= self.domain_hi - margin), axis=1)

    def forward(self, pts) -> np.ndarray:
        """Bilinear interpolation of the node values."""
        pts = np.atleast_2d(np.asarray(pts, float))
        rel = (pts - self.origin) / self.pitch
        nx, ny = self.shape
        i = np.clip(np.floor(rel[:, 0]).astype(int), 0, nx - 2)
        j = np.clip(np.floor(rel[:, 1]).astype(int), 0, ny - 2)
        s = np.clip(rel[:, 0] - i, 0.0, 1.0)[:, None]
        t = np.clip(rel[:, 1] - j, 0.0, 1.0)[:, None]
        v00 = self.values[i, j]
        v10 = self.values[i + 1, j]
        v01 = self.values[i, j + 1]
        v11 = self.values[i + 1, j + 1]
        return ((1 - s) * (1 - t) * v00 + s * (1 - t) * v10
                + (1 - s) * t * v01 + s * t * v11)

    def jacobian(self, pts) -> np.ndarray:
        """Central finite-difference Jacobians of the interpolant, (N,2,2)."""
        pts = np.atleast_2d(np.asarray(pts, float))
        eps = 0.5 * self.pitch
        J = np.empty((len(pts), 2, 2))
        for ax in range(2):
            off = np.zeros(2)
            off[ax] = eps
            J[:, :, ax] = (self.forward(pts + off) - self.forward(pts - off)) / (2 * eps)
        return J

    def inverse(self, pts, iters: int = 8) -> np.ndarray:
        """Preimages under the interpolated map (nearest node + Newton)."""
        pts = np.atleast_2d(np.asarray(pts, float))
        _, nearest = self._img_tree.query(pts, k=1)
        x = self._node_pts[nearest].copy()
        for _ in range(iters):
            r = self.forward(x) - pts
            J = self.jacobian(x)
            det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
            det = np.where(np.abs(det) < 1e-300, 1e-300, det)
            dx = np.empty_like(x)
            dx[:, 0] = (J[:, 1, 1] * r[:, 0] - J[:, 0, 1] * r[:, 1]) / det
            dx[:, 1] = (-J[:, 1, 0] * r[:, 0] + J[:, 0, 0] * r[:, 1]) / det
            x = x - dx
            x = np.clip(x, self.domain_lo, self.domain_hi)
        return x

    def roundtrip_error(self, n_probe: int = 64, seed: int = 0) -> float:
        rng = np.random.default_rng(seed)
        pts = rng.uniform(self.domain_lo + self.pitch,
                          self.domain_hi - self.pitch, size=(n_probe, 2))
        back = self.inverse(self.forward(pts))
        return float(np.linalg.norm(back - pts, axis=1).max())

    def inverse_lipschitz(self) -> float:
        """Upper estimate of Lip(f^{-1}) from grid-edge image lengths."""
        dx = np.linalg.norm(np.diff(self.values, axis=0), axis=2)
        dy = np.linalg.norm(np.diff(self.values, axis=1), axis=2)
        m = min(dx.min(initial=np.inf), dy.min(initial=np.inf))
        if m <= 0:
            raise DomainError("sampled map is not injective on grid edges")
        return self.pitch / m

    def to_csv(self, path) -> None:
        """Rows x1, x2, f1, f2 over the node lattice."""
        pts = self._node_pts
        vals = self.values.reshape(-1, 2)
        with open(path, "w") as fh:
            fh.write("x1,x2,f1,f2\n")
            for p, v in zip(pts, vals):
                fh.write(f"{p[0]:.12g},{p[1]:.12g},{v[0]:.12g},{v[1]:.12g}\n")

    @staticmethod
    def from_csv(path, name: str = "") -> "SampledMap":
        data = np.loadtxt(path, delimiter=",", skiprows=1)
        pts, vals = data[:, :2], data[:, 2:]
        xs = np.unique(pts[:, 0])
        ys = np.unique(pts[:, 1])
        pitch = float(np.diff(xs).min())
        order = np.lexsort((pts[:, 1], pts[:, 0]))
        grid = vals[order].reshape(len(xs), len(ys), 2)
        return SampledMap((xs[0], ys[0]), pitch, grid, name=name)


# ---------------------------------------------------------------------------
# Metric distortion


@dataclass
class DistortionProbe:
    point: np.ndarray
    radii: list
    big_l: list          # L_f(x, r)
    small_l: list        # l_f(x, r)
    h_estimate: float
    detail: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"point": np.asarray(self.point).tolist(), "radii": self.radii,
                "L": self.big_l, "l": self.small_l,
                "H_estimate": self.h_estimate, "detail": self.detail}


def metric_distortion(f: SampledMap, x, ladder) -> DistortionProbe:
    """Per-radius sup/inf displacement ratios; limsup proxied by the two
    finest radii of the ladder."""
    x = np.asarray(x, float)
    ladder = sorted(float(r) for r in ladder)
    if not f.in_domain(x[None], margin=2 * f.pitch)[0]:
        raise DomainError("probe point too close to the sampled boundary")
    if ladder[0] < 2 * f.pitch:
        raise DomainError("smallest ladder radius must be at least two cells")
    nodes = f._node_pts
    imgs = f.values.reshape(-1, 2)
    fx = f.forward(x[None])[0]
    dist_dom = np.linalg.norm(nodes - x, axis=1)
    dist_img = np.linalg.norm(imgs - fx, axis=1)
    big, small = [], []
    eps = 1e-9
    for r in ladder:
        inside = dist_dom <= r * (1 + eps)
        outside = dist_dom >= r * (1 - eps)
        if not inside.any() or not outside.any():
            raise DomainError(f"radius {r} leaves an empty sample set")
        big.append(float(dist_img[inside].max()))
        small.append(float(dist_img[outside].min()))
    ratios = [L / max(s, 1e-300) for L, s in zip(big, small)]
    h_est = max(ratios[:2]) if len(ratios) >= 2 else ratios[0]
    return DistortionProbe(x, ladder, big, small, h_est,
                           {"ratios": ratios})


# ---------------------------------------------------------------------------
# Eccentric distortion


def eccentric_distortion(f: SampledMap, x, r: float, ladder_steps: int = 3,
                         n_boundary: int = 96, detail: bool = False):
    """Upper estimate of the eccentric distortion at x and scale r.

    Minimizes max(E(A), E(f(A))) over two candidate families of open sets A
    containing x with diam(A) <= 2r: (a) Euclidean balls around x and
    (b) pullbacks of range balls around f(x).  Eccentricities of the curved
    side are estimated from mapped boundary clouds.  Estimates are
    nondecreasing as r decreases because the candidate ladder is nested.
    """
    x = np.asarray(x, float)
    lo_margin = min((x - f.domain_lo).min(), (f.domain_hi - x).min())
    if not (0 < r < lo_margin / 3):
        raise DomainError("scale must satisfy 0 < r < dist(x, boundary)/3")
    fx = f.forward(x[None])[0]
    theta = np.linspace(0, 2 * math.pi, n_boundary, endpoint=False)
    circle = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    best = math.inf
    records = []

    # (a) balls around x; image eccentricity via mapped boundary
    for k in range(ladder_steps):
        s = r * 2.0 ** (-k)
        bnd = x + s * circle
        img_bnd = f.forward(bnd)
        centers = f.forward(x[None] + s * 0.25 * np.vstack([[0, 0], circle[::8]]))
        e_img, _ = eccentricity_of_boundary(img_bnd, centers)
        val = max(1.0, e_img)
        records.append({"family": "ball", "scale": s, "value": val})
        best = min(best, val)

    # (b) pullbacks of range balls around f(x)
    s_img = r / max(f.inverse_lipschitz(), 1e-300)
    for k in range(ladder_steps):
        s = s_img * 2.0 ** (-k)
        img_bnd = fx + s * circle
        dom_bnd = f.inverse(img_bnd)
        diam = float(np.linalg.norm(
            dom_bnd[:, None, :] - dom_bnd[None, :, :], axis=2).max())
        if diam > 2 * r:
            continue
        centers = f.inverse(fx[None] + s * 0.25 * np.vstack([[0, 0], circle[::8]]))
        e_dom, _ = eccentricity_of_boundary(dom_bnd, centers)
        val = max(1.0, e_dom)
        records.append({"family": "pullback", "scale": s, "value": val})
        best = min(best, val)

    if detail:
        return best, records
    return best


# ---------------------------------------------------------------------------
# Ring-modulus quasiconformality test


def ring_qc_test(f: SampledMap, rings, c1: float, grid_n: int = 160,
                 tol: float = 0.02) -> dict:
    """Discrete modulus of the image of each ring family, against C1.

    Each ring (center, r, R) must have analytic modulus at most C1 and a
    closure inside the sampled domain.  The image family's modulus comes from
    a grid scene rasterized by inverse lookup; the maximum over rings is
    reported as C2_observed.  Rings failing preconditions get error entries
    instead of poisoning the maximum.
    """
    table = []
    c2 = 0.0
    for ring in rings:
        center, r, R = np.asarray(ring[0], float), float(ring[1]), float(ring[2])
        entry = {"center": center.tolist(), "r": r, "R": R}
        try:
            md_in = ring_modulus_exact(2, r, R)
            entry["input_modulus"] = md_in
            if md_in > c1 + 1e-12:
                raise DomainError(f"ring modulus {md_in:.4f} exceeds C1={c1}")
            pad = np.array([R, R])
            if not (f.in_domain((center - pad)[None])[0]
                    and f.in_domain((center + pad)[None])[0]):
                raise DomainError("ring closure not inside the sampled domain")
            scene = image_ring_scene(f, center, r, R, grid_n)
            res = discrete_modulus(scene, tol=tol)
            entry["image_modulus"] = res.value
            entry["gap"] = res.gap
            c2 = max(c2, res.value)
        except DomainError as exc:
            entry["error"] = str(exc)
        table.append(entry)
    return {"C2_observed": c2, "C1": c1, "table": table}


def image_ring_scene(f: SampledMap, center, r: float, R: float,
                     grid_n: int) -> GridScene:
    """Rasterize the image of a spherical ring onto a fresh grid scene."""
    center = np.asarray(center, float)
    theta = np.linspace(0, 2 * math.pi, 256, endpoint=False)
    circle = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    img_outer = f.forward(center + R * circle)
    lo = img_outer.min(axis=0)
    hi = img_outer.max(axis=0)
    pad = 0.04 * (hi - lo).max()
    lo, hi = lo - pad, hi + pad
    h = float((hi - lo).max() / grid_n)
    nx = grid_n
    ny = max(8, int(math.ceil((hi[1] - lo[1]) / h)))
    xs = lo[0] + (np.arange(nx) + 0.5) * h
    ys = lo[1] + (np.arange(ny) + 0.5) * h
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    centers = np.stack([X.ravel(), Y.ravel()], axis=1)
    pre = f.inverse(centers)
    rad = np.linalg.norm(pre - center, axis=1).reshape(nx, ny)
    # local band width: the image-space cell size h pulled back through the
    # smallest singular value of the local Jacobian
    J = f.jacobian(pre)
    jtj_tr = (J ** 2).sum(axis=(1, 2))
    det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
    disc = np.sqrt(np.maximum(jtj_tr ** 2 - 4 * det ** 2, 0.0))
    smin = np.sqrt(np.maximum((jtj_tr - disc) / 2, 1e-12)).reshape(nx, ny)
    w_local = 0.75 * h / smin
    for attempt in range(4):
        f1 = np.abs(rad - r) <= w_local
        f2 = np.abs(rad - R) <= w_local
        u = ((rad > r - w_local) & (rad < R + w_local)) | f1 | f2
        try:
            return GridScene(h, lo, u, f1, f2,
                             name=f"image-ring[{r},{R}]@{grid_n}")
        except DomainError:
            w_local = w_local * 1.6
    raise DomainError("could not rasterize connected image plates")


def linear_sampled_map(matrix, lo=(-4.0, -4.0), hi=(4.0, 4.0),
                       pitch: float = 0.05, name: str = "") -> SampledMap:
    mat = np.asarray(matrix, float)
    return SampledMap.from_function(lambda p: p @ mat.T, lo, hi, pitch,
                                    name=name or "linear")
