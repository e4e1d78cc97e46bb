import json
import math

import numpy as np
import pytest

from extremal import qhyp
from extremal.geom import DomainError
from extremal.qhyp import (PolygonDomain, QhGrid, comb_domain, cusp_domain,
                           disk_domain, qh_distance, shadow_sum_diagnostic,
                           shadows, square_domain, tree_path_cubes,
                           whitney_decompose)


DISK = disk_domain(1.0, 128)


# ---------------------------------------------------------------------------
# Polygon domains

def test_polygon_contains_and_distance():
    sq = square_domain(2.0, (-1.0, -1.0))
    pts = np.array([[0.0, 0.0], [0.9, 0.9], [1.5, 0.0]])
    assert list(sq.contains(pts)) == [True, True, False]
    assert abs(sq.boundary_distance(pts[:1])[0] - 1.0) < 1e-9


def test_polygon_json_roundtrip():
    d2 = PolygonDomain.from_json(json.loads(json.dumps(DISK.to_json())))
    assert np.allclose(d2.outer, DISK.outer)


# ---------------------------------------------------------------------------
# Whitney decomposition

def test_whitney_square_invariants_exact():
    dec = whitney_decompose(square_domain(), max_depth=6)
    rep = dec.verify_exact()
    assert rep["cubes"] > 0
    assert rep["lower_violations"] == []
    assert rep["upper_violations"] == []
    assert rep["neighbor_ratio_ok"]


def test_whitney_disk_invariants_exact():
    dec = whitney_decompose(DISK, max_depth=6)
    rep = dec.verify_exact()
    assert rep["lower_violations"] == []
    assert rep["upper_violations"] == []
    assert rep["neighbor_ratio_ok"]
    assert dec.truncated > 0


def test_whitney_interiors_disjoint():
    dec = whitney_decompose(DISK, max_depth=6)
    unit = 2 ** dec.max_depth
    seen = set()
    for q in dec.cubes:
        w = 2 ** (dec.max_depth - q.depth)
        for i in range(q.ij[0] * w, (q.ij[0] + 1) * w):
            for j in range(q.ij[1] * w, (q.ij[1] + 1) * w):
                assert (i, j) not in seen
                seen.add((i, j))


def test_whitney_cube_count_grows_near_boundary():
    counts = [len(whitney_decompose(DISK, max_depth=d).cubes) for d in (5, 6, 7)]
    assert counts[1] >= 2 * counts[0]
    assert counts[2] >= 2 * counts[1]


def test_whitney_empty_domain_rejected():
    # a polygon with zero area after snapping has no interior cubes
    degenerate = PolygonDomain([(0, 0), (1, 0), (1, 1e-9), (0, 1e-9)])
    with pytest.raises(DomainError):
        whitney_decompose(degenerate, max_depth=4)


# ---------------------------------------------------------------------------
# Quasihyperbolic distance

def test_qh_distance_same_point_zero():
    res = qh_distance(DISK, (0.1, 0.2), (0.1, 0.2), pitch=0.02)
    assert res["value"] == 0.0


def test_qh_distance_disk_matches_radial_integral():
    res = qh_distance(DISK, (0.0, 0.0), (0.0, 0.9), pitch=0.01)
    exact = math.log(10)      # int_0^0.9 dt/(1-t)
    assert abs(res["value"] - exact) / exact < 0.05
    assert res["geodesic"].length() >= 0.9


def test_qh_distance_symmetric_exactly():
    a, b = (0.3, 0.4), (-0.5, 0.1)
    v1 = qh_distance(DISK, a, b, pitch=0.02)["value"]
    v2 = qh_distance(DISK, b, a, pitch=0.02)["value"]
    assert v1 == v2


def test_qh_distance_triangle_inequality():
    grid = QhGrid(DISK, 0.02)
    rng = np.random.default_rng(11)
    pts = rng.uniform(-0.6, 0.6, size=(3, 2))
    d01 = qh_distance(DISK, pts[0], pts[1], grid=grid)["value"]
    d12 = qh_distance(DISK, pts[1], pts[2], grid=grid)["value"]
    d02 = qh_distance(DISK, pts[0], pts[2], grid=grid)["value"]
    assert d02 <= d01 + d12 + 1e-9


def test_qh_distance_unreachable_is_infeasible():
    # deep cusp point beyond the grid resolution: flagged, not crashed
    cusp = cusp_domain()
    res = qh_distance(cusp, (1.75, 0.0), (0.45, 0.0), pitch=0.05)
    assert res["infeasible"]
    assert res["value"] == math.inf


def test_qh_distance_rejects_exterior_points():
    with pytest.raises(DomainError):
        qh_distance(DISK, (0.0, 0.0), (2.0, 0.0), pitch=0.05)


# ---------------------------------------------------------------------------
# Shadows

@pytest.fixture(scope="module")
def disk_shadows():
    dec = whitney_decompose(DISK, max_depth=6)
    return dec, shadows(DISK, (0.0, 0.0), dec)


def test_shadow_of_root_is_whole_boundary(disk_shadows):
    dec, sh = disk_shadows
    root_rec = sh["records"][sh["root"]]
    assert len(root_rec.shadow_indices) == len(sh["boundary_samples"])
    assert abs(root_rec.s - 2.0) < 0.05        # diam of the disk boundary


def test_leaf_with_single_sample_has_zero_s(disk_shadows):
    dec, sh = disk_shadows
    assert any(len(r.shadow_indices) == 1 and r.s == 0.0 for r in sh["records"])


def test_shadow_diameters_bounded_by_boundary_diameter(disk_shadows):
    dec, sh = disk_shadows
    bd = 2.0 + 4 / 128
    assert all(r.s <= bd + 1e-9 for r in sh["records"])


def test_tree_paths_follow_adjacency(disk_shadows):
    dec, sh = disk_shadows
    adj = set(map(tuple, dec.adjacency))
    parent = sh["parent"]
    for start in range(0, len(dec.cubes), 7):
        path = tree_path_cubes(parent, start)
        for a, b in zip(path[:-1], path[1:]):
            assert (min(a, b), max(a, b)) in adj


def test_boundary_adjacent_shadows_comparable_to_side(disk_shadows):
    # s(Q) / side stays within a logged band for fine boundary cubes
    dec, sh = disk_shadows
    finest = max(q.depth for q in dec.cubes)
    ratios = [r.s / dec.cubes[r.cube_index].side
              for r in sh["records"]
              if dec.cubes[r.cube_index].depth == finest and len(r.shadow_indices) > 1]
    assert ratios
    med = float(np.median(ratios))
    assert 0.2 <= med <= 30.0


def test_per_generation_shadow_sums_logged(disk_shadows):
    dec, sh = disk_shadows
    sums = {}
    for rec in sh["records"]:
        d = dec.cubes[rec.cube_index].depth
        sums[d] = sums.get(d, 0.0) + rec.s ** 2
    assert sums  # recorded per generation; trend is informational


# ---------------------------------------------------------------------------
# Shadow-sum diagnostic

def test_disk_ratio_stable_under_quadrature_refinement():
    d1 = shadow_sum_diagnostic(DISK, (0.0, 0.0), max_depth=6, qh_pitch=0.02)
    d2 = shadow_sum_diagnostic(DISK, (0.0, 0.0), max_depth=6, qh_pitch=0.01)
    assert math.isfinite(d1["ratio"]) and math.isfinite(d2["ratio"])
    big, small = max(d1["ratio"], d2["ratio"]), min(d1["ratio"], d2["ratio"])
    assert big / small < 2.0


def test_comb_domain_ratio_finite():
    comb = comb_domain()
    d = shadow_sum_diagnostic(comb, (1.0, 0.12), max_depth=7, qh_pitch=0.01)
    assert math.isfinite(d["ratio"])
    assert d["rhs"] < math.inf


def test_cusp_rhs_outgrows_lhs():
    cusp = cusp_domain()
    levels = [shadow_sum_diagnostic(cusp, (1.75, 0.0), max_depth=6, qh_pitch=p)
              for p in (0.02, 0.01, 0.005)]
    for a, b in zip(levels[:-1], levels[1:]):
        growth_rhs = b["rhs"] / a["rhs"]
        growth_lhs = b["lhs"] / a["lhs"]
        assert growth_rhs - 1 >= 2 * (growth_lhs - 1)
        assert growth_rhs > 1.1


def test_whitney_csv_and_shadow_table(tmp_path, disk_shadows):
    dec, sh = disk_shadows
    path = tmp_path / "cubes.csv"
    dec.to_csv(path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "corner_x,corner_y,side,dist"
    assert len(lines) == len(dec.cubes) + 1
    table = qhyp.shadow_table_json(dec, sh)
    assert len(table["table"]) == len(dec.cubes)
    assert table["boundary_samples"] == len(sh["boundary_samples"])
