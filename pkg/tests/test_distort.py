import math

import numpy as np
import pytest

from extremal import distort
from extremal.distort import (SampledMap, eccentric_distortion, linear_sampled_map,
                              metric_distortion, ring_qc_test)
from extremal.geom import DomainError
from extremal.modfam import ring_modulus_exact


IDENT = linear_sampled_map(np.eye(2), pitch=0.05)
DIAG = linear_sampled_map(np.diag([2.0, 1.0]), pitch=0.05)
ROT = linear_sampled_map(1.3 * np.array([[math.cos(0.6), -math.sin(0.6)],
                                         [math.sin(0.6), math.cos(0.6)]]),
                         pitch=0.05)


# ---------------------------------------------------------------------------
# Sampled maps

def test_roundtrip_within_half_cell():
    for m in (IDENT, DIAG, ROT):
        assert m.roundtrip_error() <= 0.5 * m.pitch


def test_inverse_accuracy_affine():
    pts = np.array([[0.3, -0.2], [1.1, 0.7], [-0.9, 0.4]])
    back = DIAG.inverse(DIAG.forward(pts))
    assert np.allclose(back, pts, atol=1e-9)


def test_forward_is_bilinear_interpolant():
    def f(p):
        p = np.atleast_2d(p)
        return np.stack([p[:, 0] * p[:, 1], p[:, 1]], axis=1)
    m = SampledMap.from_function(f, (-1, -1), (1, 1), 0.1)
    pts = np.array([[0.33, 0.47]])
    # xy is bilinear, reproduced exactly
    assert np.allclose(m.forward(pts), f(pts), atol=1e-12)


def test_map_requires_injective_edges():
    vals = np.zeros((3, 3, 2))
    m = SampledMap((0, 0), 1.0, vals)
    with pytest.raises(DomainError):
        m.inverse_lipschitz()


# ---------------------------------------------------------------------------
# Metric distortion

def test_metric_distortion_identity_and_diag():
    for x in [(0.3, -0.2), (-1.0, 0.8), (0.0, 0.0)]:
        assert abs(metric_distortion(IDENT, x, [0.2, 0.4, 0.8]).h_estimate - 1) < 1e-9
        assert abs(metric_distortion(DIAG, x, [0.2, 0.4, 0.8]).h_estimate - 2) < 1e-9


def test_metric_distortion_linear_spatially_constant():
    # probes on lattice nodes: the estimator is lattice-translation-invariant
    rng = np.random.default_rng(4)
    idx = rng.integers(-25, 25, size=(12, 2))
    pts = idx * DIAG.pitch
    hs = [metric_distortion(DIAG, x, [0.2, 0.4]).h_estimate for x in pts]
    assert np.var(hs) < 1e-12


def test_metric_distortion_radial_stretch_vs_jacobian():
    def stretch(p):
        p = np.atleast_2d(p)
        return p * np.linalg.norm(p, axis=1, keepdims=True)
    m = SampledMap.from_function(stretch, (0.05, -0.6), (1.2, 0.6), 0.01)
    x = np.array([0.5, 0.0])
    probe = metric_distortion(m, x, [0.02, 0.04])
    J = m.jacobian(x[None])[0]
    sv = np.linalg.svd(J, compute_uv=False)
    oracle = sv[0] / sv[-1]
    assert abs(probe.h_estimate - oracle) / oracle < 0.10


def test_metric_distortion_guards():
    with pytest.raises(DomainError):
        metric_distortion(IDENT, (3.99, 0.0), [0.2])      # touches boundary
    with pytest.raises(DomainError):
        metric_distortion(IDENT, (0.0, 0.0), [0.01])      # below two cells


def test_probe_invariant_l_at_most_big_l():
    probe = metric_distortion(DIAG, (0.2, 0.1), [0.2, 0.4, 0.8])
    for L, l in zip(probe.big_l, probe.small_l):
        assert L >= l > 0


# ---------------------------------------------------------------------------
# Eccentric distortion

def test_eccentric_identity_and_conformal_are_one():
    assert eccentric_distortion(IDENT, (0.3, -0.2), 0.5) <= 1.02
    assert eccentric_distortion(ROT, (0.3, -0.2), 0.5) <= 1.03


def test_eccentric_diag_is_two():
    val = eccentric_distortion(DIAG, (0.3, -0.2), 0.5)
    assert val <= 2.0 * 1.05
    assert abs(val - 2.0) / 2.0 <= 0.10


def test_eccentric_monotone_as_scale_shrinks():
    vals = [eccentric_distortion(DIAG, (0.3, -0.2), r) for r in (0.8, 0.4, 0.2, 0.1)]
    for a, b in zip(vals, vals[1:]):
        assert b >= a - 1e-9


def test_eccentric_bounded_by_metric_ratio():
    for m in (IDENT, DIAG, ROT):
        x = (0.25, -0.15)
        e = eccentric_distortion(m, x, 0.4)
        probe = metric_distortion(m, x, [0.4, 0.8])
        assert e <= probe.big_l[0] / probe.small_l[0] + 0.05


def test_eccentric_scale_guard():
    with pytest.raises(DomainError):
        eccentric_distortion(IDENT, (0.0, 0.0), 2.0)


def test_eccentric_symmetry_between_map_and_inverse():
    # ball-family estimate for f at x equals the pullback-family estimate
    # for f^{-1} at f(x): the candidate sets coincide for matched ladders
    f = DIAG
    finv = linear_sampled_map(np.diag([0.5, 1.0]), lo=(-8, -4), hi=(8, 4),
                              pitch=0.05)
    x = np.array([0.3, -0.2])
    r = 0.4
    _, rec_f = eccentric_distortion(f, x, r, detail=True)
    ball_vals = sorted(e["value"] for e in rec_f if e["family"] == "ball")
    y = f.forward(x[None])[0]
    # Lip((f^{-1})^{-1}) = 2, so pullback ladders start at r_g / 2 = r
    _, rec_g = eccentric_distortion(finv, y, 2 * r, detail=True)
    pull_vals = sorted(e["value"] for e in rec_g if e["family"] == "pullback")
    assert len(ball_vals) == len(pull_vals)
    for a, b in zip(ball_vals, pull_vals):
        assert abs(a - b) < 0.05


# ---------------------------------------------------------------------------
# Ring QC test

def test_ring_qc_identity_matches_analytic():
    rings = [((0.0, 0.0), 0.5, 1.6), ((0.0, 0.0), 0.4, 1.4)]
    out = ring_qc_test(IDENT, rings, c1=6.0, grid_n=160, tol=0.02)
    for entry in out["table"]:
        assert "error" not in entry
        assert abs(entry["image_modulus"] - entry["input_modulus"]) \
            / entry["input_modulus"] < 0.05


def test_ring_qc_diag_within_k_bound():
    rings = [((0.0, 0.0), 0.5, 1.6)]
    out = ring_qc_test(DIAG, rings, c1=6.0, grid_n=160, tol=0.02)
    md = out["table"][0]["input_modulus"]
    assert out["C2_observed"] <= 2 * md + 2 * 0.02 * md


def test_ring_qc_rejects_thin_ring_and_out_of_domain():
    out = ring_qc_test(IDENT, [((0.0, 0.0), 1.0, 1.1)], c1=2.0)
    assert "error" in out["table"][0]
    out2 = ring_qc_test(IDENT, [((3.9, 0.0), 0.5, 1.5)], c1=8.0)
    assert "error" in out2["table"][0]


def test_ring_qc_flags_fold_singularity():
    # y -> y|y| is quasiconformal away from the segment y = 0 with blowing
    # distortion toward it: image moduli grow as rings shrink to the segment
    def fold(p):
        p = np.atleast_2d(p)
        return np.stack([p[:, 0], p[:, 1] * np.abs(p[:, 1])], axis=1)
    m = SampledMap.from_function(fold, (-4, -4), (4, 4), 0.02)
    big = ring_qc_test(m, [((0.0, 0.0), 0.6, 1.8)], c1=8.0, grid_n=128)
    small = ring_qc_test(m, [((0.0, 0.0), 0.15, 0.45)], c1=8.0, grid_n=128)
    assert "error" not in big["table"][0]
    assert "error" not in small["table"][0]
    # regression trend from the first verified run
    assert small["C2_observed"] >= 1.25 * big["C2_observed"]


def test_sampled_map_csv_roundtrip(tmp_path):
    path = tmp_path / "map.csv"
    small = linear_sampled_map(np.diag([2.0, 1.0]), lo=(-1, -1), hi=(1, 1),
                               pitch=0.25)
    small.to_csv(path)
    back = SampledMap.from_csv(path)
    assert back.pitch == small.pitch
    assert np.allclose(back.values, small.values)
    assert np.allclose(back.origin, small.origin)


def test_probe_report_json():
    probe = metric_distortion(DIAG, (0.2, 0.1), [0.2, 0.4])
    obj = probe.to_json()
    assert obj["H_estimate"] == probe.h_estimate
    assert len(obj["L"]) == len(obj["radii"]) == 2
