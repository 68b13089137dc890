import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from conftest import cloud
from oracles import brute_chamfer, brute_dcd, brute_emd
from scangap import metrics
from scangap.errors import DegenerateCloudError, EmptyCloudError, PreconditionError, RegistrationDiverged
from scangap.metrics import IcpParams, MetricSpec, RandomSampling, VoxelSampling
from scangap.perturb import Affine, apply_transform
from scangap.pointcloud import PointCloud

ORIGIN = cloud([[0, 0, 0]])
UNIT_X = cloud([[1, 0, 0]])


def random_cloud(rs, n, scale=10.0):
    return PointCloud(rs.uniform(-scale, scale, size=(n, 3)))


# -- chamfer ---------------------------------------------------------------


def test_chamfer_single_points():
    assert metrics.chamfer(ORIGIN, UNIT_X).value == 2.0


def test_chamfer_two_vs_one():
    assert metrics.chamfer(cloud([[0, 0, 0], [2, 0, 0]]), UNIT_X).value == 2.0


def test_chamfer_identity(rs):
    a = random_cloud(rs, 300)
    assert metrics.chamfer(a, a).value == 0.0


def test_chamfer_empty_rejected():
    with pytest.raises(EmptyCloudError):
        metrics.chamfer(ORIGIN, cloud(np.zeros((0, 3))))


def test_chamfer_pre_downsample_changes_inputs(rs):
    a, b = random_cloud(rs, 500), random_cloud(rs, 500)
    assert metrics.chamfer(a, b, pre_downsample=5.0).value != metrics.chamfer(a, b).value


# -- dcd -------------------------------------------------------------------


def test_dcd_single_points():
    assert metrics.dcd(ORIGIN, UNIT_X, 1.0).value == pytest.approx(1 - math.exp(-1), abs=1e-15)


def test_dcd_large_alpha_saturates():
    assert metrics.dcd(ORIGIN, UNIT_X, 1000.0).value == pytest.approx(1.0, abs=1e-6)


def test_dcd_identity(rs):
    a = random_cloud(rs, 300)
    assert metrics.dcd(a, a, 1.0).value == 0.0


def test_dcd_counts_shared_neighbours():
    # both points of a share b's single point: each a-term is 1 - e^-1 / 2
    a = cloud([[-1, 0, 0], [1, 0, 0]])
    term_a = 1 - math.exp(-1) / 2
    term_b = 1 - math.exp(-1)  # b's point maps to a[0] (tie, lowest id), which only it uses
    assert metrics.dcd(a, ORIGIN, 1.0).value == pytest.approx(0.5 * (term_a + term_b), abs=1e-15)


def test_dcd_rejects_bad_alpha():
    with pytest.raises(PreconditionError):
        metrics.dcd(ORIGIN, UNIT_X, 0.0)


def test_dcd_matches_oracle(rs):
    a, b = random_cloud(rs, 120), random_cloud(rs, 90)
    for alpha in (0.1, 1.0, 10.0):
        assert metrics.dcd(a, b, alpha).value == brute_dcd(a.points, b.points, alpha)


# -- emd -------------------------------------------------------------------


def test_emd_permutation_is_zero(rs):
    a = random_cloud(rs, 50)
    b = PointCloud(a.points[rs.permutation(50)])
    assert metrics.emd(a, b).value == 0.0


def test_emd_three_four_five():
    res = metrics.emd(ORIGIN, cloud([[3, 4, 0]]))
    assert res.value == 5.0 and res.details["total"] == 5.0


def test_emd_matches_factorial_oracle(rs):
    for _ in range(5):
        a, b = random_cloud(rs, 8), random_cloud(rs, 8)
        assert metrics.emd(a, b).value == brute_emd(a.points, b.points)


def test_emd_size_mismatch_names_sizes():
    with pytest.raises(PreconditionError, match="equal cardinality.*1 and 2"):
        metrics.emd(ORIGIN, cloud([[0, 0, 0], [1, 1, 1]]))


def test_emd_cap(rs):
    a = random_cloud(rs, 20)
    with pytest.raises(PreconditionError, match="downsample"):
        metrics.emd(a, a, cap=10)


# -- histogram ---------------------------------------------------------------

TRI_A = cloud([[0, 0, 0], [1, 0, 0], [3, 0, 0]])  # distances 1, 3, 2 -> /3 -> bins 1, 3, 2
TRI_B = cloud([[0, 0, 0], [1, 0, 0], [1, 1, 0]])  # distances 1, sqrt2, 1 -> /sqrt2 -> bins 2, 3, 2


def test_histogram_hand_built_l1():
    # freq A = [0, 1/3, 1/3, 1/3], freq B = [0, 0, 2/3, 1/3]; L1 = 2/3; times 4 bins
    res = metrics.histogram_distance(TRI_A, TRI_B, RandomSampling(3), bins=4)
    assert res.value == pytest.approx(8 / 3, abs=1e-12)


def test_histogram_hand_built_l2():
    res = metrics.histogram_distance(TRI_A, TRI_B, RandomSampling(3), bins=4, minkowski_order=2)
    assert res.value == pytest.approx(4 * math.sqrt(2) / 3, abs=1e-12)


def test_histogram_frequency_vector():
    h = metrics.pairwise_distance_histogram(TRI_A.points, 4)
    assert h.tolist() == pytest.approx([0, 1 / 3, 1 / 3, 1 / 3])


def test_histogram_voxel_self_is_zero(small_scans):
    a = small_scans[0]
    assert metrics.histogram_distance(a, a, VoxelSampling(1.0)).value == 0.0


def test_histogram_random_self_positive_and_shrinks(small_scans):
    a = small_scans[0]
    v100 = [metrics.histogram_distance(a, a, RandomSampling(100), seed=s).value for s in range(5)]
    v1000 = [metrics.histogram_distance(a, a, RandomSampling(1000), seed=s).value for s in range(5)]
    assert min(v100) > 0 and min(v1000) > 0
    assert np.mean(v1000) < np.mean(v100)


def test_histogram_random_is_symmetric(small_scans):
    a, b = small_scans[:2]
    s = RandomSampling(300)
    assert metrics.histogram_distance(a, b, s, seed=4).value == metrics.histogram_distance(b, a, s, seed=4).value


def test_histogram_degenerate_cloud():
    a = cloud([[1, 1, 1]] * 4)
    with pytest.raises(DegenerateCloudError):
        metrics.histogram_distance(a, TRI_A, RandomSampling(10))
    with pytest.raises(DegenerateCloudError):
        metrics.histogram_distance(cloud([[0, 0, 0]]), TRI_A, RandomSampling(10))


def test_histogram_convex_hull_diameter_matches_brute(rs):
    pts = rs.normal(size=(500, 3))
    d = np.sqrt(((pts[:, None] - pts[None]) ** 2).sum(-1)).max()
    assert metrics._diameter(pts) == pytest.approx(d, rel=1e-12)


# -- icp -------------------------------------------------------------------


def _structured(rs, n=600):
    # three orthogonal planes plus a blob: well-conditioned for registration
    k = n // 4
    u = rs.uniform(0, 4, size=(k, 2))
    return PointCloud(np.vstack([
        np.column_stack([u[:, 0], u[:, 1], np.zeros(k)]),
        np.column_stack([u[:, 0], np.zeros(k), u[:, 1]]),
        np.column_stack([np.zeros(k), u[:, 0], u[:, 1]]),
        rs.normal(2, 0.5, size=(n - 3 * k, 3)),
    ]))


def test_icp_identity(rs):
    a = _structured(rs)
    assert metrics.icp_rmse(a, a).value <= 1e-9


def test_icp_recovers_translation(rs):
    src = _structured(rs)
    tgt = apply_transform(src, Affine.translate(0.5, 0, 0))
    res = metrics.icp_rmse(src, tgt)
    assert res.value < 1e-3
    t = np.asarray(res.details["transform"])[:3, 3]
    assert np.allclose(t, [0.5, 0, 0], atol=1e-3)


def test_icp_is_not_symmetric(rs):
    big = _structured(rs, 4000)
    small = PointCloud(big.points[rs.choice(4000, 100, replace=False)] + rs.normal(0, 0.05, (100, 3)))
    assert metrics.icp_rmse(small, big).value != metrics.icp_rmse(big, small).value


def test_icp_diverges_without_inliers():
    far = cloud([[100, 100, 100]])
    with pytest.raises(RegistrationDiverged) as exc:
        metrics.icp_rmse(ORIGIN, far, IcpParams(max_correspondence_dist=1.0))
    assert exc.value.iteration == 1


# -- voxel iou / bev ---------------------------------------------------------


def test_voxel_iou_identity(rs):
    a = random_cloud(rs, 200)
    assert metrics.voxel_iou(a, a, 0.5).value == 1.0


def test_voxel_iou_disjoint():
    a = cloud([[0.1, 0.1, 0.1]])
    b = cloud([[5.1, 0.1, 0.1]])
    assert metrics.voxel_iou(a, b, 1.0).value == 0.0


def test_voxel_iou_one_third():
    a = cloud([[0.5, 0.5, 0.5], [1.5, 0.5, 0.5]])  # voxels A=(0,0,0), B=(1,0,0)
    b = cloud([[1.2, 0.2, 0.2], [2.5, 0.5, 0.5]])  # voxels B, C=(2,0,0)
    assert metrics.voxel_iou(a, b, 1.0).value == pytest.approx(1 / 3)


def test_voxel_iou_negative_coordinates_use_floor():
    a = cloud([[-0.1, 0.0, 0.0]])
    b = cloud([[0.1, 0.0, 0.0]])
    assert metrics.voxel_iou(a, b, 1.0).value == 0.0


def test_bev_identity(rs):
    a = random_cloud(rs, 200)
    assert metrics.bev_distance(a, a).value == 0.0


def test_bev_disjoint():
    assert metrics.bev_distance(ORIGIN, cloud([[10, 10, 0]]), 1.0).value == 2.0


def test_bev_hand_built_grid():
    # origin (0.1, 0.1); a cells (0,0)x2 (1,0) (1,1); b cells (0,0) (1,0)x2 (0,1)
    a = cloud([[0.1, 0.1, 0], [0.2, 0.2, 5], [1.5, 0.5, 0], [1.5, 1.5, 0]])
    b = cloud([[0.1, 0.1, 0], [1.5, 0.5, 0], [1.6, 0.6, -3], [0.5, 1.5, 0]])
    # |.5-.25| + |.25-.5| + |.25-0| + |0-.25| = 1.0
    assert metrics.bev_distance(a, b, 1.0).value == pytest.approx(1.0, abs=1e-15)


# -- two-step and intensity transfer ------------------------------------------


def test_two_step_identical(rs):
    a = random_cloud(rs, 100)
    r = metrics.two_step_compare(a, a)
    assert (r.dcd_alpha1, r.chamfer, r.verdict) == (0.0, None, "similar")


def test_two_step_far_apart(rs):
    a = random_cloud(rs, 100)
    b = apply_transform(a, Affine.translate(500, 0, 0))
    r = metrics.two_step_compare(a, b)
    assert r.verdict == "dissimilar" and r.chamfer > 0


def test_two_step_threshold_override():
    r = metrics.two_step_compare(ORIGIN, UNIT_X, threshold=0.5)  # dcd = 0.632
    assert r.verdict == "dissimilar" and r.chamfer == 2.0
    assert metrics.two_step_compare(ORIGIN, UNIT_X, threshold=0.7).verdict == "similar"


def test_transfer_intensity_same_geometry(rs):
    real = PointCloud(rs.normal(size=(50, 3)), rs.uniform(size=50))
    sim = PointCloud(real.points)
    out, frac = metrics.transfer_intensity(sim, real)
    assert frac == 1.0 and np.array_equal(out.intensity, real.intensity)


def test_transfer_intensity_far_point_keeps_original():
    real = cloud([[0, 0, 0]], intensity=[0.9])
    sim = cloud([[5, 0, 0]], intensity=[0.2])
    out, frac = metrics.transfer_intensity(sim, real, radius=1.0)
    assert frac == 0.0 and out.intensity.tolist() == [0.2]
    out, _ = metrics.transfer_intensity(cloud([[5, 0, 0]]), real, radius=1.0)
    assert out.intensity.tolist() == [0.0]


def test_transfer_intensity_half_matched():
    real = cloud([[0, 0, 0], [10, 0, 0]], intensity=[0.3, 0.7])
    sim = cloud([[0.5, 0, 0], [10, 0.9, 0], [0, 3, 0], [20, 0, 0]])
    out, frac = metrics.transfer_intensity(sim, real, radius=1.0)
    assert frac == 0.5
    assert out.intensity.tolist() == [0.3, 0.7, 0.0, 0.0]


def test_transfer_intensity_needs_real_intensity():
    with pytest.raises(PreconditionError):
        metrics.transfer_intensity(ORIGIN, UNIT_X)


# -- spec / result serialisation ---------------------------------------------


def test_metric_result_json_keys():
    d = metrics.dcd(ORIGIN, UNIT_X, 2.0).to_dict()
    assert {"metric", "params", "value", "orientation", "wall_time_s"} <= set(d)
    assert d["metric"] == "dcd" and d["params"] == {"alpha": 2.0} and d["orientation"] == "distance"


@pytest.mark.parametrize("spec", [
    MetricSpec("dcd", alpha=10),
    MetricSpec("histogram", sampling=RandomSampling(100), bins=64, seed=3),
    MetricSpec("histogram", sampling=VoxelSampling(2.0)),
    MetricSpec("icp", icp=IcpParams(10, 1e-4, 1.0)),
    MetricSpec("chamfer", pre_downsample=1.0),
    MetricSpec("voxel_iou", voxel_size=0.25),
])
def test_metric_spec_round_trip(spec):
    assert MetricSpec.from_dict(spec.to_dict()) == spec


def test_metric_spec_validation():
    with pytest.raises(PreconditionError):
        MetricSpec("nope")
    with pytest.raises(PreconditionError):
        MetricSpec("histogram", bins=1)
    with pytest.raises(PreconditionError):
        MetricSpec("dcd", alpha=-1)


# -- properties ---------------------------------------------------------------

SYMMETRIC = [
    MetricSpec("chamfer"),
    MetricSpec("dcd", alpha=1.0),
    MetricSpec("dcd", alpha=1000.0),
    MetricSpec("histogram", sampling=VoxelSampling(2.0)),
    MetricSpec("histogram", sampling=RandomSampling(50)),
    MetricSpec("voxel_iou"),
    MetricSpec("bev"),
]

seeds = st.integers(0, 2**32 - 1)


@settings(max_examples=30, deadline=None)
@given(seeds, st.integers(3, 400), st.integers(3, 400))
def test_symmetry_and_self_consistency(seed, n, m):
    rs = np.random.default_rng(seed)
    a, b = random_cloud(rs, n), random_cloud(rs, m)
    for spec in SYMMETRIC:
        assert metrics.evaluate(spec, a, b).value == metrics.evaluate(spec, b, a).value
        if spec.sampling is None or isinstance(spec.sampling, VoxelSampling):
            r = metrics.evaluate(spec, a, a)
            assert r.value == r.identity_value


@settings(max_examples=50, deadline=None)
@given(seeds, st.integers(1, 200), st.integers(1, 200), st.floats(1e-3, 1e3), st.sampled_from([1e-6, 1.0, 1e6]))
def test_bounded_ranges(seed, n, m, alpha, scale):
    rs = np.random.default_rng(seed)
    a, b = random_cloud(rs, n, scale), random_cloud(rs, m, scale)
    assert 0.0 <= metrics.dcd(a, b, alpha).value <= 1.0
    assert 0.0 <= metrics.voxel_iou(a, b, 0.5).value <= 1.0
    assert 0.0 <= metrics.bev_distance(a, b, 0.5).value <= 2.0 + 1e-12


@settings(max_examples=20, deadline=None)
@given(seeds, st.floats(-np.pi, np.pi), st.floats(-np.pi, np.pi))
def test_rigid_invariance(seed, rz, rx):
    rs = np.random.default_rng(seed)
    a, b = random_cloud(rs, 40, 3.0), random_cloud(rs, 40, 3.0)
    t = Affine.translate(*rs.uniform(-5, 5, 3)) @ Affine.rotation(rx, 0.3, rz)
    ta, tb = apply_transform(a, t), apply_transform(b, t)
    assert metrics.chamfer(ta, tb).value == pytest.approx(metrics.chamfer(a, b).value, abs=1e-9)
    assert metrics.dcd(ta, tb, 1.0).value == pytest.approx(metrics.dcd(a, b, 1.0).value, abs=1e-9)
    assert metrics.emd(ta, tb).value == pytest.approx(metrics.emd(a, b).value, abs=1e-9)
    rsamp = RandomSampling(40)
    assert metrics.histogram_distance(ta, tb, rsamp).value == pytest.approx(
        metrics.histogram_distance(a, b, rsamp).value, abs=1e-9)


@settings(max_examples=30, deadline=None)
@given(seeds, st.integers(1, 100), st.integers(1, 100))
def test_dcd_non_decreasing_in_alpha(seed, n, m):
    rs = np.random.default_rng(seed)
    a, b = random_cloud(rs, n, 1.0), random_cloud(rs, m, 1.0)
    assume(not np.array_equal(a.points, b.points))
    values = [metrics.dcd(a, b, alpha).value for alpha in (0.01, 0.1, 1, 10, 100, 1000)]
    assert all(y >= x for x, y in zip(values, values[1:]))


@settings(max_examples=15, deadline=None)
@given(seeds, st.integers(1, 2000), st.integers(1, 2000))
def test_chamfer_and_dcd_equal_brute_force(seed, n, m):
    rs = np.random.default_rng(seed)
    a, b = random_cloud(rs, min(n, 300)), random_cloud(rs, min(m, 300))
    assert metrics.chamfer(a, b).value == brute_chamfer(a.points, b.points)
    assert metrics.dcd(a, b, 1.0).value == brute_dcd(a.points, b.points, 1.0)
