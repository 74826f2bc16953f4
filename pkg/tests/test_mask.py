import numpy as np
import pytest
from scipy.spatial import ConvexHull as ScipyHull

from toneaudit.errors import InsufficientSkinArea, TopologyError
from toneaudit.fixtures import make_landmark_set
from toneaudit.mask import (
    LandmarkSet,
    MaskParams,
    SkinMask,
    build_skin_mask,
    convex_hull,
    default_topology_path,
    dilate,
    face_exclusion_region,
    forehead_quad,
    load_topology,
    mask_coverage,
    rasterize_polygon,
)


@pytest.fixture(scope="module")
def topo():
    return load_topology(default_topology_path())


@pytest.fixture(scope="module")
def frontal():
    return make_landmark_set(256, 256)


class TestTopology:
    def test_shipped_topology_loads(self, topo):
        assert len(topo.face_oval) == 36
        assert len(topo.left_eye) == len(topo.right_eye) == 16
        assert len(topo.lips_outer) == 20
        assert all(0 <= i < 468 for i in topo.skin_hull_basis)

    def test_out_of_range_index_rejected(self, tmp_path):
        import json
        raw = json.loads(default_topology_path().read_text())
        raw["left_eye"][0] = 468
        path = tmp_path / "topo.json"
        path.write_text(json.dumps(raw))
        with pytest.raises(TopologyError, match="out of range"):
            load_topology(path)


class TestConvexHull:
    def test_square_hull(self):
        pts = np.array([[0, 0], [2, 0], [2, 2], [0, 2], [1, 1], [0.5, 0.5]])
        hull = convex_hull(pts)
        assert len(hull) == 4
        assert {tuple(p) for p in hull} == {(0, 0), (2, 0), (2, 2), (0, 2)}

    def test_matches_scipy_on_random_clouds(self):
        rng = np.random.default_rng(1)
        for _ in range(25):
            pts = rng.uniform(0, 100, size=(rng.integers(4, 60), 2))
            ours = {tuple(np.round(p, 9)) for p in convex_hull(pts)}
            ref = {tuple(np.round(pts[v], 9)) for v in ScipyHull(pts).vertices}
            assert ours == ref

    def test_collinear_points(self):
        pts = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]])
        hull = convex_hull(pts)
        assert len(hull) <= 2


class TestRasterizePolygon:
    def test_axis_aligned_square_pixel_count(self):
        # square covering pixel centers (1..4, 1..4)
        poly = np.array([[1.0, 1.0], [5.0, 1.0], [5.0, 5.0], [1.0, 5.0]])
        bits = rasterize_polygon(poly, 10, 10)
        assert int(bits.sum()) == 16
        assert bits[1:5, 1:5].all()

    def test_triangle_area_approximation(self):
        poly = np.array([[0.0, 0.0], [100.0, 0.0], [0.0, 100.0]])
        bits = rasterize_polygon(poly, 100, 100)
        assert abs(int(bits.sum()) - 5000) <= 100

    def test_clips_to_image_bounds(self):
        poly = np.array([[-50.0, -50.0], [150.0, -50.0], [150.0, 150.0], [-50.0, 150.0]])
        bits = rasterize_polygon(poly, 64, 64)
        assert bits.all()

    def test_degenerate_polygon_empty(self):
        assert not rasterize_polygon(np.array([[1.0, 1.0], [2.0, 2.0]]), 8, 8).any()


class TestForeheadQuad:
    def test_hand_geometry_example(self):
        # base chord (100,200)-(300,200), face height 400, scale .25, taper .7
        pts = np.zeros((468, 2))
        lm = LandmarkSet(points=pts, face_bbox=(100.0, 200.0, 200.0, 400.0))
        hull_points = np.array([[100.0, 200.0], [300.0, 200.0], [200.0, 600.0]])
        quad = forehead_quad(lm, MaskParams(), 400, 700, hull_points=hull_points)
        np.testing.assert_allclose(
            quad, [[100, 200], [300, 200], [270, 100], [130, 100]])

    def test_zero_scale_gives_empty_polygon(self, frontal):
        quad = forehead_quad(frontal, MaskParams(forehead_scale=0.0), 256, 256)
        assert len(quad) == 0

    def test_raster_clipped_when_face_at_top_of_frame(self):
        pts = np.zeros((468, 2))
        lm = LandmarkSet(points=pts, face_bbox=(100.0, 10.0, 200.0, 400.0))
        hull_points = np.array([[100.0, 10.0], [300.0, 10.0], [200.0, 300.0]])
        quad = forehead_quad(lm, MaskParams(), 400, 400, hull_points=hull_points)
        assert quad[:, 1].min() < 0    # extends above the frame
        bits = rasterize_polygon(quad, 400, 400)
        assert bits.any()              # clipped raster stays in bounds


class TestBuildSkinMask:
    def test_left_eye_centroid_excluded(self, frontal, topo):
        mask = build_skin_mask(frontal, 256, 256, topo, MaskParams())
        eye = frontal.pixel_points(256, 256)[topo.left_eye].mean(axis=0)
        assert not mask.bits[int(eye[1]), int(eye[0])]

    def test_cheek_centroid_included(self, frontal, topo):
        mask = build_skin_mask(frontal, 256, 256, topo, MaskParams())
        cheek_ids = [i for i in topo.skin_hull_basis if i not in topo.face_oval]
        cheek = frontal.pixel_points(256, 256)[cheek_ids[:6]].mean(axis=0)
        assert mask.bits[int(cheek[1]), int(cheek[0])]

    def test_no_masked_pixel_in_any_dilated_feature(self, frontal, topo):
        params = MaskParams()
        mask = build_skin_mask(frontal, 256, 256, topo, params)
        pts = frontal.pixel_points(256, 256)
        for indices in topo.feature_polygons():
            feature = dilate(rasterize_polygon(pts[indices], 256, 256),
                             params.feature_dilation_px)
            assert not (mask.bits & feature).any()

    def test_collapsed_landmarks_raise(self, topo):
        pts = np.full((468, 2), 0.5)
        lm = LandmarkSet(points=pts, face_bbox=(128.0, 128.0, 1.0, 1.0))
        with pytest.raises(InsufficientSkinArea):
            build_skin_mask(lm, 256, 256, topo, MaskParams())

    def test_monotone_in_forehead_scale(self, frontal, topo):
        small = build_skin_mask(frontal, 256, 256, topo,
                                MaskParams(forehead_scale=0.1))
        large = build_skin_mask(frontal, 256, 256, topo,
                                MaskParams(forehead_scale=0.3))
        assert not (small.bits & ~large.bits).any()

    def test_deterministic(self, frontal, topo):
        a = build_skin_mask(frontal, 256, 256, topo, MaskParams())
        b = build_skin_mask(frontal, 256, 256, topo, MaskParams())
        np.testing.assert_array_equal(a.bits, b.bits)


class TestFaceExclusionRegion:
    def test_superset_of_skin_mask(self, frontal, topo):
        mask = build_skin_mask(frontal, 256, 256, topo, MaskParams())
        excl = face_exclusion_region(frontal, 256, 256, MaskParams())
        assert not (mask.bits & ~excl).any()

    def test_leaves_background(self, frontal):
        excl = face_exclusion_region(frontal, 256, 256, MaskParams())
        assert (~excl).sum() > 1000


class TestMaskCoverage:
    def test_full_bbox(self):
        mask = SkinMask(np.ones((10, 10), dtype=bool))
        assert mask_coverage(mask, (0, 0, 10, 10)) == 1.0

    def test_empty(self):
        mask = SkinMask(np.zeros((10, 10), dtype=bool))
        assert mask_coverage(mask, (0, 0, 10, 10)) == 0.0

    def test_half(self):
        bits = np.zeros((10, 10), dtype=bool)
        bits[:5] = True
        assert mask_coverage(SkinMask(bits), (0, 0, 10, 10)) == pytest.approx(0.5)

    def test_zero_area_bbox(self):
        with pytest.raises(ValueError):
            mask_coverage(SkinMask(np.ones((4, 4), dtype=bool)), (0, 0, 0, 5))


class TestMinSkinPixelScaling:
    def test_reference_resolution(self):
        assert MaskParams().min_pixels_for(1024, 1024) == 500

    def test_quarter_resolution(self):
        assert MaskParams().min_pixels_for(512, 512) == 125
