import json
from pathlib import Path

import jsonschema
import numpy as np
import pytest

from toneaudit.color import srgb_decode
from toneaudit.fixtures import (
    FIXTURE_BACKGROUND,
    apply_cast,
    build_fixture_corpus,
    compensated_cast,
    landmark_template,
    make_attributes,
    make_landmark_set,
    paint_region,
    render_face_image,
)

_REC709 = np.array([0.2126, 0.7152, 0.0722])
_SCHEMA = json.loads(
    (Path(__file__).parent.parent / "src" / "toneaudit" / "data"
     / "sidecar.schema.json").read_text())


class TestLandmarkTemplate:
    def test_full_point_count_in_unit_square(self):
        pts = landmark_template()
        assert pts.shape == (468, 2)
        assert np.isfinite(pts).all()
        assert (pts >= 0.0).all() and (pts <= 1.0).all()

    def test_deterministic(self):
        np.testing.assert_array_equal(landmark_template(), landmark_template())

    def test_bbox_spans_pixel_extents(self):
        lm = make_landmark_set(256, 256)
        px = lm.pixel_points(256, 256)
        x0, y0, w, h = lm.face_bbox
        assert (x0, y0) == (px[:, 0].min(), px[:, 1].min())
        assert (x0 + w, y0 + h) == (px[:, 0].max(), px[:, 1].max())


class TestRenderedImage:
    def test_painted_pixels_are_uniform_tone(self):
        tone = (160, 126, 86)
        lm = make_landmark_set()
        img = render_face_image(tone, lm=lm)
        region = paint_region(lm, 256, 256)
        assert region.sum() > 5000
        assert (img[region] == tone).all()
        assert (img[~region] == FIXTURE_BACKGROUND).all()

    def test_cast_arithmetic(self):
        img = np.full((2, 2, 3), 100, dtype=np.uint8)
        out = apply_cast(img, [1.1, 1.0, 0.9])
        assert tuple(out[0, 0]) == (110, 100, 90)

    def test_cast_clips_at_255(self):
        img = np.full((1, 1, 3), 240, dtype=np.uint8)
        assert apply_cast(img, [1.2, 1.0, 1.0])[0, 0, 0] == 255


class TestCompensatedCast:
    @pytest.mark.parametrize("seed", range(10))
    def test_within_bounds_and_luminance_preserving(self, seed):
        cast = compensated_cast(np.random.default_rng(seed), 0.85, 1.15)
        assert ((cast >= 0.85) & (cast <= 1.15)).all()
        ref = float(FIXTURE_BACKGROUND)
        y_ref = float(_REC709 @ srgb_decode(np.full(3, ref)))
        y_cast = float(_REC709 @ srgb_decode(cast * ref))
        assert y_cast == pytest.approx(y_ref, rel=1e-4)

    def test_deterministic_for_seed(self):
        a = compensated_cast(np.random.default_rng(7), 0.9, 1.1)
        b = compensated_cast(np.random.default_rng(7), 0.9, 1.1)
        np.testing.assert_array_equal(a, b)


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    out = tmp_path_factory.mktemp("fixture_corpus")
    return build_fixture_corpus(out), out


class TestCorpus:
    def test_layout(self, corpus):
        manifest_path, out = corpus
        assert manifest_path == out / "manifest.csv"
        assert len(list((out / "images").glob("*.png"))) == 10
        assert len(list((out / "sidecars").glob("*.json"))) == 10

    def test_sidecars_validate_against_schema(self, corpus):
        _, out = corpus
        for path in sorted((out / "sidecars").glob("*.json")):
            jsonschema.validate(json.loads(path.read_text()), _SCHEMA)

    def test_attributes_probs_sum_to_one(self):
        attrs = make_attributes("Woman", "Asian", 33.0)
        assert sum(attrs["race"]["probs"].values()) == pytest.approx(1.0, abs=0.01)
        assert max(attrs["race"]["probs"], key=attrs["race"]["probs"].get) == "Asian"

    def test_cast_seed_changes_pixels_not_sidecars(self, corpus, tmp_path):
        _, plain = corpus
        build_fixture_corpus(tmp_path, cast_seed=5)
        a = (plain / "images" / "fix002.png").read_bytes()
        b = (tmp_path / "images" / "fix002.png").read_bytes()
        assert a != b
        assert ((plain / "sidecars" / "fix002.json").read_text()
                == (tmp_path / "sidecars" / "fix002.json").read_text())
