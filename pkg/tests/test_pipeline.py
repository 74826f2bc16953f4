import json

import numpy as np
import pytest
from PIL import Image

from toneaudit.errors import ManifestError, NoFaceDetected, SidecarError
from toneaudit.fixtures import (
    build_fixture_corpus,
    make_attributes,
    make_landmark_set,
    sidecar_dict,
)
from toneaudit.pipeline import (
    Face,
    FaceSidecar,
    PipelineConfig,
    load_config,
    load_manifest,
    parse_sidecar,
    read_records,
    run_corpus,
    select_primary_face,
    write_records,
)


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    out = tmp_path_factory.mktemp("corpus")
    return build_fixture_corpus(out), out


def make_face(area_wh, confidence):
    w, h = area_wh
    return Face(bbox=(0.0, 0.0, float(w), float(h)), confidence=confidence,
                landmarks=np.zeros((468, 2)), gender="Man", gender_confidence=0.9,
                race="White", race_probs={"White": 1.0}, age=30.0, expression="")


class TestLoadManifest:
    def test_csv_roundtrip(self, corpus):
        manifest_path, _ = corpus
        m = load_manifest(manifest_path)
        assert len(m.entries) == 10
        assert m.entries[0].image_id == "fix000"
        assert m.entries[0].model == "alpha"
        assert m.entries[0].prompt == "a person"

    def test_jsonl_manifest(self, tmp_path):
        path = tmp_path / "m.jsonl"
        rows = [{"image_path": f"a/im{i}.png", "sidecar_path": f"a/im{i}.json",
                 "model": "m", "prompt": "p", "note": "x"} for i in range(3)]
        path.write_text("\n".join(json.dumps(r) for r in rows) + "\n")
        m = load_manifest(path)
        assert [e.image_id for e in m.entries] == ["im0", "im1", "im2"]
        assert m.entries[0].extra == {"note": "x"}

    def test_duplicate_image_id_rejected(self, tmp_path):
        path = tmp_path / "m.csv"
        path.write_text("image_path,sidecar_path,model,prompt\n"
                        "a/x.png,a/x.json,m,p\n"
                        "b/x.png,b/x.json,m,p\n")
        with pytest.raises(ManifestError, match="duplicate"):
            load_manifest(path)

    def test_missing_column_rejected(self, tmp_path):
        path = tmp_path / "m.csv"
        path.write_text("image_path,model,prompt\na/x.png,m,p\n")
        with pytest.raises(ManifestError, match="missing column"):
            load_manifest(path)

    def test_empty_file_rejected(self, tmp_path):
        path = tmp_path / "m.csv"
        path.write_text("")
        with pytest.raises(ManifestError):
            load_manifest(path)

    def test_missing_file_rejected(self, tmp_path):
        with pytest.raises(ManifestError):
            load_manifest(tmp_path / "nope.csv")


class TestParseSidecar:
    def test_fixture_sidecar_parses(self, corpus):
        _, out = corpus
        sc = parse_sidecar(out / "sidecars" / "fix000.json")
        assert sc.image_id == "fix000"
        assert len(sc.faces) == 1
        assert sc.faces[0].landmarks.shape == (468, 2)
        assert sc.faces[0].gender == "Woman"

    def test_invalid_json_rejected(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        with pytest.raises(SidecarError, match="cannot parse"):
            parse_sidecar(path)

    def test_schema_violation_rejected(self, tmp_path):
        lm = make_landmark_set()
        sc = sidecar_dict("x", lm, 256, 256, make_attributes("Man", "White", 30.0))
        sc["faces"][0]["landmarks"] = sc["faces"][0]["landmarks"][:100]  # not 468
        path = tmp_path / "short.json"
        path.write_text(json.dumps(sc))
        with pytest.raises(SidecarError, match="schema"):
            parse_sidecar(path)

    def test_missing_required_field_rejected(self, tmp_path):
        lm = make_landmark_set()
        sc = sidecar_dict("x", lm, 256, 256, make_attributes("Man", "White", 30.0))
        del sc["faces"][0]["confidence"]
        path = tmp_path / "nofield.json"
        path.write_text(json.dumps(sc))
        with pytest.raises(SidecarError, match="schema"):
            parse_sidecar(path)


class TestSelectPrimaryFace:
    def test_largest_area_wins(self):
        sc = FaceSidecar("x", 100, 100,
                         [make_face((30, 30), 0.99), make_face((50, 50), 0.5)])
        assert select_primary_face(sc) is sc.faces[1]

    def test_area_tie_breaks_to_confidence(self):
        sc = FaceSidecar("x", 100, 100,
                         [make_face((50, 50), 0.8), make_face((50, 50), 0.9)])
        assert select_primary_face(sc) is sc.faces[1]

    def test_full_tie_breaks_to_first(self):
        sc = FaceSidecar("x", 100, 100,
                         [make_face((50, 50), 0.9), make_face((50, 50), 0.9)])
        assert select_primary_face(sc) is sc.faces[0]

    def test_zero_faces(self):
        with pytest.raises(NoFaceDetected):
            select_primary_face(FaceSidecar("x", 100, 100, []))


class TestLoadConfig:
    def test_defaults_without_file(self):
        cfg = load_config(None)
        assert cfg.metric == "de2000"
        assert cfg.tone.k == 4

    def test_partial_override(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"tone": {"k": 6},
                                    "normalization": {"clahe_tile_grid": [4, 4]},
                                    "metric": "de76"}))
        cfg = load_config(path)
        assert cfg.tone.k == 6
        assert cfg.normalization.clahe_tile_grid == (4, 4)
        assert cfg.metric == "de76"
        assert cfg.mask.forehead_scale == PipelineConfig().mask.forehead_scale

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"tone": {"clusters": 6}}))
        with pytest.raises(ManifestError, match="unknown config key"):
            load_config(path)

    def test_content_hash_tracks_settings(self):
        a = PipelineConfig()
        b = PipelineConfig()
        b.tone.seed = 43
        assert a.content_hash() == PipelineConfig().content_hash()
        assert a.content_hash() != b.content_hash()


class TestRunCorpus:
    def test_clean_corpus_all_records(self, corpus):
        manifest_path, _ = corpus
        lines, summary = run_corpus(load_manifest(manifest_path), PipelineConfig())
        assert summary == {**summary, "total": 10, "records": 10, "skips": 0}
        assert [r["image_id"] for r in lines] == sorted(r["image_id"] for r in lines)
        hashes = {r["config_hash"] for r in lines}
        assert hashes == {summary["config_hash"]}

    def test_corrupt_image_becomes_skip(self, tmp_path):
        manifest_path = build_fixture_corpus(tmp_path)
        (tmp_path / "images" / "fix003.png").write_bytes(b"not a png")
        lines, summary = run_corpus(load_manifest(manifest_path), PipelineConfig())
        assert summary["records"] == 9
        assert summary["skips"] == 1
        assert summary["skip_reasons"] == {"image_decode_error": 1}
        (skip,) = [r for r in lines if r.get("skip")]
        assert skip["image_id"] == "fix003"
        assert skip["model"] and skip["prompt"]

    def test_bad_sidecar_becomes_skip(self, tmp_path):
        manifest_path = build_fixture_corpus(tmp_path)
        (tmp_path / "sidecars" / "fix007.json").write_text("{}")
        lines, summary = run_corpus(load_manifest(manifest_path), PipelineConfig())
        assert summary["skip_reasons"] == {"sidecar_parse_error": 1}
        (skip,) = [r for r in lines if r.get("skip")]
        assert skip["reason"] == "sidecar_parse_error"

    def test_zero_faces_becomes_skip(self, tmp_path):
        manifest_path = build_fixture_corpus(tmp_path)
        sc_path = tmp_path / "sidecars" / "fix001.json"
        sc = json.loads(sc_path.read_text())
        sc["faces"] = []
        sc_path.write_text(json.dumps(sc))
        _, summary = run_corpus(load_manifest(manifest_path), PipelineConfig())
        assert summary["skip_reasons"] == {"no_face_detected": 1}

    def test_every_entry_yields_one_line(self, tmp_path):
        manifest_path = build_fixture_corpus(tmp_path)
        (tmp_path / "images" / "fix000.png").write_bytes(b"")
        (tmp_path / "sidecars" / "fix009.json").write_text("broken")
        lines, summary = run_corpus(load_manifest(manifest_path), PipelineConfig())
        assert len(lines) == 10
        assert summary["records"] + summary["skips"] == 10

    def test_parallel_matches_serial(self, corpus):
        manifest_path, _ = corpus
        manifest = load_manifest(manifest_path)
        serial, _ = run_corpus(manifest, PipelineConfig(), jobs=1)
        parallel, _ = run_corpus(manifest, PipelineConfig(), jobs=8)
        assert serial == parallel

    def test_known_tone_recovered_exactly(self, corpus):
        # fix000 is painted f7ead0, the lightest reference color of one scale
        manifest_path, _ = corpus
        lines, _ = run_corpus(load_manifest(manifest_path), PipelineConfig())
        rec = next(r for r in lines if r["image_id"] == "fix000")
        assert rec["mst"]["distance"] == pytest.approx(0.0, abs=1e-6)
        assert rec["gender"] == "Woman"
        assert rec["age"] == 24.0
        assert 0.0 < rec["mask_coverage"] <= 1.0


class TestWriteReadRecords:
    def test_jsonl_roundtrip(self, corpus, tmp_path):
        manifest_path, _ = corpus
        lines, _ = run_corpus(load_manifest(manifest_path), PipelineConfig())
        out = tmp_path / "records.jsonl"
        write_records(lines, out)
        assert read_records(out) == lines

    def test_csv_projection_excludes_skips(self, tmp_path):
        manifest_path = build_fixture_corpus(tmp_path)
        (tmp_path / "images" / "fix004.png").write_bytes(b"x")
        lines, _ = run_corpus(load_manifest(manifest_path), PipelineConfig())
        out = tmp_path / "records.jsonl"
        write_records(lines, out)
        csv_lines = (tmp_path / "records.csv").read_text().splitlines()
        assert len(csv_lines) == 1 + 9
        assert csv_lines[0].startswith("image_id,model,prompt,gender")
        assert not any("fix004" in line for line in csv_lines)

    def test_csv_floats_roundtrip_exactly(self, corpus, tmp_path):
        import csv as csvmod
        manifest_path, _ = corpus
        lines, _ = run_corpus(load_manifest(manifest_path), PipelineConfig())
        out = tmp_path / "records.jsonl"
        write_records(lines, out)
        with open(tmp_path / "records.csv") as fh:
            rows = list(csvmod.DictReader(fh))
        by_id = {r["image_id"]: r for r in lines}
        for row in rows:
            rec = by_id[row["image_id"]]
            assert float(row["tone_L"]) == rec["tone"]["lab"][0]
            assert float(row["age"]) == rec["age"]

    def test_byte_identical_across_runs(self, corpus, tmp_path):
        manifest_path, _ = corpus
        manifest = load_manifest(manifest_path)
        paths = []
        for i, jobs in enumerate((1, 8)):
            lines, _ = run_corpus(manifest, PipelineConfig(), jobs=jobs)
            p = tmp_path / f"r{i}.jsonl"
            write_records(lines, p)
            paths.append(p)
        assert paths[0].read_bytes() == paths[1].read_bytes()


class TestFixtureImages:
    def test_images_decode_to_expected_shape(self, corpus):
        _, out = corpus
        with Image.open(out / "images" / "fix005.png") as im:
            arr = np.asarray(im.convert("RGB"))
        assert arr.shape == (256, 256, 3)
        assert (arr[0, 0] == 200).all()  # untouched background corner
