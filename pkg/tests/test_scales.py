import json

import numpy as np
import pytest

from toneaudit.color import delta_e_2000
from toneaudit.errors import PaletteError
from toneaudit.scales import (
    ScalePalette,
    classify,
    default_palettes_path,
    load_palettes,
)


@pytest.fixture(scope="module")
def palettes():
    loaded, content_hash = load_palettes(default_palettes_path())
    return {p.name: p for p in loaded}, content_hash


class TestLoadPalettes:
    def test_shipped_config_sizes(self, palettes):
        by_name, _ = palettes
        assert len(by_name["MST"]) == 10
        assert len(by_name["PERLA"]) == 11
        assert len(by_name["FST"]) == 6

    def test_hash_is_stable_and_content_sensitive(self, tmp_path, palettes):
        _, shipped_hash = palettes
        _, again = load_palettes(default_palettes_path())
        assert shipped_hash == again
        copy = tmp_path / "palettes.json"
        copy.write_text(default_palettes_path().read_text() + "\n")
        _, other = load_palettes(copy)
        assert other != shipped_hash

    def test_orientation_monotone_lightness(self, palettes):
        by_name, _ = palettes
        for name, palette in by_name.items():
            diffs = np.diff(palette.references[:, 0])
            if palette.orientation == "higher_is_darker":
                assert (diffs < 0).all(), name
            else:
                assert (diffs > 0).all(), name

    def _write_config(self, tmp_path, entries, name="MST",
                      orientation="higher_is_darker"):
        cfg = {"palettes": [{"name": name, "orientation": orientation,
                             "entries": entries}]}
        path = tmp_path / "p.json"
        path.write_text(json.dumps(cfg))
        return path

    def test_wrong_entry_count_rejected(self, tmp_path):
        entries = [{"label": str(i), "lab": [90 - i * 8, 5, 10]} for i in range(9)]
        with pytest.raises(PaletteError, match="expected 10"):
            load_palettes(self._write_config(tmp_path, entries))

    def test_non_monotone_lightness_rejected_naming_entry(self, tmp_path):
        entries = [{"label": str(i + 1), "lab": [90 - i * 8, 5, 10]} for i in range(10)]
        entries[4]["lab"][0] = entries[3]["lab"][0] + 1.0
        with pytest.raises(PaletteError, match="'5'"):
            load_palettes(self._write_config(tmp_path, entries))

    def test_duplicate_labels_rejected(self, tmp_path):
        entries = [{"label": str(i + 1), "lab": [90 - i * 8, 5, 10]} for i in range(10)]
        entries[5]["label"] = "5"
        with pytest.raises(PaletteError, match="duplicate"):
            load_palettes(self._write_config(tmp_path, entries))

    def test_bad_orientation_rejected(self, tmp_path):
        entries = [{"label": str(i + 1), "lab": [90 - i * 8, 5, 10]} for i in range(10)]
        with pytest.raises(PaletteError, match="orientation"):
            load_palettes(self._write_config(tmp_path, entries, orientation="sideways"))


class TestClassify:
    def test_exact_reference_hits_every_entry(self, palettes):
        by_name, _ = palettes
        for palette in by_name.values():
            for i in range(len(palette)):
                a = classify(palette.references[i], palette)
                assert a.index == i + 1
                assert a.label == palette.labels[i]
                assert a.distance == pytest.approx(0.0, abs=1e-9)
                assert a.runner_up_margin > 0

    def test_mst_entry_3_exact_hit(self, palettes):
        by_name, _ = palettes
        mst = by_name["MST"]
        a = classify(mst.references[2], mst)
        assert (a.index, a.distance) == (3, pytest.approx(0.0, abs=1e-9))

    def test_tie_goes_to_lighter_entry(self):
        refs = np.array([[80.0, 0.0, 0.0], [60.0, 0.0, 0.0]])
        palette = ScalePalette(name="FST", orientation="higher_is_darker",
                               labels=["I", "II"], references=refs)
        midpoint = np.array([70.0, 0.0, 0.0])
        a = classify(midpoint, palette, metric="de76")
        assert a.label == "I"

        flipped = ScalePalette(name="PERLA", orientation="higher_is_lighter",
                               labels=["1", "2"],
                               references=refs[::-1].copy())
        b = classify(midpoint, flipped, metric="de76")
        assert b.label == "2"   # higher index is the lighter entry here

    def test_neutral_ramp_monotone(self, palettes):
        by_name, _ = palettes
        ramp = [np.array([L, 0.0, 0.0]) for L in np.linspace(95, 15, 81)]
        mst = [classify(t, by_name["MST"]).index for t in ramp]
        perla = [classify(t, by_name["PERLA"]).index for t in ramp]
        assert all(b >= a for a, b in zip(mst, mst[1:]))
        assert all(b <= a for a, b in zip(perla, perla[1:]))

    def test_metric_recorded(self, palettes):
        by_name, _ = palettes
        tone = np.array([55.0, 12.0, 18.0])
        for metric in ("de2000", "de76"):
            assert classify(tone, by_name["MST"], metric).metric == metric

    def test_runner_up_margin_matches_manual_distances(self, palettes):
        by_name, _ = palettes
        mst = by_name["MST"]
        tone = np.array([58.0, 11.0, 17.0])
        a = classify(tone, mst)
        dists = sorted(float(delta_e_2000(tone, ref)) for ref in mst.references)
        assert a.distance == pytest.approx(dists[0])
        assert a.runner_up_margin == pytest.approx(dists[1] - dists[0])
