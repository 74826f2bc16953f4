"""Corpus orchestration: manifest ingestion, per-image analysis, record emission.

Each manifest entry becomes exactly one JSONL line: either an analysis record
or a skip entry with a machine-readable reason. Output is always ordered by
image_id, so worker count never changes the bytes on disk. Every record embeds
the config hash and palette hash that produced it.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import jsonschema
import numpy as np
from PIL import Image

from .errors import (
    InsufficientPixels,
    InsufficientSkinArea,
    ManifestError,
    NoFaceDetected,
    SidecarError,
)
from .mask import (
    LandmarkSet,
    LandmarkTopology,
    MaskParams,
    build_skin_mask,
    default_topology_path,
    load_topology,
    mask_coverage,
)
from .normalize import NormalizationParams, normalize_image
from .scales import ScalePalette, classify, default_palettes_path, load_palettes
from .tone import ToneParams, extract_masked_pixels, representative_tone

MANIFEST_COLUMNS = ("image_path", "sidecar_path", "model", "prompt")

_SCHEMA_PATH = Path(__file__).parent / "data" / "sidecar.schema.json"
_SIDECAR_SCHEMA = json.loads(_SCHEMA_PATH.read_text(encoding="utf-8"))

CSV_COLUMNS = (
    "image_id", "model", "prompt", "gender", "race", "age",
    "mst", "perla", "fst", "tone_L", "tone_a", "tone_b", "flags",
)


@dataclass
class ManifestEntry:
    image_path: str
    sidecar_path: str
    model: str
    prompt: str
    extra: dict = field(default_factory=dict)

    @property
    def image_id(self) -> str:
        return Path(self.image_path).stem


@dataclass
class CorpusManifest:
    entries: list[ManifestEntry]


@dataclass
class Face:
    bbox: tuple[float, float, float, float]
    confidence: float
    landmarks: np.ndarray           # (468, 2) normalized
    gender: str
    gender_confidence: float
    race: str
    race_probs: dict
    age: float
    expression: str


@dataclass
class FaceSidecar:
    image_id: str
    width: int
    height: int
    faces: list[Face]


@dataclass
class PipelineConfig:
    normalization: NormalizationParams = field(default_factory=NormalizationParams)
    mask: MaskParams = field(default_factory=MaskParams)
    tone: ToneParams = field(default_factory=ToneParams)
    metric: str = "de2000"
    palettes_path: str = ""
    topology_path: str = ""

    def to_dict(self) -> dict:
        d = asdict(self)
        # tuples are not JSON-stable; normalize them to lists
        d["normalization"]["clahe_tile_grid"] = list(self.normalization.clahe_tile_grid)
        d["normalization"]["gain_clamp"] = list(self.normalization.gain_clamp)
        return d

    def content_hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def load_config(path: str | Path | None) -> PipelineConfig:
    """Pipeline config from a JSON file; missing keys keep their defaults."""
    cfg = PipelineConfig()
    if path is None:
        return cfg
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ManifestError(f"cannot read config {path}: {exc}") from exc

    for section, target in (("normalization", cfg.normalization),
                            ("mask", cfg.mask), ("tone", cfg.tone)):
        for key, value in raw.get(section, {}).items():
            if not hasattr(target, key):
                raise ManifestError(f"unknown config key {section}.{key}")
            if isinstance(getattr(target, key), tuple):
                value = tuple(value)
            setattr(target, key, value)
    for key in ("metric", "palettes_path", "topology_path"):
        if key in raw:
            setattr(cfg, key, raw[key])
    return cfg


# ---------------------------------------------------------------------------
# Manifest and sidecar ingestion
# ---------------------------------------------------------------------------

def _entry_from_row(row: dict, where: str) -> ManifestEntry:
    missing = [c for c in MANIFEST_COLUMNS if not row.get(c)]
    if missing:
        raise ManifestError(f"{where}: missing column(s) {missing}")
    extra = {k: v for k, v in row.items() if k not in MANIFEST_COLUMNS and k is not None}
    return ManifestEntry(image_path=row["image_path"], sidecar_path=row["sidecar_path"],
                         model=row["model"], prompt=row["prompt"], extra=extra)


def load_manifest(path: str | Path) -> CorpusManifest:
    """CSV (with header) or JSONL manifest; image ids must be unique."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc}") from exc

    entries: list[ManifestEntry] = []
    if path.suffix.lower() in (".jsonl", ".ndjson"):
        for lineno, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"{path}:{lineno}: bad JSON: {exc}") from exc
            entries.append(_entry_from_row(row, f"{path}:{lineno}"))
    else:
        reader = csv.DictReader(io.StringIO(text))
        if reader.fieldnames is None:
            raise ManifestError(f"{path}: empty manifest, header row required")
        for lineno, row in enumerate(reader, start=2):
            entries.append(_entry_from_row(row, f"{path}:{lineno}"))

    seen: dict[str, str] = {}
    for e in entries:
        if e.image_id in seen:
            raise ManifestError(
                f"duplicate image id {e.image_id!r}: {seen[e.image_id]} vs {e.image_path}")
        seen[e.image_id] = e.image_path
    return CorpusManifest(entries=entries)


def parse_sidecar(path: str | Path) -> FaceSidecar:
    """Load and schema-validate a face sidecar JSON file."""
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise SidecarError(f"cannot parse sidecar {path}: {exc}") from exc
    try:
        jsonschema.validate(raw, _SIDECAR_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise SidecarError(f"sidecar {path} fails schema: {exc.message}") from exc

    faces = []
    for f in raw["faces"]:
        attrs = f["attributes"]
        faces.append(Face(
            bbox=tuple(float(v) for v in f["bbox"]),
            confidence=float(f["confidence"]),
            landmarks=np.asarray(f["landmarks"], dtype=np.float64),
            gender=attrs["gender"]["label"],
            gender_confidence=float(attrs["gender"]["confidence"]),
            race=attrs["race"]["label"],
            race_probs={k: float(v) for k, v in attrs["race"]["probs"].items()},
            age=float(attrs["age"]),
            expression=str(attrs.get("expression", "")),
        ))
    return FaceSidecar(image_id=raw["image_id"], width=int(raw["width"]),
                       height=int(raw["height"]), faces=faces)


def select_primary_face(sidecar: FaceSidecar) -> Face:
    """Largest bbox area; ties break to higher confidence, then lower index."""
    if not sidecar.faces:
        raise NoFaceDetected(f"{sidecar.image_id}: sidecar reports zero faces")
    best = 0
    for i, face in enumerate(sidecar.faces[1:], start=1):
        area = face.bbox[2] * face.bbox[3]
        best_area = sidecar.faces[best].bbox[2] * sidecar.faces[best].bbox[3]
        if area > best_area or (area == best_area
                                and face.confidence > sidecar.faces[best].confidence):
            best = i
    return sidecar.faces[best]


# ---------------------------------------------------------------------------
# Per-image analysis
# ---------------------------------------------------------------------------

@dataclass
class RunContext:
    """Immutable shared state for one corpus run."""
    config: PipelineConfig
    palettes: dict[str, ScalePalette]
    palette_hash: str
    topology: LandmarkTopology
    config_hash: str


def build_run_context(config: PipelineConfig) -> RunContext:
    palettes_path = config.palettes_path or str(default_palettes_path())
    topology_path = config.topology_path or str(default_topology_path())
    palette_list, palette_hash = load_palettes(palettes_path)
    return RunContext(
        config=config,
        palettes={p.name: p for p in palette_list},
        palette_hash=palette_hash,
        topology=load_topology(topology_path),
        config_hash=config.content_hash(),
    )


def _assignment_dict(a) -> dict:
    return {"index": a.index, "label": a.label, "distance": a.distance,
            "runner_up_margin": a.runner_up_margin, "metric": a.metric}


def _skip(entry: ManifestEntry, reason: str, detail: str) -> dict:
    return {"image_id": entry.image_id, "model": entry.model, "prompt": entry.prompt,
            "skip": True, "reason": reason, "detail": detail}


def analyze_image(entry: ManifestEntry, ctx: RunContext) -> dict:
    """One manifest entry to one record dict (or skip dict); never raises
    for per-image conditions."""
    try:
        sidecar = parse_sidecar(entry.sidecar_path)
    except SidecarError as exc:
        return _skip(entry, "sidecar_parse_error", str(exc))

    try:
        with Image.open(entry.image_path) as im:
            img = np.asarray(im.convert("RGB"))
    except (OSError, ValueError) as exc:
        return _skip(entry, "image_decode_error", str(exc))

    try:
        face = select_primary_face(sidecar)
    except NoFaceDetected as exc:
        return _skip(entry, "no_face_detected", str(exc))

    h, w = img.shape[:2]
    cfg = ctx.config
    try:
        lm = LandmarkSet(points=face.landmarks, face_bbox=face.bbox,
                         confidence=face.confidence)
        normalized, gains, flags = normalize_image(img, lm, cfg.normalization, cfg.mask)
        mask = build_skin_mask(lm, w, h, ctx.topology, cfg.mask)
        pixels = extract_masked_pixels(normalized, mask)
        if cfg.tone.dark_pixel_floor > 0.0:
            kept = pixels[pixels[:, 0] >= cfg.tone.dark_pixel_floor]
            if len(kept) < len(pixels):
                flags.append("dark_pixels_dropped")
            pixels = kept
        tone = representative_tone(pixels, cfg.tone)
    except (InsufficientSkinArea, InsufficientPixels) as exc:
        return _skip(entry, "insufficient_skin_area", str(exc))
    except ValueError as exc:
        return _skip(entry, "invalid_face_geometry", str(exc))

    assignments = {name: classify(tone.representative, palette, cfg.metric)
                   for name, palette in ctx.palettes.items()}

    return {
        "image_id": entry.image_id,
        "model": entry.model,
        "prompt": entry.prompt,
        "face_bbox": [float(v) for v in face.bbox],
        "mask_coverage": mask_coverage(mask, face.bbox),
        "wb_gains": {"g_r": gains.g_r, "g_g": gains.g_g, "g_b": gains.g_b,
                     "policy": gains.policy, "clamped": gains.clamped},
        "tone": {
            "lab": [float(v) for v in tone.representative],
            "coverage": tone.coverage,
            "included_cluster_count": tone.included_cluster_count,
            "clusters": [{"lab": [float(v) for v in c], "count": n}
                         for c, n in tone.clusters],
        },
        "mst": _assignment_dict(assignments["MST"]),
        "perla": _assignment_dict(assignments["PERLA"]),
        "fst": _assignment_dict(assignments["FST"]),
        "gender": face.gender,
        "gender_confidence": face.gender_confidence,
        "race": face.race,
        "race_probs": face.race_probs,
        "age": face.age,
        "expression": face.expression,
        "flags": flags,
        "palette_hash": ctx.palette_hash,
        "config_hash": ctx.config_hash,
    }


# ---------------------------------------------------------------------------
# Corpus run
# ---------------------------------------------------------------------------

def run_corpus(manifest: CorpusManifest, config: PipelineConfig,
               jobs: int = 1) -> tuple[list[dict], dict]:
    """Analyze every manifest entry; returns (lines, summary).

    Lines are record/skip dicts sorted by image_id, one per entry, identical
    for any worker count.
    """
    ctx = build_run_context(config)
    entries = manifest.entries
    if jobs <= 1 or len(entries) <= 1:
        results = [analyze_image(e, ctx) for e in entries]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(lambda e: analyze_image(e, ctx), entries))

    results.sort(key=lambda r: r["image_id"])
    skip_reasons: dict[str, int] = {}
    for r in results:
        if r.get("skip"):
            skip_reasons[r["reason"]] = skip_reasons.get(r["reason"], 0) + 1
    n_skips = sum(skip_reasons.values())
    summary = {
        "total": len(results),
        "records": len(results) - n_skips,
        "skips": n_skips,
        "skip_reasons": dict(sorted(skip_reasons.items())),
        "config_hash": ctx.config_hash,
        "palette_hash": ctx.palette_hash,
    }
    return results, summary


def write_records(lines: list[dict], out_path: str | Path) -> None:
    """JSONL records plus a CSV projection of the successful records."""
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
        for line in lines:
            fh.write(json.dumps(line, sort_keys=True, separators=(",", ":")))
            fh.write("\n")

    csv_path = out_path.with_suffix(".csv")
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for r in lines:
            if r.get("skip"):
                continue
            writer.writerow([
                r["image_id"], r["model"], r["prompt"], r["gender"], r["race"],
                repr(r["age"]), r["mst"]["index"], r["perla"]["index"],
                r["fst"]["label"],
                repr(r["tone"]["lab"][0]), repr(r["tone"]["lab"][1]),
                repr(r["tone"]["lab"][2]), ";".join(r["flags"]),
            ])


def read_records(path: str | Path) -> list[dict]:
    """All JSONL lines (records and skips) from an analyze output file."""
    lines = []
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            raw = raw.strip()
            if raw:
                lines.append(json.loads(raw))
    return lines
