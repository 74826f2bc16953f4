"""toneaudit: corpus-scale skin tone and demographics auditing for generated imagery.

Measurement core: illumination normalization, landmark-driven skin masking,
k-means representative tone extraction, dermatological scale assignment
(MST / PERLA / FST), statistics, and table/plot reporting. Face detection is
out of scope; the pipeline consumes per-image sidecar JSON files produced by
any landmark extractor that speaks the sidecar schema.
"""

__version__ = "0.1.0"

from .color import delta_e_76, delta_e_2000, lab_to_srgb, srgb_to_lab
from .scales import ScaleAssignment, ScalePalette, classify, load_palettes
from .tone import ToneEstimate, ToneParams, representative_tone

__all__ = [
    "__version__",
    "delta_e_76",
    "delta_e_2000",
    "lab_to_srgb",
    "srgb_to_lab",
    "ScaleAssignment",
    "ScalePalette",
    "classify",
    "load_palettes",
    "ToneEstimate",
    "ToneParams",
    "representative_tone",
]
