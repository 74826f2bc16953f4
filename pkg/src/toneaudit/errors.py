"""Exception types shared across the toolkit.

Per-image failures (no face, not enough skin, missing background) become
skip entries in a corpus run; only configuration and manifest problems are
fatal.
"""


class ToneAuditError(Exception):
    """Base class for all toolkit errors."""


class NoFaceDetected(ToneAuditError):
    """Sidecar contains zero faces."""


class InsufficientSkinArea(ToneAuditError):
    """Skin mask fell below the minimum pixel count."""


class InsufficientPixels(ToneAuditError):
    """Fewer masked pixels than clusters requested."""


class NoBackgroundReference(ToneAuditError):
    """Too few background pixels to estimate the illuminant."""


class PaletteError(ToneAuditError):
    """Palette config failed validation."""


class TopologyError(ToneAuditError):
    """Landmark topology config failed validation."""


class SidecarError(ToneAuditError):
    """Face sidecar failed to parse or validate."""


class ManifestError(ToneAuditError):
    """Corpus manifest is unreadable or malformed (fatal)."""
