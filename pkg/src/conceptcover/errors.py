"""Exception hierarchy. Every error carries a stable machine-readable code."""


class ConceptCoverError(Exception):
    """Base class for all toolkit errors."""

    code = "error"


# -- mask / scoring ----------------------------------------------------------

class ShapeMismatchError(ConceptCoverError):
    """Two masks of different dimensions were combined."""

    code = "shape-mismatch"


class UndefinedScoreError(ConceptCoverError):
    """Jaccard of two empty masks (zero denominator)."""

    code = "undefined-score"


class EmptyConceptMaskError(ConceptCoverError):
    """Recognition against a concept mask with no set pixels."""

    code = "empty-concept-mask"


class OracleSizeError(ConceptCoverError):
    """Exhaustive subset enumeration refused: stack too large."""

    code = "stack-too-large"


# -- file formats ------------------------------------------------------------

class FormatError(ConceptCoverError):
    """Base class for on-disk format violations."""

    code = "format"


class BadMagicError(FormatError):
    code = "bad-magic"


class UnsupportedFormatError(FormatError):
    """Recognized magic but an unsupported variant (version byte, PGM maxval)."""

    code = "unsupported-format"


class TruncatedPayloadError(FormatError):
    """Payload length does not match the header (short read or trailing bytes)."""

    code = "truncated-payload"


class ZeroDimensionError(FormatError):
    """Header declares a zero width, height, or plane count."""

    code = "zero-dimensions"


# -- manifest ----------------------------------------------------------------

class ManifestError(ConceptCoverError):
    code = "manifest"


class ManifestParseError(ManifestError):
    code = "manifest-parse"


class DuplicateLabelError(ManifestError):
    code = "duplicate-label"


class DanglingReferenceError(ManifestError):
    """Manifest references a file or scene label that does not exist."""

    code = "dangling-reference"


class FeatureCountMismatchError(ManifestError):
    """A feature stack's plane count disagrees with the manifest."""

    code = "feature-count-mismatch"


class DimensionMismatchError(ManifestError):
    """A mask file's dimensions disagree with its image's feature stack."""

    code = "dimension-mismatch"


# -- statistics --------------------------------------------------------------

class EmptyInputError(ConceptCoverError):
    code = "empty-input"


class LengthMismatchError(ConceptCoverError):
    code = "length-mismatch"


class TooFewPointsError(ConceptCoverError):
    code = "too-few-points"


class ZeroVarianceError(ConceptCoverError):
    """Correlation or fit requested on a degenerate (constant) variable."""

    code = "zero-variance"


class EmptySceneError(ConceptCoverError):
    """Per-scene statistic requested for a scene with no images."""

    code = "empty-scene"


class CoverageError(ConceptCoverError):
    """Recognition results do not cover every (image, concept) instance."""

    code = "coverage"


# -- synthetic generator -----------------------------------------------------

class SynthSpecError(ConceptCoverError):
    """Synthetic dataset plan is invalid or infeasible."""

    code = "synth-spec"
