"""Exception hierarchy for the comrp toolkit."""


class ComrpError(Exception):
    """Base class for all toolkit errors."""


# -- mask ingest ------------------------------------------------------------

class LengthMismatch(ComrpError):
    """RLE counts do not sum to width*height."""


class MaskInvalid(ComrpError):
    """Stored mask fields disagree with the decoded raster."""


class UnknownImage(ComrpError):
    """A mask references an image_id absent from the manifest."""


class EmptyMask(ComrpError):
    """Operation requires a mask with at least one foreground pixel."""


# -- tiling -----------------------------------------------------------------

class DegenerateBox(ComrpError):
    """Detection box collapses to zero area."""


class TileExceedsImage(ComrpError):
    """Requested tile size is larger than the image."""


# -- feature packs ----------------------------------------------------------

class BadMagic(ComrpError):
    """File does not start with the feature-pack magic bytes."""


class DimMismatch(ComrpError):
    """Feature-pack header inconsistent with payload size or ids."""


class NonFiniteValue(ComrpError):
    """Feature matrix contains NaN or Inf."""

    def __init__(self, row: int):
        super().__init__(f"non-finite value in feature row {row}")
        self.row = row


class BadShape(ComrpError):
    """Input raster has the wrong shape for the operation."""


# -- clustering -------------------------------------------------------------

class KTooLarge(ComrpError):
    """Requested more clusters than there are samples."""


class NotSymmetric(ComrpError):
    """Matrix handed to the symmetric eigensolver is not symmetric."""


class NoConvergence(ComrpError):
    """QL iteration failed to converge within the sweep budget."""


# -- labeling ---------------------------------------------------------------

class UnmappedCluster(ComrpError):
    """Merge map does not cover every cluster of the model."""

    def __init__(self, missing: list):
        super().__init__(f"clusters missing from merge map: {sorted(missing)}")
        self.missing = sorted(missing)


class ForeignMask(ComrpError):
    """Mask belongs to a different image than the raster target."""


class BadDepth(ComrpError):
    """Label PNG is not single-channel 8-bit."""


# -- metrics ----------------------------------------------------------------

class ShapeMismatch(ComrpError):
    """Ground truth and prediction rasters differ in size."""


class LabelOutOfRange(ComrpError):
    """Raster contains a label outside [0, n_classes) and != 255."""


class EmptyMatrix(ComrpError):
    """Confusion matrix has no valid pixels."""


# -- self-training ----------------------------------------------------------

class TrainerFailed(ComrpError):
    """External trainer command exited non-zero."""

    def __init__(self, exit_code: int, stderr_tail: str):
        super().__init__(f"trainer exited {exit_code}: {stderr_tail}")
        self.exit_code = exit_code
        self.stderr_tail = stderr_tail


class BadPrediction(ComrpError):
    """External predictor emitted an invalid label map."""

    def __init__(self, image_id: str, reason: str):
        super().__init__(f"bad prediction for {image_id}: {reason}")
        self.image_id = image_id
        self.reason = reason
