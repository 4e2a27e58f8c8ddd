"""Exception hierarchy shared by all jscckit modules."""


class JsccError(Exception):
    """Base class for all jscckit errors."""


class InvalidInputError(JsccError):
    """An operation received an argument violating its preconditions."""


class InvalidConfigError(JsccError):
    """A configuration value or file is malformed or out of range."""


class FormatError(JsccError):
    """A serialized artifact has the wrong structure or size."""


class IntegrityError(JsccError):
    """A checksum did not match the stored payload."""


class VersionError(JsccError):
    """A serialized artifact declares an unsupported format version."""


class DataError(JsccError):
    """A dataset is unavailable or unusable."""


class TrainingDivergedError(JsccError):
    """Training loss became non-finite or grew past the divergence guard."""


class DependencyError(JsccError):
    """A required upstream artifact (e.g. a checkpoint) is missing."""


class PairingError(JsccError):
    """Two artifacts that must describe the same sample do not."""


class UndefinedFillError(JsccError):
    """Mean fill was requested but no block survived to average."""
