"""Exception taxonomy shared by every module in the package.

All failures raised on purpose derive from CodecError so callers can catch
one base class; the concrete subclasses match the failure modes of the
individual operations (bad inputs, malformed model files, malformed
bitstreams).
"""


class CodecError(Exception):
    """Base class for every deliberate failure in this package."""


class DegenerateInput(CodecError):
    """Input is structurally valid but too small / empty / unusable."""


class ShapeMismatch(CodecError):
    """Array arguments disagree in shape where they must agree."""


class NumericalError(CodecError):
    """A non-finite value appeared where the contract forbids it."""


# --- model manifest -------------------------------------------------------

class MissingTensor(CodecError):
    """A tensor required by the network graph is absent from the manifest."""

    def __init__(self, name: str):
        super().__init__(f"manifest is missing tensor {name!r}")
        self.name = name


class BadShape(CodecError):
    """A manifest tensor exists but its shape contradicts the graph."""


class CorruptBlob(CodecError):
    """Manifest payload checksum does not match its contents."""


# --- entropy coding / bitstreams -----------------------------------------

class EncodingError(CodecError):
    """A symbol cannot be represented under the supplied CDF."""


class DecodingError(CodecError):
    """Bitstream is truncated or internally inconsistent."""


class BadMagic(CodecError):
    """File does not start with the expected magic bytes."""


class VersionUnsupported(CodecError):
    """File declares a format version this build does not understand."""


class ModelMismatch(CodecError):
    """Bitstream was produced with a different model than the one loaded."""


class PreconditionViolation(CodecError):
    """Caller broke a documented ordering/dependency requirement."""


class IoError(CodecError):
    """Filesystem-level failure (unreadable image, empty directory)."""
