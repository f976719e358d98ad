"""Exception types shared across the package."""


class UvforgeError(Exception):
    """Base class for all errors raised by this package."""


class MeshError(UvforgeError):
    """Base class for mesh loading and validation errors."""


class ParseError(MeshError):
    """Malformed OBJ content. Carries the 1-based line number."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class MissingUV(MeshError):
    """A face corner has no texture-coordinate reference."""


class EmptyMesh(MeshError):
    """No usable faces remain after parsing and degenerate removal."""


class DegenerateBounds(MeshError):
    """Mesh bounding box has zero extent on every axis."""


class UnsupportedCount(UvforgeError):
    """Viewpoint count outside the supported schedule sizes."""


class DimensionMismatch(UvforgeError):
    """Two buffers that must share dimensions do not."""


class OddWidth(UvforgeError):
    """Grid split requested on an odd-width image."""


class EmptySchedule(UvforgeError):
    """A pipeline stage received a schedule with no viewpoints."""


class BackendError(UvforgeError):
    """Base class for sampling-backend failures."""


class BackendUnavailable(BackendError):
    """Backend could not be reached or refused service."""


class BackendRejected(BackendError):
    """Backend rejected the request; message comes from the backend."""


class Timeout(BackendError):
    """Backend did not answer within the configured timeout."""


class ContractViolation(BackendError):
    """Backend response broke the wire contract (e.g. wrong dimensions)."""
