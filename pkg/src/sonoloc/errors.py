"""Exception hierarchy shared across the package."""


class SonolocError(Exception):
    """Base class for all domain errors raised by sonoloc."""


class ValidationError(SonolocError):
    """Input violates a documented precondition or type invariant."""


class DegenerateGeometryError(SonolocError):
    """Geometry problem has no well-defined solution (collinear points, ...)."""


class ProjectionIncompleteError(SonolocError):
    """Some outline vertices did not hit the surface mesh."""

    def __init__(self, missing: list[int]):
        self.missing = list(missing)
        super().__init__(f"rays missed the mesh for vertex indices {self.missing}")


class GridMismatchError(SonolocError):
    """Two raster/voxel masks do not share the same grid."""


class ComponentNotFoundError(SonolocError):
    """No connected component satisfies the selection rule."""


class TrainingDivergedError(SonolocError):
    """Training loss became non-finite."""


class FormatError(SonolocError):
    """A file or message does not match its documented schema."""


class UnsupportedVersionError(FormatError):
    """File declares a schema version this build does not understand."""
