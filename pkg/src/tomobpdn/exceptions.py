"""Exception hierarchy shared across the package."""


class TomoError(Exception):
    """Base class for all package errors."""


class GeometryError(TomoError, ValueError):
    """Invalid acquisition geometry or geometry file."""


class GridError(TomoError, ValueError):
    """Invalid parameter grid definition."""


class ConfigurationError(TomoError, ValueError):
    """Invalid solver/pipeline/experiment configuration."""


class CapacityError(TomoError):
    """Requested dictionary exceeds the configured memory budget."""


class LineSearchError(TomoError):
    """Backtracking failed to find an acceptable step within the cap."""


class EstimationError(TomoError):
    """Parameter estimation failed (singular normal equations)."""


class NumericalError(TomoError):
    """Numerical failure in a linear-algebra kernel (e.g. SVD breakdown)."""


class StackFormatError(TomoError, ValueError):
    """Malformed stack file header or payload."""
