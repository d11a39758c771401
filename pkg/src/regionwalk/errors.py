"""Exception types raised across the package."""


class RegionwalkError(Exception):
    """Base class for all package errors."""


class ResolutionError(RegionwalkError, ValueError):
    pass


class AddressParseError(RegionwalkError, ValueError):
    pass


class SchemaError(RegionwalkError, ValueError):
    """Input file is missing a required column or key."""


class EmptyInputError(RegionwalkError, ValueError):
    pass


class RowValidationError(RegionwalkError, ValueError):
    """A single CSV row failed to parse or validate."""

    def __init__(self, line, message):
        self.line = line
        self.message = message
        super().__init__(f"line {line}: {message}")


class EmptyDatasetError(RegionwalkError, ValueError):
    pass


class ArgumentError(RegionwalkError, ValueError):
    pass


class ShapeError(RegionwalkError, ValueError):
    pass


class TrainingError(RegionwalkError, RuntimeError):
    pass


class DegenerateGraphError(RegionwalkError, ValueError):
    pass


class GenerationError(RegionwalkError, RuntimeError):
    pass


class UnknownRegionError(RegionwalkError, KeyError):
    pass


class MetricUnavailableError(RegionwalkError, RuntimeError):
    pass
