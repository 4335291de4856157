"""Exception hierarchy shared by the library and the command line.

The CLI maps these onto exit codes: ``DataError`` -> 2, ``NumericError`` -> 3.
"""


class AmbisepError(Exception):
    pass


class DataError(AmbisepError):
    """Bad or missing input data (files, manifests, shapes)."""


class WavFormatError(DataError):
    pass


class CheckpointError(DataError):
    pass


class VariantMismatchError(CheckpointError):
    pass


class NumericError(AmbisepError):
    """Non-finite values appeared during a computation."""


class UndefinedMetricError(NumericError):
    """A BSS-eval ratio is undefined because the target projection is silent."""
