"""Exception hierarchy.

Errors fall in two families that the command line maps to distinct exit
codes: :class:`InputError` (bad files, bad configs, data that cannot be
fitted) and :class:`NumericalError` (a linear system that could not be
solved).
"""


class OodCorrError(Exception):
    """Base class for every error raised by this package."""


class InputError(OodCorrError, ValueError):
    """Invalid input data or configuration."""


class NumericalError(OodCorrError, ArithmeticError):
    """A numerical procedure failed on otherwise valid input."""


# -- ingest -----------------------------------------------------------------

class MissingHeader(InputError):
    pass


class MalformedRow(InputError):
    pass


class DuplicateRow(InputError):
    pass


class OutOfRangeAccuracy(InputError):
    pass


class NonNumeric(InputError):
    pass


class UnknownInDomain(InputError):
    pass


class InvalidRunSet(InputError):
    pass


class StepMismatch(InputError):
    pass


class EmptyIntersection(InputError):
    pass


# -- fitting ----------------------------------------------------------------

class LengthMismatch(InputError):
    pass


class TooFewPoints(InputError):
    pass


class NonPositiveLambda(InputError):
    pass


class DegenerateX(InputError):
    pass


class SingularSystem(NumericalError):
    pass


# -- summary / config -------------------------------------------------------

class MissingStep(InputError):
    pass


class ConfigError(InputError):
    pass


def tag_dataset(err: OodCorrError, dataset: str) -> OodCorrError:
    """Return a copy of `err` (same class) whose message names `dataset`."""
    tagged = type(err)(f"[{dataset}] {err}")
    tagged.dataset = dataset
    return tagged
