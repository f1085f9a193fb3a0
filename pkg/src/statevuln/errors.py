"""Exception hierarchy.

Every error raised on purpose by the toolkit derives from
:class:`VulnerabilityError`, so callers (the CLI in particular) can separate
declared failures from bugs.
"""


class VulnerabilityError(Exception):
    """Base class for all declared toolkit errors."""


class InputError(VulnerabilityError, ValueError):
    pass


# ingest
class UnknownRegion(InputError):
    pass


class MissingMapping(InputError):
    pass


class ZeroWeight(InputError):
    pass


class EmptyJoin(InputError):
    pass


class ParseError(InputError):
    """Malformed input file. ``path`` and ``line`` locate the problem."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)


# indicators
class NonFiniteInput(InputError):
    pass


class ZeroPopulation(InputError):
    pass


class OutOfRangeShare(InputError):
    pass


class NonPositiveDensity(InputError):
    pass


class TooFewRegions(InputError):
    pass


# scoring
class WeightSumViolation(InputError):
    pass


class MissingFactor(InputError):
    pass


# stats
class LengthMismatch(InputError):
    pass


class ConstantInput(InputError):
    pass


class RankDeficient(InputError):
    pass


class TooFewObservations(InputError):
    pass


# temporal
class UnsortedInput(InputError):
    pass


class MissingTercile(InputError):
    pass


# geo
class MissingNameProperty(ParseError):
    pass


class DegenerateRing(InputError):
    pass


class EmptyInput(InputError):
    pass
