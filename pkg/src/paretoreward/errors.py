"""Exception types raised across the package.

Every error derives from :class:`PrefRewardError`. The CLI maps these to
exit code 2 (data error).
"""

from __future__ import annotations


class PrefRewardError(Exception):
    """Base class for all package errors."""


class MissingColumn(PrefRewardError):
    def __init__(self, column: str):
        super().__init__(f"missing column: {column!r}")
        self.column = column


class ParseError(PrefRewardError):
    def __init__(self, row: int, column: str, value: str):
        super().__init__(f"row {row}, column {column!r}: cannot parse {value!r} as a number")
        self.row = row
        self.column = column
        self.value = value


class DimensionMismatch(PrefRewardError):
    pass


class EmptyProfile(PrefRewardError):
    pass


class EmptySplit(PrefRewardError):
    """A temporal split left the train or test side empty."""

    def __init__(self, side: str, cycle: int):
        super().__init__(f"{side} side empty when splitting at cycle {cycle}")
        self.side = side
        self.cycle = cycle


class UnknownId(PrefRewardError):
    def __init__(self, point_id: int):
        super().__init__(f"unknown point id {point_id}")
        self.point_id = point_id


class EmptyPairs(PrefRewardError):
    pass


class NonFiniteLoss(PrefRewardError):
    def __init__(self, epoch: int, value: float):
        super().__init__(f"loss became non-finite ({value}) at epoch {epoch}")
        self.epoch = epoch
        self.value = value


class LengthMismatch(PrefRewardError):
    pass


class DegenerateSeries(PrefRewardError):
    pass


class EmptySeeds(PrefRewardError):
    pass


class NonFiniteFitness(PrefRewardError):
    def __init__(self, genome):
        super().__init__(f"fitness is non-finite for genome {list(genome)}")
        self.genome = genome


class TooFewPoints(PrefRewardError):
    pass


class BadKindList(PrefRewardError):
    pass
