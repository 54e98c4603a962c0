# Copyright (c) 2025 CoReason, Inc.
#
# This software is proprietary and dual-licensed.
# Licensed under the Prosperity Public License 3.0 (the "License").
# A copy of the license is available at https://prosperitylicense.com/versions/3.0.0
# For details, see the LICENSE file.
# Commercial use beyond a 30-day trial requires a separate license.
#
# Source Code: https://github.com/CoReason-AI/coreason_ghast

"""Exception hierarchy for the GHAST library, simulator and tooling."""

from typing import Optional


class GhastError(Exception):
    """Base class for every error raised by coreason_ghast."""


class GraphError(GhastError):
    """Errors raised by Tree-Graph structure operations."""


class MissingDependency(GraphError):
    """A block's parent or a reference is absent from the graph."""


class DuplicateId(GraphError):
    """A block with the same digest is already a member of the graph."""


class InvalidParent(GraphError):
    """The parent is not the pivot tip of the block's past graph."""


class UnknownBlock(GraphError):
    """The queried block is not a member of the graph."""


class GenesisHasNoSiblings(GraphError):
    """Sibling queries are undefined for the genesis block."""


class EmptyGraph(GraphError):
    """The operation needs at least the genesis block."""


class StrategyMismatch(GhastError):
    """A block's declared strategy bit disagrees with the one forced by its past."""


class SimulationError(GhastError):
    """Errors raised by the round-based harness."""


class HorizonExceeded(SimulationError):
    """A round was requested past the configured horizon."""


class DeadlineViolation(SimulationError):
    """A delivery was scheduled later than first exposure plus the maximum delay."""


class AdmissibilityViolation(SimulationError):
    """An honest node is missing a block whose delivery deadline has passed."""


class IllegalEventSequence(GhastError):
    """The event log breaks the per-block event ordering rules."""


class NumericalError(GhastError):
    """Errors raised by the risk calculator."""


class DomainError(NumericalError):
    """An argument lies outside the domain of the function."""


class NonConvergent(NumericalError):
    """A series did not reach the requested tolerance within the term budget."""


class NotOnPivot(GhastError):
    """The block is not on the pivot chain of the graph."""


class IoError(GhastError):
    """An artifact file could not be read, written or parsed."""


class InvariantViolation(GhastError):
    """The analysis oracle found at least one violated invariant."""


class ConfigError(GhastError):
    """A scenario configuration could not be parsed or validated.

    Attributes:
        line: 1-based line number of the problem in the config file, if known.
        column: 1-based column number of the problem, if known.
    """

    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None) -> None:
        self.line = line
        self.column = column
        if line is not None:
            message = f"line {line}" + (f", column {column}" if column is not None else "") + f": {message}"
        super().__init__(message)
