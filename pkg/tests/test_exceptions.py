# Copyright (c) 2025 CoReason, Inc.
#
# This software is proprietary and dual-licensed.
# Licensed under the Prosperity Public License 3.0 (the "License").
# A copy of the license is available at https://prosperitylicense.com/versions/3.0.0
# For details, see the LICENSE file.
# Commercial use beyond a 30-day trial requires a separate license.
#
# Source Code: https://github.com/CoReason-AI/coreason_ghast

import pytest

from coreason_ghast.exceptions import (
    AdmissibilityViolation,
    ConfigError,
    DeadlineViolation,
    DomainError,
    DuplicateId,
    GhastError,
    GraphError,
    HorizonExceeded,
    MissingDependency,
    NonConvergent,
    NumericalError,
    SimulationError,
)


class TestExceptionHierarchy:
    @pytest.mark.parametrize(
        "exc, parent",
        [
            (MissingDependency, GraphError),
            (DuplicateId, GraphError),
            (HorizonExceeded, SimulationError),
            (DeadlineViolation, SimulationError),
            (AdmissibilityViolation, SimulationError),
            (DomainError, NumericalError),
            (NonConvergent, NumericalError),
            (ConfigError, GhastError),
        ],
    )
    def test_parents(self, exc: type, parent: type) -> None:
        """Every error sits under its family and under GhastError."""
        assert issubclass(exc, parent)
        assert issubclass(exc, GhastError)

    def test_config_error_location(self) -> None:
        """ConfigError carries line and column and prefixes them to the message."""
        e = ConfigError("bad value", line=3, column=7)
        assert e.line == 3 and e.column == 7
        assert str(e) == "line 3, column 7: bad value"
        assert str(ConfigError("bad", line=2)) == "line 2: bad"
        assert ConfigError("plain").line is None
