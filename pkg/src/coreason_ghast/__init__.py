# Copyright (c) 2025 CoReason, Inc.
#
# This software is proprietary and dual-licensed.
# Licensed under the Prosperity Public License 3.0 (the "License").
# A copy of the license is available at https://prosperitylicense.com/versions/3.0.0
# For details, see the LICENSE file.
# Commercial use beyond a 30-day trial requires a separate license.
#
# Source Code: https://github.com/CoReason-AI/coreason_ghast

"""
coreason-ghast: GHAST Tree-Graph consensus simulator, analysis oracle and confirmation-risk calculator.
"""

__version__ = "0.1.0"
__author__ = "Gowtham A Rao"
__email__ = "gowtham.rao@coreason.ai"

from .config import ScenarioConfig, load_config
from .confirmation import confirm_decision, confirmation_risk
from .engine import ScenarioEngine, ScenarioEngineAsync
from .main import main
from .treegraph import TreeGraph

__all__ = [
    "ScenarioConfig",
    "ScenarioEngine",
    "ScenarioEngineAsync",
    "TreeGraph",
    "confirm_decision",
    "confirmation_risk",
    "load_config",
    "main",
]
