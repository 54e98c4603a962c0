# Copyright (c) 2025 CoReason, Inc.
#
# This software is proprietary and dual-licensed.
# Licensed under the Prosperity Public License 3.0 (the "License").
# A copy of the license is available at https://prosperitylicense.com/versions/3.0.0
# For details, see the LICENSE file.
# Commercial use beyond a 30-day trial requires a separate license.
#
# Source Code: https://github.com/CoReason-AI/coreason_ghast

from coreason_ghast.config import AdversaryConfig
from coreason_ghast.interfaces import BaseAdversary


def get_adversary(config: AdversaryConfig) -> BaseAdversary:
    """Factory for the configured adversary.

    Adversaries keep per-run state, so every call builds a fresh instance.

    Args:
        config: Adversary settings.

    Returns:
        BaseAdversary: The adversary for `config.kind`.
    """
    if config.kind == "withhold":
        from coreason_ghast.adversaries.withhold import WithholdingAdversary

        return WithholdingAdversary(config)
    if config.kind == "balance":
        from coreason_ghast.adversaries.balance import BalanceAdversary

        return BalanceAdversary(config)
    if config.kind == "script":
        from coreason_ghast.adversaries.scripted import ScriptedAdversary

        return ScriptedAdversary(config)

    from coreason_ghast.adversaries.null import NullAdversary

    return NullAdversary(config)
