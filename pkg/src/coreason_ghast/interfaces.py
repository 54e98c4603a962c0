# Copyright (c) 2025 CoReason, Inc.
#
# This software is proprietary and dual-licensed.
# Licensed under the Prosperity Public License 3.0 (the "License").
# A copy of the license is available at https://prosperitylicense.com/versions/3.0.0
# For details, see the LICENSE file.
# Commercial use beyond a 30-day trial requires a separate license.
#
# Source Code: https://github.com/CoReason-AI/coreason_ghast

from abc import ABC, abstractmethod
from typing import TYPE_CHECKING, Dict, List, Optional, Set

from coreason_ghast.schemas import AdversaryAction, Block, MiningTemplate

if TYPE_CHECKING:  # pragma: no cover
    from coreason_ghast.harness import World
    from coreason_ghast.treegraph import TreeGraph


class BaseWeightFunction(ABC):
    """Resolves the weight of a block at the moment it joins a graph."""

    @abstractmethod
    def weight(self, graph: "TreeGraph", block: Block) -> int:
        """Weight of `block`, whose dependencies are already members of `graph`.

        Args:
            graph: Graph the block is being inserted into.
            block: The block.

        Returns:
            int: One of 0, 1 or eta_w.
        """
        pass  # pragma: no cover


class BaseAdversary(ABC):
    """Abstract base class for admissible adversaries.

    The adversary is omniscient: it reads the world's generated-block graph, every
    honest local graph and the pending delivery schedule, but acts only through the
    actions it returns.
    """

    def corrupt(self, world: "World") -> Optional[Set[int]]:
        """Phase 1: pick the corrupted node set; None keeps the current one."""
        return None

    @abstractmethod
    def act(self, world: "World") -> List[AdversaryAction]:
        """Phase 2: releases and early deliveries for the current round."""
        pass  # pragma: no cover

    @abstractmethod
    def schedule_honest(self, world: "World", block: Block) -> Dict[int, int]:
        """Delivery round per honest node for a freshly mined honest block.

        Nodes left out are delivered at the deadline.
        """
        pass  # pragma: no cover

    @abstractmethod
    def mining_template(self, world: "World") -> MiningTemplate:
        """Phase 3(b): parent and references for this round's malicious blocks."""
        pass  # pragma: no cover

    def on_mined(self, world: "World", block: Block) -> None:
        """Hook called for each malicious block right after generation."""
        return None
