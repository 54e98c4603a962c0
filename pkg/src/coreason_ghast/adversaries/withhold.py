# Copyright (c) 2025 CoReason, Inc.
#
# This software is proprietary and dual-licensed.
# Licensed under the Prosperity Public License 3.0 (the "License").
# A copy of the license is available at https://prosperitylicense.com/versions/3.0.0
# For details, see the LICENSE file.
# Commercial use beyond a 30-day trial requires a separate license.
#
# Source Code: https://github.com/CoReason-AI/coreason_ghast

from typing import Dict, List, Optional

from coreason_ghast.adversaries import delivery_plan, private_parent, release_everything
from coreason_ghast.config import AdversaryConfig
from coreason_ghast.harness import World
from coreason_ghast.interfaces import BaseAdversary
from coreason_ghast.schemas import AdversaryAction, Block, BlockId, MiningTemplate
from coreason_ghast.utils.logger import logger


class WithholdingAdversary(BaseAdversary):
    """Grows a private chain without references and publishes it at `release_round`, if ever.

    Attributes:
        config: Adversary settings.
        private_tip: Last block of the private chain.
    """

    def __init__(self, config: AdversaryConfig) -> None:
        self.config = config
        self.private_tip: Optional[BlockId] = None

    def act(self, world: World) -> List[AdversaryAction]:
        release_round = self.config.release_round
        if release_round is None or world.round < release_round or not world.withheld:
            return []
        logger.info(f"Round {world.round}: publishing {len(world.withheld)} withheld blocks")
        return list(release_everything(world))

    def schedule_honest(self, world: World, block: Block) -> Dict[int, int]:
        return delivery_plan(world, self.config.honest_delivery)

    def mining_template(self, world: World) -> MiningTemplate:
        return MiningTemplate(parent=private_parent(world, self.private_tip))

    def on_mined(self, world: World, block: Block) -> None:
        self.private_tip = block.id
