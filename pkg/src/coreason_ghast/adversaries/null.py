# Copyright (c) 2025 CoReason, Inc.
#
# This software is proprietary and dual-licensed.
# Licensed under the Prosperity Public License 3.0 (the "License").
# A copy of the license is available at https://prosperitylicense.com/versions/3.0.0
# For details, see the LICENSE file.
# Commercial use beyond a 30-day trial requires a separate license.
#
# Source Code: https://github.com/CoReason-AI/coreason_ghast

from typing import Dict, List

from coreason_ghast.adversaries import delivery_plan, release_everything
from coreason_ghast.config import AdversaryConfig
from coreason_ghast.harness import World
from coreason_ghast.interfaces import BaseAdversary
from coreason_ghast.schemas import AdversaryAction, Block, MiningTemplate


class NullAdversary(BaseAdversary):
    """Mines like an honest node on the full view and publishes at the next opportunity."""

    def __init__(self, config: AdversaryConfig) -> None:
        self.config = config

    def act(self, world: World) -> List[AdversaryAction]:
        return list(release_everything(world))

    def schedule_honest(self, world: World, block: Block) -> Dict[int, int]:
        return delivery_plan(world, self.config.honest_delivery)

    def mining_template(self, world: World) -> MiningTemplate:
        parent, refs = world.honest_template(world.universe)
        return MiningTemplate(parent=parent, refs=refs)
