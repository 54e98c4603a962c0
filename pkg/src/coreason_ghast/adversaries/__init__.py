# Copyright (c) 2025 CoReason, Inc.
#
# This software is proprietary and dual-licensed.
# Licensed under the Prosperity Public License 3.0 (the "License").
# A copy of the license is available at https://prosperitylicense.com/versions/3.0.0
# For details, see the LICENSE file.
# Commercial use beyond a 30-day trial requires a separate license.
#
# Source Code: https://github.com/CoReason-AI/coreason_ghast

"""Built-in adversaries and the delivery helpers they share."""

from typing import Dict, List, Optional, Tuple

from coreason_ghast.harness import World
from coreason_ghast.schemas import BlockId, Release


def delivery_plan(world: World, policy: str) -> Dict[int, int]:
    """Delivery rounds for a fresh honest block: next round for everyone, or {} to wait for the deadline."""
    if policy == "deadline" or world.config.d == 0:
        return {}
    return {n.index: world.round + 1 for n in world.honest_nodes}


def split_groups(world: World, fraction: float) -> Tuple[Tuple[int, ...], Tuple[int, ...]]:
    """Honest node indices split into groups X and Y; X gets round(fraction * honest), at least one."""
    honest = [n.index for n in world.honest_nodes]
    k = min(max(1, round(fraction * len(honest))), len(honest))
    return tuple(honest[:k]), tuple(honest[k:])


def release_everything(world: World, nodes: Tuple[int, ...] = ()) -> List[Release]:
    """Release actions for every withheld block, oldest first."""
    order = sorted(world.withheld, key=world.gen_index.__getitem__)
    return [Release(block=b, nodes=nodes) for b in order]


def private_parent(world: World, tip: Optional[BlockId]) -> BlockId:
    """The adversary's own tip, or the omniscient pivot tip before it has mined."""
    if tip is not None:
        return tip
    parent = world.universe.pivot().tip
    assert parent is not None
    return parent
