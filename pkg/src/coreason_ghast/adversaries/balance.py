# Copyright (c) 2025 CoReason, Inc.
#
# This software is proprietary and dual-licensed.
# Licensed under the Prosperity Public License 3.0 (the "License").
# A copy of the license is available at https://prosperitylicense.com/versions/3.0.0
# For details, see the LICENSE file.
# Commercial use beyond a 30-day trial requires a separate license.
#
# Source Code: https://github.com/CoReason-AI/coreason_ghast

from typing import Dict, List, Optional, Tuple

from coreason_ghast.adversaries import split_groups
from coreason_ghast.config import AdversaryConfig
from coreason_ghast.harness import World
from coreason_ghast.interfaces import BaseAdversary
from coreason_ghast.schemas import AdversaryAction, Block, BlockId, MiningTemplate, Release
from coreason_ghast.treegraph import TreeGraph
from coreason_ghast.utils.digest import GENESIS_ID
from coreason_ghast.utils.logger import logger


def _prefers(view: TreeGraph, mine: BlockId, other: BlockId) -> bool:
    """Whether the view's fork choice at the fork point picks `mine` over `other`."""
    sw_mine = view.subtree_weight(mine) if mine in view else 0
    sw_other = view.subtree_weight(other) if other in view else 0
    if mine in view and view.weight(mine) == 0:
        return False
    return sw_mine > sw_other or (sw_mine == sw_other and mine in view and mine < other)


class BalanceAdversary(BaseAdversary):
    """Keeps two groups of honest nodes on two different children of genesis.

    Honest blocks reach the miner's own group next round and the other group at the
    deadline. Withheld blocks under each branch are fed to the group that favours it
    whenever that group is about to switch; new blocks go to the lighter branch.

    Attributes:
        config: Adversary settings.
        groups: Honest node indices of groups X and Y.
        branches: Children of genesis favoured by X and Y, once a fork exists.
    """

    def __init__(self, config: AdversaryConfig) -> None:
        self.config = config
        self.groups: Optional[Tuple[Tuple[int, ...], Tuple[int, ...]]] = None
        self.branches: Optional[Tuple[BlockId, BlockId]] = None

    def _groups(self, world: World) -> Tuple[Tuple[int, ...], Tuple[int, ...]]:
        if self.groups is None:
            self.groups = split_groups(world, self.config.group_split)
            logger.info(f"Balance attack groups: X={len(self.groups[0])} nodes, Y={len(self.groups[1])} nodes")
        return self.groups

    def _pick_branches(self, world: World) -> None:
        kids = sorted(world.universe.children(GENESIS_ID), key=lambda c: (-world.universe.subtree_weight(c), c))
        if len(kids) >= 2:
            self.branches = (kids[0], kids[1])
            logger.info(f"Balance attack branches: {kids[0]:#x} vs {kids[1]:#x}")

    def _feed(self, world: World, group: Tuple[int, ...], mine: BlockId, other: BlockId) -> List[AdversaryAction]:
        """Release withheld blocks under `mine` to `group` until its representative prefers `mine`."""
        if not group:
            return []
        view = world.nodes[group[0]].graph
        if _prefers(view, mine, other):
            return []
        sw_mine = view.subtree_weight(mine) if mine in view else 0
        sw_other = view.subtree_weight(other) if other in view else 0
        pending = sorted(
            (b for b in world.withheld if world.universe.is_ancestor(mine, b)),
            key=world.gen_index.__getitem__,
        )
        actions: List[AdversaryAction] = []
        for b in pending:
            actions.append(Release(block=b, nodes=group))
            sw_mine += world.weights.table[b]
            if sw_mine > sw_other or (sw_mine == sw_other and mine < other):
                break
        return actions

    def act(self, world: World) -> List[AdversaryAction]:
        x, y = self._groups(world)
        if self.branches is None:
            self._pick_branches(world)
        if self.branches is None or not y:
            return []
        a, b = self.branches
        actions = self._feed(world, x, a, b)
        actions.extend(self._feed(world, y, b, a))
        return actions

    def schedule_honest(self, world: World, block: Block) -> Dict[int, int]:
        if world.config.d == 0:
            return {}
        x, y = self._groups(world)
        miner = world.miner_of.get(block.id)
        same = x if miner in x else y
        return {n: world.round + 1 for n in same}

    def mining_template(self, world: World) -> MiningTemplate:
        u = world.universe
        if self.branches is None:
            kids = u.children(GENESIS_ID)
            if len(kids) == 1:
                return MiningTemplate(parent=GENESIS_ID)
            tip = u.pivot().tip
            assert tip is not None
            return MiningTemplate(parent=tip)
        lighter = min(self.branches, key=lambda c: (u.subtree_weight(c), -c))
        cur = lighter
        nxt = u.best_child(cur)
        while nxt is not None:
            cur = nxt
            nxt = u.best_child(cur)
        return MiningTemplate(parent=cur)

    def on_mined(self, world: World, block: Block) -> None:
        if self.branches is not None or block.parent != GENESIS_ID:
            return
        others = [c for c in world.universe.children(GENESIS_ID) if c != block.id]
        if len(others) == 1 and world.weights.table[block.id] > 0:
            self.branches = (others[0], block.id)
            logger.info(f"Balance attack forked genesis: {others[0]:#x} vs {block.id:#x}")
