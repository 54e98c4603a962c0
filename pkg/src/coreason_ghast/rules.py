# Copyright (c) 2025 CoReason, Inc.
#
# This software is proprietary and dual-licensed.
# Licensed under the Prosperity Public License 3.0 (the "License").
# A copy of the license is available at https://prosperitylicense.com/versions/3.0.0
# For details, see the LICENSE file.
# Commercial use beyond a 30-day trial requires a separate license.
#
# Source Code: https://github.com/CoReason-AI/coreason_ghast

"""GHAST rules: weight and timer tags, block age, liveness detection and block weights."""

from typing import Optional

from coreason_ghast.config import ProtocolMode, ProtocolParams
from coreason_ghast.exceptions import StrategyMismatch, UnknownBlock
from coreason_ghast.interfaces import BaseWeightFunction
from coreason_ghast.schemas import Block, BlockId, ForkChoice, StrategyBit, WeightClass
from coreason_ghast.treegraph import TreeGraph, UnitWeight
from coreason_ghast.utils.digest import below_ratio, timer_tag_value, weight_tag_value


def weight_tag(block_id: BlockId, params: ProtocolParams) -> WeightClass:
    """Heavy with probability 1/eta_w over uniformly drawn digests."""
    return WeightClass.HEAVY if below_ratio(weight_tag_value(block_id), params.eta_w) else WeightClass.LIGHT


def timer_tag(block_id: BlockId, params: ProtocolParams) -> bool:
    """Timer block with probability 1/eta_t over uniformly drawn digests."""
    return below_ratio(timer_tag_value(block_id), params.eta_t)


def timer_height(g: TreeGraph, b: BlockId) -> int:
    """Timer-chain height of b, or the max timer height of its past for non-timer blocks."""
    return g.timer_height(b)


def max_timer_height(g: TreeGraph) -> int:
    """Max timer height in g; 0 without timer blocks."""
    return g.max_timer_height


def is_old(g: TreeGraph, b: BlockId, params: ProtocolParams, source: Optional[TreeGraph] = None) -> bool:
    """Block age speculation: max timer height of g exceeds b's by at least eta_b.

    Args:
        g: The graph whose timer chain is the clock.
        b: The block; it need not belong to g.
        params: Protocol parameters.
        source: Graph holding b when b is not a member of g.

    Raises:
        UnknownBlock: b is in neither g nor source.
    """
    if b in g:
        th = g.timer_height(b)
    elif source is not None and b in source:
        th = source.timer_height(b)
    else:
        raise UnknownBlock(f"cannot age block {b:#x}: not in graph or source")
    return g.max_timer_height - th >= params.eta_b


def adapt(past_g: TreeGraph, params: ProtocolParams) -> StrategyBit:
    """Liveness detector over a past graph.

    Outputs con when the pivot tip is old, or when some pivot block has an old
    parent and a dominance margin below eta_a. Old parents form a prefix of the
    pivot chain, so the scan stops at the first parent that is not old.
    """
    if len(past_g) == 0:
        return StrategyBit.OPT
    chain = past_g.pivot().blocks
    if is_old(past_g, chain[-1], params):
        return StrategyBit.CON
    for parent, b in zip(chain, chain[1:], strict=False):
        if not is_old(past_g, parent, params):
            break
        if past_g.subtree_weight(b) - past_g.sib_subtree_weight(b) < params.eta_a:
            return StrategyBit.CON
    return StrategyBit.OPT


def weight_for(strategy: StrategyBit, block_id: BlockId, params: ProtocolParams) -> int:
    if strategy == StrategyBit.OPT:
        return 1
    return params.eta_w if weight_tag(block_id, params) == WeightClass.HEAVY else 0


def block_weight(b: Block, past_g: TreeGraph, params: ProtocolParams) -> int:
    """Weight of b given its past graph: 1 under opt, eta_w or 0 by tag under con."""
    return weight_for(adapt(past_g, params), b.id, params)


def validate_strategy(b: Block, past_g: TreeGraph, params: ProtocolParams) -> StrategyBit:
    """Check a declared strategy bit against the one forced by the past graph.

    Returns:
        StrategyBit: The forced strategy.

    Raises:
        StrategyMismatch: The block declares a different strategy.
    """
    forced = adapt(past_g, params)
    if b.strategy is not None and b.strategy != forced:
        raise StrategyMismatch(f"block {b.id:#x} declares {b.strategy.value}, its past forces {forced.value}")
    return forced


def past_view(graph: TreeGraph, block: Block) -> TreeGraph:
    """Past graph of a not-yet-inserted block whose dependencies are in graph."""
    if set(graph.tips()) <= set(block.deps):
        return graph
    return graph.subgraph(graph.past_ids_of_deps(block.deps))


class GhastWeight(BaseWeightFunction):
    """Resolves GHAST weights at insertion time from the block's past inside the graph.

    Declared strategy bits are checked; a mismatch raises StrategyMismatch and the
    block is not inserted.
    """

    def __init__(self, params: ProtocolParams) -> None:
        self.params = params

    def weight(self, graph: TreeGraph, block: Block) -> int:
        if block.parent is None:
            return 1
        forced = validate_strategy(block, past_view(graph, block), self.params)
        return weight_for(forced, block.id, self.params)


def weight_function_for(mode: ProtocolMode, params: ProtocolParams) -> BaseWeightFunction:
    """GhastWeight in GHAST mode, unit weights otherwise."""
    if mode == ProtocolMode.GHAST:
        return GhastWeight(params)
    return UnitWeight()


def fork_choice_for(mode: ProtocolMode) -> ForkChoice:
    return ForkChoice.LONGEST if mode == ProtocolMode.NAKAMOTO_REF else ForkChoice.GHOST
