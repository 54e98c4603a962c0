# Copyright (c) 2025 CoReason, Inc.
#
# This software is proprietary and dual-licensed.
# Licensed under the Prosperity Public License 3.0 (the "License").
# A copy of the license is available at https://prosperitylicense.com/versions/3.0.0
# For details, see the LICENSE file.
# Commercial use beyond a 30-day trial requires a separate license.
#
# Source Code: https://github.com/CoReason-AI/coreason_ghast

"""Round-based execution: honest nodes, an admissible adversary, mining and bounded-delay delivery."""

from typing import Callable, Dict, Iterable, List, Optional, Protocol, Set, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from coreason_ghast.config import ConfirmationConfig, ProtocolMode, SimConfig, expected_blocks_quantile
from coreason_ghast.confirmation import assess_block
from coreason_ghast.exceptions import (
    AdmissibilityViolation,
    DeadlineViolation,
    HorizonExceeded,
    IllegalEventSequence,
)
from coreason_ghast.interfaces import BaseAdversary
from coreason_ghast.rules import adapt, fork_choice_for, past_view, validate_strategy, weight_for
from coreason_ghast.schemas import (
    AdversaryAction,
    Block,
    BlockId,
    Creator,
    Deliver,
    Event,
    EventKind,
    Release,
    StrategyBit,
)
from coreason_ghast.treegraph import TableWeight, TreeGraph
from coreason_ghast.utils.digest import GENESIS_ID, block_digest
from coreason_ghast.utils.logger import logger


class NodeState:
    """Local state of one node.

    Attributes:
        index: Node index.
        graph: Local Tree-Graph.
        honest: Whether the node currently follows the protocol.
        buffer: Delivered blocks waiting for missing dependencies.
    """

    def __init__(self, index: int, graph: TreeGraph, honest: bool = True) -> None:
        self.index = index
        self.graph = graph
        self.honest = honest
        self.buffer: Dict[BlockId, Block] = {}

    def receive(self, blocks: Iterable[Block], validate: bool = False) -> List[BlockId]:
        """Insert delivered blocks in digest order, buffering orphans.

        Returns:
            List[BlockId]: Blocks inserted by this call, in insertion order.
        """
        for b in blocks:
            if b.id not in self.graph:
                self.buffer[b.id] = b
        inserted: List[BlockId] = []
        progress = True
        while progress and self.buffer:
            progress = False
            for bid in sorted(self.buffer):
                b = self.buffer[bid]
                if all(dep in self.graph for dep in b.deps):
                    self.graph.insert_block(b, validate=validate and b.creator == Creator.HONEST)
                    del self.buffer[bid]
                    inserted.append(bid)
                    progress = True
        return inserted


class EventListener(Protocol):
    def on_event(self, world: "World", event: Event) -> None: ...  # pragma: no cover


class RoundObserver(Protocol):
    def on_round(self, world: "World") -> None: ...  # pragma: no cover


class World:
    """Complete state of one run.

    The generated-block graph (`universe`) is the adversary's omniscient view.
    Weights are resolved once per block and shared by every graph of the run.

    Attributes:
        config: Simulation settings.
        round: Current round index.
        nodes: All node states; corrupted nodes are skipped.
        universe: Every generated block.
        weights: Shared weight table.
        rng: Seeded generator for mining draws.
        event_log: Append-only event list.
        exposure: First honest exposure round per block.
        malicious: Digests of adversary blocks.
        withheld: Adversary blocks not yet exposed to any honest node.
        gen_index: Generation sequence number per block.
    """

    def __init__(self, config: SimConfig) -> None:
        self.config = config
        self.params = config.effective_protocol
        self.mode = config.mode
        self.round = 0
        self.weights = TableWeight()
        self.rng = np.random.Generator(np.random.PCG64(config.seed))
        self.event_log: List[Event] = []
        self.exposure: Dict[BlockId, int] = {}
        self.malicious: Set[BlockId] = set()
        self.withheld: Set[BlockId] = set()
        self.gen_index: Dict[BlockId, int] = {}
        self.listeners: List[EventListener] = []
        self.corrupted: Set[int] = set(range(config.honest, config.m))
        self._nonce = 0
        self._due: Dict[int, Dict[int, Set[BlockId]]] = {}
        self._planned: Dict[Tuple[BlockId, int], int] = {}
        self._arrivals: Dict[int, List[BlockId]] = {}
        self.miner_of: Dict[BlockId, int] = {}

        self.genesis = Block(id=GENESIS_ID, parent=None, refs=(), creator=Creator.HONEST, born_round=0)
        self.weights.record(GENESIS_ID, 1)
        self.universe = self.new_graph()
        self.universe.insert_block(self.genesis)
        self.gen_index[GENESIS_ID] = 0
        self.exposure[GENESIS_ID] = 0
        self.nodes = [NodeState(i, self.new_graph(), honest=i not in self.corrupted) for i in range(config.m)]
        for node in self.nodes:
            node.graph.insert_block(self.genesis)

    # -- helpers ----------------------------------------------------------

    def new_graph(self) -> TreeGraph:
        """Empty graph sharing this run's weight table, fork choice and timer ratio."""
        return TreeGraph(weight_fn=self.weights, fork_choice=fork_choice_for(self.mode), eta_t=self.params.eta_t)

    @property
    def honest_nodes(self) -> List[NodeState]:
        return [n for n in self.nodes if n.honest]

    @property
    def reference_node(self) -> NodeState:
        return self.honest_nodes[0]

    @property
    def adaptive(self) -> bool:
        return self.mode == ProtocolMode.GHAST

    def block(self, b: BlockId) -> Block:
        return self.universe.block(b)

    def deadline(self, b: BlockId) -> int:
        return self.exposure[b] + self.config.d

    def emit(self, event: Event) -> None:
        self.event_log.append(event)
        for listener in self.listeners:
            listener.on_event(self, event)

    def _fresh_digest(self, parent: BlockId, refs: Tuple[BlockId, ...], creator: Creator) -> BlockId:
        while True:
            self._nonce += 1
            bid = block_digest(self.config.seed, parent, refs, creator.value, self._nonce)
            if bid not in self.universe:
                return bid

    def _register(self, b: Block, weight: int) -> None:
        self.weights.record(b.id, weight)
        self.universe.insert_block(b)
        self.gen_index[b.id] = len(self.gen_index)

    # -- delivery ---------------------------------------------------------

    def schedule(self, block: BlockId, node: int, at_round: int) -> None:
        """Plan delivery of an exposed block to a node; earlier plans win.

        Raises:
            DeadlineViolation: at_round is past first exposure plus d.
        """
        if block not in self.exposure:
            raise IllegalEventSequence(f"block {block:#x} is scheduled before exposure")
        deadline = self.deadline(block)
        if at_round > deadline:
            raise DeadlineViolation(f"block {block:#x} to node {node} at round {at_round}, deadline {deadline}")
        if block in self.nodes[node].graph:
            return
        key = (block, node)
        planned = self._planned.get(key)
        if planned is not None and planned <= at_round:
            return
        if planned is not None:
            self._due[planned][node].discard(block)
        self._planned[key] = at_round
        self._due.setdefault(at_round, {}).setdefault(node, set()).add(block)

    def schedule_everyone(self, block: BlockId, explicit: Optional[Dict[int, int]] = None) -> None:
        earliest = self.round + 1 if self.config.d > 0 else self.round
        for node in self.honest_nodes:
            at = (explicit or {}).get(node.index, self.deadline(block))
            self.schedule(block, node.index, max(at, earliest))

    def deliver_due(self, upto: int) -> None:
        """Deliver everything planned for rounds <= upto, node by node in digest order."""
        for r in sorted(x for x in self._due if x <= upto):
            per_node = self._due.pop(r)
            for idx in sorted(per_node):
                ids = per_node[idx]
                for bid in ids:
                    self._planned.pop((bid, idx), None)
                node = self.nodes[idx]
                if not node.honest:
                    continue
                node.receive(
                    (self.universe.block(b) for b in sorted(ids)),
                    validate=self.config.strict_validity,
                )

    def _expose(self, block: BlockId) -> None:
        self.exposure[block] = self.round
        self._arrivals.setdefault(self.round + self.config.d, []).append(block)

    def release(self, action: Release) -> None:
        """Expose a malicious block and its unreleased malicious ancestors."""
        if action.block not in self.malicious:
            raise IllegalEventSequence(f"only malicious blocks are released, got {action.block:#x}")
        if action.block not in self.withheld:
            return
        closure = self.universe.past_ids(action.block) & self.withheld
        for bid in sorted(closure | {action.block}, key=self.gen_index.__getitem__):
            self.withheld.discard(bid)
            self._expose(bid)
            self.emit(Event(round=self.round, block=bid, kind=EventKind.MRLS))
            targets = action.nodes or tuple(n.index for n in self.honest_nodes)
            for idx in targets:
                if self.nodes[idx].honest:
                    self.schedule(bid, idx, self.round)
            self.schedule_everyone(bid)

    def apply(self, actions: Iterable[AdversaryAction]) -> None:
        for action in actions:
            if isinstance(action, Release):
                self.release(action)
            elif isinstance(action, Deliver):
                at = self.round if action.at_round is None else max(action.at_round, self.round)
                targets = action.nodes or tuple(n.index for n in self.honest_nodes)
                for idx in targets:
                    self.schedule(action.block, idx, at)

    def emit_arrivals(self) -> None:
        """Arvl for blocks whose deadline is this round; every honest node must hold them."""
        due = self._arrivals.pop(self.round, [])
        for bid in sorted(due, key=self.gen_index.__getitem__):
            if self.config.admissibility_checks:
                for node in self.honest_nodes:
                    if bid not in node.graph:
                        raise AdmissibilityViolation(
                            f"node {node.index} lacks block {bid:#x} at round {self.round} (deadline passed)"
                        )
            self.emit(Event(round=self.round, block=bid, kind=EventKind.ARVL))

    # -- mining -----------------------------------------------------------

    def honest_template(self, graph: TreeGraph) -> Tuple[BlockId, Tuple[BlockId, ...]]:
        """Parent = pivot tip; refs = every other tip (none in the longest-chain mode)."""
        parent = graph.pivot().tip
        assert parent is not None
        if self.mode == ProtocolMode.NAKAMOTO_REF:
            return parent, ()
        return parent, tuple(t for t in graph.tips() if t != parent)

    def mine_honest(self, node: NodeState) -> Block:
        """Produce, insert and expose an honest block on the node's local graph."""
        parent, refs = self.honest_template(node.graph)
        strategy = adapt(node.graph, self.params) if self.adaptive else None
        bid = self._fresh_digest(parent, refs, Creator.HONEST)
        b = Block(id=bid, parent=parent, refs=refs, creator=Creator.HONEST, born_round=self.round, strategy=strategy)
        self._register(b, weight_for(strategy or StrategyBit.OPT, bid, self.params))
        node.graph.insert_block(b, validate=self.config.strict_validity)
        self.miner_of[bid] = node.index
        self._expose(bid)
        self.emit(Event(round=self.round, block=bid, kind=EventKind.HGEN_RLS))
        return b

    def mine_malicious(self, parent: BlockId, refs: Tuple[BlockId, ...]) -> Block:
        """Produce a withheld adversary block; its strategy is the one its declared past forces."""
        bid = self._fresh_digest(parent, refs, Creator.MALICIOUS)
        draft = Block(id=bid, parent=parent, refs=refs, creator=Creator.MALICIOUS, born_round=self.round)
        strategy: Optional[StrategyBit] = None
        if self.adaptive:
            strategy = validate_strategy(draft, past_view(self.universe, draft), self.params)
        b = draft.model_copy(update={"strategy": strategy})
        self._register(b, weight_for(strategy or StrategyBit.OPT, bid, self.params))
        self.malicious.add(bid)
        self.withheld.add(bid)
        self.emit(Event(round=self.round, block=bid, kind=EventKind.MGEN))
        return b

    # -- corruption -------------------------------------------------------

    def set_corrupted(self, corrupted: Set[int]) -> None:
        """Swap the corrupted set, keeping its size; newly honest nodes sync to every exposed block."""
        if len(corrupted) != len(self.corrupted):
            raise IllegalEventSequence("corruption must keep the budget of beta * m nodes")
        for node in self.nodes:
            was = node.honest
            node.honest = node.index not in corrupted
            if node.honest and not was:
                exposed = [self.universe.block(b) for b in self.exposure if b not in node.graph]
                node.receive(exposed)
        self.corrupted = set(corrupted)


class ConfirmationTracker:
    """Evaluates the confirmation rule on the reference node's pivot chain.

    A confirmed pivot block confirms every block of its past. The honest-block count
    is padded by an upper quantile of blocks mined in 2d rounds that the node may
    not have seen yet.
    """

    def __init__(self, cfg: ConfirmationConfig, config: SimConfig) -> None:
        self.cfg = cfg
        self.config = config
        self.confirmed_round: Dict[BlockId, int] = {}
        self.padding = expected_blocks_quantile(2 * config.d * config.m / config.protocol.eta_d)

    def on_round(self, world: World) -> None:
        if world.round % self.cfg.interval:
            return
        graph = world.reference_node.graph
        for b in graph.pivot().blocks:
            if b in self.confirmed_round:
                continue
            a = assess_block(graph, b, world.params, self.cfg, extra_honest=self.padding, adaptive=world.adaptive)
            if not a.confirmed:
                break
            for x in graph.past_ids(b) | {b}:
                self.confirmed_round.setdefault(x, world.round)
            logger.debug(f"Round {world.round}: confirmed pivot block {b:#x} at risk {a.risk:.2e}")


class SimulationResult(BaseModel):
    """Artifacts of one finished run."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    config: SimConfig
    rounds: int
    events: List[Event] = Field(default_factory=list)
    universe: TreeGraph
    reference: TreeGraph
    malicious: Set[BlockId] = Field(default_factory=set)
    exposure: Dict[BlockId, int] = Field(default_factory=dict)


class Simulator:
    """Drives a World through its rounds with one adversary.

    Attributes:
        world: The run state.
        adversary: The adversary.
        observers: Called after every round (metrics, confirmation tracking).
    """

    def __init__(
        self,
        config: SimConfig,
        adversary: BaseAdversary,
        observers: Optional[List[RoundObserver]] = None,
        listeners: Optional[List[EventListener]] = None,
    ) -> None:
        self.world = World(config)
        self.adversary = adversary
        self.observers: List[RoundObserver] = list(observers or [])
        self.world.listeners.extend(listeners or [])

    def run_round(self) -> World:
        """Phases 1 to 3 of one round.

        Raises:
            HorizonExceeded: The horizon has been reached.
        """
        w = self.world
        cfg = w.config
        if w.round >= cfg.horizon:
            raise HorizonExceeded(f"round {w.round} is past the horizon {cfg.horizon}")

        # Phase 1: corruption.
        if cfg.adaptive_corruption:
            chosen = self.adversary.corrupt(w)
            if chosen is not None:
                w.set_corrupted(chosen)

        # Phase 2: adversary-chosen deliveries, then everything due.
        w.apply(self.adversary.act(w))
        w.deliver_due(w.round)
        w.emit_arrivals()

        # Phase 3(a): one query per node; draws are taken for every node so the stream is layout-independent.
        draws = w.rng.random(cfg.m)
        p = 1.0 / cfg.protocol.eta_d
        for node in w.honest_nodes:
            if draws[node.index] < p:
                b = w.mine_honest(node)
                explicit = self.adversary.schedule_honest(w, b)
                w.schedule_everyone(b.id, {k: v for k, v in explicit.items() if k != node.index})

        # Phase 3(b): beta * m adversary queries; the template is re-read after every success.
        if w.corrupted:
            successes = int(w.rng.binomial(len(w.corrupted), p))
            for _ in range(successes):
                template = self.adversary.mining_template(w)
                b = w.mine_malicious(template.parent, template.refs)
                self.adversary.on_mined(w, b)

        # Zero-delay flush.
        if cfg.d == 0:
            w.deliver_due(w.round)
            w.emit_arrivals()

        for obs in self.observers:
            obs.on_round(w)
        w.round += 1
        return w

    def run(self, until: Optional[int] = None, on_round: Optional[Callable[[World], None]] = None) -> SimulationResult:
        """Run to the horizon (or `until`) and package the artifacts."""
        stop = min(until if until is not None else self.world.config.horizon, self.world.config.horizon)
        logger.info(
            f"Simulating {stop} rounds: m={self.world.config.m} beta={self.world.config.beta} "
            f"d={self.world.config.d} mode={self.world.mode.value}"
        )
        while self.world.round < stop:
            self.run_round()
            if on_round is not None:
                on_round(self.world)
        w = self.world
        logger.info(f"Finished: {len(w.universe)} blocks, {len(w.event_log)} events")
        return SimulationResult(
            config=w.config,
            rounds=w.round,
            events=list(w.event_log),
            universe=w.universe,
            reference=w.reference_node.graph,
            malicious=set(w.malicious),
            exposure=dict(w.exposure),
        )


def honest_step(world: World, node: NodeState, incoming: Iterable[Block], mine: bool) -> Optional[Block]:
    """Deliver blocks to an honest node and, on a successful query, mine on its view."""
    node.receive(incoming, validate=world.config.strict_validity)
    return world.mine_honest(node) if mine else None
