# Copyright (c) 2025 CoReason, Inc.
#
# This software is proprietary and dual-licensed.
# Licensed under the Prosperity Public License 3.0 (the "License").
# A copy of the license is available at https://prosperitylicense.com/versions/3.0.0
# For details, see the LICENSE file.
# Commercial use beyond a 30-day trial requires a separate license.
#
# Source Code: https://github.com/CoReason-AI/coreason_ghast

"""Tree-Graph block storage, GHOST pivot selection and total ordering."""

import heapq
from collections import deque
from typing import Dict, FrozenSet, Iterable, Iterator, List, Mapping, Optional, Set

from coreason_ghast.exceptions import (
    DuplicateId,
    EmptyGraph,
    GenesisHasNoSiblings,
    InvalidParent,
    MissingDependency,
    UnknownBlock,
)
from coreason_ghast.interfaces import BaseWeightFunction
from coreason_ghast.schemas import Block, BlockId, ChainView, ForkChoice
from coreason_ghast.utils.digest import below_ratio, timer_tag_value

_PAST_CACHE_SIZE = 256


class UnitWeight(BaseWeightFunction):
    """Every block weighs 1 (plain GHOST and longest-chain graphs)."""

    def weight(self, graph: "TreeGraph", block: Block) -> int:
        return 1


class TableWeight(BaseWeightFunction):
    """Weights already resolved elsewhere, shared by every graph of a run.

    Attributes:
        table: Block digest to weight.
        default: Weight for blocks missing from the table; None raises UnknownBlock.
    """

    def __init__(self, table: Optional[Mapping[BlockId, int]] = None, default: Optional[int] = None) -> None:
        self.table: Dict[BlockId, int] = table if isinstance(table, dict) else dict(table or {})
        self.default = default

    def record(self, block: BlockId, weight: int) -> None:
        self.table[block] = weight

    def weight(self, graph: "TreeGraph", block: Block) -> int:
        w = self.table.get(block.id, self.default)
        if w is None:
            raise UnknownBlock(f"no recorded weight for block {block.id:#x}")
        return w


class TreeGraph:
    """Append-only block DAG with parent-tree indexes and cached subtree weights.

    Blocks are inserted only after their parent and references, so the graph is
    always dependency-closed. Subtree weights and subtree heights are updated along
    the ancestor path on every insert; timer heights are computed from direct
    dependencies when `eta_t` is set.

    Attributes:
        weight_fn: Resolves a block's weight when it is inserted.
        fork_choice: GHOST (heaviest subtree) or longest chain.
        eta_t: Timer-block ratio; None disables timer tracking.
        validate: Default for parent-rule checking on insert.
    """

    def __init__(
        self,
        weight_fn: Optional[BaseWeightFunction] = None,
        fork_choice: ForkChoice = ForkChoice.GHOST,
        eta_t: Optional[int] = None,
        validate: bool = False,
    ) -> None:
        self.weight_fn: BaseWeightFunction = weight_fn or UnitWeight()
        self.fork_choice = fork_choice
        self.eta_t = eta_t
        self.validate = validate

        self._blocks: Dict[BlockId, Block] = {}
        self._seq: List[BlockId] = []
        self._children: Dict[BlockId, Set[BlockId]] = {}
        self._dependents: Dict[BlockId, int] = {}
        self._tips: Set[BlockId] = set()
        self._weight: Dict[BlockId, int] = {}
        self._subtree: Dict[BlockId, int] = {}
        self._height: Dict[BlockId, int] = {}
        self._reach: Dict[BlockId, int] = {}
        self._timer: Dict[BlockId, int] = {}
        self._max_timer = 0
        self._genesis: Optional[BlockId] = None
        self._pivot: Optional[ChainView] = None
        self._past_cache: Dict[BlockId, FrozenSet[BlockId]] = {}

    # -- membership -------------------------------------------------------

    def __contains__(self, block: object) -> bool:
        return block in self._blocks

    def __len__(self) -> int:
        return len(self._blocks)

    def __iter__(self) -> Iterator[BlockId]:
        return iter(self._seq)

    @property
    def genesis(self) -> Optional[BlockId]:
        return self._genesis

    @property
    def ids(self) -> FrozenSet[BlockId]:
        return frozenset(self._blocks)

    def block(self, b: BlockId) -> Block:
        try:
            return self._blocks[b]
        except KeyError:
            raise UnknownBlock(f"block {b:#x} is not in the graph") from None

    def _require(self, b: BlockId) -> None:
        if b not in self._blocks:
            raise UnknownBlock(f"block {b:#x} is not in the graph")

    # -- insertion --------------------------------------------------------

    def insert_block(self, b: Block, validate: Optional[bool] = None) -> "TreeGraph":
        """Insert a block whose dependencies are all present.

        Args:
            b: The block.
            validate: Check that the parent is the pivot tip of the block's past.
                Defaults to the graph's `validate` setting.

        Returns:
            TreeGraph: self, for chaining.

        Raises:
            DuplicateId: The digest is already present.
            MissingDependency: Parent or a reference is absent.
            InvalidParent: A second genesis, or the parent rule fails under validation.
        """
        if b.id in self._blocks:
            raise DuplicateId(f"block {b.id:#x} already inserted")
        if b.parent is None:
            if self._genesis is not None:
                raise InvalidParent(f"block {b.id:#x} has no parent but genesis already exists")
        else:
            for dep in b.deps:
                if dep not in self._blocks:
                    raise MissingDependency(f"block {b.id:#x} depends on absent block {dep:#x}")
            if self.validate if validate is None else validate:
                self._check_parent(b)

        w = self.weight_fn.weight(self, b)
        self._add(b, w)
        return self

    def _check_parent(self, b: Block) -> None:
        past = self.past_ids_of_deps(b.deps)
        view = self if len(past) == len(self._blocks) else self.subgraph(past)
        tip = view.pivot().tip
        if tip != b.parent:
            raise InvalidParent(f"block {b.id:#x} has parent {b.parent:#x}, pivot tip of its past is {tip:#x}")

    def _add(self, b: Block, w: int) -> None:
        bid = b.id
        self._blocks[bid] = b
        self._seq.append(bid)
        self._children[bid] = set()
        self._dependents[bid] = 0
        self._tips.add(bid)
        self._weight[bid] = w
        self._subtree[bid] = w
        self._pivot = None

        if b.parent is None:
            self._genesis = bid
            self._height[bid] = 0
        else:
            self._children[b.parent].add(bid)
            self._height[bid] = self._height[b.parent] + 1
            for dep in set(b.deps):
                self._dependents[dep] += 1
                self._tips.discard(dep)
        self._reach[bid] = self._height[bid]

        # Ancestor path: subtree weights and deepest descendant height.
        h = self._height[bid]
        cur = b.parent
        grow_reach = True
        while cur is not None and (w or grow_reach):
            if w:
                self._subtree[cur] += w
            if grow_reach:
                if self._reach[cur] < h:
                    self._reach[cur] = h
                else:
                    grow_reach = False
            cur = self._blocks[cur].parent

        if self.eta_t is not None:
            past_max = max((self._timer[dep] for dep in b.deps), default=0)
            th = past_max + 1 if (b.parent is not None and self.is_timer(bid)) else past_max
            self._timer[bid] = th
            if th > self._max_timer:
                self._max_timer = th

    # -- parent tree ------------------------------------------------------

    def weight(self, b: BlockId) -> int:
        self._require(b)
        return self._weight[b]

    def weights(self) -> Dict[BlockId, int]:
        return dict(self._weight)

    def height(self, b: BlockId) -> int:
        self._require(b)
        return self._height[b]

    def all_children(self, b: BlockId) -> Set[BlockId]:
        self._require(b)
        return set(self._children[b])

    def children(self, b: BlockId) -> Set[BlockId]:
        """Children of b with positive weight."""
        self._require(b)
        return {c for c in self._children[b] if self._weight[c] > 0}

    def subtree_weight(self, b: BlockId) -> int:
        """Total weight of blocks whose chain contains b."""
        self._require(b)
        return self._subtree[b]

    def subtree_reach(self, b: BlockId) -> int:
        """Height of the deepest block in b's subtree."""
        self._require(b)
        return self._reach[b]

    def _rank(self, c: BlockId) -> int:
        return self._reach[c] if self.fork_choice == ForkChoice.LONGEST else self._subtree[c]

    def best_child(self, b: BlockId) -> Optional[BlockId]:
        """Child with maximum subtree weight; ties go to the minimum digest."""
        best: Optional[BlockId] = None
        best_rank = -1
        for c in self.children(b):
            r = self._rank(c)
            if r > best_rank or (r == best_rank and best is not None and c < best):
                best, best_rank = c, r
        return best

    def pivot(self) -> ChainView:
        """Pivot chain from genesis, following best children until none remain."""
        if self._genesis is None:
            raise EmptyGraph("pivot of an empty graph")
        if self._pivot is None:
            chain = [self._genesis]
            nxt = self.best_child(self._genesis)
            while nxt is not None:
                chain.append(nxt)
                nxt = self.best_child(nxt)
            self._pivot = ChainView(blocks=tuple(chain))
        return self._pivot

    def sib_subtree_weight(self, b: BlockId) -> int:
        """Max subtree weight among positive-weight siblings of b, 0 if none."""
        parent = self.block(b).parent
        if parent is None:
            raise GenesisHasNoSiblings("genesis has no siblings")
        return max((self._subtree[c] for c in self.children(parent) if c != b), default=0)

    def chain_of(self, b: BlockId) -> ChainView:
        """Blocks from genesis to b along parent edges."""
        self._require(b)
        chain: List[BlockId] = []
        cur: Optional[BlockId] = b
        while cur is not None:
            chain.append(cur)
            cur = self._blocks[cur].parent
        chain.reverse()
        return ChainView(blocks=tuple(chain))

    def is_ancestor(self, a: BlockId, b: BlockId) -> bool:
        """True iff a lies on chain_of(b); a block is its own ancestor."""
        if a not in self._blocks or b not in self._blocks:
            return False
        target = self._height[a]
        cur: Optional[BlockId] = b
        while cur is not None and self._height[cur] > target:
            cur = self._blocks[cur].parent
        return cur == a

    # -- tips and past ----------------------------------------------------

    def tips(self) -> List[BlockId]:
        """Blocks no other block depends on, ascending by digest."""
        return sorted(self._tips)

    def past_ids_of_deps(self, deps: Iterable[BlockId]) -> FrozenSet[BlockId]:
        """Dependency closure of the given blocks, including them."""
        seen: Set[BlockId] = set()
        queue = deque(d for d in deps)
        while queue:
            x = queue.popleft()
            if x in seen:
                continue
            if x not in self._blocks:
                raise MissingDependency(f"block {x:#x} is not in the graph")
            seen.add(x)
            queue.extend(d for d in self._blocks[x].deps if d not in seen)
        return frozenset(seen)

    def past_ids(self, b: BlockId) -> FrozenSet[BlockId]:
        """Transitive closure of parent and reference edges from b, excluding b."""
        cached = self._past_cache.get(b)
        if cached is not None:
            return cached
        ids = self.past_ids_of_deps(self.block(b).deps)
        if len(self._past_cache) >= _PAST_CACHE_SIZE:
            self._past_cache.pop(next(iter(self._past_cache)))
        self._past_cache[b] = ids
        return ids

    def past(self, b: BlockId) -> "TreeGraph":
        """Past graph of b, built over the same Block records."""
        return self.subgraph(self.past_ids(b))

    def subgraph(self, ids: Iterable[BlockId]) -> "TreeGraph":
        """New graph over a dependency-closed subset, keeping this graph's resolved weights.

        Block records are shared; the indexes and caches are rebuilt, so later inserts
        into either graph do not affect the other.

        Raises:
            MissingDependency: The subset is not dependency-closed.
            UnknownBlock: Some requested blocks are not in this graph.
        """
        keep = set(ids)
        view = TreeGraph(
            weight_fn=TableWeight(self._weight),
            fork_choice=self.fork_choice,
            eta_t=self.eta_t,
        )
        for bid in self._seq:
            if bid in keep:
                view.insert_block(self._blocks[bid], validate=False)
        if len(view) != len(keep):
            missing = keep - set(view._blocks)
            raise UnknownBlock(f"{len(missing)} requested blocks are not in the graph")
        return view

    # -- timer chain ------------------------------------------------------

    def is_timer(self, b: BlockId) -> bool:
        if self.eta_t is None or b == self._genesis:
            return False
        return below_ratio(timer_tag_value(b), self.eta_t)

    def timer_height(self, b: BlockId) -> int:
        """Timer height of a timer block; max timer height in the past otherwise."""
        self._require(b)
        return self._timer.get(b, 0)

    @property
    def max_timer_height(self) -> int:
        return self._max_timer

    # -- ordering ---------------------------------------------------------

    def _topo_sort(self, subset: Set[BlockId]) -> List[BlockId]:
        indeg: Dict[BlockId, int] = {x: 0 for x in subset}
        dependents: Dict[BlockId, List[BlockId]] = {x: [] for x in subset}
        for x in subset:
            for dep in set(self._blocks[x].deps):
                if dep in subset:
                    indeg[x] += 1
                    dependents[dep].append(x)
        ready = [x for x, n in indeg.items() if n == 0]
        heapq.heapify(ready)
        out: List[BlockId] = []
        while ready:
            x = heapq.heappop(ready)
            out.append(x)
            for y in dependents[x]:
                indeg[y] -= 1
                if indeg[y] == 0:
                    heapq.heappush(ready, y)
        return out

    def order(self) -> List[BlockId]:
        """Total order: walk the pivot chain, emitting each pivot block after the new part of its past."""
        if self._genesis is None:
            return []
        emitted: Set[BlockId] = set()
        out: List[BlockId] = []
        for p in self.pivot().blocks:
            fresh: Set[BlockId] = set()
            stack = [d for d in self._blocks[p].deps if d not in emitted]
            while stack:
                x = stack.pop()
                if x in fresh or x in emitted:
                    continue
                fresh.add(x)
                stack.extend(d for d in self._blocks[x].deps if d not in emitted and d not in fresh)
            batch = self._topo_sort(fresh)
            out.extend(batch)
            emitted.update(batch)
            out.append(p)
            emitted.add(p)
        return out

    # -- consistency ------------------------------------------------------

    def recompute_subtree_weights(self) -> Dict[BlockId, int]:
        """Subtree weights from scratch, children before parents."""
        total = dict(self._weight)
        for bid in reversed(self._seq):
            parent = self._blocks[bid].parent
            if parent is not None:
                total[parent] += total[bid]
        return total

    def caches_consistent(self) -> bool:
        return self.recompute_subtree_weights() == self._subtree


def build_graph(
    blocks: Iterable[Block],
    weight_fn: Optional[BaseWeightFunction] = None,
    fork_choice: ForkChoice = ForkChoice.GHOST,
    eta_t: Optional[int] = None,
) -> TreeGraph:
    """Graph from blocks listed in dependency order."""
    g = TreeGraph(weight_fn=weight_fn, fork_choice=fork_choice, eta_t=eta_t)
    for b in blocks:
        g.insert_block(b)
    return g
