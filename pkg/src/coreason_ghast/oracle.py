# Copyright (c) 2025 CoReason, Inc.
#
# This software is proprietary and dual-licensed.
# Licensed under the Prosperity Public License 3.0 (the "License").
# A copy of the license is available at https://prosperitylicense.com/versions/3.0.0
# For details, see the LICENSE file.
# Commercial use beyond a 30-day trial requires a separate license.
#
# Source Code: https://github.com/CoReason-AI/coreason_ghast

"""Adversary-state bookkeeping and per-event assertions of the structural and potential bounds.

The oracle observes an event stream. It never feeds back into the run, so enabling
it leaves the trace unchanged.
"""

from typing import TYPE_CHECKING, Any, Callable, Dict, FrozenSet, List, Optional, Set, Tuple

from coreason_ghast.config import ProtocolParams
from coreason_ghast.exceptions import IllegalEventSequence, UnknownBlock
from coreason_ghast.schemas import (
    AssertionReport,
    Block,
    BlockId,
    ChainView,
    Event,
    EventKind,
    PotentialBreakdown,
    Violation,
)
from coreason_ghast.treegraph import TableWeight, TreeGraph
from coreason_ghast.utils.digest import GENESIS_ID
from coreason_ghast.utils.logger import logger

if TYPE_CHECKING:  # pragma: no cover
    from coreason_ghast.harness import World

_TOL = 1e-9

BlockLookup = Callable[[BlockId], Block]


class AdversaryState:
    """Generated, released and fully-arrived graphs plus the flag, chain C, S and v.

    Attributes:
        params: Protocol parameters (eta_w and eta_b are used).
        s_m: Malicious in-transit threshold.
        s_h: Honest in-transit threshold.
        g_gen: Every generated block.
        g_max: Every released block.
        g_min: Every block whose arrival deadline has passed.
        delta: g_max minus g_min.
        m_set: Malicious blocks.
        flag: Flag block or None.
        chain_c: Common-chain variant.
        s_set: Malicious in-transit blocks already charged to v.
        v: Special-status accumulator.
        multi_positive: Blocks seen with more than one positive-margin child at the last rebuild.
    """

    def __init__(
        self,
        params: ProtocolParams,
        s_m: float,
        s_h: float,
        lookup: BlockLookup,
        weights: TableWeight,
        genesis: Block,
    ) -> None:
        self.params = params
        self.s_m = s_m
        self.s_h = s_h
        self.lookup = lookup
        self.weights = weights
        self.g_gen = self._graph(genesis)
        self.g_max = self._graph(genesis)
        self.g_min = self._graph(genesis)
        self.delta: Set[BlockId] = set()
        self.m_set: Set[BlockId] = set()
        self.flag: Optional[BlockId] = None
        self.chain_c = ChainView(blocks=(genesis.id,))
        self.s_set: Set[BlockId] = set()
        self.v = 0.0
        self.multi_positive: List[BlockId] = []
        self._flag_line: Tuple[Optional[BlockId], FrozenSet[BlockId]] = (None, frozenset())
        self._prefix_memo: Optional[Tuple[FrozenSet[BlockId], Tuple[BlockId, ...], int]] = None

    def _graph(self, genesis: Block) -> TreeGraph:
        g = TreeGraph(weight_fn=self.weights, eta_t=self.params.eta_t)
        g.insert_block(genesis)
        return g

    def weight(self, b: BlockId) -> int:
        return self.weights.table[b]

    def flag_below(self, b: BlockId) -> bool:
        """Whether the flag block lies in the subtree of b."""
        if self.flag is None:
            return False
        if self._flag_line[0] != self.flag:
            self._flag_line = (self.flag, self.g_gen.chain_of(self.flag).members)
        return b in self._flag_line[1]

    def is_honest(self, b: BlockId) -> bool:
        return b not in self.m_set

    @property
    def heavy(self) -> int:
        return self.params.eta_w

    @property
    def tip(self) -> BlockId:
        tip = self.chain_c.tip
        assert tip is not None
        return tip

    def in_transit_under(self, c: BlockId) -> Set[BlockId]:
        """SubT(G_max minus G_min, c)."""
        return {x for x in self.delta if self.g_gen.is_ancestor(c, x)}

    def honest_in_transit(self, weight: int) -> int:
        return sum(1 for x in self.delta if x not in self.m_set and self.weight(x) == weight)


def spe(st: AdversaryState, params: Optional[ProtocolParams] = None) -> bool:
    """Special status: enough malicious weight under the chain-C tip or enough honest blocks in transit."""
    heavy = (params or st.params).eta_w
    malicious = sum(st.weight(x) for x in st.in_transit_under(st.tip) if x in st.m_set)
    if malicious >= st.s_m:
        return True
    light = heavy_count = 0
    for x in st.delta:
        if x in st.m_set:
            continue
        w = st.weight(x)
        if w == 1:
            light += 1
        if w == heavy:
            heavy_count += 1
    return light >= st.s_h or heavy_count >= 3


def adv_margin(st: AdversaryState, b: BlockId) -> int:
    """SubTW(G_min plus the flag, b) minus SibSubTW(G_max, b).

    Raises:
        UnknownBlock: b is not released or is genesis.
    """
    if b not in st.g_max:
        raise UnknownBlock(f"block {b:#x} is not released")
    if b == GENESIS_ID:
        raise UnknownBlock("genesis has no margin")
    own = st.g_min.subtree_weight(b) if b in st.g_min else 0
    if st.flag_below(b):
        own += st.weight(st.flag)
    return own - st.g_max.sib_subtree_weight(b)


def _rebuild_chain(st: AdversaryState) -> ChainView:
    old_tip = st.tip
    chain = [GENESIS_ID]
    st.multi_positive = []
    cutoff = st.s_m + st.s_h
    cur = GENESIS_ID
    while True:
        positive = [(adv_margin(st, c), c) for c in st.g_max.children(cur)]
        positive = [(a, c) for a, c in positive if a > 0]
        if not positive:
            break
        if len(positive) > 1:
            st.multi_positive.append(cur)
        margin, nxt = max(positive, key=lambda t: (t[0], -t[1]))
        if margin <= cutoff and nxt != old_tip and st.g_gen.is_ancestor(old_tip, nxt):
            break
        chain.append(nxt)
        cur = nxt
    return ChainView(blocks=tuple(chain))


def apply_event(st: AdversaryState, e: Event, params: Optional[ProtocolParams] = None) -> AdversaryState:
    """Advance the state by one event, in place.

    Graph sets first, then the flag (judged on the pre-event special status), then
    chain C, then S and v.

    Raises:
        IllegalEventSequence: The event is inconsistent with the state.
    """
    heavy = (params or st.params).eta_w
    b = e.block
    pre_spe = spe(st)
    pre_heavy_honest = st.honest_in_transit(heavy)

    if e.kind == EventKind.HGEN_RLS:
        if b in st.g_gen:
            raise IllegalEventSequence(f"hGenRls of known block {b:#x}")
        blk = st.lookup(b)
        st.g_gen.insert_block(blk)
        st.g_max.insert_block(blk)
        st.delta.add(b)
    elif e.kind == EventKind.MGEN:
        if b in st.g_gen:
            raise IllegalEventSequence(f"mGen of known block {b:#x}")
        st.g_gen.insert_block(st.lookup(b))
        st.m_set.add(b)
    elif e.kind == EventKind.MRLS:
        if b not in st.m_set or b in st.g_max:
            raise IllegalEventSequence(f"mRls of block {b:#x} that is not a withheld malicious block")
        st.g_max.insert_block(st.g_gen.block(b))
        st.delta.add(b)
    elif e.kind == EventKind.ARVL:
        if b not in st.g_max or b in st.g_min:
            raise IllegalEventSequence(f"Arvl of block {b:#x} that is not in transit")
        st.g_min.insert_block(st.g_gen.block(b))
        st.delta.discard(b)

    # Flag rules.
    is_heavy_honest_gen = e.kind == EventKind.HGEN_RLS and st.weight(b) == heavy
    if is_heavy_honest_gen and not pre_spe and pre_heavy_honest == 0:
        st.flag = b
    elif is_heavy_honest_gen and st.flag is not None:
        st.flag = None
    elif e.kind == EventKind.ARVL and b == st.flag:
        st.flag = None

    st.chain_c = _rebuild_chain(st)

    added = {x for x in st.in_transit_under(st.tip) if x in st.m_set} - st.s_set
    st.s_set |= added
    st.v += min(st.s_m, float(sum(st.weight(x) for x in added)))
    return st


def _old_in_min(st: AdversaryState, b: BlockId, min_max_timer: Optional[int] = None) -> bool:
    th = st.g_max.timer_height(b) if b in st.g_max else st.g_gen.timer_height(b)
    top = st.g_min.max_timer_height if min_max_timer is None else min_max_timer
    return top - th >= st.params.eta_b


def potential(st: AdversaryState, b: BlockId, params: Optional[ProtocolParams] = None) -> PotentialBreakdown:
    """Block potential: withheld weight, volatility of the next chain-C block and special-status cost.

    Undefined unless b is on chain C and old in G_min.
    """
    if b not in st.chain_c or not _old_in_min(st, b):
        return PotentialBreakdown()
    p_with = float(st.g_gen.subtree_weight(b) - st.g_max.subtree_weight(b))
    c = st.chain_c.next_of(b)
    p_adv = p_sp = 0.0
    if c is not None:
        under = st.in_transit_under(c)
        honest_light = sum(1 for x in under if x not in st.m_set and st.weight(x) == 1)
        p_adv = st.s_h + st.s_m - adv_margin(st, c) - min(float(honest_light), st.s_h)
        p_sp = float(sum(st.weight(x) for x in under if x in st.m_set and x not in st.s_set))
    return PotentialBreakdown(p_with=p_with, p_adv=p_adv, p_sp=p_sp, total=p_with + p_adv + p_sp)


def chain_potentials(
    st: AdversaryState, window: Optional[int] = None, min_max_timer: Optional[int] = None
) -> Dict[BlockId, PotentialBreakdown]:
    """Potentials of chain-C blocks (the last `window` of them), computed in one pass.

    Each in-transit block is anchored at its deepest chain-C ancestor; subtree sums
    along the chain are then suffix sums over anchors.
    """
    blocks = st.chain_c.blocks
    pos = st.chain_c.positions
    n = len(blocks)
    light = [0] * (n + 1)
    unpaid = [0] * (n + 1)
    for x in st.delta:
        cur: Optional[BlockId] = x
        while cur is not None and cur not in pos:
            cur = st.g_gen.block(cur).parent
        if cur is None:  # pragma: no cover
            continue
        i = pos[cur]
        if x in st.m_set:
            if x not in st.s_set:
                unpaid[i] += st.weight(x)
        elif st.weight(x) == 1:
            light[i] += 1
    for i in range(n - 1, -1, -1):
        light[i] += light[i + 1]
        unpaid[i] += unpaid[i + 1]

    start = 0 if window is None else max(0, n - window)
    out: Dict[BlockId, PotentialBreakdown] = {}
    for i in range(start, n):
        b = blocks[i]
        if not _old_in_min(st, b, min_max_timer):
            out[b] = PotentialBreakdown()
            continue
        p_with = float(st.g_gen.subtree_weight(b) - st.g_max.subtree_weight(b))
        p_adv = p_sp = 0.0
        if i + 1 < n:
            c = blocks[i + 1]
            p_adv = st.s_h + st.s_m - adv_margin(st, c) - min(float(light[i + 1]), st.s_h)
            p_sp = float(unpaid[i + 1])
        out[b] = PotentialBreakdown(p_with=p_with, p_adv=p_adv, p_sp=p_sp, total=p_with + p_adv + p_sp)
    return out


def _reference_prefix(st: AdversaryState, g_ref: FrozenSet[BlockId]) -> int:
    """Length of the chain-C prefix whose pasts do not contain g_ref.

    Pasts grow along a parent chain, so containment is monotone and the cut is found by bisection.
    """
    blocks = st.chain_c.blocks
    memo = st._prefix_memo
    if memo is not None and memo[0] is g_ref and memo[1] == blocks:
        return memo[2]
    lo, hi = 0, len(blocks)
    while lo < hi:
        mid = (lo + hi) // 2
        if g_ref <= st.g_gen.past_ids(blocks[mid]):
            hi = mid
        else:
            lo = mid + 1
    st._prefix_memo = (g_ref, blocks, lo)
    return lo


def global_potential(
    st: AdversaryState,
    g_ref: FrozenSet[BlockId],
    params: Optional[ProtocolParams] = None,
    potentials: Optional[Dict[BlockId, PotentialBreakdown]] = None,
) -> float:
    """Max defined potential over chain-C blocks whose past misses part of g_ref; 0 when none."""
    k = _reference_prefix(st, g_ref)
    pots = potentials if potentials is not None else chain_potentials(st)
    values = [pots[b].total for b in st.chain_c.blocks[:k] if b in pots and pots[b].total is not None]
    return max((v for v in values if v is not None), default=0.0)


def event_value(st: AdversaryState, e: Event, params: Optional[ProtocolParams] = None) -> float:
    """Event value of e against the pre-event state."""
    heavy = (params or st.params).eta_w
    if e.kind in (EventKind.MRLS, EventKind.ARVL):
        return 0.0
    w = st.weight(e.block)
    if e.kind == EventKind.MGEN:
        return float(w)
    if w == 0:
        return 0.0
    special = spe(st)
    if w == 1:
        return 0.0 if special else -1.0
    if st.honest_in_transit(heavy) == 0:
        return 0.0 if special else 2 * st.s_h + 2 * st.s_m - heavy
    return 0.0 if st.flag is None else heavy + st.s_m


def event_value_components(
    st: AdversaryState, e: Event, params: Optional[ProtocolParams] = None
) -> Tuple[float, float, float, float]:
    """(malicious, honest, flag, triple) components whose sum bounds the event value."""
    heavy = (params or st.params).eta_w
    if e.kind == EventKind.MGEN:
        return float(st.weight(e.block)), 0.0, 0.0, 0.0
    if e.kind != EventKind.HGEN_RLS:
        return 0.0, 0.0, 0.0, 0.0
    w = st.weight(e.block)
    d_h = 0.0 if spe(st) else -(heavy - 2 * st.s_h - 2 * st.s_m) / heavy * w
    d_f = d_t = 0.0
    if w == heavy:
        in_transit = st.honest_in_transit(heavy)
        if in_transit >= 1:
            d_f = 2 * heavy - 2 * st.s_h - st.s_m
        if in_transit >= 2:
            d_t = -st.s_m
    return 0.0, d_h, d_f, d_t


class Oracle:
    """Event listener asserting the structural claims and potential step bounds.

    The reference graph for the global potential is G_min as of the first event of
    the current round.

    Attributes:
        state: The adversary state.
        report: Accumulated assertion report.
        window: Optional chain-C suffix length for potential checks.
        containment_interval: Rounds between local-graph containment scans.
    """

    def __init__(
        self,
        state: AdversaryState,
        window: Optional[int] = None,
        containment_interval: int = 1,
        honest_graphs: Optional[Callable[[], List[Tuple[int, TreeGraph]]]] = None,
    ) -> None:
        self.state = state
        self.report = AssertionReport()
        self.window = window
        self.containment_interval = containment_interval
        self.honest_graphs = honest_graphs
        self._ref: FrozenSet[BlockId] = frozenset({GENESIS_ID})
        self._ref_round = -1
        self._last_scan = -1

    @classmethod
    def for_world(cls, world: "World", s_m: float, s_h: float, **kwargs: Any) -> "Oracle":
        """Oracle wired to a run: shared weights, block lookup and the live honest graphs."""
        st = AdversaryState(world.params, s_m, s_h, world.universe.block, world.weights, world.genesis)
        return cls(st, honest_graphs=lambda: [(n.index, n.graph) for n in world.honest_nodes], **kwargs)

    def _fail(self, name: str, detail: str) -> None:
        idx = self.report.events_checked
        self.report.violations.append(Violation(event_index=idx, invariant_name=name, detail=detail))
        logger.warning(f"Oracle: {name} failed at event {idx}: {detail}")

    def on_event(self, world: object, e: Event) -> None:
        self.check(e)

    def check(self, e: Event) -> None:
        """Apply one event and assert every per-event property."""
        st = self.state
        if e.round != self._ref_round:
            self._ref = st.g_min.ids
            self._ref_round = e.round

        # Pre-event snapshot.
        pre_chain = st.chain_c
        pre_tip = st.tip
        pre_v = st.v
        pre_s = set(st.s_set)
        pre_min_timer = st.g_min.max_timer_height
        pre_pots = chain_potentials(st, self.window)
        pre_global = global_potential(st, self._ref, potentials=pre_pots)
        delta_value = event_value(st, e)
        comps = event_value_components(st, e)

        apply_event(st, e)

        if delta_value > sum(comps) + _TOL:
            self._fail("event_value_decomposition", f"{delta_value} > {comps}")
        self._check_sets(e)
        self._check_flag()
        self._check_chain(pre_chain, pre_tip)
        self._check_special(pre_s, pre_v)

        post_pots = chain_potentials(st, self.window)
        tip_before = pre_pots.get(pre_tip)
        for b, now in post_pots.items():
            if now.total is None:
                continue
            before = pre_pots.get(b)
            if before is None and b in pre_chain:
                continue  # outside the window
            if before is not None and before.total is not None:
                if (now.total + st.v) - (before.total + pre_v) > delta_value + _TOL:
                    self._fail("potential_step", f"block {b:#x}: {before.total} -> {now.total}, v {pre_v} -> {st.v}")
            elif tip_before is not None and tip_before.total is not None and _old_in_min(st, b, pre_min_timer):
                if (now.total + st.v) - (tip_before.total + pre_v) > delta_value + _TOL:
                    self._fail("potential_entry_step", f"block {b:#x} entered at {now.total}")

        post_global = global_potential(st, self._ref, potentials=post_pots)
        if self._global_side_condition(post_pots, post_global, pre_min_timer):
            if (post_global + st.v) - (pre_global + pre_v) > delta_value + _TOL:
                self._fail("global_potential_step", f"{pre_global} -> {post_global}, event value {delta_value}")
        else:
            self.report.global_side_condition_skips += 1

        if self.honest_graphs is not None and e.round - self._last_scan >= self.containment_interval:
            self._last_scan = e.round
            self._check_containment()
        self.report.events_checked += 1

    def _global_side_condition(
        self, pots: Dict[BlockId, PotentialBreakdown], post_global: float, pre_min_timer: int
    ) -> bool:
        st = self.state
        if not _old_in_min(st, GENESIS_ID, pre_min_timer):
            return False
        k = _reference_prefix(st, self._ref)
        for b in st.chain_c.blocks[:k]:
            p = pots.get(b)
            if p is None or p.total is None:
                continue
            if not _old_in_min(st, b, pre_min_timer) and abs(p.total - post_global) <= _TOL:
                return False
        return True

    def _check_sets(self, e: Event) -> None:
        st = self.state
        if len(st.g_min) > len(st.g_max) or len(st.g_max) > len(st.g_gen):
            self._fail("containment", "graph sizes out of order")
            return
        if e.kind == EventKind.ARVL and e.block not in st.g_max:  # pragma: no cover
            self._fail("containment", f"arrived block {e.block:#x} missing from G_max")

    def _check_containment(self) -> None:
        st = self.state
        min_ids, max_ids = st.g_min.ids, st.g_max.ids
        if not max_ids <= st.g_gen.ids:
            self._fail("containment", "G_max not inside G_gen")
        for idx, g in self.honest_graphs() if self.honest_graphs else []:
            ids = g.ids
            if not min_ids <= ids:
                self._fail("containment", f"node {idx} misses {len(min_ids - ids)} arrived blocks")
            if not ids <= max_ids:
                self._fail("containment", f"node {idx} holds {len(ids - max_ids)} unreleased blocks")

    def _check_flag(self) -> None:
        st = self.state
        f = st.flag
        if f is None:
            return
        if f in st.m_set or f not in st.delta or st.weight(f) != st.heavy:
            self._fail("flag_block", f"flag {f:#x} is not an honest heavy in-transit block")

    def _check_chain(self, pre_chain: ChainView, pre_tip: BlockId) -> None:
        st = self.state
        chain = st.chain_c
        if not (pre_chain.is_prefix_of(chain) or chain.is_prefix_of(pre_chain)):
            self._fail("chain_evolution", "chain C is neither a prefix nor an extension of its predecessor")
        for b in st.multi_positive:
            self._fail("single_positive_child", f"block {b:#x} has several children with positive margin")
        cutoff = st.s_m + st.s_h
        for b in chain.blocks[1:]:
            margin = adv_margin(st, b)
            if margin <= 0:
                self._fail("chain_margin", f"block {b:#x} has margin {margin}")
            elif b != pre_tip and st.g_gen.is_ancestor(pre_tip, b) and margin <= cutoff:
                self._fail("chain_margin", f"new block {b:#x} has margin {margin} <= {cutoff}")
        for c in st.g_max.children(st.tip):
            margin = adv_margin(st, c)
            if margin > cutoff:
                self._fail("chain_tip_children", f"child {c:#x} of the tip has margin {margin}")
            elif st.g_gen.is_ancestor(c, pre_tip) and margin > 0:
                self._fail("chain_tip_children", f"child {c:#x} on the old chain has margin {margin}")

    def _check_special(self, pre_s: Set[BlockId], pre_v: float) -> None:
        st = self.state
        if not pre_s <= st.s_set:
            self._fail("special_set", "S shrank")
        step = st.v - pre_v
        if step < -_TOL or step > st.s_m + _TOL:
            self._fail("special_value", f"v moved by {step}")
        added_weight = sum(st.weight(x) for x in st.s_set - pre_s)
        if step > added_weight + _TOL:
            self._fail("special_value", f"v moved by {step} > new weight {added_weight}")
        t_m = {x for x in st.in_transit_under(st.tip) if x in st.m_set}
        if not (st.s_set - pre_s) <= t_m or not t_m <= st.s_set:
            self._fail("special_set", "S update is not T intersect M")
