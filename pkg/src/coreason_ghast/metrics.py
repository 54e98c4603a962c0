# Copyright (c) 2025 CoReason, Inc.
#
# This software is proprietary and dual-licensed.
# Licensed under the Prosperity Public License 3.0 (the "License").
# A copy of the license is available at https://prosperitylicense.com/versions/3.0.0
# For details, see the LICENSE file.
# Commercial use beyond a 30-day trial requires a separate license.
#
# Source Code: https://github.com/CoReason-AI/coreason_ghast

"""Per-run metrics: exposure and confirmation rounds, pivot membership, reorgs and adapt spans."""

from typing import Any, Dict, FrozenSet, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from coreason_ghast.harness import ConfirmationTracker, World
from coreason_ghast.rules import adapt
from coreason_ghast.schemas import BlockId, ChainView, Creator, StrategyBit
from coreason_ghast.utils.formats import PivotSpan, format_timeline


class BlockRecord(BaseModel):
    """Per-block metrics row.

    Attributes:
        block: Digest.
        creator: Honest or malicious.
        born_round: Generation round.
        exposure_round: First honest exposure, None while withheld.
        confirmed_round: Round the reference node confirmed it, if ever.
        pivot_timeline: Rounds it spent on the reference pivot chain as (entered, left) pairs;
            `left` is the first round it was off again, None while still on.
        on_pivot: Membership in the final reference pivot chain.
    """

    model_config = ConfigDict(frozen=True)

    block: BlockId
    creator: Creator
    born_round: int
    exposure_round: Optional[int] = None
    confirmed_round: Optional[int] = None
    pivot_timeline: List[PivotSpan] = Field(default_factory=list)
    on_pivot: bool = False

    @property
    def pivot_entered(self) -> Optional[int]:
        return self.pivot_timeline[0][0] if self.pivot_timeline else None

    def as_row(self) -> Dict[str, Any]:
        """Flat CSV row; the timeline is written as `entered-left` spans joined by `;`."""
        row = self.model_dump(mode="json")
        row["pivot_timeline"] = format_timeline(self.pivot_timeline)
        return row


class MetricsRecord(BaseModel):
    """Everything measured in one run."""

    model_config = ConfigDict(frozen=True)

    seed: int = 0
    rounds: int = 0
    honest_blocks: int = 0
    malicious_blocks: int = 0
    released_malicious: int = 0
    malicious_on_pivot: int = 0
    pivot_length: int = 0
    confirmed_blocks: int = 0
    latency_p50: Optional[float] = None
    latency_p95: Optional[float] = None
    latency_max: Optional[int] = None
    reorg_events: int = 0
    max_reorg_depth: int = 0
    reorg_histogram: List[Tuple[int, int]] = Field(default_factory=list)
    con_rounds: int = 0
    adapt_spans: List[Tuple[int, int]] = Field(default_factory=list)
    blocks: List[BlockRecord] = Field(default_factory=list)

    @property
    def reorg_rate(self) -> float:
        return self.reorg_events / self.rounds if self.rounds else 0.0

    @property
    def adapt_fraction(self) -> float:
        return self.con_rounds / self.rounds if self.rounds else 0.0


class AggregateRow(BaseModel):
    """One sweep row."""

    model_config = ConfigDict(frozen=True)

    axis: str
    value: float
    seed: int
    rounds: int
    latency_p50: Optional[float] = None
    latency_p95: Optional[float] = None
    reorg_rate: float = 0.0
    adapt_fraction: float = 0.0
    confirmed_blocks: int = 0
    violations: Optional[int] = None


def _reorg_depth(before: ChainView, after: ChainView) -> int:
    """Blocks of `before` that are no longer on `after`; 0 for an extension."""
    if before.is_prefix_of(after):
        return 0
    common = 0
    for a, b in zip(before.blocks, after.blocks, strict=False):
        if a != b:
            break
        common += 1
    return len(before) - common


class MetricsCollector:
    """Round observer recording reference-pivot membership, reorgs on every honest node and adapt spans."""

    def __init__(self) -> None:
        self.timeline: Dict[BlockId, List[PivotSpan]] = {}
        self.reorgs: Dict[int, int] = {}
        self.con_rounds: List[int] = []
        self._last: Dict[int, ChainView] = {}
        self._ref_members: FrozenSet[BlockId] = frozenset()

    def on_round(self, world: World) -> None:
        for node in world.honest_nodes:
            now = node.graph.pivot()
            before = self._last.get(node.index)
            if before is not None and before is not now:
                depth = _reorg_depth(before, now)
                if depth:
                    self.reorgs[depth] = self.reorgs.get(depth, 0) + 1
            self._last[node.index] = now

        ref = world.reference_node.graph
        members = ref.pivot().members
        for b in members - self._ref_members:
            self.timeline.setdefault(b, []).append((world.round, None))
        for b in self._ref_members - members:
            spans = self.timeline[b]
            spans[-1] = (spans[-1][0], world.round)
        self._ref_members = members

        if world.adaptive and adapt(ref, world.params) == StrategyBit.CON:
            self.con_rounds.append(world.round)


def _spans(rounds: List[int]) -> List[Tuple[int, int]]:
    """Maximal runs of consecutive rounds as inclusive (start, end) pairs."""
    spans: List[Tuple[int, int]] = []
    for r in rounds:
        if spans and spans[-1][1] == r - 1:
            spans[-1] = (spans[-1][0], r)
        else:
            spans.append((r, r))
    return spans


def collect_metrics(
    world: World,
    collector: Optional[MetricsCollector] = None,
    tracker: Optional[ConfirmationTracker] = None,
) -> MetricsRecord:
    """Summarize a finished run; a run with no rounds gives an empty record."""
    if world.round == 0:
        return MetricsRecord(seed=world.config.seed)
    collector = collector or MetricsCollector()
    confirmed = tracker.confirmed_round if tracker is not None else {}
    pivot = world.reference_node.graph.pivot()

    rows: List[BlockRecord] = []
    latencies: List[int] = []
    for bid in sorted(world.gen_index, key=world.gen_index.__getitem__):
        if bid == world.genesis.id:
            continue
        b = world.universe.block(bid)
        exposure = world.exposure.get(bid)
        conf = confirmed.get(bid)
        if conf is not None and exposure is not None and b.creator == Creator.HONEST:
            latencies.append(conf - exposure)
        rows.append(
            BlockRecord(
                block=bid,
                creator=b.creator,
                born_round=b.born_round,
                exposure_round=exposure,
                confirmed_round=conf,
                pivot_timeline=list(collector.timeline.get(bid, ())),
                on_pivot=bid in pivot,
            )
        )

    lat = np.asarray(latencies, dtype=float)
    return MetricsRecord(
        seed=world.config.seed,
        rounds=world.round,
        honest_blocks=sum(1 for r in rows if r.creator == Creator.HONEST),
        malicious_blocks=len(world.malicious),
        released_malicious=len(world.malicious - world.withheld),
        malicious_on_pivot=sum(1 for b in pivot.blocks if b in world.malicious),
        pivot_length=len(pivot),
        confirmed_blocks=sum(1 for r in rows if r.confirmed_round is not None),
        latency_p50=float(np.percentile(lat, 50)) if lat.size else None,
        latency_p95=float(np.percentile(lat, 95)) if lat.size else None,
        latency_max=int(lat.max()) if lat.size else None,
        reorg_events=sum(collector.reorgs.values()),
        max_reorg_depth=max(collector.reorgs, default=0),
        reorg_histogram=sorted(collector.reorgs.items()),
        con_rounds=len(collector.con_rounds),
        adapt_spans=_spans(collector.con_rounds),
        blocks=rows,
    )


def aggregate_row(axis: str, value: float, record: MetricsRecord, violations: Optional[int] = None) -> AggregateRow:
    """Sweep row for one run; `violations` is None when the oracle was off."""
    return AggregateRow(
        axis=axis,
        value=value,
        seed=record.seed,
        rounds=record.rounds,
        latency_p50=record.latency_p50,
        latency_p95=record.latency_p95,
        reorg_rate=record.reorg_rate,
        adapt_fraction=record.adapt_fraction,
        confirmed_blocks=record.confirmed_blocks,
        violations=violations,
    )
