# Copyright (c) 2025 CoReason, Inc.
#
# This software is proprietary and dual-licensed.
# Licensed under the Prosperity Public License 3.0 (the "License").
# A copy of the license is available at https://prosperitylicense.com/versions/3.0.0
# For details, see the LICENSE file.
# Commercial use beyond a 30-day trial requires a separate license.
#
# Source Code: https://github.com/CoReason-AI/coreason_ghast

from typing import Callable

import pytest

from coreason_ghast.adversaries.null import NullAdversary
from coreason_ghast.config import AdversaryConfig, ConfirmationConfig, ProtocolMode, ProtocolParams, SimConfig
from coreason_ghast.harness import ConfirmationTracker, Simulator, World
from coreason_ghast.metrics import (
    BlockRecord,
    MetricsCollector,
    MetricsRecord,
    _reorg_depth,
    _spans,
    aggregate_row,
    collect_metrics,
)
from coreason_ghast.schemas import Block, ChainView, Creator
from coreason_ghast.treegraph import TableWeight, TreeGraph
from coreason_ghast.utils.formats import format_timeline, parse_timeline

MakeSim = Callable[..., SimConfig]


def chain(*ids: int) -> ChainView:
    return ChainView(blocks=ids)


class TestHelpers:
    def test_reorg_depth(self) -> None:
        """Depth counts the blocks of the old pivot that were dropped."""
        before = chain(0, 1, 2)
        assert _reorg_depth(before, chain(0, 1, 2, 3)) == 0
        assert _reorg_depth(before, chain(0, 1, 5)) == 1
        assert _reorg_depth(before, chain(0, 4)) == 2
        assert _reorg_depth(before, chain(0, 1)) == 1

    def test_spans(self) -> None:
        """Consecutive rounds merge into inclusive spans."""
        assert _spans([]) == []
        assert _spans([1, 2, 3, 7, 9, 10]) == [(1, 3), (7, 7), (9, 10)]

    def test_rates(self) -> None:
        """Rates are per round and zero for empty runs."""
        record = MetricsRecord(rounds=10, reorg_events=2, con_rounds=5)
        assert record.reorg_rate == 0.2
        assert record.adapt_fraction == 0.5
        assert MetricsRecord().reorg_rate == 0.0
        assert MetricsRecord().adapt_fraction == 0.0


class TestCollect:
    def test_empty_run(self, make_sim: MakeSim) -> None:
        """A world that never ran yields an empty record."""
        record = collect_metrics(World(make_sim(seed=9)))
        assert record == MetricsRecord(seed=9)

    def test_honest_run(self, make_sim: MakeSim) -> None:
        """Every honest block gets a row; confirmed blocks get latencies."""
        config = make_sim(mode=ProtocolMode.PLAIN_GHOST, horizon=10)
        collector = MetricsCollector()
        tracker = ConfirmationTracker(ConfirmationConfig(enabled=True, beta=0.0), config)
        sim = Simulator(config, NullAdversary(AdversaryConfig()), observers=[collector, tracker])
        sim.run()
        record = collect_metrics(sim.world, collector, tracker)
        assert record.rounds == 10
        assert record.honest_blocks == 40
        assert record.malicious_blocks == 0
        assert len(record.blocks) == 40
        assert record.pivot_length == len(sim.world.reference_node.graph.pivot())
        assert record.confirmed_blocks > 0
        assert record.latency_p50 is not None and record.latency_p50 >= 0
        assert record.latency_max is not None and record.latency_max >= record.latency_p50
        for row in record.blocks:
            if row.on_pivot:
                assert row.pivot_entered is not None
        assert record.max_reorg_depth == max((d for d, _ in record.reorg_histogram), default=0)

    def test_on_pivot_rows_end_open(self, make_sim: MakeSim) -> None:
        """Rows of final pivot blocks end with an open span; other rows end closed or are empty."""
        config = make_sim(mode=ProtocolMode.PLAIN_GHOST, d=2, horizon=12)
        collector = MetricsCollector()
        sim = Simulator(config, NullAdversary(AdversaryConfig()), observers=[collector])
        sim.run()
        for row in collect_metrics(sim.world, collector).blocks:
            if row.on_pivot:
                assert row.pivot_timeline[-1][1] is None
            elif row.pivot_timeline:
                assert row.pivot_timeline[-1][1] is not None
            for (_, left), (entered, _) in zip(row.pivot_timeline, row.pivot_timeline[1:], strict=False):
                assert left is not None and left <= entered

    @pytest.mark.parametrize("seed", [1, 2, 3, 4, 5])
    def test_zero_delay_no_deep_reorgs(self, make_sim: MakeSim, small_protocol: ProtocolParams, seed: int) -> None:
        """With d = 0 and no adversary every view agrees after each round, so no reorg drops more than one block."""
        config = make_sim(m=8, d=0, horizon=60, seed=seed, protocol=small_protocol.model_copy(update={"eta_d": 4.0}))
        collector = MetricsCollector()
        sim = Simulator(config, NullAdversary(AdversaryConfig()), observers=[collector])
        sim.run()
        record = collect_metrics(sim.world, collector)
        assert record.honest_blocks > 0
        assert record.max_reorg_depth <= 1

    def test_malicious_counts(self, make_sim: MakeSim) -> None:
        """The null adversary mines one block per round and publishes it the round after."""
        sim = Simulator(make_sim(beta=0.25, horizon=6), NullAdversary(AdversaryConfig()))
        sim.run()
        record = collect_metrics(sim.world)
        assert record.malicious_blocks == 6
        assert record.released_malicious == 5
        assert sum(1 for r in record.blocks if r.creator == Creator.MALICIOUS) == 6
        assert record.confirmed_blocks == 0
        assert record.latency_p50 is None


class TestPivotTimeline:
    @staticmethod
    def _world(make_sim: MakeSim, graph: TreeGraph) -> World:
        world = World(make_sim(m=1, mode=ProtocolMode.PLAIN_GHOST))
        world.reference_node.graph = graph
        return world

    def test_leave_and_reenter(self, make_sim: MakeSim) -> None:
        """A block knocked off the pivot and restored later keeps both spans."""
        weights = {0: 1, 1: 1, 2: 5, 3: 10}
        g = TreeGraph(weight_fn=TableWeight(weights))
        g.insert_block(Block(id=0))
        g.insert_block(Block(id=1, parent=0))
        world = self._world(make_sim, g)
        collector = MetricsCollector()

        collector.on_round(world)
        world.round = 1
        g.insert_block(Block(id=2, parent=0))
        collector.on_round(world)
        world.round = 2
        g.insert_block(Block(id=3, parent=1))
        collector.on_round(world)

        assert g.pivot().blocks == (0, 1, 3)
        assert collector.timeline[1] == [(0, 1), (2, None)]
        assert collector.timeline[2] == [(1, 2)]
        assert collector.timeline[3] == [(2, None)]
        assert collector.timeline[0] == [(0, None)]
        assert collector.reorgs == {1: 2}

    def test_csv_cell(self) -> None:
        """The timeline is one CSV cell that parses back."""
        row = BlockRecord(block=1, creator=Creator.HONEST, born_round=0, pivot_timeline=[(0, 1), (2, None)])
        assert row.pivot_entered == 0
        cell = row.as_row()["pivot_timeline"]
        assert cell == "0-1;2-"
        assert parse_timeline(cell) == [(0, 1), (2, None)]
        assert format_timeline([]) == ""
        assert BlockRecord(block=2, creator=Creator.HONEST, born_round=0).pivot_entered is None


class TestAggregate:
    def test_row(self) -> None:
        """Sweep rows copy the headline numbers and the violation count."""
        record = MetricsRecord(seed=3, rounds=10, reorg_events=1, con_rounds=2, confirmed_blocks=4, latency_p50=2.0)
        row = aggregate_row("sim.d", 2.0, record, violations=0)
        assert (row.axis, row.value, row.seed, row.rounds) == ("sim.d", 2.0, 3, 10)
        assert row.reorg_rate == 0.1
        assert row.adapt_fraction == 0.2
        assert row.confirmed_blocks == 4
        assert row.latency_p50 == 2.0
        assert row.violations == 0
        assert aggregate_row("sim.d", 2.0, record).violations is None
