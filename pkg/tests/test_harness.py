# Copyright (c) 2025 CoReason, Inc.
#
# This software is proprietary and dual-licensed.
# Licensed under the Prosperity Public License 3.0 (the "License").
# A copy of the license is available at https://prosperitylicense.com/versions/3.0.0
# For details, see the LICENSE file.
# Commercial use beyond a 30-day trial requires a separate license.
#
# Source Code: https://github.com/CoReason-AI/coreason_ghast

from typing import Callable, Dict, List, Tuple

import numpy as np
import pytest
from scipy import stats

from coreason_ghast.adversaries.null import NullAdversary
from coreason_ghast.config import AdversaryConfig, ConfirmationConfig, ProtocolMode, ProtocolParams, SimConfig
from coreason_ghast.exceptions import DeadlineViolation, HorizonExceeded, IllegalEventSequence
from coreason_ghast.harness import ConfirmationTracker, NodeState, Simulator, World, honest_step
from coreason_ghast.schemas import Block, BlockId, EventKind, Release
from coreason_ghast.treegraph import TreeGraph
from coreason_ghast.utils.digest import GENESIS_ID

MakeSim = Callable[..., SimConfig]


def simulate(config: SimConfig, rounds: int | None = None) -> Simulator:
    sim = Simulator(config, NullAdversary(AdversaryConfig()))
    sim.run(until=rounds)
    return sim


def trace(sim: Simulator) -> List[Tuple[int, BlockId, str]]:
    return [(e.round, e.block, e.kind.value) for e in sim.world.event_log]


class TestDeterminism:
    def test_same_seed_same_trace(self, make_sim: MakeSim) -> None:
        """Two runs with one seed produce identical event logs."""
        assert trace(simulate(make_sim(seed=3))) == trace(simulate(make_sim(seed=3)))

    def test_seed_changes_digests(self, make_sim: MakeSim) -> None:
        """Digests depend on the seed."""
        assert trace(simulate(make_sim(seed=3))) != trace(simulate(make_sim(seed=4)))


class TestRounds:
    def test_every_node_mines(self, make_sim: MakeSim) -> None:
        """With eta_d = 1 every honest node mines once per round."""
        sim = simulate(make_sim(horizon=10))
        kinds = [e.kind for e in sim.world.event_log]
        assert kinds.count(EventKind.HGEN_RLS) == 40
        assert len(sim.world.universe) == 41

    def test_arrivals_one_round_later(self, make_sim: MakeSim) -> None:
        """With d = 1 a block arrives one round after it is mined; the last round's blocks are still in flight."""
        sim = simulate(make_sim(horizon=10))
        w = sim.world
        arrivals = [e for e in w.event_log if e.kind == EventKind.ARVL]
        assert len(arrivals) == 36
        assert all(e.round == w.exposure[e.block] + 1 for e in arrivals)

    def test_zero_delay(self, make_sim: MakeSim) -> None:
        """With d = 0 every block arrives within the round it was mined."""
        sim = simulate(make_sim(d=0, horizon=10))
        w = sim.world
        arrivals = [e for e in w.event_log if e.kind == EventKind.ARVL]
        assert len(arrivals) == 40
        assert all(e.round == w.exposure[e.block] for e in arrivals)
        for node in w.honest_nodes:
            assert set(node.graph) == set(w.universe)

    def test_log_order(self, make_sim: MakeSim) -> None:
        """Rounds never go backwards and a block is generated before it arrives."""
        sim = simulate(make_sim(horizon=8))
        rounds = [e.round for e in sim.world.event_log]
        assert rounds == sorted(rounds)
        first: Dict[BlockId, int] = {}
        for i, e in enumerate(sim.world.event_log):
            first.setdefault(e.block, i)
            if e.kind == EventKind.ARVL:
                assert sim.world.event_log[first[e.block]].kind == EventKind.HGEN_RLS

    def test_local_graphs_within_universe(self, make_sim: MakeSim) -> None:
        """Nodes only ever hold generated blocks."""
        sim = simulate(make_sim(horizon=10))
        universe = set(sim.world.universe)
        for node in sim.world.honest_nodes:
            assert set(node.graph) <= universe

    def test_horizon(self, make_sim: MakeSim) -> None:
        """Running past the horizon is an error; `until` stops early."""
        sim = Simulator(make_sim(horizon=3), NullAdversary(AdversaryConfig()))
        result = sim.run()
        assert result.rounds == 3
        with pytest.raises(HorizonExceeded):
            sim.run_round()
        assert simulate(make_sim(horizon=20), rounds=5).world.round == 5

    def test_longest_chain_mode_has_no_refs(self, make_sim: MakeSim) -> None:
        """The longest-chain variant mines without references."""
        sim = simulate(make_sim(mode=ProtocolMode.NAKAMOTO_REF, horizon=6))
        u = sim.world.universe
        assert all(u.block(b).refs == () for b in u)

    def test_honest_mining_rate(self, make_sim: MakeSim, small_protocol: ProtocolParams) -> None:
        """Honest blocks per round follow Binomial((1 - beta) m, 1 / eta_d); chi-square passes at alpha = 0.01."""
        protocol = small_protocol.model_copy(update={"eta_d": 4.0})
        config = make_sim(m=8, beta=0.25, horizon=400, seed=5, mode=ProtocolMode.PLAIN_GHOST, protocol=protocol)
        sim = simulate(config)
        per_round = np.zeros(config.horizon, dtype=int)
        for e in sim.world.event_log:
            if e.kind == EventKind.HGEN_RLS:
                per_round[e.round] += 1
        counts = np.bincount(per_round, minlength=config.honest + 1)
        observed = np.append(counts[:4], counts[4:].sum())
        p = 1.0 / protocol.eta_d
        expected = config.horizon * np.append(
            stats.binom.pmf(np.arange(4), config.honest, p), stats.binom.sf(3, config.honest, p)
        )
        assert stats.chisquare(observed, expected).pvalue > 0.01

    def test_corrupted_nodes_do_not_mine(self, make_sim: MakeSim) -> None:
        """A quarter of four nodes is one corrupted node, which never mines honest blocks."""
        sim = simulate(make_sim(beta=0.25, horizon=5))
        w = sim.world
        assert w.corrupted == {3}
        assert 3 not in set(w.miner_of.values())
        assert all(e.kind != EventKind.HGEN_RLS or w.miner_of[e.block] != 3 for e in w.event_log)


class TestWorld:
    def test_schedule_requires_exposure(self, make_sim: MakeSim) -> None:
        """Blocks nobody has seen cannot be delivered."""
        w = World(make_sim())
        with pytest.raises(IllegalEventSequence):
            w.schedule(12345, 0, 0)

    def test_deadline(self, make_sim: MakeSim) -> None:
        """Delivery past first exposure plus d is rejected."""
        w = World(make_sim())
        b = w.mine_honest(w.nodes[0])
        assert w.deadline(b.id) == 1
        with pytest.raises(DeadlineViolation):
            w.schedule(b.id, 1, 5)

    def test_release_only_malicious(self, make_sim: MakeSim) -> None:
        """Honest blocks are never 'released'."""
        w = World(make_sim())
        b = w.mine_honest(w.nodes[0])
        with pytest.raises(IllegalEventSequence):
            w.release(Release(block=b.id))

    def test_release_exposes_ancestors(self, make_sim: MakeSim) -> None:
        """Releasing a block also releases the withheld blocks below it, oldest first."""
        w = World(make_sim(beta=0.25))
        first = w.mine_malicious(GENESIS_ID, ())
        second = w.mine_malicious(first.id, ())
        w.release(Release(block=second.id))
        released = [e.block for e in w.event_log if e.kind == EventKind.MRLS]
        assert released == [first.id, second.id]
        assert not w.withheld
        w.deliver_due(w.round + 1)
        for node in w.honest_nodes:
            assert second.id in node.graph

    def test_budget_is_fixed(self, make_sim: MakeSim) -> None:
        """Re-corruption keeps the number of corrupted nodes."""
        w = World(make_sim(beta=0.25))
        with pytest.raises(IllegalEventSequence):
            w.set_corrupted({0, 1})
        w.set_corrupted({0})
        assert not w.nodes[0].honest
        assert w.nodes[3].honest

    def test_honest_step(self, make_sim: MakeSim) -> None:
        """A successful query mines on the node's pivot tip."""
        w = World(make_sim())
        node = w.nodes[0]
        b = honest_step(w, node, [], mine=True)
        assert b is not None
        assert b.parent == GENESIS_ID
        assert honest_step(w, node, [], mine=False) is None


class TestNodeState:
    def test_orphans_wait_for_parents(self, graph_of: Callable[..., TreeGraph], blk: Callable[..., Block]) -> None:
        """A block whose parent has not arrived stays buffered until it does."""
        node = NodeState(0, graph_of((0, None)))
        child = blk(2, 1)
        assert node.receive([child]) == []
        assert 2 in node.buffer
        assert node.receive([blk(1, 0)]) == [1, 2]
        assert not node.buffer
        assert 2 in node.graph


class TestConfirmationTracker:
    def test_confirms_without_adversary(self, make_sim: MakeSim) -> None:
        """With no adversary assumed, pivot blocks confirm within a few rounds."""
        config = make_sim(mode=ProtocolMode.PLAIN_GHOST, horizon=12)
        tracker = ConfirmationTracker(ConfirmationConfig(enabled=True, beta=0.0), config)
        sim = Simulator(config, NullAdversary(AdversaryConfig()), observers=[tracker])
        sim.run()
        assert GENESIS_ID in tracker.confirmed_round
        assert len(tracker.confirmed_round) > 1
        assert all(r < sim.world.round for r in tracker.confirmed_round.values())
        assert set(tracker.confirmed_round) <= set(sim.world.universe)

    def test_padding(self, make_sim: MakeSim) -> None:
        """The honest count is padded by a high quantile of blocks mined over 2d rounds."""
        tracker = ConfirmationTracker(ConfirmationConfig(), make_sim(d=1))
        assert tracker.padding == 25
