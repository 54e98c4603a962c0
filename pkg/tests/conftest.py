# Copyright (c) 2025 CoReason, Inc.
#
# This software is proprietary and dual-licensed.
# Licensed under the Prosperity Public License 3.0 (the "License").
# A copy of the license is available at https://prosperitylicense.com/versions/3.0.0
# For details, see the LICENSE file.
# Commercial use beyond a 30-day trial requires a separate license.
#
# Source Code: https://github.com/CoReason-AI/coreason_ghast

import os
from typing import Any, Callable, Dict, Generator, Iterable, List, Optional, Set, Tuple

import numpy as np
import pytest

from coreason_ghast.config import CONFIG_PATH_ENV, DEFAULT_CONFIG_PATH, ProtocolParams, SimConfig
from coreason_ghast.schemas import Block, BlockId, Creator
from coreason_ghast.treegraph import TableWeight, TreeGraph

SMALL_PROTOCOL = ProtocolParams(eta_d=1.0, eta_w=60, eta_a=180, eta_t=36, eta_b=16)

BlockFactory = Callable[..., Block]
GraphFactory = Callable[..., TreeGraph]


def _blk(
    bid: BlockId, parent: Optional[BlockId], refs: Iterable[BlockId] = (), creator: Creator = Creator.HONEST
) -> Block:
    return Block(id=bid, parent=parent, refs=tuple(refs), creator=creator)


def _graph_of(*edges: Tuple[BlockId, Optional[BlockId]], weights: Optional[Dict[BlockId, int]] = None) -> TreeGraph:
    g = TreeGraph(weight_fn=TableWeight(weights or {}, default=1))
    for bid, parent in edges:
        g.insert_block(_blk(bid, parent))
    return g


def _linear_extension(blocks: List[Block], seed: int) -> List[Block]:
    rng = np.random.default_rng(seed)
    placed: Set[BlockId] = set()
    pending = list(blocks)
    out: List[Block] = []
    while pending:
        ready = [b for b in pending if all(d in placed for d in b.deps)]
        pick = ready[int(rng.integers(len(ready)))]
        out.append(pick)
        placed.add(pick.id)
        pending.remove(pick)
    return out


@pytest.fixture(autouse=True)
def isolated_config_env(monkeypatch: pytest.MonkeyPatch) -> Generator[None, None, None]:
    """Pin the config path to the (absent) default and drop GHAST__ overrides for every test."""
    monkeypatch.setenv(CONFIG_PATH_ENV, DEFAULT_CONFIG_PATH)
    for key in list(os.environ):
        if key.startswith("GHAST__"):
            monkeypatch.delenv(key)
    yield


@pytest.fixture
def blk() -> BlockFactory:
    """Short block constructor: blk(id, parent, refs=(), creator=HONEST)."""
    return _blk


@pytest.fixture
def graph_of() -> GraphFactory:
    """Graph from (id, parent) pairs in insertion order; weights default to 1."""
    return _graph_of


@pytest.fixture
def reorder() -> Callable[[List[Block], int], List[Block]]:
    """reorder(blocks, seed): a random dependency-respecting insertion order of the same blocks."""
    return _linear_extension


@pytest.fixture
def small_protocol() -> ProtocolParams:
    return SMALL_PROTOCOL


@pytest.fixture
def make_sim() -> Callable[..., SimConfig]:
    """Factory for small, fast simulation settings; every query succeeds when eta_d is 1."""

    def _make(**kwargs: Any) -> SimConfig:
        base: Dict[str, Any] = {"m": 4, "beta": 0.0, "d": 1, "horizon": 20, "seed": 1, "protocol": SMALL_PROTOCOL}
        base.update(kwargs)
        return SimConfig(**base)

    return _make
