# Copyright (c) 2025 CoReason, Inc.
#
# This software is proprietary and dual-licensed.
# Licensed under the Prosperity Public License 3.0 (the "License").
# A copy of the license is available at https://prosperitylicense.com/versions/3.0.0
# For details, see the LICENSE file.
# Commercial use beyond a 30-day trial requires a separate license.
#
# Source Code: https://github.com/CoReason-AI/coreason_ghast

from enum import Enum
from functools import cached_property
from typing import Dict, FrozenSet, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator

BlockId = int


class Creator(str, Enum):
    """Creator class of a block."""

    HONEST = "honest"
    MALICIOUS = "malicious"


class StrategyBit(str, Enum):
    """Weighting strategy forced by a block's past graph."""

    OPT = "opt"
    CON = "con"


class WeightClass(str, Enum):
    """Digest-derived weight tag."""

    HEAVY = "heavy"
    LIGHT = "light"


class EventKind(str, Enum):
    """Kinds of events that drive the adversary state."""

    HGEN_RLS = "hGenRls"
    MGEN = "mGen"
    MRLS = "mRls"
    ARVL = "Arvl"


class ForkChoice(str, Enum):
    """Fork-choice rule of a Tree-Graph."""

    GHOST = "ghost"
    LONGEST = "longest"


class Block(BaseModel):
    """An immutable block header.

    Attributes:
        id: 64-bit digest; hash, tie-breaker and tag source.
        parent: Parent digest, None only for genesis.
        refs: Reference digests, in header order.
        creator: Creator class.
        born_round: Round of generation.
        strategy: Declared strategy bit. None means derived from the past graph.
    """

    model_config = ConfigDict(frozen=True)

    id: BlockId = Field(..., ge=0, lt=1 << 64)
    parent: Optional[BlockId] = None
    refs: Tuple[BlockId, ...] = ()
    creator: Creator = Creator.HONEST
    born_round: int = Field(default=0, ge=0)
    strategy: Optional[StrategyBit] = None

    @property
    def deps(self) -> Tuple[BlockId, ...]:
        """Parent followed by references."""
        if self.parent is None:
            return self.refs
        return (self.parent, *self.refs)


class ChainView(BaseModel):
    """Blocks from genesis to a tip, each the parent of the next."""

    model_config = ConfigDict(frozen=True)

    blocks: Tuple[BlockId, ...] = ()

    @cached_property
    def members(self) -> FrozenSet[BlockId]:
        return frozenset(self.blocks)

    @cached_property
    def positions(self) -> Dict[BlockId, int]:
        return {b: i for i, b in enumerate(self.blocks)}

    @property
    def tip(self) -> Optional[BlockId]:
        return self.blocks[-1] if self.blocks else None

    def next_of(self, block: BlockId) -> Optional[BlockId]:
        """Successor of block on the chain, None at the tip or when absent."""
        i = self.positions.get(block)
        if i is None or i + 1 >= len(self.blocks):
            return None
        return self.blocks[i + 1]

    def is_prefix_of(self, other: "ChainView") -> bool:
        return other.blocks[: len(self.blocks)] == self.blocks

    def __contains__(self, block: object) -> bool:
        return block in self.members

    def __len__(self) -> int:
        return len(self.blocks)


class Event(BaseModel):
    """One adversary-state event."""

    model_config = ConfigDict(frozen=True)

    round: int = Field(..., ge=0)
    block: BlockId
    kind: EventKind


class RiskQuery(BaseModel):
    """Inputs of the confirmation-risk bound.

    Attributes:
        m: Upper bound on honest blocks generated since b.parent.
        n: Lower bound on the subtree advantage of b.
        theta: Horizon, in blocks, over which weights are assumed not to adapt.
        t: Tail split point.
        beta: Adversary power fraction.
        eta_w: Heavy-block weight.
    """

    model_config = ConfigDict(frozen=True)

    m: int = Field(..., ge=0)
    n: int = Field(..., ge=0)
    theta: int = Field(..., ge=0)
    t: int = Field(..., ge=0)
    beta: float = Field(..., ge=0.0, lt=0.5)
    eta_w: int = Field(default=600, ge=1)

    @model_validator(mode="after")
    def _split_within_horizon(self) -> "RiskQuery":
        if self.t > self.theta:
            raise ValueError(f"t={self.t} exceeds theta={self.theta}")
        return self


class SliceBound(BaseModel):
    """Summary of one slice of pivot-chain blocks for the assumption-break bound.

    Attributes:
        m: Max honest-block count over the slice.
        l: Max sibling-side honest weight over the slice.
        w: Min subtree weight over the slice.
        gap: Timer-height gap of the oldest block in the slice.
    """

    model_config = ConfigDict(frozen=True)

    m: int = Field(..., ge=0)
    l: int = Field(..., ge=0)  # noqa: E741
    w: int = Field(..., ge=0)
    gap: int = 0


class BreakQuery(BaseModel):
    """Inputs of the assumption-break bound."""

    model_config = ConfigDict(frozen=True)

    theta: int = Field(..., ge=0)
    eta_t: int = Field(..., ge=1)
    eta_b: int = Field(..., ge=0)
    eta_a: int = Field(..., ge=0)
    eta_w: int = Field(..., ge=1)
    beta: float = Field(..., ge=0.0, lt=0.5)
    slices: Tuple[SliceBound, ...] = ()
    z_gap: int = Field(default=10, ge=0)


class PotentialBreakdown(BaseModel):
    """The three potential components of a chain-C block.

    `total` is None exactly when the potential is undefined.
    """

    model_config = ConfigDict(frozen=True)

    p_with: float = 0.0
    p_adv: float = 0.0
    p_sp: float = 0.0
    total: Optional[float] = None

    @property
    def defined(self) -> bool:
        return self.total is not None


class Violation(BaseModel):
    """One failed oracle check."""

    model_config = ConfigDict(frozen=True)

    event_index: int
    invariant_name: str
    detail: str = ""


class AssertionReport(BaseModel):
    """Summary produced by the analysis oracle."""

    events_checked: int = 0
    violations: List[Violation] = Field(default_factory=list)
    global_side_condition_skips: int = 0

    @property
    def ok(self) -> bool:
        return not self.violations

    def counts(self) -> Dict[str, int]:
        out: Dict[str, int] = {}
        for v in self.violations:
            out[v.invariant_name] = out.get(v.invariant_name, 0) + 1
        return out


class Release(BaseModel):
    """Expose a malicious block (and its unreleased malicious ancestors) to honest nodes now.

    An empty `nodes` tuple releases to every honest node.
    """

    model_config = ConfigDict(frozen=True)

    block: BlockId
    nodes: Tuple[int, ...] = ()


class Deliver(BaseModel):
    """Schedule an already exposed block for delivery to some honest nodes.

    `at_round` None delivers in the current round; it may not exceed the block's deadline.
    """

    model_config = ConfigDict(frozen=True)

    block: BlockId
    nodes: Tuple[int, ...] = ()
    at_round: Optional[int] = None


class MiningTemplate(BaseModel):
    """Where the adversary's successful queries of this round attach.

    Attributes:
        parent: Parent digest.
        refs: Reference digests; the declared past is the closure of parent and refs.
    """

    model_config = ConfigDict(frozen=True)

    parent: BlockId
    refs: Tuple[BlockId, ...] = ()


AdversaryAction = Release | Deliver
