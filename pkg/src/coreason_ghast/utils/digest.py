# Copyright (c) 2025 CoReason, Inc.
#
# This software is proprietary and dual-licensed.
# Licensed under the Prosperity Public License 3.0 (the "License").
# A copy of the license is available at https://prosperitylicense.com/versions/3.0.0
# For details, see the LICENSE file.
# Commercial use beyond a 30-day trial requires a separate license.
#
# Source Code: https://github.com/CoReason-AI/coreason_ghast

"""Seeded 64-bit digests and digest-derived tags."""

import hashlib
import struct
from typing import Sequence

GENESIS_ID = 0
DIGEST_BITS = 64
DIGEST_SPACE = 1 << DIGEST_BITS

_WEIGHT_DOMAIN = b"ghast/weight"
_TIMER_DOMAIN = b"ghast/timer"


def block_digest(seed: int, parent: int | None, refs: Sequence[int], creator: str, nonce: int) -> int:
    """Compute the keyed digest of a block header.

    Args:
        seed: Run seed; keys the PRF so distinct runs draw independent digests.
        parent: Parent digest, None for genesis.
        refs: Reference digests in header order.
        creator: Creator class label.
        nonce: Disambiguates otherwise identical headers.

    Returns:
        int: A 64-bit digest, never equal to GENESIS_ID.
    """
    key = (seed & (DIGEST_SPACE - 1)).to_bytes(8, "big")
    h = hashlib.blake2b(key=key, digest_size=8)
    h.update(struct.pack(">Q", DIGEST_SPACE - 1 if parent is None else parent))
    h.update(struct.pack(">I", len(refs)))
    for ref in refs:
        h.update(struct.pack(">Q", ref))
    h.update(creator.encode())
    h.update(struct.pack(">Q", nonce))
    value = int.from_bytes(h.digest(), "big")
    return value if value != GENESIS_ID else 1


def tag_value(domain: bytes, block_id: int) -> int:
    """Uniform 64-bit value derived from a digest under a domain separator."""
    h = hashlib.blake2b(domain, digest_size=8)
    h.update(struct.pack(">Q", block_id))
    return int.from_bytes(h.digest(), "big")


def below_ratio(value: int, ratio: int) -> bool:
    """True iff value < 2^64 / ratio, evaluated exactly in integers."""
    return value * ratio < DIGEST_SPACE


def weight_tag_value(block_id: int) -> int:
    return tag_value(_WEIGHT_DOMAIN, block_id)


def timer_tag_value(block_id: int) -> int:
    return tag_value(_TIMER_DOMAIN, block_id)
