# Copyright (c) 2025 CoReason, Inc.
#
# This software is proprietary and dual-licensed.
# Licensed under the Prosperity Public License 3.0 (the "License").
# A copy of the license is available at https://prosperitylicense.com/versions/3.0.0
# For details, see the LICENSE file.
# Commercial use beyond a 30-day trial requires a separate license.
#
# Source Code: https://github.com/CoReason-AI/coreason_ghast

"""Distribution tails used by the confirmation policy."""

import math
from typing import Callable

from scipy import special, stats

from coreason_ghast.exceptions import DomainError


def reg_inc_beta(x: float, a: float, b: float) -> float:
    """Regularized incomplete beta function I_x(a, b).

    Raises:
        DomainError: x outside [0, 1] or a non-positive shape.
    """
    if not 0.0 <= x <= 1.0 or math.isnan(x):
        raise DomainError(f"x={x} outside [0, 1]")
    if a <= 0 or b <= 0:
        raise DomainError(f"shapes must be positive, got a={a}, b={b}")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    return float(special.betainc(a, b, x))


def nb_tail(k: int, successes: int, p: float) -> float:
    """Pr[K >= k] where K counts outcomes of probability p before `successes` other outcomes.

    Equals I_p(k, successes).

    Raises:
        DomainError: k negative, no successes, or p outside [0, 1].
    """
    if k < 0:
        raise DomainError(f"k={k} must be non-negative")
    if successes < 1:
        raise DomainError(f"successes={successes} must be positive")
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"p={p} outside [0, 1]")
    if k == 0:
        return 1.0
    return reg_inc_beta(p, k, successes)


def nb_tail_inverse(q: float, successes: int, p: float) -> int:
    """Smallest k with nb_tail(k, successes, p) <= q."""
    if p <= 0.0:
        return 1
    if p >= 1.0:
        raise DomainError("tail never falls below 1 when p == 1")
    # nbinom counts failures before `successes` successes of probability 1 - p.
    k = int(stats.nbinom.isf(q, successes, 1.0 - p)) + 1
    return _settle(k, q, lambda j: nb_tail(j, successes, p))


def binom_at_least(k: int, n: int, p: float) -> float:
    """Pr[Binomial(n, p) >= k]."""
    if k <= 0:
        return 1.0
    if k > n:
        return 0.0
    return float(stats.binom.sf(k - 1, n, p))


def binom_at_most(k: int, n: int, p: float) -> float:
    """Pr[Binomial(n, p) <= k]."""
    if k < 0:
        return 0.0
    if k >= n:
        return 1.0
    return float(stats.binom.cdf(k, n, p))


def binom_inverse(q: float, n: int, p: float) -> int:
    """Smallest k with binom_at_least(k, n, p) <= q."""
    if n == 0 or p <= 0.0:
        return 1
    k = int(stats.binom.isf(q, n, p)) + 1
    return _settle(k, q, lambda j: binom_at_least(j, n, p))


def _settle(k: int, q: float, tail: Callable[[int], float]) -> int:
    """Correct a library quantile by a step or two so that k is the smallest index with tail(k) <= q."""
    k = max(k, 1)
    while k > 1 and tail(k - 1) <= q:
        k -= 1
    while tail(k) > q:
        k += 1
    return k
