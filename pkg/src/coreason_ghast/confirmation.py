# Copyright (c) 2025 CoReason, Inc.
#
# This software is proprietary and dual-licensed.
# Licensed under the Prosperity Public License 3.0 (the "License").
# A copy of the license is available at https://prosperitylicense.com/versions/3.0.0
# For details, see the LICENSE file.
# Commercial use beyond a 30-day trial requires a separate license.
#
# Source Code: https://github.com/CoReason-AI/coreason_ghast

"""Confirmation risk: bound under fixed weights, bound on the weights adapting, and the decision rule."""

import math
from functools import lru_cache
from typing import Callable, List, Literal, NamedTuple, Optional, Set, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict

from coreason_ghast.config import ConfirmationConfig, ProtocolParams
from coreason_ghast.exceptions import DomainError, NonConvergent, NotOnPivot
from coreason_ghast.schemas import BlockId, BreakQuery, RiskQuery, SliceBound
from coreason_ghast.tails import binom_at_least, binom_at_most, binom_inverse, nb_tail, nb_tail_inverse
from coreason_ghast.treegraph import TreeGraph
from coreason_ghast.utils.logger import logger

GForm = Literal["mgf", "typeset"]

_S_GRID = np.logspace(-9.0, 1.5, 192)
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
_GOLDEN_ITERS = 80
_TAIL_TOL = 1e-12
_TAIL_REL_TOL = 1e-9
_MAX_TERMS = 10**6
_NEGLIGIBLE = 1e-15


def _log(x: float) -> float:
    return math.log(x) if x > 0 else -math.inf


def log_g_funcs(s: np.ndarray, beta: float, eta_w: int, form: GForm = "mgf") -> Tuple[np.ndarray, np.ndarray]:
    """Vectorized log g1(s), log g2(s).

    The "mgf" form is the moment generating function of one step of the advantage
    walk: -1 with probability 1 - beta, +1 with probability beta for light blocks,
    and the same scaled by eta_w with probability 1/eta_w (0 otherwise) for
    adaptive-weight blocks. The "typeset" form drops the step probabilities.
    """
    s = np.asarray(s, dtype=float)
    lb, lh, lw = _log(beta), _log(1.0 - beta), math.log(eta_w)
    with np.errstate(divide="ignore", over="ignore"):
        if form == "typeset":
            lg1 = np.logaddexp(s * beta, -s * (1.0 - beta))
            lg2 = np.logaddexp(s * eta_w * beta, -s * eta_w * (1.0 - beta)) - lw
            return lg1, lg2
        lg1 = np.logaddexp(lb + s, lh - s)
        spread = np.logaddexp(lb + s * eta_w, lh - s * eta_w) - lw
        lg2 = np.logaddexp(_log((eta_w - 1) / eta_w), spread)
    return lg1, lg2


def g_funcs(s: float, beta: float, eta_w: int, form: GForm = "mgf") -> Tuple[float, float]:
    """g1(s), g2(s), evaluated in the log domain and exponentiated at the end.

    Raises:
        DomainError: s negative or beta outside [0, 0.5].
    """
    if s < 0:
        raise DomainError(f"s={s} must be non-negative")
    if not 0.0 <= beta <= 0.5:
        raise DomainError(f"beta={beta} outside [0, 0.5]")
    lg1, lg2 = log_g_funcs(np.array([s]), beta, eta_w, form)
    return float(np.exp(lg1[0])), float(np.exp(lg2[0]))


def _rowwise_min(objective: Callable[[np.ndarray], np.ndarray], rows: int) -> Tuple[np.ndarray, np.ndarray]:
    """Minimize a row-wise convex function of s: log-grid bracketing, then golden section.

    Args:
        objective: Maps an (rows, k) array of s values to objective values of the same shape.
        rows: Number of independent problems.

    Returns:
        Minimizers and minima, one per row.
    """
    grid = np.broadcast_to(_S_GRID, (rows, _S_GRID.size))
    values = objective(grid)
    idx = np.argmin(values, axis=1)
    lo = _S_GRID[np.maximum(idx - 1, 0)]
    hi = _S_GRID[np.minimum(idx + 1, _S_GRID.size - 1)]
    lo = np.where(idx == 0, 0.0, lo)

    x1 = hi - _GOLDEN * (hi - lo)
    x2 = lo + _GOLDEN * (hi - lo)
    f1 = objective(x1[:, None])[:, 0]
    f2 = objective(x2[:, None])[:, 0]
    for _ in range(_GOLDEN_ITERS):
        left = f1 < f2
        hi = np.where(left, x2, hi)
        lo = np.where(left, lo, x1)
        x1_new = np.where(left, hi - _GOLDEN * (hi - lo), x2)
        x2_new = np.where(left, x1, lo + _GOLDEN * (hi - lo))
        point = np.where(left, x1_new, x2_new)
        f_point = objective(point[:, None])[:, 0]
        f1, f2 = np.where(left, f_point, f2), np.where(left, f1, f_point)
        x1, x2 = x1_new, x2_new
    best_s = np.where(f1 < f2, x1, x2)
    best = np.minimum(f1, f2)
    grid_best = values[np.arange(rows), idx]
    take_grid = grid_best < best
    return np.where(take_grid, _S_GRID[idx], best_s), np.where(take_grid, grid_best, best)


def _log_tail(s: np.ndarray, last: int, theta_eff: int, c: float, beta: float, eta_w: int, form: GForm) -> np.ndarray:
    """log of sum_{i > last} g1^{min(i, theta)} g2^{max(0, i - theta)} e^{-s c}; inf when divergent."""
    lg1, lg2 = log_g_funcs(s, beta, eta_w, form)
    out = np.full(np.shape(s), -np.inf)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        if last < theta_eff:
            span = theta_eff - last
            # sum_{i=last+1}^{theta} g1^i
            part_a = (last + 1) * lg1 + np.log(-np.expm1(span * lg1)) - np.log(-np.expm1(lg1))
            out = np.logaddexp(out, part_a)
        k0 = max(last, theta_eff) - theta_eff + 1
        part_b = theta_eff * lg1 + k0 * lg2 - np.log(-np.expm1(lg2))
        out = np.logaddexp(out, part_b)
        out = np.where((lg1 >= 0) | (lg2 >= 0), np.inf, out)
    return out - s * c


def partial_risk(K: int, T: int, q: RiskQuery, form: GForm = "mgf") -> float:
    """Risk that the advantage walk starting at n - K ever reaches zero.

    Sums, over i >= 1, min_s g1^{min(i, theta')} g2^{max(0, i - theta')} e^{s (K - n)}
    with theta' = max(theta - T, 0). Terms are evaluated in chunks; at every chunk
    boundary the remaining series is bounded in closed form, and the sum stops once
    that bound is below 1e-12 (or 1e-9 of the running total). The returned value
    includes the closed-form remainder, so it stays an upper bound.

    Raises:
        NonConvergent: The remainder bound stays above tolerance for 10^6 terms.
    """
    if K >= q.n:
        return 1.0
    return _partial_risk(K, T, q.n, q.theta, q.beta, q.eta_w, form)


@lru_cache(maxsize=65536)
def _partial_risk(K: int, T: int, n: int, theta: int, beta: float, eta_w: int, form: GForm) -> float:
    theta_eff = max(theta - T, 0)
    c = float(n - K)
    total = 0.0
    start = 1
    chunk = 256
    while start <= _MAX_TERMS:
        i = np.arange(start, start + chunk)
        a = np.minimum(i, theta_eff).astype(float)[:, None]
        b = np.maximum(i - theta_eff, 0).astype(float)[:, None]

        def objective(s: np.ndarray, a: np.ndarray = a, b: np.ndarray = b) -> np.ndarray:
            lg1, lg2 = log_g_funcs(s, beta, eta_w, form)
            return a * lg1 + b * lg2 - s * c

        _, minima = _rowwise_min(objective, chunk)
        total += float(np.exp(minima).sum())
        if total >= 1.0:
            return 1.0

        last = start + chunk - 1
        tails = _log_tail(_S_GRID, last, theta_eff, c, beta, eta_w, form)
        tail = float(np.exp(np.min(tails)))
        if tail < _TAIL_TOL or tail < _TAIL_REL_TOL * total:
            return min(1.0, total + tail)
        start = last + 1
        chunk = min(chunk * 2, 65536)
    raise NonConvergent(f"partial risk did not converge within {_MAX_TERMS} terms (beta={beta})")


def _nb_probability(beta: float, typeset: bool) -> float:
    return 1.0 - beta if typeset else beta


def confirmation_risk(q: RiskQuery, typeset: bool = False) -> float:
    """Upper bound on the probability that b leaves the pivot chain, with weights fixed for theta blocks.

    The default sums p(k, t) against the probability mass of the malicious-block count:
    Pr[K' >= t - m + 1] + sum_{k < n} Pr[K' = k] p(k, t) + Pr[K' >= n]. With `typeset`
    the looser printed form Pr[K' >= t - m + 1] + p(0, t) + sum_{k < n} Pr[K' >= k] p(k, t)
    is used, with the printed 1 - beta tail parameter.

    Raises:
        DomainError: t exceeds theta.
    """
    if q.t > q.theta:
        raise DomainError(f"t={q.t} exceeds theta={q.theta}")
    form: GForm = "typeset" if typeset else "mgf"
    p = _nb_probability(q.beta, typeset)
    r = q.m + 1
    head = nb_tail(max(q.t - q.m + 1, 0), r, p)
    if q.n == 0:
        return 1.0

    risk = head
    if typeset:
        risk += partial_risk(0, q.t, q, form)
        for k in range(q.n):
            tail_k = nb_tail(k, r, p)
            if tail_k < _NEGLIGIBLE:
                risk += sum(nb_tail(j, r, p) for j in range(k, q.n))
                break
            risk += tail_k * partial_risk(k, q.t, q, form)
            if risk >= 1.0:
                return 1.0
        return min(1.0, risk)

    prev = 1.0
    for k in range(q.n):
        nxt = nb_tail(k + 1, r, p)
        mass = prev - nxt
        if prev < _NEGLIGIBLE:
            break
        risk += mass * partial_risk(k, q.t, q, form)
        if risk >= 1.0:
            return 1.0
        prev = nxt
    risk += prev
    return min(1.0, max(0.0, risk))


def choose_split(m: int, beta: float, budget: float, theta: int, typeset: bool = False) -> int:
    """Smallest t in [m, theta] whose head term Pr[K' >= t - m + 1] is at most `budget`, else theta."""
    if m >= theta:
        return theta
    p = _nb_probability(beta, typeset)
    if p >= 1.0:  # pragma: no cover
        return theta
    k = nb_tail_inverse(budget, m + 1, p)
    return min(theta, m + k - 1) if k > 0 else m


def e1_bound(a_height_gap: int, bq: BreakQuery, typeset: bool = False) -> float:
    """Probability that the timer chain grows enough to age the block within theta blocks.

    Default: Pr[Binomial(theta, 1/eta_t) >= eta_b - gap]. With `typeset`, the printed
    Pr[Binomial(theta, 1/eta_t) <= eta_b - gap].
    """
    threshold = bq.eta_b - a_height_gap
    if typeset:
        return binom_at_most(threshold, bq.theta, 1.0 / bq.eta_t)
    return binom_at_least(threshold, bq.theta, 1.0 / bq.eta_t)


def y_term(count: int, rho: float, eta_w: int) -> float:
    """min_t ((eta_w - 1 + e^{t eta_w}) / eta_w)^count e^{-t rho}, solved in closed form."""
    if rho <= 0:
        return 1.0
    if count == 0:
        return 0.0
    top = count * eta_w
    if top < rho:
        return 0.0
    if top == rho:
        return float(eta_w) ** (-count)
    if eta_w == 1 or rho <= count:
        return 1.0
    t = math.log(rho * (eta_w - 1) / (top - rho)) / eta_w
    log_val = count * (math.log(eta_w - 1 + math.exp(t * eta_w)) - math.log(eta_w)) - t * rho
    return min(1.0, math.exp(log_val))


def e2_bound(slice_: SliceBound, bq: BreakQuery, typeset: bool = False) -> float:
    """Probability that adaptive weights overturn a margin of w - eta_a - l.

    Minimizes over (n1, n2) the sum of the malicious-count tail, the timer-window
    binomial tail and the weight-walk tail: candidates come from tail quantiles
    at decades 1 .. 1e-20, then a coordinate search refines the best pair.
    """
    rho = slice_.w - bq.eta_a - slice_.l
    if rho <= 0:
        return 1.0
    p = _nb_probability(bq.beta, typeset)
    r = slice_.m + 1

    def f(n1: int, n2: int) -> float:
        return nb_tail(n1, r, p) + binom_at_least(n2, bq.theta, bq.beta) + y_term(n1 + n2, rho, bq.eta_w)

    levels = [10.0 ** (-j) for j in range(1, 21)]
    c1 = {0} | ({nb_tail_inverse(x, r, p) for x in levels} if p < 1.0 else set())
    c2 = {0} | {binom_inverse(x, bq.theta, bq.beta) for x in levels}
    best = min(((f(a, b), a, b) for a in c1 for b in c2))
    val, n1, n2 = best
    step = max(1, max(n1, n2) // 2)
    while step >= 1:
        improved = False
        for d1, d2 in ((step, 0), (-step, 0), (0, step), (0, -step)):
            a, b = n1 + d1, n2 + d2
            if a < 0 or b < 0:
                continue
            cand = f(a, b)
            if cand < val:
                val, n1, n2 = cand, a, b
                improved = True
        if not improved:
            step //= 2
    return min(1.0, val)


def assumption_break_risk(bq: BreakQuery, typeset: bool = False) -> float:
    """Sum over slices of min(e1 at the oldest block, e2 at the slice's worst case), clamped to 1."""
    total = 0.0
    for s in bq.slices:
        total += min(e1_bound(s.gap, bq, typeset), e2_bound(s, bq, typeset))
        if total >= 1.0:
            return 1.0
    return total


class RiskAssessment(BaseModel):
    """Detailed outcome of a confirmation check."""

    model_config = ConfigDict(frozen=True)

    block: BlockId
    confirmed: bool
    risk: float
    fixed_weight_risk: float
    break_risk: float
    m: int
    n: int
    t: int
    theta: int


class Decision(NamedTuple):
    confirmed: bool
    risk: float


def break_query_for(g: TreeGraph, parent: BlockId, params: ProtocolParams, cfg: ConfirmationConfig) -> BreakQuery:
    """Slice the chain of b.parent into assumption-break inputs.

    The view is past(b.parent) plus b.parent. For each chain block a: m counts view
    blocks outside past(a.parent) plus a.parent, l is a's max sibling subtree weight,
    w is a's subtree weight, and the gap is Z - TimerHeight(a.parent) with
    Z = max timer height of the view + z_gap.
    """
    view = g.subgraph(g.past_ids(parent) | {parent})
    chain = view.chain_of(parent).blocks
    z = view.max_timer_height + cfg.z_gap

    closure: Set[BlockId] = set()
    rows: List[Tuple[int, int, int, int]] = []
    for a_parent, a in zip(chain, chain[1:], strict=False):
        stack = [a_parent]
        while stack:
            x = stack.pop()
            if x in closure:
                continue
            closure.add(x)
            stack.extend(dep for dep in view.block(x).deps if dep not in closure)
        m_a = len(view) - len(closure)
        rows.append((m_a, view.sib_subtree_weight(a), view.subtree_weight(a), z - view.timer_height(a_parent)))

    slices = []
    for i in range(0, len(rows), cfg.slice_size):
        part = rows[i : i + cfg.slice_size]
        slices.append(
            SliceBound(
                m=max(r[0] for r in part),
                l=max(r[1] for r in part),
                w=min(r[2] for r in part),
                gap=part[0][3],
            )
        )
    return BreakQuery(
        theta=cfg.theta,
        eta_t=params.eta_t,
        eta_b=params.eta_b,
        eta_a=params.eta_a,
        eta_w=params.eta_w,
        beta=cfg.beta,
        slices=tuple(slices),
        z_gap=cfg.z_gap,
    )


def assess_block(
    g: TreeGraph,
    b: BlockId,
    params: ProtocolParams,
    cfg: ConfirmationConfig,
    extra_honest: int = 0,
    adaptive: bool = True,
) -> RiskAssessment:
    """Total confirmation risk of pivot block b.

    Args:
        g: The observer's graph.
        b: A pivot block.
        params: Protocol parameters.
        cfg: Confirmation policy.
        extra_honest: Padding added to m for blocks the observer cannot see yet.
        adaptive: Include the assumption-break bound (GHAST weights only).

    Raises:
        NotOnPivot: b is not on g's pivot chain.
    """
    if b not in g.pivot():
        raise NotOnPivot(f"block {b:#x} is not on the pivot chain")
    parent = g.block(b).parent
    if parent is None:
        return RiskAssessment(
            block=b, confirmed=True, risk=0.0, fixed_weight_risk=0.0, break_risk=0.0, m=0, n=0, t=0, theta=cfg.theta
        )

    m = len(g) - len(g.past_ids(parent)) - 1 + extra_honest
    n = max(g.subtree_weight(b) - g.sib_subtree_weight(b), 0)
    t = choose_split(m, cfg.beta, cfg.target_risk / 4, cfg.theta, cfg.typeset_forms)
    q = RiskQuery(m=m, n=n, theta=cfg.theta, t=t, beta=cfg.beta, eta_w=params.eta_w)

    fixed = confirmation_risk(q, cfg.typeset_forms) if n > 0 else 1.0
    brk = 0.0
    if adaptive and fixed < cfg.target_risk:
        brk = assumption_break_risk(break_query_for(g, parent, params, cfg), cfg.typeset_forms)
    risk = min(1.0, fixed + brk)
    return RiskAssessment(
        block=b,
        confirmed=risk <= cfg.target_risk,
        risk=risk,
        fixed_weight_risk=fixed,
        break_risk=brk,
        m=m,
        n=n,
        t=t,
        theta=cfg.theta,
    )


def confirm_decision(
    g: TreeGraph,
    b: BlockId,
    target_risk: float,
    params: ProtocolParams,
    cfg: Optional[ConfirmationConfig] = None,
    extra_honest: int = 0,
    adaptive: bool = True,
) -> Decision:
    """(confirmed, risk) for pivot block b against `target_risk`."""
    cfg = (cfg or ConfirmationConfig()).model_copy(update={"target_risk": target_risk})
    a = assess_block(g, b, params, cfg, extra_honest=extra_honest, adaptive=adaptive)
    logger.debug(f"Block {b:#x}: m={a.m} n={a.n} t={a.t} risk={a.risk:.3e}")
    return Decision(a.confirmed, a.risk)


class LatencyParameters(NamedTuple):
    delta: float
    eta_t: float


def latency_parameters(beta: float, lam: float) -> LatencyParameters:
    """delta = 1 - beta / (1 - beta) and the timer ratio 2 * lambda / delta it suggests."""
    if not 0.0 <= beta < 0.5:
        raise DomainError(f"beta={beta} outside [0, 0.5)")
    delta = 1.0 - beta / (1.0 - beta)
    return LatencyParameters(delta=delta, eta_t=2.0 * lam / delta)
