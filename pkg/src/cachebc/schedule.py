"""Delivery-phase construction and verification.

The delivery runs in K time-sharing phases; phase k is decodable by
receivers k..K and has a budget of floor(beta_k * n) channel uses.  For the
cached receivers (k <= K0) phase k carries

* every XOR group whose weakest member is k: for a set S of t+1 cached
  receivers, the bitwise XOR of the t+1 fragments each of which is demanded
  by one member and cached at exactly the other t members;
* the uncached remainder fragment of receiver k's demand;
* piggyback slices: bits of uncached receivers' demands that receiver k
  already holds in its cache, so they occupy the phase without costing
  receiver k any channel capacity.

Phase kt > K0 carries whatever of message d_kt was not sent plainly before.

Piggyback slices are assigned disjoint bit ranges.  Amounts per (phase,
fragment) come from an exact max-flow over the eligibility structure (a
greedy split can strand bits when fragments are shared by several phases,
i.e. t >= 2); within a fragment, positions are handed out in fragment order,
earliest bits first.

Verification mirrors the per-phase LP accounting: piggyback bits count as
known only at the phase owner (the extra knowledge other cached receivers
may have is deliberately ignored), every other item counts as known only for
receivers that can reconstruct all its constituent bits from cache.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_flow

from .model import ConfigError, SchemeParameters, SystemConfig, validate_demand
from .placement import CacheContents, SubMessageLayout

__all__ = [
    "PayloadItem",
    "SchedulePhase",
    "PhaseSchedule",
    "xor_group",
    "build_schedule",
    "receiver_unknown_bits",
    "verify_schedule",
    "VerifyReport",
]


def _padded(F: int, bits: np.ndarray) -> np.ndarray:
    extra = (-len(bits)) % F
    if extra == 0:
        return np.asarray(bits, dtype=np.uint8)
    return np.concatenate([np.asarray(bits, dtype=np.uint8), np.zeros(extra, np.uint8)])


@dataclass(frozen=True)
class PayloadItem:
    """One transmitted unit inside a phase.

    ``constituents`` are (message d, fragment i, start, stop) bit ranges; an
    XOR group lists the t+1 full fragments it combines, plain items list the
    ranges they concatenate.  ``bits`` is the transmitted string, padded with
    zeros to a multiple of F.  ``known_to`` is the set of receivers able to
    reconstruct every constituent bit from cache alone; ``owner`` is the
    phase receiver for piggyback slices.
    """

    kind: str  # 'xor-group' | 'uncached-part' | 'piggyback-slice'
    constituents: tuple[tuple[int, int, int, int], ...]
    bits: np.ndarray
    known_to: frozenset[int]
    owner: int | None = None

    @property
    def padded_bits(self) -> int:
        return int(len(self.bits))

    @property
    def data_bits(self) -> int:
        if self.kind == "xor-group":
            return self.constituents[0][3] - self.constituents[0][2]
        return sum(b - a for (_, _, a, b) in self.constituents)


@dataclass(frozen=True)
class SchedulePhase:
    receiver: int
    budget_uses: int
    items: tuple[PayloadItem, ...]

    @property
    def payload_bits(self) -> int:
        return sum(it.padded_bits for it in self.items)

    @property
    def block_count(self) -> int:
        return self.payload_bits  # divided by F by callers that need blocks


@dataclass(frozen=True)
class PhaseSchedule:
    demand: tuple[int, ...]
    phases: tuple[SchedulePhase, ...]
    params: SchemeParameters
    layout: SubMessageLayout
    n: int
    F: int
    piggyback_shortfall_bits: int = 0  # requested minus assignable slice bits

    @property
    def total_budget_uses(self) -> int:
        return sum(p.budget_uses for p in self.phases)


def _known_to_subset(layout: SubMessageLayout, constituents, K: int) -> frozenset[int]:
    """Receivers caching every constituent range (subset placement: receiver
    k holds fragment (d, i) for all d exactly when k is in subsets[i])."""
    known = set(range(1, K + 1))
    for (_, i, _, _) in constituents:
        known &= set(layout.subsets[i])
    return frozenset(known)


def _piece_padded(library, layout: SubMessageLayout, d: int, i: int) -> np.ndarray:
    off = layout.piece_offset(i)
    raw = library[d - 1][off : off + layout.piece_bits[i]]
    return _padded(layout.F, raw)


def xor_group(library, layout: SubMessageLayout, demand, S) -> PayloadItem:
    """XOR of the t+1 fragments indexed by a set S of t+1 cached receivers:
    member k contributes the fragment of its demand whose caching subset is
    exactly S minus k, so every member can strip the other t from cache."""
    S = tuple(sorted(int(x) for x in S))
    if len(S) != layout.t + 1 or not all(1 <= k <= layout.K0 for k in S):
        raise ConfigError(f"S must be t+1={layout.t + 1} receivers within 1..K0, got {S}")
    constituents = []
    bits = None
    for k in S:
        others = tuple(x for x in S if x != k)
        i_k = layout.subset_index(others)  # KeyError when not a caching subset
        d_k = demand[k - 1]
        constituents.append((d_k, i_k, 0, layout.piece_bits[i_k]))
        piece = _piece_padded(library, layout, d_k, i_k)
        bits = piece.copy() if bits is None else bits ^ piece
    return PayloadItem(
        kind="xor-group",
        constituents=tuple(constituents),
        bits=bits,
        known_to=_known_to_subset(layout, constituents, len(demand)),
    )


# -- piggyback slice assignment ---------------------------------------------


def _slice_flow(layout: SubMessageLayout, want_bits: np.ndarray) -> np.ndarray:
    """Split per-phase piggyback demands across eligible fragments.

    ``want_bits[k-1]`` is phase k's requested bit count for one target
    message.  Returns an (K0, tau) matrix of granted bits with disjoint
    totals per fragment; grants are maximal (max flow), so a shortfall only
    occurs when the requests genuinely exceed the union of eligible bits.
    """
    K0, tau = layout.K0, layout.tau
    frag_bits = np.array(layout.piece_bits[:tau], dtype=np.int64)
    src, snk = 0, 1 + K0 + tau
    rows, cols, caps = [], [], []
    for k in range(1, K0 + 1):
        if want_bits[k - 1] > 0:
            rows.append(src)
            cols.append(k)
            caps.append(int(want_bits[k - 1]))
        for i in layout.pieces_cached_at(k):
            if frag_bits[i] > 0:
                rows.append(k)
                cols.append(1 + K0 + i)
                caps.append(int(frag_bits[i]))
    for i in range(tau):
        if frag_bits[i] > 0:
            rows.append(1 + K0 + i)
            cols.append(snk)
            caps.append(int(frag_bits[i]))
    if want_bits.sum() == 0 or not rows:
        return np.zeros((K0, tau), dtype=np.int64)
    graph = csr_matrix((caps, (rows, cols)), shape=(snk + 1, snk + 1), dtype=np.int64)
    res = maximum_flow(graph.astype(np.int32), src, snk)
    flow = res.flow.toarray()
    grant = np.zeros((K0, tau), dtype=np.int64)
    for k in range(1, K0 + 1):
        for i in range(tau):
            grant[k - 1, i] = max(0, flow[k, 1 + K0 + i])
    return grant


def build_schedule(
    cfg: SystemConfig,
    params: SchemeParameters,
    layout: SubMessageLayout,
    demand,
    library,
    caches: CacheContents,
) -> PhaseSchedule:
    """Assemble the K-phase delivery schedule for one demand tuple.

    Demand tuples with repeated entries reuse the distinct-demand
    construction (correct, possibly conservative); bits sent plainly in an
    early phase are excluded from the plain remainder phases kt > K0.
    Budget sufficiency is checked by verify_schedule, not here.
    """
    K, K0, t = cfg.K, params.K0, params.t
    n = cfg.require_n()
    params.validate(K)
    demand = validate_demand(demand, K, cfg.D)
    if (layout.K0, layout.t) != (K0, t):
        raise ConfigError("layout does not match scheme parameters")
    tau = layout.tau

    budgets = [min(n, math.floor(params.beta[k - 1] * n)) for k in range(1, K + 1)]

    # piggyback grants per target message, disjoint bit ranges via cursors
    grants = {}
    shortfall = 0
    for kt in range(K0 + 1, K + 1):
        want = np.array(
            [math.floor(n * params.piggyback_rate(k, kt)) for k in range(1, K0 + 1)],
            dtype=np.int64,
        )
        g = _slice_flow(layout, want)
        grants[kt] = g
        shortfall += int(want.sum() - g.sum())

    sent: dict[tuple[int, int], list[tuple[int, int]]] = {}

    def register(d, i, a, b):
        sent.setdefault((d, i), []).append((a, b))

    def remaining(d, i):
        length = layout.piece_bits[i]
        out, cur = [], 0
        for a, b in sorted(sent.get((d, i), [])):
            if a > cur:
                out.append((cur, a))
            cur = max(cur, b)
        if cur < length:
            out.append((cur, length))
        return out

    cursors = {kt: np.zeros(tau, dtype=np.int64) for kt in grants}

    phases = []
    for k in range(1, K + 1):
        items: list[PayloadItem] = []
        if k <= K0:
            for rest in combinations(range(k + 1, K0 + 1), t):
                items.append(xor_group(library, layout, demand, (k,) + rest))
            if layout.piece_bits[tau] > 0:
                d_k = demand[k - 1]
                rng = (d_k, tau, 0, layout.piece_bits[tau])
                items.append(
                    PayloadItem(
                        kind="uncached-part",
                        constituents=(rng,),
                        bits=_piece_padded(library, layout, d_k, tau),
                        known_to=frozenset(),
                    )
                )
                register(d_k, tau, 0, layout.piece_bits[tau])
            for kt in range(K0 + 1, K + 1):
                row = grants[kt][k - 1]
                if row.sum() == 0:
                    continue
                d_t = demand[kt - 1]
                consts, chunks = [], []
                for i in range(tau):
                    if row[i] == 0:
                        continue
                    a = int(cursors[kt][i])
                    b = a + int(row[i])
                    cursors[kt][i] = b
                    consts.append((d_t, i, a, b))
                    off = layout.piece_offset(i)
                    chunks.append(library[d_t - 1][off + a : off + b])
                    register(d_t, i, a, b)
                items.append(
                    PayloadItem(
                        kind="piggyback-slice",
                        constituents=tuple(consts),
                        bits=_padded(layout.F, np.concatenate(chunks)),
                        known_to=_known_to_subset(layout, consts, K),
                        owner=k,
                    )
                )
        else:
            d_k = demand[k - 1]
            for i in range(tau + 1):
                gaps = remaining(d_k, i)
                if not gaps:
                    continue
                consts = tuple((d_k, i, a, b) for a, b in gaps)
                off = layout.piece_offset(i)
                chunks = [library[d_k - 1][off + a : off + b] for a, b in gaps]
                items.append(
                    PayloadItem(
                        kind="uncached-part",
                        constituents=consts,
                        bits=_padded(layout.F, np.concatenate(chunks)),
                        known_to=_known_to_subset(layout, consts, K),
                    )
                )
                for a, b in gaps:
                    register(d_k, i, a, b)
        phases.append(
            SchedulePhase(receiver=k, budget_uses=budgets[k - 1], items=tuple(items))
        )
    return PhaseSchedule(
        demand=demand,
        phases=tuple(phases),
        params=params,
        layout=layout,
        n=n,
        F=cfg.F,
        piggyback_shortfall_bits=shortfall,
    )


def _counts_unknown(item: PayloadItem, j: int) -> bool:
    """Accounting rule shared with the phase LP: piggyback bits are credited
    only to the phase owner; everything else to receivers caching it all."""
    if item.kind == "piggyback-slice":
        return j != item.owner
    return j not in item.known_to


def receiver_unknown_bits(schedule: PhaseSchedule, k: int) -> list[tuple[int, int]]:
    """Per-phase unknown payload bits for receiver k over the phases it must
    decode (phase indices p <= k).  Returns [(phase, unknown_bits), ...]."""
    if not 1 <= k <= len(schedule.phases):
        raise ConfigError(f"receiver index {k} out of range")
    out = []
    for p, phase in enumerate(schedule.phases, start=1):
        if p > k:
            break
        unknown = sum(
            it.padded_bits for it in phase.items if _counts_unknown(it, k)
        )
        out.append((p, int(unknown)))
    return out


@dataclass(frozen=True)
class VerifyReport:
    ok: bool
    rows: tuple[dict, ...] = field(default_factory=tuple)

    def failures(self):
        return [r for r in self.rows if not r["ok"]]


def verify_schedule(
    schedule: PhaseSchedule,
    cfg: SystemConfig,
    margin: float = 1.0,
    rounding_slack: int | None = None,
) -> VerifyReport:
    """Deterministic capacity check: for every phase p and every receiver
    j >= p, the unknown payload bits must fit inside
    margin * budget_p * F * (1 - delta_j).

    ``rounding_slack`` (bits) absorbs the provable floor/pad noise between
    the rate-level constraint system and integer bit counts: each item is
    padded up by less than F and the phase budget is floored by less than
    one use, so the default allowance is F * (#items + 1) per phase.  Pass 0
    for the literal comparison.
    """
    if not 0.0 < margin <= 1.0:
        raise ConfigError(f"margin must lie in (0, 1], got {margin}")
    rows = []
    ok = True
    for p, phase in enumerate(schedule.phases, start=1):
        slack = (
            cfg.F * (len(phase.items) + 1) if rounding_slack is None else rounding_slack
        )
        for j in range(p, cfg.K + 1):
            unknown = sum(
                it.padded_bits for it in phase.items if _counts_unknown(it, j)
            )
            capacity = margin * phase.budget_uses * cfg.F * (1.0 - cfg.delta(j))
            row_ok = unknown <= capacity + slack
            ok = ok and row_ok
            rows.append(
                {
                    "phase": p,
                    "receiver": j,
                    "unknown_bits": int(unknown),
                    "capacity_bits": float(capacity),
                    "slack_bits": int(slack),
                    "ok": bool(row_ok),
                }
            )
    return VerifyReport(ok=ok, rows=tuple(rows))
