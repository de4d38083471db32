"""End-to-end Monte Carlo experiments.

A trial draws a uniform library, fills the caches, builds the delivery
schedule, random-linear-encodes each phase, pushes everything through the
erasure channel, decodes at every receiver with its cache as known symbols,
un-XORs, and compares each reconstruction with the demanded message bit for
bit.  The error probability is estimated over the union of all feasible
demands: trial j fails when any receiver fails for any demand, with run
(demand index, j) seeded by (base seed, demand index, j) so results are
bit-identical regardless of execution order or thread count.
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import codec
from .channel import transmit
from .model import ConfigError, SchemeParameters, SystemConfig, config_to_dict, validate_demand
from .placement import (
    CacheContents,
    build_caches,
    build_prefix_caches,
    draw_library,
    sub_message_layout,
)
from .regions import (
    OutOfRegimeError,
    best_phase_lp_rate,
    common_demand_contains,
    general_max_symmetric_rate,
    max_min_slack_assignment,
    phase_lp_max_rate,
    two_rx_joint_rate,
    two_rx_separate_asym_rate,
    two_rx_symmetric_rate,
)
from .schedule import PhaseSchedule, build_schedule, verify_schedule
from ._seeding import seed_material

__all__ = [
    "SCHEMES",
    "SchemePlan",
    "plan_scheme",
    "run_trial",
    "estimate_pe",
    "SimulationReport",
    "wilson_interval",
    "sweep",
    "sweep_to_csv",
    "SWEEP_FIELDS",
    "audit_conditions",
    "DEFAULT_DEMAND_CAP",
]

SCHEMES = ("symmetric-2rx", "separate-asym-2rx", "joint-2rx", "general", "common-demand")
DEFAULT_DEMAND_CAP = 64


def wilson_interval(failures: int, trials: int, z: float = 1.959963984540054):
    """Wilson 95% score interval; robust for small counts."""
    if trials <= 0:
        return (0.0, 1.0)
    p = failures / trials
    denom = 1.0 + z * z / trials
    center = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    lo = 0.0 if failures == 0 else max(0.0, center - half)
    hi = 1.0 if failures == trials else min(1.0, center + half)
    return (lo, hi)


# ---------------------------------------------------------------------------
# Scheme planning
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SchemePlan:
    """Everything a trial needs, derived once per experiment."""

    scheme: str
    backoff: float
    cfg_sim: SystemConfig  # config with the backed-off rates
    rates_nominal: tuple[float, ...]
    params: SchemeParameters | None = None  # XOR schemes
    layout_memory: float | None = None  # effective equal-cache parameter
    K0: int | None = None
    t: int | None = None
    min_slack_bits: float | None = None
    allocation: tuple[tuple[float, ...], ...] | None = None  # common demand

    def allocation_array(self) -> np.ndarray:
        return np.array(self.allocation, dtype=float)


def _equal_cache_pattern(cfg: SystemConfig) -> tuple[int, float]:
    """Extract (K0, M) from a memories vector of the form (M..M, 0..0)."""
    mems = cfg.memories
    K0 = sum(1 for m in mems if m > 1e-12)
    if K0 == 0:
        return 0, 0.0
    M = mems[0]
    for k in range(K0):
        if abs(mems[k] - M) > 1e-9:
            raise ConfigError("memories must be equal across the cached receivers")
    for k in range(K0, cfg.K):
        if mems[k] > 1e-12:
            raise ConfigError("cached receivers must come first in the memories vector")
    return K0, M


def plan_scheme(
    cfg: SystemConfig, scheme: str, backoff: float = 1.0, params: SchemeParameters | None = None
) -> SchemePlan:
    """Resolve a scheme name into concrete simulation parameters.

    For the XOR schemes the nominal rate comes from the matching analytic
    operation; the simulated rate is backoff * nominal, and the phase
    fractions / piggyback rates are re-fit at that rate by maximizing the
    minimum constraint slack (negative when backoff > 1, which is how the
    over-capacity experiments are driven).
    """
    if scheme not in SCHEMES:
        raise ConfigError(f"unknown scheme {scheme!r}; choose from {SCHEMES}")
    if backoff <= 0:
        raise ConfigError("backoff must be positive")

    if scheme == "common-demand":
        if cfg.demand_set.kind != "common":
            raise ConfigError("common-demand scheme requires demand_set.kind == 'common'")
        inside, witness = common_demand_contains(cfg)
        if not inside:
            raise ConfigError("nominal rates lie outside the common-demand region")
        rates_sim = tuple(backoff * r for r in cfg.rates)
        return SchemePlan(
            scheme=scheme,
            backoff=backoff,
            cfg_sim=replace(cfg, rates=rates_sim),
            rates_nominal=cfg.rates,
            allocation=tuple(tuple(row) for row in witness),
        )

    if scheme in ("symmetric-2rx", "separate-asym-2rx", "joint-2rx"):
        if cfg.K != 2:
            raise ConfigError(f"{scheme} requires K=2")
        d1, d2, F, D = cfg.delta(1), cfg.delta(2), cfg.F, cfg.D
        if scheme == "symmetric-2rx":
            if abs(cfg.memories[0] - cfg.memories[1]) > 1e-9:
                raise ConfigError("symmetric-2rx requires equal cache sizes")
            M_param = cfg.memories[0]
            nominal = two_rx_symmetric_rate(d1, d2, F, D, M_param)
            K0, t, layout_M = 2, 1, M_param
        else:
            if cfg.memories[1] > 1e-12:
                raise ConfigError(f"{scheme} requires an empty cache at receiver 2")
            M_param = cfg.memories[0] / 2.0
            if scheme == "separate-asym-2rx":
                nominal = two_rx_separate_asym_rate(d1, d2, F, D, M_param)
            else:
                nominal, _ = two_rx_joint_rate(d1, d2, F, D, M_param)
            K0, t, layout_M = 1, 1, cfg.memories[0]
    else:  # general
        if params is not None:
            K0, t = params.K0, params.t
            _, layout_M = _equal_cache_pattern(cfg)
        else:
            K0, layout_M = _equal_cache_pattern(cfg)
            if K0 == 0:
                K0 = cfg.K  # no caches: plain time sharing via the same machinery
            t = None
        if t is None:
            best = best_phase_lp_rate(cfg, K0, layout_M)
            t, nominal = best.t, best.rate
        else:
            nominal = phase_lp_max_rate(cfg, K0, layout_M, t).rate

    rate_sim = backoff * nominal
    force_zero = scheme == "separate-asym-2rx"
    fit = max_min_slack_assignment(cfg, K0, layout_M, t, rate_sim, force_zero)
    if cfg.n is not None:
        # second pass: spread the backoff margin in units of per-constraint
        # channel-noise standard deviation (sigma ~ F * sqrt(beta n d (1-d)))
        weights = {}
        for p in range(1, cfg.K + 1):
            for j in range(p, cfg.K + 1):
                dj = cfg.delta(j)
                var = max(fit.beta[p - 1] * cfg.n * dj * (1.0 - dj), 1.0)
                weights[(p, j)] = cfg.F * math.sqrt(var) / cfg.n
        fit = max_min_slack_assignment(cfg, K0, layout_M, t, rate_sim, force_zero, weights)
    m_eff = fit.cached_rate_per_fragment * cfg.D * math.comb(K0 - 1, t - 1)
    sched_params = SchemeParameters(K0=K0, t=t, beta=fit.beta, piggyback=fit.piggyback)
    n = cfg.n
    return SchemePlan(
        scheme=scheme,
        backoff=backoff,
        cfg_sim=replace(cfg, rates=(rate_sim,) * cfg.D),
        rates_nominal=(nominal,) * cfg.D,
        params=sched_params,
        layout_memory=m_eff,
        K0=K0,
        t=t,
        min_slack_bits=(fit.slack * n if n is not None else None),
    )


# ---------------------------------------------------------------------------
# Single trial
# ---------------------------------------------------------------------------


def _item_known_values(item, receiver, caches: CacheContents, store, layout):
    """Bit values of an item the receiver can reproduce without the channel.

    Returns (values, mask) over the padded item; padding bits are known
    zeros.  XOR groups are reproducible only when every constituent is."""
    nb = item.padded_bits
    vals = np.zeros(nb, dtype=np.uint8)
    mask = np.zeros(nb, dtype=bool)

    def piece_bits(d, i):
        if caches.has_piece(receiver, d, i):
            return caches.piece(receiver, d, i)
        rec = store.get((d, i))
        if rec is not None and rec[1].all():
            return rec[0]
        return None

    if item.kind == "xor-group":
        acc = np.zeros(nb, dtype=np.uint8)
        for (d, i, a, b) in item.constituents:
            piece = piece_bits(d, i)
            if piece is None:
                return vals, mask  # at least one constituent unknown
            padded = np.zeros(nb, dtype=np.uint8)
            padded[: b - a] = piece[a:b]
            acc ^= padded
        return acc, np.ones(nb, dtype=bool)

    pos = 0
    for (d, i, a, b) in item.constituents:
        ln = b - a
        full = piece_bits(d, i)
        if full is not None:
            vals[pos : pos + ln] = full[a:b]
            mask[pos : pos + ln] = True
        else:
            rec = store.get((d, i))
            if rec is not None and rec[1][a:b].all():
                vals[pos : pos + ln] = rec[0][a:b]
                mask[pos : pos + ln] = True
        pos += ln
    mask[pos:] = True  # zero padding
    return vals, mask


def _store_write(store, layout, d, i, a, b, bits):
    rec = store.get((d, i))
    if rec is None:
        ln = layout.piece_bits[i]
        rec = (np.zeros(ln, dtype=np.uint8), np.zeros(ln, dtype=bool))
        store[(d, i)] = rec
    rec[0][a:b] = bits
    rec[1][a:b] = True


def _absorb_decoded_phase(phase, flat_bits, receiver, caches, store, layout):
    """Harvest everything a decoded phase payload reveals into the store."""
    pos = 0
    for item in phase.items:
        nb = item.padded_bits
        chunk = flat_bits[pos : pos + nb]
        pos += nb
        if item.kind == "xor-group":
            unknowns = []
            acc = chunk.copy()
            for (d, i, a, b) in item.constituents:
                if caches.has_piece(receiver, d, i):
                    piece = caches.piece(receiver, d, i)
                elif (d, i) in store and store[(d, i)][1].all():
                    piece = store[(d, i)][0]
                else:
                    unknowns.append((d, i, a, b))
                    continue
                padded = np.zeros(nb, dtype=np.uint8)
                padded[: b - a] = piece[a:b]
                acc ^= padded
            if len(unknowns) == 1:  # strip the known t, keep the missing one
                d, i, a, b = unknowns[0]
                _store_write(store, layout, d, i, a, b, acc[: b - a])
        else:
            off = 0
            for (d, i, a, b) in item.constituents:
                _store_write(store, layout, d, i, a, b, chunk[off : off + (b - a)])
                off += b - a


def _assemble_message(receiver, demand, caches, store, layout, library):
    d = demand[receiver - 1]
    for i in range(layout.tau + 1):
        ln = layout.piece_bits[i]
        if ln == 0:
            continue
        off = layout.piece_offset(i)
        truth = library[d - 1][off : off + ln]
        if caches.has_piece(receiver, d, i):
            got = caches.piece(receiver, d, i)
        else:
            rec = store.get((d, i))
            if rec is None or not rec[1].all():
                return False
            got = rec[0]
        if not np.array_equal(got, truth):
            return False
    return True


def _run_xor_trial(plan: SchemePlan, demand, seed) -> list[bool]:
    cfg = plan.cfg_sim
    base = seed_material(seed)
    library = draw_library(cfg, base)
    layout = sub_message_layout(cfg, plan.K0, plan.t, plan.layout_memory)
    caches = build_caches(cfg, library, layout)
    schedule = build_schedule(cfg, plan.params, layout, demand, library, caches)

    F = cfg.F
    phase_blocks = []
    payload_arrays = []
    offsets = [0]
    for p, phase in enumerate(schedule.phases, start=1):
        count = phase.budget_uses
        bits = (
            np.concatenate([it.bits for it in phase.items])
            if phase.items
            else np.zeros(0, dtype=np.uint8)
        )
        blocks = bits.reshape(-1, F)
        phase_blocks.append(blocks)
        if count > 0:
            if blocks.shape[0] > 0:
                payload_arrays.append(codec.encode_payloads(blocks, count, p, base))
            else:
                payload_arrays.append(np.zeros((count, F), dtype=np.uint8))
        else:
            payload_arrays.append(np.zeros((0, F), dtype=np.uint8))
        offsets.append(offsets[-1] + count)

    total_uses = offsets[-1]
    realization = (
        transmit(np.vstack(payload_arrays), cfg.deltas, base) if total_uses else None
    )

    flags = []
    for k in range(1, cfg.K + 1):
        store: dict = {}
        for p in range(1, k + 1):
            phase = schedule.phases[p - 1]
            blocks = phase_blocks[p - 1]
            B = blocks.shape[0]
            if B == 0:
                continue
            bit_pos = 0
            phase_vals = np.zeros(B * F, dtype=np.uint8)
            phase_mask = np.zeros(B * F, dtype=bool)
            for item in phase.items:
                v, m = _item_known_values(item, k, caches, store, layout)
                nb = item.padded_bits
                phase_vals[bit_pos : bit_pos + nb] = v
                phase_mask[bit_pos : bit_pos + nb] = m
                bit_pos += nb
            known_blocks = phase_mask.reshape(B, F).all(axis=1)
            vals_blocks = phase_vals.reshape(B, F)
            known = {int(b): vals_blocks[b] for b in np.flatnonzero(known_blocks)}
            if realization is None:
                idx_local = np.zeros(0, dtype=np.int64)
                payloads = np.zeros((0, F), dtype=np.uint8)
            else:
                span = np.arange(offsets[p - 1], offsets[p])
                keep = ~realization.erased[k - 1, span]
                idx_local = np.flatnonzero(keep)
                payloads = realization.inputs[span[keep]]
            result = codec.decode_arrays(idx_local, payloads, B, p, base, known)
            if result.ok:
                _absorb_decoded_phase(
                    phase, result.blocks.reshape(-1), k, caches, store, layout
                )
        flags.append(_assemble_message(k, demand, caches, store, layout, library))
    return flags


def _run_common_trial(plan: SchemePlan, demand, seed) -> list[bool]:
    cfg = plan.cfg_sim
    if len(set(demand)) != 1:
        raise ConfigError("common-demand scheme needs identical demand entries")
    base = seed_material(seed)
    n = cfg.require_n()
    library = draw_library(cfg, base)
    caches = build_prefix_caches(cfg, library, plan.allocation_array())
    d_star = demand[0]
    msg = library[d_star - 1]
    msg_bits = len(msg)
    if msg_bits == 0:
        return [True] * cfg.K
    F = cfg.F
    pad = (-msg_bits) % F
    blocks = np.concatenate([msg, np.zeros(pad, np.uint8)]).reshape(-1, F)
    B = blocks.shape[0]
    payloads = codec.encode_payloads(blocks, n, 1, base)
    realization = transmit(payloads, cfg.deltas, base)
    flags = []
    for k in range(1, cfg.K + 1):
        prefix = caches.prefix(k, d_star)
        p_bits = prefix.size
        known = {}
        for b in range(B):
            real_end = min((b + 1) * F, msg_bits)
            # block known when its real bits sit inside the prefix (the
            # padding tail is known zeros for everyone)
            if real_end <= p_bits or b * F >= msg_bits:
                v = np.zeros(F, dtype=np.uint8)
                lo, hi = b * F, min(real_end, p_bits)
                if hi > lo:
                    v[: hi - lo] = prefix[lo:hi]
                known[b] = v
        idx = realization.received_indices(k)
        result = codec.decode_arrays(idx, realization.inputs[idx], B, 1, base, known)
        if not result.ok:
            flags.append(False)
            continue
        flags.append(np.array_equal(result.blocks.reshape(-1)[:msg_bits], msg))
    return flags


def _plan_from_parameters(cfg: SystemConfig, scheme: str, params: SchemeParameters) -> SchemePlan:
    """Honor explicitly supplied scheme parameters verbatim at cfg.rates."""
    params.validate(cfg.K)
    _, layout_M = _equal_cache_pattern(cfg)
    return SchemePlan(
        scheme=scheme,
        backoff=1.0,
        cfg_sim=cfg,
        rates_nominal=cfg.rates,
        params=params,
        layout_memory=layout_M,
        K0=params.K0,
        t=params.t,
    )


def run_trial(cfg: SystemConfig, scheme: str, params, demand, seed) -> list[bool]:
    """One end-to-end delivery for one demand tuple.

    ``params`` is a SchemePlan (see plan_scheme), an explicit
    SchemeParameters (used verbatim at the config rates), or None for
    nominal-rate planning.  Returns per-receiver success flags; decode
    failure is a result, never an exception.
    """
    if isinstance(params, SchemePlan):
        plan = params
    elif isinstance(params, SchemeParameters) and scheme != "common-demand":
        plan = _plan_from_parameters(cfg, scheme, params)
    else:
        plan = plan_scheme(cfg, scheme, 1.0, params)
    demand = validate_demand(demand, cfg.K, cfg.D)
    if not cfg.demand_set.contains(demand, cfg.K, cfg.D):
        raise ConfigError(f"demand {demand} is not in the feasible set")
    if plan.scheme == "common-demand":
        return _run_common_trial(plan, demand, seed)
    return _run_xor_trial(plan, demand, seed)


# ---------------------------------------------------------------------------
# Error-probability estimation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SimulationReport:
    scheme: str
    backoff: float
    trials: int
    n: int
    demand_mode: str
    demands: tuple[tuple[int, ...], ...]
    receiver_failures: tuple[tuple[int, ...], ...]  # [demand][receiver]
    union_failures: int
    pe_hat: float
    wilson_lo: float
    wilson_hi: float
    base_seed: int
    rates_nominal: tuple[float, ...]
    rates_sim: tuple[float, ...]
    beta: tuple[float, ...] | None
    piggyback: tuple[tuple[float, ...], ...] | None
    min_slack_bits: float | None
    codec_slack_packets: int
    elapsed_s: float
    config: dict

    def max_individual_failure_rate(self) -> float:
        worst = 0
        for row in self.receiver_failures:
            worst = max(worst, max(row))
        return worst / self.trials if self.trials else 0.0

    def to_dict(self) -> dict:
        return {
            "scheme": self.scheme,
            "backoff": self.backoff,
            "trials": self.trials,
            "n": self.n,
            "demand_mode": self.demand_mode,
            "demands": [list(d) for d in self.demands],
            "receiver_failures": [list(r) for r in self.receiver_failures],
            "union_failures": self.union_failures,
            "pe_hat": self.pe_hat,
            "wilson_lo": self.wilson_lo,
            "wilson_hi": self.wilson_hi,
            "base_seed": self.base_seed,
            "rates_nominal": list(self.rates_nominal),
            "rates_sim": list(self.rates_sim),
            "beta": list(self.beta) if self.beta is not None else None,
            "piggyback": [list(r) for r in self.piggyback]
            if self.piggyback is not None
            else None,
            "min_slack_bits": self.min_slack_bits,
            "codec_slack_packets": self.codec_slack_packets,
            "elapsed_s": self.elapsed_s,
            "config": self.config,
        }


def _default_threads() -> int:
    try:
        return max(1, int(os.environ.get("CACHEBC_THREADS", "1")))
    except ValueError:
        return 1


def estimate_pe(
    cfg: SystemConfig,
    scheme: str,
    params=None,
    backoff: float = 0.9,
    trials: int = 100,
    seed: int = 0,
    demand_cap: int = DEFAULT_DEMAND_CAP,
    threads: int | None = None,
) -> SimulationReport:
    """Estimate the union error probability over the feasible demand set.

    All demand tuples are enumerated when the feasible set is no larger than
    ``demand_cap``; otherwise ``demand_cap`` tuples are sampled uniformly
    (with replacement) once per experiment.  Run (demand index di, trial j)
    is seeded by (seed, di, j); trial j fails when any receiver fails for
    any demand in that trial.
    """
    if trials < 1:
        raise ConfigError("trials must be >= 1")
    t0 = time.perf_counter()
    plan = params if isinstance(params, SchemePlan) else plan_scheme(cfg, scheme, backoff, params)
    size = cfg.demand_set.size(cfg.K, cfg.D)
    if size <= demand_cap:
        demands = list(cfg.demand_set.iter_tuples(cfg.K, cfg.D))
        mode = "enumerated"
    else:
        rng = np.random.default_rng(np.random.SeedSequence([seed, 0xDE]))
        demands = [
            tuple(int(x) for x in rng.integers(1, cfg.D + 1, size=cfg.K))
            for _ in range(demand_cap)
        ]
        mode = "sampled"

    jobs = [(di, j) for j in range(trials) for di in range(len(demands))]

    def one(job):
        di, j = job
        return job, run_trial(cfg, scheme, plan, demands[di], [seed, di, j])

    workers = threads if threads is not None else _default_threads()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(one, jobs))
    else:
        results = [one(job) for job in jobs]

    fail_counts = [[0] * cfg.K for _ in demands]
    union_fail = [False] * trials
    for (di, j), flags in results:
        for k, ok in enumerate(flags):
            if not ok:
                fail_counts[di][k] += 1
                union_fail[j] = True
    union_failures = sum(union_fail)
    pe_hat = union_failures / trials
    lo, hi = wilson_interval(union_failures, trials)
    return SimulationReport(
        scheme=plan.scheme,
        backoff=plan.backoff,
        trials=trials,
        n=cfg.require_n(),
        demand_mode=mode,
        demands=tuple(demands),
        receiver_failures=tuple(tuple(r) for r in fail_counts),
        union_failures=union_failures,
        pe_hat=pe_hat,
        wilson_lo=lo,
        wilson_hi=hi,
        base_seed=seed,
        rates_nominal=plan.rates_nominal,
        rates_sim=plan.cfg_sim.rates,
        beta=plan.params.beta if plan.params else None,
        piggyback=plan.params.piggyback if plan.params else None,
        min_slack_bits=plan.min_slack_bits,
        codec_slack_packets=codec.DEFAULT_RANK_SLACK,
        elapsed_s=time.perf_counter() - t0,
        config=config_to_dict(cfg),
    )


# ---------------------------------------------------------------------------
# Sweeps and audits
# ---------------------------------------------------------------------------

SWEEP_FIELDS = ("M", "scheme", "R_analytical", "pe_hat", "ci_lo", "ci_hi", "n", "trials", "seed")

_SWEEP_MEMORIES = {
    "symmetric-2rx": lambda M: (M, M),
    "separate-asym-2rx": lambda M: (2 * M, 0.0),
    "joint-2rx": lambda M: (2 * M, 0.0),
}


def sweep(
    cfg: SystemConfig,
    schemes,
    memory_grid,
    simulate: bool = False,
    backoff: float = 0.9,
    trials: int = 50,
    seed: int = 0,
    demand_cap: int = DEFAULT_DEMAND_CAP,
) -> list[dict]:
    """Tradeoff curves over a cache-size grid for the two-receiver schemes.

    Grid parameter M is the per-receiver budget of the equal-cache scheme;
    the asymmetric schemes concentrate the same total (2M) at receiver 1.
    Out-of-regime points report R_analytical = NaN.  Simulation columns stay
    empty unless ``simulate`` is set.
    """
    if cfg.K != 2:
        raise ConfigError("sweep covers the two-receiver schemes; K must be 2")
    d1, d2, F, D = cfg.delta(1), cfg.delta(2), cfg.F, cfg.D
    rows = []
    for M in memory_grid:
        for scheme in schemes:
            if scheme not in _SWEEP_MEMORIES:
                raise ConfigError(f"sweep supports {sorted(_SWEEP_MEMORIES)}, got {scheme!r}")
            try:
                if scheme == "symmetric-2rx":
                    R = two_rx_symmetric_rate(d1, d2, F, D, M)
                elif scheme == "separate-asym-2rx":
                    R = two_rx_separate_asym_rate(d1, d2, F, D, M)
                else:
                    R = two_rx_joint_rate(d1, d2, F, D, M)[0]
            except OutOfRegimeError:
                R = float("nan")
            row = {
                "M": float(M),
                "scheme": scheme,
                "R_analytical": R,
                "pe_hat": "",
                "ci_lo": "",
                "ci_hi": "",
                "n": cfg.n if cfg.n is not None else "",
                "trials": "",
                "seed": seed,
            }
            if simulate and not math.isnan(R):
                cfg_row = replace(cfg, memories=_SWEEP_MEMORIES[scheme](float(M)))
                rep = estimate_pe(
                    cfg_row,
                    scheme,
                    backoff=backoff,
                    trials=trials,
                    seed=seed,
                    demand_cap=demand_cap,
                )
                row.update(
                    pe_hat=rep.pe_hat, ci_lo=rep.wilson_lo, ci_hi=rep.wilson_hi, trials=trials
                )
            rows.append(row)
    return rows


def sweep_to_csv(rows) -> str:
    import csv
    import io

    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=SWEEP_FIELDS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow(r)
    return buf.getvalue()


def audit_conditions(
    cfg: SystemConfig, K0: int, M: float, t: int, demand=None, library_seed: int = 0
) -> dict:
    """Cross-audit the published feasibility conditions against the
    per-phase LP oracle, and check the LP point operationally.

    Returns the two rates, their divergence, and the deterministic
    capacity-verification outcome for a schedule built at the LP optimum.
    Divergences (including an out-of-regime LP) are reported, never hidden.
    """
    printed = general_max_symmetric_rate(cfg, K0, M)
    out = {
        "K0": K0,
        "M": M,
        "t": t,
        "printed_rate": printed.rate,
        "printed_t": printed.t,
        "lp_rate": None,
        "lp_feasible": False,
        "divergence": None,
        "verify_ok": None,
    }
    try:
        lp = phase_lp_max_rate(cfg, K0, M, t)
    except OutOfRegimeError:
        out["divergence"] = printed.rate
        return out
    out["lp_rate"] = lp.rate
    out["lp_feasible"] = True
    out["divergence"] = printed.rate - lp.rate
    if cfg.n is not None:
        if demand is None:
            demand = tuple(min(k, cfg.D) for k in range(1, cfg.K + 1))
        mems = (M,) * K0 + (0.0,) * (cfg.K - K0)
        cfg_lp = replace(cfg, rates=(lp.rate,) * cfg.D, memories=mems)
        m_eff = lp.cached_rate_per_fragment * cfg.D * math.comb(K0 - 1, t - 1)
        layout = sub_message_layout(cfg_lp, K0, t, m_eff)
        library = draw_library(cfg_lp, library_seed)
        caches = build_caches(cfg_lp, library, layout)
        params = SchemeParameters(K0=K0, t=t, beta=lp.beta, piggyback=lp.piggyback)
        sched = build_schedule(cfg_lp, params, layout, demand, library, caches)
        out["verify_ok"] = verify_schedule(sched, cfg_lp, margin=1.0).ok
    return out
