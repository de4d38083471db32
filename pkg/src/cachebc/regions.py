"""Achievable-rate and capacity-region computations.

Closed forms for the two-receiver tradeoffs, the K-receiver feasibility
conditions of the subset-caching scheme, a first-principles per-phase LP
oracle for the same scheme, the time-sharing decomposition for unequal cache
sizes, and the exact membership test for the single-common-demand region.

All LPs are small and dense; they are solved in floating point (HiGHS) with a
feasibility tolerance of 1e-9.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .model import ConfigError, SystemConfig

__all__ = [
    "OutOfRegimeError",
    "DegenerateChannelError",
    "degraded_region_contains",
    "two_rx_symmetric_rate",
    "two_rx_separate_asym_rate",
    "two_rx_joint_rate",
    "general_conditions_feasible",
    "general_max_symmetric_rate",
    "GeneralConditionsResult",
    "phase_lp_max_rate",
    "PhaseLpResult",
    "max_min_slack_assignment",
    "unequal_cache_max_rate",
    "common_demand_contains",
    "common_demand_contains_lp",
    "common_demand_separate_contains",
    "no_cache_time_sharing_rate",
]

TOL = 1e-9


class OutOfRegimeError(ValueError):
    """The requested point lies outside the regime where the scheme is defined."""


class DegenerateChannelError(ValueError):
    """A receiver with erasure probability 1 was asked to decode positive rate."""


# ---------------------------------------------------------------------------
# Degraded message sets
# ---------------------------------------------------------------------------


def degraded_region_contains(
    cfg: SystemConfig,
    rates_by_level,
    tol: float = TOL,
    raise_on_degenerate: bool = False,
) -> bool:
    """Membership test for the degraded message-set capacity region.

    ``rates_by_level[k-1]`` is the rate that must be decodable by receivers
    k..K.  The tuple is inside the region iff
    ``sum_k r_k / (F (1 - delta_k)) <= 1``.  A receiver with erasure
    probability 1 cannot carry positive rate: that yields False, or a
    DegenerateChannelError when ``raise_on_degenerate`` is set.
    """
    r = [float(x) for x in rates_by_level]
    if len(r) != cfg.K:
        raise ConfigError(f"rates_by_level must have K={cfg.K} entries")
    if any(x < 0 for x in r):
        raise ConfigError("rates_by_level entries must be >= 0")
    total = 0.0
    for k in range(1, cfg.K + 1):
        rk = r[k - 1]
        dk = cfg.delta(k)
        if dk >= 1.0:
            if rk > tol:
                if raise_on_degenerate:
                    raise DegenerateChannelError(
                        f"receiver {k} has erasure probability 1 but rate {rk}"
                    )
                return False
            continue
        total += rk / (cfg.F * (1.0 - dk))
    return total <= 1.0 + tol


def no_cache_time_sharing_rate(cfg: SystemConfig) -> float:
    """Symmetric rate of plain time-sharing with empty caches:
    F / sum_k 1/(1-delta_k)."""
    if any(d >= 1.0 for d in cfg.deltas):
        return 0.0
    return cfg.F / sum(1.0 / (1.0 - d) for d in cfg.deltas)


# ---------------------------------------------------------------------------
# Two-receiver tradeoffs
# ---------------------------------------------------------------------------


def _check_two_rx(delta1, delta2, F, D, M):
    if not (0.0 <= delta2 <= delta1 < 1.0):
        raise ConfigError(f"need 0 <= delta2 <= delta1 < 1, got ({delta1}, {delta2})")
    if F < 1 or D < 1:
        raise ConfigError("F and D must be positive")
    if M < 0:
        raise ConfigError("M must be >= 0")


def two_rx_symmetric_rate(delta1, delta2, F, D, M) -> float:
    """Largest symmetric rate with equal caches M at both receivers.

    Each message splits into two cached fragments of rate M/D (one per
    receiver) plus an uncached remainder; one XOR of the exchanged fragments
    is multicast.  The binding condition is

        (R - M/D) / (F(1-d1)) + (R - 2M/D) / (F(1-d2)) <= 1,

    valid while the cached fraction fits, i.e. M/R <= D/2.  Raises
    OutOfRegimeError when no rate in that regime satisfies the condition.
    """
    _check_two_rx(delta1, delta2, F, D, M)
    g1, g2 = 1.0 - delta1, 1.0 - delta2
    R = (F * g1 * g2 + (M / D) * (g2 + 2.0 * g1)) / (g1 + g2)
    if R + TOL < 2.0 * M / D:
        raise OutOfRegimeError(
            f"no rate with M/R <= D/2 satisfies the symmetric-cache condition (M={M})"
        )
    return R


def two_rx_separate_asym_rate(delta1, delta2, F, D, M) -> float:
    """Largest symmetric rate with the whole budget 2M cached at receiver 1
    and separate cache/channel coding, i.e.

        (R - 2M/D) / (F(1-d1)) + R / (F(1-d2)) <= 1.
    """
    _check_two_rx(delta1, delta2, F, D, M)
    g1, g2 = 1.0 - delta1, 1.0 - delta2
    R = (F * g1 + 2.0 * M / D) * g2 / (g1 + g2)
    if R + TOL < 2.0 * M / D:
        raise OutOfRegimeError(
            f"no rate with M/R <= D/2 satisfies the separate-coding condition (M={M})"
        )
    return R


def two_rx_joint_rate(delta1, delta2, F, D, M) -> tuple[float, float]:
    """Largest symmetric rate with budget 2M at receiver 1 and the cached
    fragment of receiver 2's demand piggybacked inside phase 1.

    Maximizes R over the phase split beta1 subject to

        R - 2M/D <= F(1-d1) beta1        (receiver 1, phase 1)
        R        <= F(1-d2) beta1        (receiver 2, phase 1)
        R - 2M/D <= F(1-d2) (1-beta1)    (receiver 2, phase 2)

    Returns (R, beta1).  The maximum of the concave upper envelope sits at
    one of the pairwise crossings, so it is evaluated exactly.
    """
    _check_two_rx(delta1, delta2, F, D, M)
    A1, A2 = F * (1.0 - delta1), F * (1.0 - delta2)
    c = 2.0 * M / D

    def envelope(beta):
        return min(A1 * beta + c, A2 * beta, A2 * (1.0 - beta) + c)

    candidates = {1.0}
    candidates.add(A2 / (A1 + A2))  # crossing of rows 1 and 3
    candidates.add(min(1.0, 0.5 + c / (2.0 * A2)))  # crossing of rows 2 and 3
    best_R, best_beta = -math.inf, 0.0
    for beta in sorted(candidates):
        beta = min(max(beta, 0.0), 1.0)
        val = envelope(beta)
        if val > best_R + 1e-15:
            best_R, best_beta = val, beta
    if best_R + TOL < c:
        raise OutOfRegimeError(
            f"no rate with M/R <= D/2 satisfies the joint-coding conditions (M={M})"
        )
    return best_R, best_beta


# ---------------------------------------------------------------------------
# K-receiver subset-caching scheme: feasibility conditions as published
# ---------------------------------------------------------------------------


def _check_k0_t(K: int, K0: int, t: int, allow_k0_1: bool = False):
    if not 1 <= K0 <= K:
        raise ConfigError(f"K0 must lie in 1..K={K}, got {K0}")
    if K0 == 1:
        if not allow_k0_1:
            raise ConfigError("K0 must be >= 2 for this operation")
        if t != 1:
            raise ConfigError("t must be 1 when K0 = 1")
    elif not 1 <= t <= K0 - 1:
        raise ConfigError(f"t must lie in 1..K0-1={K0 - 1}, got {t}")


def _as_piggyback_matrix(C, K0: int, ntail: int) -> np.ndarray:
    if C is None:
        return np.zeros((K0, ntail))
    C = np.asarray(C, dtype=float)
    if C.shape != (K0, ntail):
        raise ConfigError(f"piggyback matrix must have shape ({K0}, {ntail})")
    if (C < -1e-12).any():
        raise ConfigError("piggyback rates must be >= 0")
    return C


def general_conditions_feasible(cfg: SystemConfig, K0, t, R, M, C=None, tol=TOL) -> bool:
    """Evaluate the published closed-form feasibility conditions of the
    subset-caching scheme, exactly as stated (no phase-fraction variables).

    Cache pattern: the K0 weakest receivers hold equal caches M, the rest
    none.  ``C[k-1][ktilde-K0-1]`` are the piggyback rates.  Note these
    conditions carry no time-sharing coupling across phases; the per-phase
    LP oracle (phase_lp_max_rate) is the operational ground truth and the
    two are audited against each other.
    """
    K, D, F = cfg.K, cfg.D, cfg.F
    _check_k0_t(K, K0, t)
    if M < 0 or R < 0:
        raise ConfigError("R and M must be >= 0")
    C = _as_piggyback_matrix(C, K0, K - K0)
    r_c = M / (D * math.comb(K0 - 1, t - 1))
    tau = math.comb(K0, t)
    bulk = M * K0 / (D * t)

    def gap(k):  # cached-in-earlier-groups rate credited to phase k
        return r_c * (tau - math.comb(K0 - k, t))

    for k in range(1, K0 - t):  # k in {1 .. K0-t-1}
        if R > F * (1.0 - cfg.delta(k)) + gap(k) + tol:
            return False
        if k + 1 <= K:
            if R + C[k - 1].sum() > F * (1.0 - cfg.delta(k + 1)) + gap(k) + tol:
                return False
    for k in range(max(1, K0 - t), K0 + 1):  # k in {K0-t .. K0}
        if R > F * (1.0 - cfg.delta(k)) + bulk + tol:
            return False
        if k + 1 <= K:  # vacuous at k = K0 = K: no stronger receiver exists
            if R + C[k - 1].sum() > F * (1.0 - cfg.delta(k + 1)) + bulk + tol:
                return False
    for kt in range(K0 + 1, K + 1):
        if R - C[:, kt - K0 - 1].sum() > F * (1.0 - cfg.delta(kt)) + tol:
            return False
    return True


@dataclass(frozen=True)
class GeneralConditionsResult:
    rate: float
    t: int
    piggyback: tuple[tuple[float, ...], ...]

    def piggyback_array(self) -> np.ndarray:
        return np.array(self.piggyback, dtype=float)


def _printed_conditions_lp(cfg: SystemConfig, K0: int, t: int, M: float):
    """Rows (A_ub, b_ub) of the published conditions over x = [R, C...]."""
    K, D, F = cfg.K, cfg.D, cfg.F
    ntail = K - K0
    nv = 1 + K0 * ntail
    r_c = M / (D * math.comb(K0 - 1, t - 1))
    tau = math.comb(K0, t)
    bulk = M * K0 / (D * t)

    def cidx(k, kt):
        return 1 + (k - 1) * ntail + (kt - K0 - 1)

    A, b = [], []

    def add(row, rhs):
        A.append(row)
        b.append(rhs)

    for k in range(1, K0 + 1):
        credited = (
            r_c * (tau - math.comb(K0 - k, t)) if k <= K0 - t - 1 else bulk
        )
        row = np.zeros(nv)
        row[0] = 1.0
        add(row.copy(), F * (1.0 - cfg.delta(k)) + credited)
        if k + 1 <= K:
            row2 = np.zeros(nv)
            row2[0] = 1.0
            for kt in range(K0 + 1, K + 1):
                row2[cidx(k, kt)] = 1.0
            add(row2, F * (1.0 - cfg.delta(k + 1)) + credited)
    for kt in range(K0 + 1, K + 1):
        row = np.zeros(nv)
        row[0] = 1.0
        for k in range(1, K0 + 1):
            row[cidx(k, kt)] = -1.0
        add(row, F * (1.0 - cfg.delta(kt)))
    return np.array(A), np.array(b), nv, ntail


def general_max_symmetric_rate(cfg: SystemConfig, K0, M) -> GeneralConditionsResult:
    """Maximize the symmetric rate allowed by the published conditions over
    the subset size t and the piggyback rates C >= 0.

    Tie-breaking is deterministic: the smallest t achieving the optimum, and
    the lexicographically smallest optimal C (obtained by sequential
    minimization at the fixed optimal rate).
    """
    K = cfg.K
    if not 2 <= K0 <= K:
        raise ConfigError(f"K0 must lie in 2..K={K} for the published conditions, got {K0}")
    if M < 0:
        raise ConfigError("M must be >= 0")
    best = None
    for t in range(1, K0):
        A, b, nv, ntail = _printed_conditions_lp(cfg, K0, t, M)
        c = np.zeros(nv)
        c[0] = -1.0
        res = linprog(c, A_ub=A, b_ub=b, bounds=[(0, None)] * nv, method="highs")
        if not res.success:
            continue
        R = -res.fun
        if best is None or R > best[0] + 1e-12:
            best = (R, t, A, b, nv, ntail)
    if best is None:
        raise DegenerateChannelError("published conditions infeasible at every t")
    R, t, A, b, nv, ntail = best
    # pin the rate, then minimize each piggyback rate in lexicographic order
    x_fixed = [None] * nv
    x_fixed[0] = R
    for j in range(1, nv):
        c = np.zeros(nv)
        c[j] = 1.0
        A_eq = []
        b_eq = []
        for i, v in enumerate(x_fixed):
            if v is not None:
                row = np.zeros(nv)
                row[i] = 1.0
                A_eq.append(row)
                b_eq.append(v)
        res = linprog(
            c,
            A_ub=A,
            b_ub=b + 1e-9,
            A_eq=np.array(A_eq),
            b_eq=np.array(b_eq),
            bounds=[(0, None)] * nv,
            method="highs",
        )
        x_fixed[j] = max(0.0, res.x[j]) if res.success else 0.0
    Cmat = np.array(x_fixed[1:], dtype=float).reshape(K0, ntail) if ntail else np.zeros((K0, 0))
    Cmat[np.abs(Cmat) < 1e-11] = 0.0
    return GeneralConditionsResult(
        rate=R, t=t, piggyback=tuple(tuple(row) for row in Cmat)
    )


# ---------------------------------------------------------------------------
# Per-phase LP oracle with explicit time-sharing fractions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PhaseLpResult:
    rate: float
    beta: tuple[float, ...]
    piggyback: tuple[tuple[float, ...], ...]
    K0: int
    t: int
    cached_rate_per_fragment: float  # effective r_c actually used
    slack: float = 0.0

    def piggyback_array(self) -> np.ndarray:
        K = len(self.beta)
        if self.K0 >= K:
            return np.zeros((self.K0, 0))
        return np.array(self.piggyback, dtype=float).reshape(self.K0, K - self.K0)


def _phase_lp_rows(cfg: SystemConfig, K0: int, t: int):
    """Shared constraint skeleton over x = [R, r_c, beta_1..K, C..., s].

    Per-phase, per-receiver capacity accounting: in phase k <= K0 the payload
    is the XOR groups whose weakest member is k (count ``X_k``, each of rate
    r_c), the uncached fragment (rate R - tau*r_c), and piggyback slices
    (rates C[k][.], pre-stored at receiver k so they cost it nothing, counted
    in full for every stronger receiver).  Phase kt > K0 carries whatever of
    message d_kt was not piggybacked.  Binding audiences: the phase owner,
    and the next-stronger receiver for the piggyback-loaded rows.
    """
    K, F = cfg.K, cfg.F
    ntail = K - K0
    tau = math.comb(K0, t)
    nv = 1 + 1 + K + K0 * ntail + 1
    iR, iRC = 0, 1
    iB = lambda k: 2 + (k - 1)
    iC = lambda k, kt: 2 + K + (k - 1) * ntail + (kt - K0 - 1)
    iS = nv - 1

    A, b, meta = [], [], []

    def add(row, rhs, tag=None):
        A.append(row)
        b.append(rhs)
        meta.append(tag)

    for k in range(1, K0 + 1):
        xk = math.comb(K0 - k, t)
        # unknown rate at the phase owner: R - (tau - X_k) * r_c
        row = np.zeros(nv)
        row[iR] = 1.0
        row[iRC] = -(tau - xk)
        row[iB(k)] = -F * (1.0 - cfg.delta(k))
        row[iS] = 1.0
        add(row, 0.0, (k, k))
        if k + 1 <= K:
            row = np.zeros(nv)
            row[iR] = 1.0
            row[iRC] = -(tau - xk)
            for kt in range(K0 + 1, K + 1):
                row[iC(k, kt)] = 1.0
            row[iB(k)] = -F * (1.0 - cfg.delta(k + 1))
            row[iS] = 1.0
            add(row, 0.0, (k, k + 1))
    for kt in range(K0 + 1, K + 1):
        row = np.zeros(nv)
        row[iR] = 1.0
        for k in range(1, K0 + 1):
            row[iC(k, kt)] = -1.0
        row[iB(kt)] = -F * (1.0 - cfg.delta(kt))
        row[iS] = 1.0
        add(row, 0.0, (kt, kt))
        # leftover payload of message d_kt must be nonnegative
        row = np.zeros(nv)
        row[iR] = -1.0
        for k in range(1, K0 + 1):
            row[iC(k, kt)] = 1.0
        add(row, 0.0)
    # uncached fragment nonnegative: R >= tau * r_c
    row = np.zeros(nv)
    row[iR] = -1.0
    row[iRC] = tau
    add(row, 0.0)
    # piggyback slices must come from distinct cached bits: for every set A
    # of phases, sum_{k in A} C[k][kt] <= r_c * #{fragments cached at some
    # k in A}.  Singletons suffice when t = 1 (fragment sets are disjoint).
    if ntail:
        sizes = range(1, 2) if t == 1 else range(1, K0 + 1)
        for a in sizes:
            cap = float(tau - math.comb(K0 - a, t))
            for subset in itertools.combinations(range(1, K0 + 1), a):
                for kt in range(K0 + 1, K + 1):
                    row = np.zeros(nv)
                    for k in subset:
                        row[iC(k, kt)] = 1.0
                    row[iRC] = -cap
                    add(row, 0.0)
    A_eq = [np.zeros(nv)]
    for k in range(1, K + 1):
        A_eq[0][iB(k)] = 1.0
    return (
        np.array(A),
        np.array(b),
        np.array(A_eq),
        np.array([1.0]),
        nv,
        {
            "R": iR,
            "rc": iRC,
            "B": iB,
            "C": iC,
            "S": iS,
            "ntail": ntail,
            "tau": tau,
            "meta": meta,
        },
    )


def _extract_phase_result(cfg, K0, t, x, ix, slack=0.0) -> PhaseLpResult:
    K = cfg.K
    ntail = ix["ntail"]
    beta = tuple(max(0.0, float(x[ix["B"](k)])) for k in range(1, K + 1))
    if ntail:
        C = np.array(
            [[x[ix["C"](k, kt)] for kt in range(K0 + 1, K + 1)] for k in range(1, K0 + 1)]
        )
        C[np.abs(C) < 1e-11] = 0.0
    else:
        C = np.zeros((K0, 0))
    return PhaseLpResult(
        rate=float(x[ix["R"]]),
        beta=beta,
        piggyback=tuple(tuple(row) for row in C),
        K0=K0,
        t=t,
        cached_rate_per_fragment=float(x[ix["rc"]]),
        slack=slack,
    )


def phase_lp_max_rate(cfg: SystemConfig, K0, M, t) -> PhaseLpResult:
    """Maximize the symmetric rate of the subset-caching scheme by explicit
    per-phase accounting (the operational ground truth).

    The cached rate per fragment is a decision variable bounded by
    M / (D * C(K0-1, t-1)), so a cache too large for the blocklength regime
    is simply not filled completely; the returned
    ``cached_rate_per_fragment`` reports what is actually used, which keeps
    the maximum rate nondecreasing in M.
    """
    K, D = cfg.K, cfg.D
    _check_k0_t(K, K0, t, allow_k0_1=True)
    if M < 0:
        raise ConfigError("M must be >= 0")
    A, b, A_eq, b_eq, nv, ix = _phase_lp_rows(cfg, K0, t)
    rc_cap = M / (D * math.comb(K0 - 1, t - 1))
    bounds = [(0, None), (0, rc_cap)] + [(0, 1)] * cfg.K
    bounds += [(0, None)] * (K0 * ix["ntail"])
    bounds += [(0, 0)]  # slack variable pinned to zero for the max-rate LP
    c = np.zeros(nv)
    c[ix["R"]] = -1.0
    res = linprog(c, A_ub=A, b_ub=b, A_eq=A_eq, b_eq=b_eq, bounds=bounds, method="highs")
    if not res.success:
        if any(d >= 1.0 for d in cfg.deltas):
            raise DegenerateChannelError("phase LP infeasible: degenerate channel")
        raise OutOfRegimeError("phase LP infeasible")
    return _extract_phase_result(cfg, K0, t, res.x, ix)


def max_min_slack_assignment(
    cfg: SystemConfig,
    K0,
    M,
    t,
    rate,
    force_zero_piggyback: bool = False,
    weights: dict | None = None,
) -> PhaseLpResult:
    """Fix the symmetric rate and choose (beta, C, r_c) maximizing the
    minimum per-constraint slack.

    Without ``weights`` the slack is uniform in bits per channel use; with
    ``weights`` mapping (phase, audience receiver) to a scale, the
    constraint for that pair gets slack proportional to its weight (used to
    spread a rate backoff in units of channel-noise standard deviations).
    The slack may come out negative (overloaded schedule); simulation uses
    that deliberately to probe operation beyond the achievable boundary.
    ``force_zero_piggyback`` pins every C to 0, which reproduces plain
    separate-coding layering.  The result's ``slack`` is always the
    unweighted minimum slack of the chosen point, in bits per channel use.
    """
    K, D = cfg.K, cfg.D
    _check_k0_t(K, K0, t, allow_k0_1=True)
    A, b, A_eq, b_eq, nv, ix = _phase_lp_rows(cfg, K0, t)
    if weights:
        A = A.copy()
        for i, tag in enumerate(ix["meta"]):
            if tag is not None:
                A[i, ix["S"]] = max(float(weights.get(tag, 1.0)), 1e-9)
    rc_cap = M / (D * math.comb(K0 - 1, t - 1))
    tau = ix["tau"]
    if rate < tau * rc_cap - 1e-12:
        # the full cache cannot fit inside the message at this rate; cap it
        rc_cap = rate / tau if tau else 0.0
    bounds = [(rate, rate), (0, rc_cap)] + [(0, 1)] * cfg.K
    c_bound = (0, 0) if force_zero_piggyback else (0, None)
    bounds += [c_bound] * (K0 * ix["ntail"])
    bounds += [(None, None)]
    c = np.zeros(nv)
    c[ix["S"]] = -1.0
    res = linprog(c, A_ub=A, b_ub=b, A_eq=A_eq, b_eq=b_eq, bounds=bounds, method="highs")
    if not res.success:
        raise OutOfRegimeError("slack assignment LP infeasible")
    # unweighted per-row slack of the solution point
    x0 = res.x.copy()
    x0[ix["S"]] = 0.0
    gaps = [
        float(b[i] - A[i] @ x0)
        for i, tag in enumerate(ix["meta"])
        if tag is not None
    ]
    return _extract_phase_result(cfg, K0, t, res.x, ix, slack=min(gaps))


def best_phase_lp_rate(cfg: SystemConfig, K0, M) -> PhaseLpResult:
    """phase_lp_max_rate maximized over the subset size t (smallest t wins ties)."""
    best = None
    ts = [1] if K0 == 1 else range(1, K0)
    for t in ts:
        try:
            res = phase_lp_max_rate(cfg, K0, M, t)
        except OutOfRegimeError:
            continue
        if best is None or res.rate > best.rate + 1e-12:
            best = res
    if best is None:
        raise OutOfRegimeError(f"phase LP infeasible for every t at K0={K0}")
    return best


# ---------------------------------------------------------------------------
# Unequal cache sizes via time sharing
# ---------------------------------------------------------------------------


def unequal_cache_max_rate(cfg: SystemConfig, memories=None) -> float:
    """Best symmetric rate for nonincreasing per-receiver cache sizes.

    Layer i (i = 1..K) runs the equal-cache scheme on the K0 = K+1-i weakest
    receivers for a fraction beta_i of the time with per-receiver memory
    (M_{K-i+1} - M_{K-i+2}) / beta_i, so layer budgets telescope to the given
    memories.  Each layer is scored by the per-phase LP oracle; the outer
    maximization over the simplex is a concave program handled by grid +
    golden-section (K = 2) or multi-start projected search (K > 2).
    """
    K = cfg.K
    mems = list(cfg.memories if memories is None else [float(m) for m in memories])
    if len(mems) != K:
        raise ConfigError(f"memories must have K={K} entries")
    for a, b in zip(mems, mems[1:]):
        if b > a + 1e-12:
            raise ConfigError(f"memories not nonincreasing: {mems}")
    mems = mems + [0.0]
    deltas_mem = [mems[K - i] - mems[K - i + 1] for i in range(1, K + 1)]  # per layer

    rate_cache: dict[tuple[int, float], float] = {}

    def layer_rate(K0: int, m: float) -> float:
        key = (K0, round(m, 12))
        if key not in rate_cache:
            rate_cache[key] = best_phase_lp_rate(cfg, K0, m).rate
        return rate_cache[key]

    def total(beta: np.ndarray) -> float:
        # a vanishing share contributes nothing; any memory assigned to it
        # is simply wasted (allowed, the rate stays monotone)
        val = 0.0
        for i in range(K):
            bi, dm = beta[i], deltas_mem[i]
            K0_i = K - i
            if bi <= 1e-12:
                continue
            val += bi * layer_rate(K0_i, dm / bi)
        return val

    if K == 2:
        # scalar concave maximization over beta_1
        def g(b1):
            return total(np.array([b1, 1.0 - b1]))

        xs = np.linspace(0.0, 1.0, 101)
        vals = [g(x) for x in xs]
        j = int(np.argmax(vals))
        lo = xs[max(0, j - 1)]
        hi = xs[min(len(xs) - 1, j + 1)]
        phi = (math.sqrt(5.0) - 1.0) / 2.0
        a_, b_ = lo, hi
        x1 = b_ - phi * (b_ - a_)
        x2 = a_ + phi * (b_ - a_)
        f1, f2 = g(x1), g(x2)
        for _ in range(120):
            if f1 < f2:
                a_, x1, f1 = x1, x2, f2
                x2 = a_ + phi * (b_ - a_)
                f2 = g(x2)
            else:
                b_, x2, f2 = x2, x1, f1
                x1 = b_ - phi * (b_ - a_)
                f1 = g(x1)
        return max(max(vals), f1, f2)

    # coarse simplex grid plus local refinement
    steps = 6
    best = -math.inf
    for comp in itertools.product(range(steps + 1), repeat=K - 1):
        if sum(comp) > steps:
            continue
        beta = np.array([c / steps for c in comp] + [(steps - sum(comp)) / steps])
        best = max(best, total(beta))
    from scipy.optimize import minimize

    for start in (np.full(K, 1.0 / K),):
        res = minimize(
            lambda x: -total(np.clip(x, 0.0, 1.0) / max(np.sum(np.clip(x, 0.0, 1.0)), 1e-12)),
            start,
            method="Nelder-Mead",
            options={"maxiter": 400, "xatol": 1e-6, "fatol": 1e-10},
        )
        x = np.clip(res.x, 0.0, 1.0)
        s = x.sum()
        if s > 1e-12:
            best = max(best, total(x / s))
    return best


# ---------------------------------------------------------------------------
# Single common demand: exact capacity region
# ---------------------------------------------------------------------------


def common_demand_contains(
    cfg: SystemConfig, rates=None, memories=None, tol: float = TOL
):
    """Exact membership test for the common-demand capacity region.

    (R_1..R_D, M_1..M_K) is inside iff per-message cache allocations
    M_{k,d} >= 0 exist with row sums within the budgets and
    R_d <= (1-delta_k) F + M_{k,d} for all k, d.  Equivalently, for every
    receiver the shortfalls sum within its budget, so the greedy witness
    M_{k,d} = max(0, R_d - (1-delta_k) F) decides membership.

    Returns (inside, witness) where witness is the greedy K x D allocation
    when inside, else None.
    """
    R = np.asarray(cfg.rates if rates is None else rates, dtype=float)
    Mk = np.asarray(cfg.memories if memories is None else memories, dtype=float)
    if R.shape != (cfg.D,) or Mk.shape != (cfg.K,):
        raise ConfigError("rates must have D entries and memories K entries")
    if (R < 0).any() or (Mk < 0).any():
        raise ConfigError("rates and memories must be >= 0")
    caps = cfg.F * (1.0 - np.asarray(cfg.deltas))
    witness = np.maximum(0.0, R[None, :] - caps[:, None])
    inside = bool((witness.sum(axis=1) <= Mk + tol).all())
    return (inside, witness) if inside else (inside, None)


def common_demand_contains_lp(cfg: SystemConfig, rates=None, memories=None, tol=1e-7) -> bool:
    """Membership via the defining linear program (independent of the greedy
    reduction): feasibility in the K*D allocation variables."""
    R = np.asarray(cfg.rates if rates is None else rates, dtype=float)
    Mk = np.asarray(cfg.memories if memories is None else memories, dtype=float)
    K, D = cfg.K, cfg.D
    caps = cfg.F * (1.0 - np.asarray(cfg.deltas))
    nv = K * D
    A, b = [], []
    for k in range(K):
        row = np.zeros(nv)
        row[k * D : (k + 1) * D] = 1.0
        A.append(row)
        b.append(Mk[k])
    lb = np.maximum(0.0, R[None, :] - caps[:, None]).reshape(-1)
    res = linprog(
        np.zeros(nv),
        A_ub=np.array(A),
        b_ub=np.array(b) + tol,
        bounds=list(zip(lb, [None] * nv)),
        method="highs",
    )
    return bool(res.success)


def common_demand_separate_contains(
    cfg: SystemConfig, rates=None, memories=None, tol: float = TOL
) -> bool:
    """Common-demand membership when cache and channel coding are separate.

    Every receiver then decodes behind the worst channel, so each must cache
    the shortfall against min_k (1-delta_k) F.
    """
    R = np.asarray(cfg.rates if rates is None else rates, dtype=float)
    Mk = np.asarray(cfg.memories if memories is None else memories, dtype=float)
    if R.shape != (cfg.D,) or Mk.shape != (cfg.K,):
        raise ConfigError("rates must have D entries and memories K entries")
    worst = cfg.F * min(1.0 - d for d in cfg.deltas)
    need = np.maximum(0.0, R - worst).sum()
    return bool((need <= Mk + tol).all())
