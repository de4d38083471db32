"""Caching-phase construction: message splitting and cache filling.

Messages are bit arrays of length floor(n * R).  For the subset-caching
scheme each message splits into tau = C(K0, t) cached fragments (one per
size-t subset of the cached receivers, in lexicographic subset order) plus
one uncached remainder.  Fragment bit lengths are floors of n * rate; the
remainder absorbs the rounding slack so the fragments partition the message
exactly.  For transmission each fragment is padded with zeros up to a
multiple of F so payload items align to codec blocks; caches store the
unpadded bits (padding is known to everyone for free).

The caching phase is error-free by assumption, so placement is exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from ._seeding import LIBRARY_STREAM, derived_rng
from .model import ConfigError, SystemConfig
from .regions import OutOfRegimeError

__all__ = [
    "CapacityError",
    "enumerate_cache_subsets",
    "SubMessageLayout",
    "sub_message_layout",
    "CacheContents",
    "build_caches",
    "build_prefix_caches",
    "validate_cache_allocation",
    "draw_library",
]


class CapacityError(ValueError):
    """Cache contents would exceed a receiver's bit budget floor(n * M_k)."""


def enumerate_cache_subsets(K0: int, t: int) -> list[tuple[int, ...]]:
    """All C(K0, t) size-t subsets of {1..K0} in lexicographic order."""
    if K0 < 1 or not 1 <= t <= max(1, K0):
        raise ConfigError(f"need 1 <= t <= K0, got t={t}, K0={K0}")
    if K0 > 1 and t > K0 - 1:
        raise ConfigError(f"t must be < K0 for K0 >= 2, got t={t}, K0={K0}")
    return list(combinations(range(1, K0 + 1), t))


def _pad_to(F: int, bits: int) -> int:
    return ((bits + F - 1) // F) * F if bits else 0


@dataclass(frozen=True)
class SubMessageLayout:
    """How every message splits into fragments, identically across messages.

    ``subsets[i]`` is the receiver subset caching fragment i (0-based,
    i < tau); fragment ``tau`` is the uncached remainder with an empty
    subset.  ``piece_bits`` are unpadded lengths; ``padded_piece_bits`` are
    rounded up to multiples of F for codec alignment.
    """

    K0: int
    t: int
    tau: int
    F: int
    n: int
    subsets: tuple[tuple[int, ...], ...]
    piece_bits: tuple[int, ...]
    padded_piece_bits: tuple[int, ...]
    cached_rate: float
    uncached_rate: float

    @property
    def message_bits(self) -> int:
        return sum(self.piece_bits)

    @property
    def rounding_slack_bits(self) -> int:
        """Padding overhead per message, reported rather than hidden."""
        return sum(self.padded_piece_bits) - self.message_bits

    def piece_offset(self, i: int) -> int:
        return sum(self.piece_bits[:i])

    def pieces_cached_at(self, k: int) -> list[int]:
        return [i for i, s in enumerate(self.subsets) if k in s]

    def subset_index(self, receivers) -> int:
        """Fragment index whose caching subset equals ``receivers``."""
        key = tuple(sorted(receivers))
        try:
            return self.subsets.index(key)
        except ValueError:
            raise KeyError(f"{key} is not a caching subset of this layout") from None


def sub_message_layout(cfg: SystemConfig, K0: int, t: int, M: float) -> SubMessageLayout:
    """Build the fragment layout for equal message rates and the equal-cache
    pattern (M at receivers 1..K0).

    Cached fragments have rate M / (D * C(K0-1, t-1)) each; the remainder has
    rate R - M*K0/(D*t), which must be nonnegative (regime requirement).
    """
    n = cfg.require_n()
    R = cfg.equal_rate()
    if M < 0:
        raise ConfigError("M must be >= 0")
    subsets = tuple(enumerate_cache_subsets(K0, t)) if K0 >= 1 else ()
    tau = len(subsets)
    r_c = M / (cfg.D * math.comb(K0 - 1, t - 1))
    r_u = R - M * K0 / (cfg.D * t)
    if r_u < -1e-12:
        raise OutOfRegimeError(
            f"uncached rate would be negative: R={R}, M*K0/(D*t)={M * K0 / (cfg.D * t)}"
        )
    message_bits = math.floor(n * R)
    frag = math.floor(n * r_c)
    if frag * tau > message_bits:  # guards pathological float rounding
        frag = message_bits // max(tau, 1)
    piece_bits = tuple([frag] * tau + [message_bits - frag * tau])
    padded = tuple(_pad_to(cfg.F, b) for b in piece_bits)
    return SubMessageLayout(
        K0=K0,
        t=t,
        tau=tau,
        F=cfg.F,
        n=n,
        subsets=subsets + ((),),
        piece_bits=piece_bits,
        padded_piece_bits=padded,
        cached_rate=r_c,
        uncached_rate=max(r_u, 0.0),
    )


@dataclass
class CacheContents:
    """Per-receiver cached bits.

    ``subset`` mode keys entries by (message, fragment); ``prefix`` mode keys
    by message and stores the first floor(n * M_{k,d}) bits.
    """

    mode: str
    K: int
    entries: tuple[dict, ...]

    def bits_at(self, k: int) -> int:
        return int(sum(v.size for v in self.entries[k - 1].values()))

    def has_piece(self, k: int, d: int, i: int) -> bool:
        return (d, i) in self.entries[k - 1]

    def piece(self, k: int, d: int, i: int) -> np.ndarray:
        return self.entries[k - 1][(d, i)]

    def prefix(self, k: int, d: int) -> np.ndarray:
        return self.entries[k - 1].get(d, np.zeros(0, dtype=np.uint8))


def _check_library(cfg: SystemConfig, library, expected_bits) -> None:
    if len(library) != cfg.D:
        raise ConfigError(f"library must hold D={cfg.D} messages")
    for d, w in enumerate(library, start=1):
        if len(w) != expected_bits[d - 1]:
            raise ConfigError(
                f"message {d} has {len(w)} bits, expected {expected_bits[d - 1]}"
            )


def build_caches(cfg: SystemConfig, library, layout: SubMessageLayout) -> CacheContents:
    """Fill receiver caches under the subset rule: receiver k stores fragment
    (d, i) for every message d exactly when k is in the fragment's subset."""
    n = cfg.require_n()
    _check_library(cfg, library, [layout.message_bits] * cfg.D)
    entries = tuple({} for _ in range(cfg.K))
    for i in range(layout.tau):
        off = layout.piece_offset(i)
        ln = layout.piece_bits[i]
        for k in layout.subsets[i]:
            for d in range(1, cfg.D + 1):
                entries[k - 1][(d, i)] = np.asarray(library[d - 1][off : off + ln])
    for k in range(1, cfg.K + 1):
        total = int(sum(v.size for v in entries[k - 1].values()))
        budget = math.floor(n * cfg.memory(k))
        if total > budget:
            raise CapacityError(
                f"receiver {k} cache needs {total} bits but budget is {budget}"
            )
    return CacheContents(mode="subset", K=cfg.K, entries=entries)


def validate_cache_allocation(cfg: SystemConfig, allocation, tol: float = 1e-9) -> np.ndarray:
    alloc = np.asarray(allocation, dtype=float)
    if alloc.shape != (cfg.K, cfg.D):
        raise ConfigError(f"allocation must have shape ({cfg.K}, {cfg.D})")
    if (alloc < -1e-12).any():
        raise ConfigError("allocation entries must be >= 0")
    sums = alloc.sum(axis=1)
    for k in range(cfg.K):
        if sums[k] > cfg.memories[k] + tol:
            raise ConfigError(
                f"allocation row {k + 1} sums to {sums[k]} > memory {cfg.memories[k]}"
            )
    return alloc


def build_prefix_caches(cfg: SystemConfig, library, allocation) -> CacheContents:
    """Prefix placement for the common-demand scheme: receiver k stores the
    first floor(n * M_{k,d}) bits of each message."""
    n = cfg.require_n()
    alloc = validate_cache_allocation(cfg, allocation)
    entries = tuple({} for _ in range(cfg.K))
    for k in range(1, cfg.K + 1):
        total = 0
        for d in range(1, cfg.D + 1):
            bits = min(math.floor(n * alloc[k - 1, d - 1]), len(library[d - 1]))
            if bits > 0:
                entries[k - 1][d] = np.asarray(library[d - 1][:bits])
                total += bits
        budget = math.floor(n * cfg.memory(k))
        if total > budget:
            raise CapacityError(
                f"receiver {k} cache needs {total} bits but budget is {budget}"
            )
    return CacheContents(mode="prefix", K=cfg.K, entries=entries)


def draw_library(cfg: SystemConfig, seed, message_bits=None) -> list[np.ndarray]:
    """Uniform library draw: message d gets floor(n * R_d) fair bits."""
    n = cfg.require_n()
    if message_bits is None:
        message_bits = [math.floor(n * r) for r in cfg.rates]
    rng = derived_rng(seed, LIBRARY_STREAM)
    return [rng.integers(0, 2, size=b, dtype=np.uint8) for b in message_bits]
