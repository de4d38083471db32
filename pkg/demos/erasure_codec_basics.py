"""Rateless random-linear coding over an erasure channel, with side info.

Shows the three mechanisms the delivery simulator relies on: rateless
operation (any large-enough subset of packets decodes), known-symbol
elimination (cached blocks shrink the linear system), and the rank slack
needed by random GF(2) coefficients.
"""

import numpy as np

from cachebc import codec, transmit

rng = np.random.default_rng(4)
F, B = 16, 200
blocks = rng.integers(0, 2, size=(B, F), dtype=np.uint8)

print("=" * 72)
print(f"{B} source blocks of {F} bits, random linear combinations per packet")
print("=" * 72)

count = 420
payloads = codec.encode_payloads(blocks, count, 1, seed=99)
real = transmit(payloads, [0.5], seed=123)
idx = real.received_indices(1)
print(f"\nsent {count} packets, receiver kept {len(idx)} after 50% erasures")

res = codec.decode_arrays(idx, real.inputs[idx], B, 1, 99)
print(f"decode without side information: ok={res.ok}")
assert res.ok and np.array_equal(res.blocks, blocks)

known = {i: blocks[i] for i in range(150)}
res2 = codec.decode_arrays(idx[:90], real.inputs[idx[:90]], B, 1, 99, known)
print(f"decode of 50 unknowns from 90 packets with 150 known blocks: ok={res2.ok}")

print("\nrank slack: probability that u+e random packets reach rank u")
for u in (32, 256):
    for extra in (0, 8, 32):
        hits = 0
        for seed in range(300):
            A = codec.coefficient_rows(seed, 0, u + extra, u)
            x, _ = codec.solve_gf2(A, np.zeros((u + extra, 1), np.uint8))
            hits += x is not None
        print(f"  u={u:4d}, extra={extra:2d}: {hits / 300:.3f}")
print("\n32 extra packets push the failure probability below 1e-9; the")
print("simulation budgets this inside its rate backoff and reports it.")
