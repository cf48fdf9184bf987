#!/usr/bin/env python3
"""Tour of the fixed-point carriers every quantized stage is built on.

Shows how real values map onto integers with a power-of-two scale, what
saturation does at the representable boundary, and why the right-shift
rescale is the only division the integer pipeline ever needs.
"""

import numpy as np

from mrc import FixedScalar, dequantize, quantize, rescale_shift

print("=" * 64)
print("Quantization: real -> integer * 2^exponent")
print("=" * 64)

for x in (0.0, 0.3, -0.725, 0.999, 1.0):
    s = quantize(x, 8, -7)
    print(f"  quantize({x:+.3f}, bits=8, exp=-7) -> value {s.value:+4d} "
          f"(back: {dequantize(s):+.5f})")
print("  note: +1.0 saturates at 127, the price of two's complement")

print()
print("Round-trip error is bounded by half an ulp of the scale:")
rng = np.random.default_rng(0)
worst = 0.0
for x in rng.uniform(-0.9, 0.9, 10000):
    err = abs(dequantize(quantize(x, 8, -7)) - x)
    worst = max(worst, err)
print(f"  worst |x - roundtrip(x)| over 10k draws: {worst:.6f} "
      f"(bound {2.0 ** -8:.6f})")

print()
print("=" * 64)
print("Rescaling by right shift (round-half-up)")
print("=" * 64)
s = FixedScalar(1000, 16, -10)
for shift in (3, 4, 5):
    out = rescale_shift(s, 8, shift)
    print(f"  1000 * 2^-10 >> {shift} -> {out.value:>3d} * 2^{out.exponent} "
          f"= {dequantize(out):.4f}  (exact {dequantize(s):.4f})")
print("  the exponent grows with the shift, so the value is preserved")
print("  up to the rounding of the dropped bits.")
clipped = rescale_shift(s, 8, 1)
print(f"  narrowing without enough shift saturates: 1000 >> 1 -> "
      f"{clipped.value} (8-bit max)")
