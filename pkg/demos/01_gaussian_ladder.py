"""Discretize a Gaussian pair and watch the entropy ladder climb.

The exhaustion keeps the tail of N(1,1) below e^(-m^2-1)/m, the dyadic
partition refines at every depth, and H(nu^m | mu^m) increases towards the
closed form H(N(0,1) | N(1,1)) = 1/2.
"""
from sanovlab import Gaussian, IntervalSpace, build_exhaustion, build_sequence, entropy_ladder
from sanovlab.metric_space import tail_budget

line = IntervalSpace()
mu, nu = Gaussian(1.0, 1.0), Gaussian(0.0, 1.0)
depth = 8

ex = build_exhaustion(mu, depth, line)
seq = build_sequence(line, ex, depth)

print(" m   compact K_m            tail        budget      cells  good")
for m in seq.depths:
    K = ex.compact(m)
    part = seq[m]
    print(f"{m:2d}   [{K.lo:7.3f}, {K.hi:7.3f}]   {ex.tail(m):.3e}   {tail_budget(m):.3e}"
          f"   {len(part):5d}  {part.good_count:4d}")

lad = entropy_ladder(nu, mu, seq)
print("\n m   H(nu^m | mu^m)   gap to 1/2")
for m, h in zip(lad.depths, lad.values):
    print(f"{m:2d}   {h:.10f}     {0.5 - h:.3e}")
print("monotone:", lad.is_monotone())
