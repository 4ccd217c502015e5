"""Bounded-Lipschitz distances and the cost of projecting onto tags.

Moving each atom of a measure to the tag of its cell is a coupling; its mean
cost min(d, 2) bounds the BL distance from above.  With an entropy budget
alpha = H(sigma | mu) the bound (3 + 2 alpha)/m holds at every depth.
"""
import numpy as np

from sanovlab import (
    FiniteMeasure,
    IntervalSpace,
    bl_distance,
    build_exhaustion,
    build_sequence,
    relative_entropy,
)
from sanovlab.bl_metric import projection_bounds

line = IntervalSpace()

# two-point measures: the distance is min(d, 2) |p - q|
for d in (0.5, 1.5, 4.0):
    a = FiniteMeasure([0.0, d], [0.8, 0.2])
    b = FiniteMeasure([0.0, d], [0.3, 0.7])
    print(f"d={d:3.1f}  d_BL={bl_distance(a, b, line):.6f}  closed form={min(d, 2) * 0.5:.6f}")

# projection of sigma onto the tags of a partition built for mu
support = np.array([-6.0, -1.2, -0.4, 0.0, 0.3, 0.9, 1.6, 7.0])
mu = FiniteMeasure(support, [0.001, 0.12, 0.2, 0.25, 0.2, 0.14, 0.088, 0.001])
sigma = FiniteMeasure(support, np.random.default_rng(0).dirichlet(np.ones(len(support))))
alpha = relative_entropy(sigma, mu)
seq = build_sequence(line, build_exhaustion(mu, 6, line), 6)

print(f"\nalpha = H(sigma|mu) = {alpha:.4f}")
print(" m   coupling     (3+2a)/m     three-term   bad cells")
for m in seq.depths:
    d, simple, three = projection_bounds(sigma, seq[m], alpha)
    print(f"{m:2d}   {d:.6f}     {simple:.6f}     {three:.6f}     {len(seq[m].bad_cells)}")
