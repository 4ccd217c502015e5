"""Finite-n rates for a fair coin, exactly and by simulation.

First the method of types gives P(heads fraction >= 3/4) exactly; -(1/n) log P
approaches the entropy infimum with a gap below 2 log(n+1)/n.  Then a
bounded-Lipschitz ball is sampled by Monte Carlo and its empirical rate is
set against inf { H(sigma | mu) : d_BL(sigma, center) <= r }.
"""
import math
from fractions import Fraction

from sanovlab import FiniteMeasure, IntervalSpace, ball_inf_entropy, mc_rate, types_probability

coin = FiniteMeasure([0, 1], [Fraction(1, 2), Fraction(1, 2)])
target = 0.75 * math.log(1.5) + 0.25 * math.log(0.5)

print("half-space {nu(1) >= 3/4}, rate", f"{target:.6f}")
print("   n   -(1/n) log P    gap        2 log(n+1)/n")
for n in (50, 100, 200, 400):
    p = types_probability(coin, n, lambda t: t.mass(1) >= Fraction(3, 4))
    rate = -math.log(p) / n
    print(f"{n:4d}   {rate:.6f}       {rate - target:.5f}    {2 * math.log(n + 1) / n:.5f}")

line = IntervalSpace()
center = FiniteMeasure([0, 1], [0.1, 0.9])
radius = 0.2
inf_h = ball_inf_entropy(center, coin, radius, line)
print(f"\nball around {center.float_weights.tolist()} radius {radius}: inf H = {inf_h:.6f}")

rep = mc_rate(coin, center, radius, [10, 20, 40, 80], 20_000, seed=11, space=line)
print("   n    hits     p_hat       empirical rate   exact rate")
for r in rep.rows:
    emp = "inf" if r.empirical_rate is None else f"{r.empirical_rate:.4f}"
    ex = "-" if r.exact_rate is None else f"{r.exact_rate:.4f}"
    print(f"{r.n:4d}   {r.hits:6d}   {r.p_hat:.3e}   {emp:>14s}   {ex}")
