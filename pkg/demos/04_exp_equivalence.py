"""Replacing samples by cell tags costs little, with overwhelming probability.

For Gaussian samples, d_BL(L_n, L_n^m) is bounded by the mean projection cost
of the samples; it can only exceed about 2/m when some samples land outside
K_m, and that happens with tiny probability.  The same check then runs
through the two inequality chains that carry the rate from discretized
balls to the original ones.
"""
from fractions import Fraction

from sanovlab import (
    FiniteMeasure,
    Gaussian,
    IntervalSpace,
    build_exhaustion,
    build_sequence,
    exp_equivalence_check,
    proposition_chain_check,
)

line = IntervalSpace()
mu = Gaussian()
seq = build_sequence(line, build_exhaustion(mu, 3, line), 3)

for m in (1, 2, 3):
    rep = exp_equivalence_check(mu, seq, 50, m, 20_000, seed=7, lp_reps=50)
    print(f"m={m}: per-sample violations {rep.chain_violations}, "
          f"most samples outside K_m {rep.max_bad_count}, "
          f"events {rep.event_count}/{rep.reps}, exact LPs checked {rep.lp_checked}")

coin = FiniteMeasure([0.0, 1.0], [Fraction(1, 2), Fraction(1, 2)])
nu = FiniteMeasure([0.0, 1.0], [Fraction(3, 4), Fraction(1, 4)])
cseq = build_sequence(line, build_exhaustion(coin, 3, line), 3)
chain = proposition_chain_check(nu, coin, cseq, 100, 0.05, 3, 5000, seed=7)
for name in ("upper", "lower", "exact_upper", "exact_lower"):
    s = getattr(chain, name)
    if s is not None:
        print(f"{name:12s} left={s.left:.4g}  right ball={s.right_ball:.4g}  "
              f"right tail={s.right_tail:.4g}  holds={s.inequality_holds}")
