"""Finite-n checks of Sanov-type rates and of the discretization inequalities.

Exact probabilities on finite alphabets come from enumerating type classes;
continuous sources are handled by seeded Monte Carlo with Wilson intervals.

Random streams: the draws for sample size ``n`` under ``seed`` come from the
stream keyed by :func:`stream_key` ``(seed, n)``; replicate ``r`` uses draws
``r*n .. (r+1)*n - 1`` of that stream.
"""
from __future__ import annotations

import csv
import io
import itertools
import json
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import cvxpy as cp
import numpy as np
from scipy import stats
from scipy.optimize import linprog
from scipy.special import gammaln

from .bl_metric import bl_distance
from .entropy import entropy_ladder, relative_entropy_integral
from .exceptions import ArgumentError, ResourceError, SanovLabError
from .measure import EmpiricalMeasure, FiniteMeasure, discretize
from .metric_space import IntervalSpace

TYPE_GUARD = 10**7
BALL_SLACK = 1e-9


def stream_key(seed, n):
    """64-bit stream key for sample size ``n`` under ``seed``."""
    return int(np.random.SeedSequence([int(seed), int(n)]).generate_state(1, np.uint64)[0])


def wilson_interval(hits, reps, confidence=0.999):
    ci = stats.binomtest(int(hits), int(reps)).proportion_ci(confidence_level=confidence,
                                                             method="wilson")
    return float(ci.low), float(ci.high)


# ---------------------------------------------------------------------------
# method of types
# ---------------------------------------------------------------------------


def count_types(k, n):
    return math.comb(n + k - 1, k - 1)


def enumerate_types(k, n):
    """All count vectors of length ``k`` summing to ``n``, shape ``(T, k)`` (stars and bars)."""
    if k == 1:
        return np.array([[n]], dtype=np.int64)
    T = count_types(k, n)
    bars = np.fromiter(itertools.chain.from_iterable(
        itertools.combinations(range(n + k - 1), k - 1)), dtype=np.int64,
        count=T * (k - 1)).reshape(T, k - 1)
    edges = np.column_stack([np.full(T, -1), bars, np.full(T, n + k - 1)])
    return np.diff(edges, axis=1) - 1


def _log_multinomial(counts, log_p):
    n = counts.sum(axis=1)
    with np.errstate(invalid="ignore"):
        terms = np.where(counts > 0, counts * log_p, 0.0)
    return gammaln(n + 1) - gammaln(counts + 1).sum(axis=1) + terms.sum(axis=1)


def _log_sum(logs):
    logs = np.asarray(logs, dtype=float)
    logs = logs[np.isfinite(logs)]
    if logs.size == 0:
        return -math.inf
    top = logs.max()
    return float(top + math.log(math.fsum(np.exp(logs - top))))


def type_measure(support, counts):
    n = int(sum(counts))
    return FiniteMeasure(support, [Fraction(int(c), n) for c in counts], check=False)


def types_log_probability(mu, n, predicate, *, vectorized=False, guard=TYPE_GUARD):
    """``log P(L_n in S)`` for i.i.d. draws from a finite ``mu``, by enumeration.

    Parameters
    ----------
    predicate : callable
        Membership test.  Receives a :class:`FiniteMeasure` (the type, on
        ``mu.support``) or, if ``vectorized``, an array ``(T, k)`` of type
        frequencies and returns a boolean array.

    Raises
    ------
    ResourceError
        If the number of types exceeds ``guard``.
    """
    if not isinstance(mu, FiniteMeasure):
        raise ArgumentError("types enumeration needs a finite measure")
    if n < 1:
        raise ArgumentError("n must be >= 1")
    k = len(mu)
    total = count_types(k, n)
    if total > guard:
        raise ResourceError(f"{total} types for k={k}, n={n} exceed the guard {guard}")
    types = enumerate_types(k, n)
    with np.errstate(divide="ignore"):
        log_p = np.log(mu.float_weights)
    logs = _log_multinomial(types, log_p)
    if vectorized:
        keep = np.asarray(predicate(types / n), dtype=bool)
    else:
        keep = np.array([bool(predicate(type_measure(mu.support, c))) for c in types])
    return _log_sum(logs[keep])


def types_probability(mu, n, predicate, **kw):
    """Exact ``P(L_n in S)``; see :func:`types_log_probability`."""
    return math.exp(types_log_probability(mu, n, predicate, **kw))


# ---------------------------------------------------------------------------
# entropy infimum over a bounded-Lipschitz ball
# ---------------------------------------------------------------------------


def _flow_structure(pts, space):
    """Pairs (i, j, d) whose Lipschitz rows matter, in the dual flow form."""
    if isinstance(space, IntervalSpace):
        order = np.argsort(pts)
        gaps = np.diff(pts[order].astype(float))
        keep = gaps < 2.0
        return order[:-1][keep], order[1:][keep], gaps[keep]
    D = space.distance_matrix(pts)
    i, j = np.triu_indices(len(pts), k=1)
    d = D[i, j]
    keep = d < 2.0
    return i[keep], j[keep], d[keep]


def _ball_data(center, tags, space):
    pts = np.union1d(tags, center.support)
    N = len(pts)
    I, J, d = _flow_structure(pts, space)
    P = len(I)
    # B @ lam: lam[:P] sends from I to J, lam[P:] from J to I
    B = np.zeros((N, 2 * P))
    B[I, np.arange(P)] += 1
    B[J, np.arange(P)] -= 1
    B[J, P + np.arange(P)] += 1
    B[I, P + np.arange(P)] -= 1
    E = np.zeros((N, len(tags)))
    E[np.searchsorted(pts, tags), np.arange(len(tags))] = 1.0
    c = center.masses_at(pts)
    cost = np.concatenate([d, d])
    return B, E, c, cost, N


def distance_to_simplex(center, tags, space):
    """``min d_BL(sigma, center)`` over probability vectors on ``tags`` (an LP)."""
    B, E, c, cost, N = _ball_data(center, tags, space)
    k, L = len(tags), B.shape[1]
    # variables: sigma (k), lam (L), u (N), l (N)
    obj = np.concatenate([np.zeros(k), cost, np.ones(N), np.ones(N)])
    A_eq = np.hstack([-E, B, np.eye(N), -np.eye(N)])
    A_eq = np.vstack([A_eq, np.concatenate([np.ones(k), np.zeros(L + 2 * N)])])
    b_eq = np.concatenate([-c, [1.0]])
    res = linprog(obj, A_eq=A_eq, b_eq=b_eq, bounds=[(0, None)] * len(obj), method="highs")
    if res.status != 0:
        raise SanovLabError(f"distance LP failed: {res.message}")
    return float(res.fun)


@dataclass
class BallInfResult:
    value: float
    sigma: FiniteMeasure | None
    feasible_gap: float


def ball_inf_entropy(center, mu_m, radius, space, *, return_result=False):
    """``inf H(sigma | mu_m)`` over probability vectors ``sigma`` on the tags of
    ``mu_m`` with ``d_BL(sigma, center) <= radius``.

    The ball is written through the dual of the bounded-Lipschitz LP (a
    transport problem with unit creation/destruction cost), so the problem is
    convex with an entropy objective and linear constraints; it is solved as
    an exponential-cone program.  Returns ``inf`` when the ball misses every
    measure on the tags.
    """
    if radius < 0:
        raise ArgumentError("radius must be nonnegative")
    w = mu_m.float_weights
    tags = mu_m.support[w > 0]
    q = w[w > 0]

    def done(value, sigma, gap=0.0):
        res = BallInfResult(value, sigma, gap)
        return res if return_result else value

    base = FiniteMeasure(tags, q, check=False)
    if radius >= 2.0 or bl_distance(base, center, space) <= radius + BALL_SLACK:
        return done(0.0, base)
    dmin = distance_to_simplex(center, tags, space)
    if dmin > radius + BALL_SLACK:
        return done(math.inf, None, dmin - radius)
    B, E, c, cost, N = _ball_data(center, tags, space)
    sig = cp.Variable(len(tags), nonneg=True)
    up = cp.Variable(N, nonneg=True)
    lo = cp.Variable(N, nonneg=True)
    flow, spend = up - lo, cp.sum(up) + cp.sum(lo)
    if B.shape[1]:  # no pairs when every gap is >= 2
        lam = cp.Variable(B.shape[1], nonneg=True)
        flow, spend = flow + B @ lam, spend + cost @ lam
    cons = [cp.sum(sig) == 1, flow == E @ sig - c, spend <= radius]
    prob = cp.Problem(cp.Minimize(cp.sum(cp.rel_entr(sig, q))), cons)
    prob.solve(solver=cp.CLARABEL, tol_gap_abs=1e-10, tol_gap_rel=1e-10, tol_feas=1e-10,
               max_iter=500)
    if prob.status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE):
        raise SanovLabError(f"ball entropy program ended with status {prob.status}")
    s = np.clip(np.asarray(sig.value, dtype=float), 0.0, None)
    s = s / s.sum()
    sigma = FiniteMeasure(tags, s, check=False)
    return done(max(float(prob.value), 0.0), sigma)


# ---------------------------------------------------------------------------
# Monte Carlo rates
# ---------------------------------------------------------------------------


@dataclass
class RateRow:
    n: int
    reps: int
    hits: int
    p_hat: float
    ci_low: float
    ci_high: float
    empirical_rate: float | None
    rate_lower: float
    rate_upper: float
    one_sided: bool
    entropy_rate: float
    gap: float | None
    exact_probability: float | None = None
    exact_rate: float | None = None


@dataclass
class RateReport:
    """Empirical decay rates of ``P(L_n in ball)`` next to the entropy infimum."""

    center: dict
    radius: float
    seed: int
    confidence: float
    entropy_rate: float
    rows: list = field(default_factory=list)

    def to_dict(self):
        return {"center": self.center, "radius": self.radius, "seed": self.seed,
                "confidence": self.confidence, "entropy_rate": _num(self.entropy_rate),
                "rows": [{k: _num(v) for k, v in asdict(r).items()} for r in self.rows]}

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_csv(self):
        buf = io.StringIO()
        names = list(RateRow.__dataclass_fields__)
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(names)
        for r in self.rows:
            w.writerow([_cell(getattr(r, k)) for k in names])
        return buf.getvalue()


def _num(x):
    if isinstance(x, float) and math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if isinstance(x, float) and math.isnan(x):
        return "nan"
    return x


def _cell(x):
    if x is None:
        return ""
    if isinstance(x, float):
        return "inf" if math.isinf(x) and x > 0 else repr(x)
    return str(x)


def _replicate_counts(mu, n, reps, seed):
    """Atom counts per replicate for a finite ``mu``, shape ``(reps, k)``."""
    x = mu.sample(reps * n, stream_key(seed, n))
    idx = np.searchsorted(mu.support, x).reshape(reps, n)
    counts = np.zeros((reps, len(mu)), dtype=np.int64)
    for j in range(len(mu)):
        counts[:, j] = (idx == j).sum(axis=1)
    return counts


def _ball_hits(mu, n, reps, seed, center, radius, space):
    if isinstance(mu, FiniteMeasure):
        counts = _replicate_counts(mu, n, reps, seed)
        uniq, inv = np.unique(counts, axis=0, return_inverse=True)
        inside = np.array([bl_distance(type_measure(mu.support, c), center, space)
                           <= radius + BALL_SLACK for c in uniq])
        return int(inside[inv.reshape(-1)].sum())
    x = mu.sample(reps * n, stream_key(seed, n)).reshape(reps, n)
    return sum(bl_distance(EmpiricalMeasure(row), center, space) <= radius + BALL_SLACK
               for row in x)


def mc_rate(mu, center, radius, n_list, reps, seed, space, *, partition=None,
            confidence=0.999, exact_guard=5_000):
    """Estimate ``-(1/n) log P(L_n in closed BL ball)`` for each ``n``.

    ``entropy_rate`` is the entropy infimum over the same ball, computed on
    ``mu`` itself when it is finite, else on its discretization by
    ``partition``.  For finite ``mu`` with at most ``exact_guard`` types the
    exact probability is reported too.  When a row has no hits only the
    one-sided bound ``rate_lower`` is meaningful.
    """
    if reps < 1:
        raise ArgumentError(f"reps must be >= 1, got {reps}")
    if radius <= 0:
        raise ArgumentError("radius must be positive")
    if isinstance(mu, FiniteMeasure):
        mu_tags = mu
    elif partition is not None:
        mu_tags = discretize(mu, partition)
    else:
        raise ArgumentError("a partition is needed for the entropy rate of a non-finite source")
    ent = ball_inf_entropy(center, mu_tags, radius, space)
    report = RateReport(center.to_json(), float(radius), int(seed), confidence, ent)
    for n in n_list:
        hits = _ball_hits(mu, n, reps, seed, center, radius, space)
        p_hat = hits / reps
        lo, hi = wilson_interval(hits, reps, confidence)
        emp = -math.log(p_hat) / n if hits else None
        row = RateRow(n=int(n), reps=int(reps), hits=int(hits), p_hat=p_hat, ci_low=lo,
                      ci_high=hi, empirical_rate=emp, rate_lower=-math.log(hi) / n,
                      rate_upper=(-math.log(lo) / n if lo > 0 else math.inf),
                      one_sided=hits == 0, entropy_rate=ent,
                      gap=(emp - ent if emp is not None else None))
        if isinstance(mu, FiniteMeasure) and count_types(len(mu), n) <= exact_guard:
            memo = {}

            def inside(t):
                key = tuple(t.float_weights)
                if key not in memo:
                    memo[key] = bl_distance(t, center, space) <= radius + BALL_SLACK
                return memo[key]

            lp = types_log_probability(mu, n, inside)
            row.exact_probability = math.exp(lp)
            row.exact_rate = -lp / n
        report.rows.append(row)
    return report


# ---------------------------------------------------------------------------
# exponential equivalence
# ---------------------------------------------------------------------------


@dataclass
class ExpEquivalenceReport:
    n: int
    m: int
    reps: int
    chain_violations: int
    max_chain_excess: float
    max_bad_count: int
    event_count: int
    event_budget: float
    event_ci: tuple
    lp_checked: int
    lp_violations: int
    max_lp_minus_coupling: float

    @property
    def passed(self):
        return (self.chain_violations == 0 and self.lp_violations == 0
                and self.event_ci[0] <= self.event_budget)

    def to_dict(self):
        d = asdict(self)
        d["event_ci"] = list(self.event_ci)
        d["passed"] = self.passed
        return d


def _projection_costs(x, part, space):
    idx = part.cell_indices(x.reshape(-1))
    tags = part.tags[idx]
    d = np.minimum(space.pairwise(x.reshape(-1), tags), 2.0).reshape(x.shape)
    bad = (idx >= part.good_count).reshape(x.shape)
    return d, bad, tags.reshape(x.shape)


def exp_equivalence_check(mu, seq, n, m, reps, seed, *, lp_reps=200, confidence=0.999):
    """Check ``d_BL(L_n, L_n^m) <= 1/m + (2/n) #{X_i in K_m^c}`` on every replicate.

    ``d_BL(L_n, L_n^m)`` is bounded on every replicate by the projection
    coupling ``(1/n) sum d(X_i, pi^m X_i) ^ 2``; the first ``lp_reps``
    replicates are also solved exactly and compared with that bound.  The
    event ``{d_BL > 3/m}`` is counted through the coupling bound (so the count
    is an upper bound) and compared with the budget ``exp(-mn)``.
    """
    if reps < 1 or n < 1:
        raise ArgumentError("n and reps must be >= 1")
    part = seq[m]
    space = seq.space
    x = np.asarray(mu.sample(reps * n, stream_key(seed, n))).reshape(reps, n)
    d, bad, tags = _projection_costs(x, part, space)
    coupling = d.mean(axis=1)
    bad_counts = bad.sum(axis=1)
    rhs = 1.0 / m + 2.0 * bad_counts / n
    excess = coupling - rhs
    events = int((coupling > 3.0 / m).sum())
    lp_checked = min(lp_reps, reps)
    lp_viol, lp_gap = 0, -math.inf
    for r in range(lp_checked):
        L = EmpiricalMeasure(x[r])
        Lm = EmpiricalMeasure(tags[r])
        exact = bl_distance(L, Lm, space)
        lp_gap = max(lp_gap, exact - coupling[r])
        if exact > coupling[r] + 1e-9 or exact > rhs[r] + 1e-9:
            lp_viol += 1
    return ExpEquivalenceReport(
        n=int(n), m=int(m), reps=int(reps),
        chain_violations=int((excess > 1e-12).sum()),
        max_chain_excess=float(excess.max()),
        max_bad_count=int(bad_counts.max()),
        event_count=events, event_budget=math.exp(-m * n),
        event_ci=wilson_interval(events, reps, confidence),
        lp_checked=lp_checked, lp_violations=lp_viol,
        max_lp_minus_coupling=float(lp_gap))


# ---------------------------------------------------------------------------
# sup-inf ladder
# ---------------------------------------------------------------------------


@dataclass
class SupInfLadder:
    depths: list
    radii: list
    values: list
    entropy: float
    entropy_exact: bool

    @property
    def running_sup(self):
        out, best = [], -math.inf
        for v in self.values:
            best = max(best, v)
            out.append(best)
        return out

    def within_upper(self, tol=1e-6):
        """Every value is at most ``H(nu|mu) + tol`` (vacuous if ``H`` is only estimated)."""
        if not self.entropy_exact:
            return True
        return all(v <= self.entropy + tol for v in self.values)


def supinf_ladder(nu, mu, seq, m0=1, depths=None):
    """``inf {H(sigma|mu^m) : d_BL(sigma, nu) <= 1/sqrt(m)}`` for each depth ``m >= m0``.

    ``nu`` should be finite; otherwise its discretization at the deepest depth
    stands in for it as the ball centre.
    """
    depths = [m for m in (seq.depths if depths is None else depths) if m >= m0]
    if not depths:
        raise ArgumentError(f"no depths >= m0={m0}")
    space = seq.space
    center = nu if isinstance(nu, FiniteMeasure) else discretize(nu, seq[seq.m_max])
    if isinstance(nu, FiniteMeasure) and isinstance(mu, FiniteMeasure):
        H, exact = relative_entropy_integral(nu, mu), True
    elif isinstance(nu, FiniteMeasure):
        # a finite nu against a non-atomic mu is singular
        H, exact = math.inf, True
    else:
        H, exact = entropy_ladder(nu, mu, seq).limit_estimate, False
    values, radii = [], []
    for m in depths:
        r = 1.0 / math.sqrt(m)
        values.append(ball_inf_entropy(center, discretize(mu, seq[m]), r, space))
        radii.append(r)
    return SupInfLadder(depths, radii, values, H, exact)


# ---------------------------------------------------------------------------
# union-bound chains
# ---------------------------------------------------------------------------


@dataclass
class ChainSide:
    """Counts (or exact probabilities) of the three events of one chain."""

    left: float
    right_ball: float
    right_tail: float
    right_union: float
    containment_violations: int
    left_ci: tuple | None = None
    right_ball_ci: tuple | None = None
    right_tail_ci: tuple | None = None

    @property
    def inequality_holds(self):
        return self.left <= self.right_ball + self.right_tail + 1e-12

    @property
    def band_consistent(self):
        if self.left_ci is None:
            return self.inequality_holds
        return self.left_ci[0] <= self.right_ball_ci[1] + self.right_tail_ci[1]


@dataclass
class ChainReport:
    n: int
    m: int
    eps: float
    alpha: float
    c: float
    reps: int
    upper: ChainSide
    lower: ChainSide
    exact_upper: ChainSide | None = None
    exact_lower: ChainSide | None = None

    @property
    def passed(self):
        sides = [self.upper, self.lower] + [s for s in (self.exact_upper, self.exact_lower) if s]
        return all(s.containment_violations == 0 and s.inequality_holds and s.band_consistent
                   for s in sides)

    def to_dict(self):
        d = asdict(self)
        d["passed"] = self.passed
        return json.loads(json.dumps(d, default=_num))


def _chain_distances(L, Lm, nu, nu_m, space):
    return (bl_distance(Lm, nu_m, space), bl_distance(L, nu, space),
            bl_distance(L, Lm, space), bl_distance(Lm, nu, space))


def _chain_events(dist, eps, m, c):
    d1, d2, d3, d4 = dist
    upper = (d1 < eps, d2 <= eps + (3.0 + c) / m + BALL_SLACK, d3 > 3.0 / m)
    root = 1.0 / math.sqrt(m)
    lower = (d2 < eps, d4 <= eps + root + BALL_SLACK, d3 > root)
    return upper, lower


def proposition_chain_check(nu, mu, seq, n, eps, m, reps, seed, *, exact=None,
                            confidence=0.999):
    """Check the two union bounds linking ``L_n`` and ``L_n^m`` at finite ``n``.

    Upper chain:  ``{d(L_n^m, nu^m) < eps}`` is inside
    ``{d(L_n, nu) <= eps + (3+c)/m}`` union ``{d(L_n, L_n^m) > 3/m}``, with
    ``c = 3 + 2 H(nu|mu)``.
    Lower chain:  ``{d(L_n, nu) < eps}`` is inside
    ``{d(L_n^m, nu) <= eps + 1/sqrt(m)}`` union ``{d(L_n, L_n^m) > 1/sqrt(m)}``.

    Containment is checked replicate by replicate; with ``exact`` (default:
    whenever ``mu`` is finite and has few enough types) every type is checked
    and the probabilities are exact.
    """
    if reps < 1:
        raise ArgumentError("reps must be >= 1")
    if not isinstance(nu, FiniteMeasure):
        raise ArgumentError("the chain check needs a finite nu")
    space = seq.space
    part = seq[m]
    nu_m = discretize(nu, part)
    alpha = relative_entropy_integral(nu, mu) if isinstance(mu, FiniteMeasure) else math.inf
    c = 3.0 + 2.0 * alpha
    memo = {}

    def events_for(samples):
        L = EmpiricalMeasure(samples)
        key = (tuple(L.support.tolist()), tuple(L.counts.tolist()))
        if key not in memo:
            Lm = EmpiricalMeasure(part.project(samples))
            memo[key] = _chain_events(_chain_distances(L, Lm, nu, nu_m, space), eps, m, c)
        return memo[key]

    x = np.asarray(mu.sample(reps * n, stream_key(seed, n))).reshape(reps, n)
    up = np.zeros((reps, 3), dtype=bool)
    low = np.zeros((reps, 3), dtype=bool)
    for r in range(reps):
        u, l = events_for(x[r])
        up[r], low[r] = u, l

    def side(ev):
        cnt = ev.sum(axis=0)
        union = int((ev[:, 1] | ev[:, 2]).sum())
        viol = int((ev[:, 0] & ~(ev[:, 1] | ev[:, 2])).sum())
        return ChainSide(cnt[0] / reps, cnt[1] / reps, cnt[2] / reps, union / reps, viol,
                         wilson_interval(cnt[0], reps, confidence),
                         wilson_interval(cnt[1], reps, confidence),
                         wilson_interval(cnt[2], reps, confidence))

    report = ChainReport(int(n), int(m), float(eps), alpha, c, int(reps), side(up), side(low))
    if exact is None:
        exact = isinstance(mu, FiniteMeasure) and count_types(len(mu), n) <= 20_000
    if exact:
        report.exact_upper, report.exact_lower = _exact_chain(mu, n, nu, nu_m, part, space,
                                                              eps, m, c)
    return report


def _exact_chain(mu, n, nu, nu_m, part, space, eps, m, c):
    k = len(mu)
    types = enumerate_types(k, n)
    with np.errstate(divide="ignore"):
        log_p = np.log(mu.float_weights)
    logs = _log_multinomial(types, log_p)
    proj = part.project(mu.support)
    up_ev, low_ev = [], []
    for t in types:
        L = type_measure(mu.support, t)
        Lm = FiniteMeasure(proj, L.weights, check=False)
        u, l = _chain_events(_chain_distances(L, Lm, nu, nu_m, space), eps, m, c)
        up_ev.append(u)
        low_ev.append(l)

    def side(ev):
        ev = np.array(ev, dtype=bool)
        pr = [math.exp(_log_sum(logs[ev[:, j]])) for j in range(3)]
        union = math.exp(_log_sum(logs[ev[:, 1] | ev[:, 2]]))
        viol = int((ev[:, 0] & ~(ev[:, 1] | ev[:, 2]) & np.isfinite(logs)).sum())
        return ChainSide(pr[0], pr[1], pr[2], union, viol)

    return side(up_ev), side(low_ev)
