"""Finite and sampleable measures, pushforward discretization, lifting.

Every sampler draws inverse-CDF samples from a single uniform stream: draw
number ``i`` under seed ``s`` is ``ppf(u_i)`` where ``u_i`` is the ``i``-th
double of a Philox stream keyed by ``s``.  The pair ``(seed, i)`` therefore
fixes each draw, whatever block sizes the caller uses.
"""
from __future__ import annotations

import json
import math
from fractions import Fraction
from numbers import Rational

import numpy as np
from scipy import integrate, special, stats

from .exceptions import (
    ArgumentError,
    DomainError,
    InfeasibleLiftError,
    UnsupportedMeasureError,
)
from .metric_space import Interval, PointSet

MASS_TOL = 1e-12


def uniform_stream(seed, start, count):
    """Doubles ``u_start .. u_{start+count-1}`` of the stream keyed by ``seed``."""
    if count < 0 or start < 0:
        raise ArgumentError("start and count must be nonnegative")
    bg = np.random.Philox(key=int(seed) % 2**64)
    block, offset = divmod(int(start), 4)
    bg.advance(block)
    u = np.random.Generator(bg).random(offset + int(count))
    return u[offset:]


class SourceMeasure:
    """A probability measure that can be sampled and integrated over cells."""

    family = "abstract"

    def ppf(self, u):
        raise NotImplementedError

    def sample(self, n, seed, start=0):
        """``n`` i.i.d. draws, namely draws ``start .. start+n-1`` of the stream."""
        return self.ppf(uniform_stream(seed, start, n))

    def cell_mass(self, region):
        raise NotImplementedError

    def support_bounds(self):
        return (-math.inf, math.inf)

    def tail_interval(self, budget):
        """``(lo, hi)`` with mass below ``lo`` and above ``hi`` at most ``budget`` in total."""
        raise UnsupportedMeasureError(f"{self.family} measure has no tail-quantile access")


# ---------------------------------------------------------------------------
# finite measures
# ---------------------------------------------------------------------------


def _is_exact(w):
    return isinstance(w, Rational) and not isinstance(w, (bool, np.bool_))


class FiniteMeasure(SourceMeasure):
    """Nonnegative weights on distinct points, summing to one.

    Duplicate support points are merged and the support is sorted.  Weights
    may be floats or :class:`fractions.Fraction` (then sums stay exact).

    Parameters
    ----------
    support : array-like
        Floats (points of an interval space) or ints (indices of a finite space).
    weights : array-like
    """

    family = "finite"

    def __init__(self, support, weights, *, check=True):
        support = np.asarray(support)
        if support.ndim != 1:
            raise ArgumentError("support must be one-dimensional")
        if support.dtype.kind not in "iuf":
            raise ArgumentError("support must be numeric")
        weights = list(weights) if not isinstance(weights, np.ndarray) else list(weights.tolist())
        if len(weights) != len(support):
            raise ArgumentError("support and weights differ in length")
        exact = bool(weights) and all(_is_exact(w) for w in weights)
        if exact:
            weights = [Fraction(w) for w in weights]
        else:
            weights = [float(w) for w in weights]
        uniq, inv = np.unique(support, return_inverse=True)
        merged = [Fraction(0) if exact else 0.0 for _ in range(len(uniq))]
        for j, w in zip(inv.reshape(-1), weights):
            merged[j] += w
        self.support = uniq
        self.exact = exact
        self.weights = np.array(merged, dtype=object if exact else float)
        if check:
            if any(w < 0 for w in merged):
                raise ArgumentError("weights must be nonnegative")
            total = sum(merged)
            if abs(float(total) - 1.0) > MASS_TOL:
                raise ArgumentError(f"weights sum to {float(total)!r}, not 1")

    def __repr__(self):
        return f"FiniteMeasure({dict(zip(self.support.tolist(), self.float_weights.tolist()))})"

    def __len__(self):
        return len(self.support)

    @property
    def float_weights(self):
        return self.weights.astype(float)

    @classmethod
    def dirac(cls, x):
        return cls([x], [Fraction(1)])

    def mass(self, x):
        i = np.searchsorted(self.support, x)
        if i < len(self.support) and self.support[i] == x:
            return self.weights[i]
        return Fraction(0) if self.exact else 0.0

    def masses_at(self, points):
        """Float masses at each point of ``points`` (zero off the support)."""
        points = np.asarray(points)
        i = np.clip(np.searchsorted(self.support, points), 0, max(len(self.support) - 1, 0))
        hit = self.support[i] == points if len(self.support) else np.zeros(len(points), bool)
        return np.where(hit, self.float_weights[i], 0.0)

    def allclose(self, other, atol=0.0):
        """Equality as measures (zero atoms ignored) up to ``atol`` per atom."""
        pts = np.union1d(self.support, other.support)
        if atol == 0.0 and self.exact and other.exact:
            return all(self.mass(p) == other.mass(p) for p in pts)
        return bool(np.all(np.abs(self.masses_at(pts) - other.masses_at(pts)) <= atol))

    def ppf(self, u):
        cum = np.cumsum(self.float_weights)
        idx = np.searchsorted(cum, np.asarray(u) * cum[-1], side="right")
        return self.support[np.minimum(idx, len(self.support) - 1)]

    def cell_mass(self, region):
        inside = np.asarray(region.contains(self.support), dtype=bool)
        return sum(self.weights[inside], Fraction(0) if self.exact else 0.0)

    def support_bounds(self):
        pos = self.support[self.float_weights > 0]
        return (float(pos.min()), float(pos.max()))

    def tail_interval(self, budget):
        """Trim light extreme atoms: at most ``budget/2`` of mass on each side."""
        w = self.float_weights
        pos = np.flatnonzero(w > 0)
        cum = np.cumsum(w[pos])
        rcum = np.cumsum(w[pos][::-1])
        lo_i = int(np.searchsorted(cum, budget / 2, side="right"))
        hi_i = int(np.searchsorted(rcum, budget / 2, side="right"))
        lo_i = min(lo_i, len(pos) - 1)
        hi_i = min(hi_i, len(pos) - 1 - lo_i)
        return (float(self.support[pos[lo_i]]), float(self.support[pos[len(pos) - 1 - hi_i]]))

    def to_json(self):
        sup = self.support.tolist()
        return {"family": "finite", "support": sup, "weights": self.float_weights.tolist()}


class EmpiricalMeasure(FiniteMeasure):
    """``L_n``: weight ``count/n`` on each distinct sample value."""

    family = "empirical"

    def __init__(self, samples):
        samples = np.asarray(samples)
        if samples.size == 0:
            raise ArgumentError("empirical measure needs at least one sample")
        uniq, counts = np.unique(samples, return_counts=True)
        n = samples.size
        super().__init__(uniq, [Fraction(int(c), n) for c in counts])
        self.samples = samples
        self.n = n
        self.counts = counts


# ---------------------------------------------------------------------------
# analytic families
# ---------------------------------------------------------------------------


class _ScipyMeasure(SourceMeasure):
    """A continuous law backed by a frozen ``scipy.stats`` distribution."""

    def __init__(self, dist):
        self.dist = dist
        lo, hi = self.support_bounds()
        total, _ = integrate.quad(self.dist.pdf, lo, hi, limit=200)
        if abs(total - 1.0) > 1e-6:
            raise ArgumentError(f"{self.family} density integrates to {total}")

    def pdf(self, x):
        return self.dist.pdf(x)

    def ppf(self, u):
        return self.dist.ppf(u)

    def support_bounds(self):
        lo, hi = self.dist.support()
        return (float(lo), float(hi))

    def cell_mass(self, region):
        if isinstance(region, PointSet):
            raise UnsupportedMeasureError(f"{self.family} measure has no mass on index sets")
        a, b = region.lo, region.hi
        if b <= a:
            return 0.0
        if a >= self.dist.median():
            return float(max(self.dist.sf(a) - self.dist.sf(b), 0.0))
        return float(max(self.dist.cdf(b) - self.dist.cdf(a), 0.0))

    def tail_interval(self, budget):
        lo, hi = self.support_bounds()
        sides = math.isinf(lo) + math.isinf(hi)
        if sides == 0:
            return lo, hi
        share = budget / sides
        if math.isinf(lo):
            lo = float(self.dist.ppf(share))
        if math.isinf(hi):
            hi = float(self.dist.isf(share))
        return lo, hi


class Gaussian(_ScipyMeasure):
    family = "gaussian"

    def __init__(self, mean=0.0, std=1.0):
        if std <= 0:
            raise ArgumentError("gaussian std must be positive")
        self.mean, self.std = float(mean), float(std)
        super().__init__(stats.norm(self.mean, self.std))

    def ppf(self, u):
        return self.mean + self.std * special.ndtri(u)

    def __repr__(self):
        return f"Gaussian({self.mean}, {self.std})"

    def to_json(self):
        return {"family": "gaussian", "params": {"mean": self.mean, "std": self.std}}


class Exponential(_ScipyMeasure):
    family = "exponential"

    def __init__(self, rate=1.0, loc=0.0):
        if rate <= 0:
            raise ArgumentError("exponential rate must be positive")
        self.rate, self.loc = float(rate), float(loc)
        super().__init__(stats.expon(loc=self.loc, scale=1.0 / self.rate))

    def ppf(self, u):
        return self.loc - np.log1p(-np.asarray(u)) / self.rate

    def __repr__(self):
        return f"Exponential(rate={self.rate}, loc={self.loc})"

    def to_json(self):
        return {"family": "exponential", "params": {"rate": self.rate, "loc": self.loc}}


class Uniform(_ScipyMeasure):
    family = "uniform-interval"

    def __init__(self, lo=0.0, hi=1.0):
        if not hi > lo:
            raise ArgumentError("uniform needs lo < hi")
        self.lo, self.hi = float(lo), float(hi)
        super().__init__(stats.uniform(self.lo, self.hi - self.lo))

    def ppf(self, u):
        return self.lo + np.asarray(u) * (self.hi - self.lo)

    def __repr__(self):
        return f"Uniform({self.lo}, {self.hi})"

    def to_json(self):
        return {"family": "uniform-interval", "params": {"lo": self.lo, "hi": self.hi}}


class Mixture(SourceMeasure):
    """Finite mixture of real-line measures."""

    family = "mixture"

    def __init__(self, components, weights):
        w = np.asarray(weights, dtype=float)
        if len(components) != len(w) or len(w) == 0:
            raise ArgumentError("mixture needs one weight per component")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
            raise ArgumentError("mixture weights must be a probability vector")
        self.components = list(components)
        self.weights = w
        total = sum(wi * float(c.cell_mass(Interval(-math.inf, math.inf))) for wi, c in zip(w, components))
        if abs(total - 1.0) > 1e-6:
            raise ArgumentError(f"mixture mass is {total}")

    def __repr__(self):
        return f"Mixture({self.components}, {self.weights.tolist()})"

    def ppf(self, u):
        u = np.asarray(u, dtype=float)
        cum = np.concatenate([[0.0], np.cumsum(self.weights)])
        k = np.clip(np.searchsorted(cum, u, side="right") - 1, 0, len(self.weights) - 1)
        out = np.empty_like(u)
        for j, comp in enumerate(self.components):
            sel = k == j
            if np.any(sel):
                v = np.clip((u[sel] - cum[j]) / self.weights[j], 0.0, np.nextafter(1.0, 0.0))
                out[sel] = comp.ppf(v)
        return out

    def pdf(self, x):
        return sum(w * c.pdf(x) for w, c in zip(self.weights, self.components))

    def cell_mass(self, region):
        return float(sum(w * float(c.cell_mass(region)) for w, c in zip(self.weights, self.components)))

    def support_bounds(self):
        bounds = [c.support_bounds() for c in self.components]
        return (min(b[0] for b in bounds), max(b[1] for b in bounds))

    def tail_interval(self, budget):
        # each component loses <= budget outside its own interval, so the hull does too
        ivs = [c.tail_interval(budget) for c in self.components]
        return (min(i[0] for i in ivs), max(i[1] for i in ivs))

    def to_json(self):
        return {"family": "mixture",
                "params": {"components": [c.to_json() for c in self.components],
                           "weights": self.weights.tolist()}}


class ReweightedMeasure(SourceMeasure):
    """``base`` with its density multiplied by ``factors[i]`` on cell ``i`` of ``partition``."""

    family = "reweighted"

    def __init__(self, base, partition, factors):
        self.base = base
        self.partition = partition
        self.factors = np.asarray(factors, dtype=float)

    def cell_mass(self, region):
        total = 0.0
        for c, f in zip(self.partition.cells, self.factors):
            if f == 0.0:
                continue
            piece = region.intersect(c.region)
            if not piece.is_empty:
                total += f * float(self.base.cell_mass(piece))
        return total

    def pdf(self, x):
        idx = self.partition.cell_indices(x)
        return self.factors[idx] * self.base.pdf(x)

    def ppf(self, u):
        u = np.asarray(u, dtype=float)
        masses = np.array([f * float(self.base.cell_mass(c.region))
                           for c, f in zip(self.partition.cells, self.factors)])
        cum = np.concatenate([[0.0], np.cumsum(masses)])
        k = np.clip(np.searchsorted(cum, u * cum[-1], side="right") - 1, 0, len(masses) - 1)
        out = np.empty_like(u)
        for j in np.unique(k):
            sel = k == j
            r = self.partition.cells[j].region
            v = (u[sel] * cum[-1] - cum[j]) / masses[j]
            a = float(self.base.dist.cdf(r.lo))
            b = float(self.base.dist.cdf(r.hi))
            out[sel] = self.base.dist.ppf(a + np.clip(v, 0, 1) * (b - a))
        return out

    def support_bounds(self):
        return self.base.support_bounds()


def measure_from_spec(spec):
    """Build a measure from its JSON description.

    ``{"family": "gaussian", "params": {"mean": 0, "std": 1}}``,
    ``{"family": "finite", "support": [...], "weights": [...]}``,
    ``{"family": "empirical-from-file", "params": {"path": "samples.txt"}}``.
    """
    if not isinstance(spec, dict) or "family" not in spec:
        raise ArgumentError("measure: expected an object with a 'family' field")
    fam = spec["family"]
    # parameters may sit under "params" or directly beside "family"
    params = {k: v for k, v in spec.items() if k not in ("family", "params")}
    params.update(spec.get("params", {}))
    try:
        if fam == "finite":
            support = spec["support"] if "support" in spec else params["support"]
            weights = spec["weights"] if "weights" in spec else params["weights"]
            if all(isinstance(s, int) for s in support):
                support = np.asarray(support, dtype=int)
            return FiniteMeasure(support, [_parse_weight(w) for w in weights])
        if fam == "gaussian":
            return Gaussian(params.get("mean", 0.0), params.get("std", 1.0))
        if fam == "exponential":
            return Exponential(params.get("rate", 1.0), params.get("loc", 0.0))
        if fam in ("uniform", "uniform-interval"):
            return Uniform(params.get("lo", 0.0), params.get("hi", 1.0))
        if fam == "mixture":
            comps = [measure_from_spec(c) for c in params["components"]]
            return Mixture(comps, params["weights"])
        if fam == "empirical-from-file":
            return empirical_from_file(params["path"])
    except KeyError as exc:
        raise ArgumentError(f"measure.{exc.args[0]}: required for family {fam!r}") from exc
    raise ArgumentError(f"measure.family: unknown family {fam!r}")


def _parse_weight(w):
    if isinstance(w, str):
        return Fraction(w)
    return w


def empirical_from_file(path):
    """Empirical measure of the newline-delimited numbers in ``path``."""
    with open(path) as fh:
        values = [float(line) for line in fh if line.strip()]
    return EmpiricalMeasure(np.asarray(values))


def measure_to_json(mu):
    return json.loads(json.dumps(mu.to_json()))


# ---------------------------------------------------------------------------
# discretization and lifting
# ---------------------------------------------------------------------------


def cell_masses(nu, partition):
    """Mass of every cell of ``partition`` under ``nu``, as a list aligned with the cells.

    Finite measures give exact sums (Fractions stay Fractions); other measures
    use their own ``cell_mass``.
    """
    if isinstance(nu, FiniteMeasure):
        idx = partition.cell_indices(nu.support) if len(nu) else np.array([], int)
        zero = Fraction(0) if nu.exact else 0.0
        out = [zero] * len(partition)
        for i, w in zip(np.atleast_1d(idx), nu.weights):
            out[int(i)] += w
        return out
    try:
        return [nu.cell_mass(c.region) for c in partition.cells]
    except NotImplementedError as exc:
        raise UnsupportedMeasureError(f"cell masses of {nu!r} are not computable") from exc


def discretize(nu, partition):
    """Pushforward of ``nu`` under the projection onto the partition's tags.

    The result charges every tag (possibly with zero mass).
    """
    masses = cell_masses(nu, partition)
    exact = isinstance(nu, FiniteMeasure) and nu.exact
    total = float(sum(masses))
    tol = MASS_TOL if isinstance(nu, FiniteMeasure) else 1e-9
    if abs(total - 1.0) > tol:
        raise UnsupportedMeasureError(f"discretized mass is {total!r}; support outside the partition?")
    if not exact:
        masses = [float(x) for x in masses]
    return FiniteMeasure(partition.tags, masses, check=False)


def sample_empirical(mu, n, seed, start=0):
    """Empirical measure of ``n`` draws of ``mu`` (draws ``start .. start+n-1``)."""
    if n < 1:
        raise ArgumentError(f"n must be >= 1, got {n}")
    return EmpiricalMeasure(mu.sample(n, seed, start=start))


def discretize_empirical(L, partition):
    """Empirical measure of the projected samples ``pi^m(X_i)``."""
    return EmpiricalMeasure(partition.project(L.samples))


def lift(sigma, mu, partition):
    """Measure equal to ``sigma`` on cells and proportional to ``mu`` inside each cell.

    For a finite ``mu`` the result is a :class:`FiniteMeasure` (exact when both
    inputs are exact); otherwise a :class:`ReweightedMeasure`.

    Raises
    ------
    InfeasibleLiftError
        If ``sigma`` charges a tag whose cell has zero ``mu``-mass.
    """
    tags = partition.tags
    extra = np.setdiff1d(sigma.support[sigma.float_weights > 0], tags)
    if extra.size:
        raise DomainError(f"sigma charges non-tag points {extra[:3].tolist()}")
    mu_cells = cell_masses(mu, partition)
    exact = isinstance(mu, FiniteMeasure) and mu.exact and sigma.exact
    sig = [sigma.mass(t) for t in tags]
    if not exact:
        sig = [float(s) for s in sig]
    for i, (s, q) in enumerate(zip(sig, mu_cells)):
        if s > 0 and q == 0:
            raise InfeasibleLiftError(f"sigma charges tag {tags[i]!r} of a mu-null cell")
    factors = [(s / q if q != 0 else 0) for s, q in zip(sig, mu_cells)]
    if isinstance(mu, FiniteMeasure):
        idx = np.atleast_1d(partition.cell_indices(mu.support))
        w = [wi * factors[int(i)] for wi, i in zip(mu.weights, idx)]
        if not exact:
            w = [float(x) for x in w]
        return FiniteMeasure(mu.support, w, check=False)
    return ReweightedMeasure(mu, partition, [float(f) for f in factors])
