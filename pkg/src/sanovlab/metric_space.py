"""Concrete metric ground spaces, regions inside them, and compact exhaustions.

Three space families are supported:

* :class:`IntervalSpace` -- a closed real interval, possibly unbounded on
  either side (``IntervalSpace()`` is the whole real line).
* :class:`FiniteSpace` -- points ``0 .. k-1`` with an explicit distance matrix.
* :class:`CloudSpace` -- points ``0 .. k-1`` given by coordinates in R^d with
  the Euclidean metric.

Points of an interval space are floats; points of the two finite families
are integer indices.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ArgumentError, DomainError, UnsupportedMeasureError

#: Fraction of the tail budget actually spent when choosing K_m.
SAFETY = 0.99


def tail_budget(m):
    """Allowed reference mass outside the depth-``m`` compact: e^(-m^2-1)/m."""
    if m < 1:
        raise ArgumentError(f"depth must be >= 1, got {m}")
    return math.exp(-m * m - 1) / m


# ---------------------------------------------------------------------------
# regions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Interval:
    """The half-open interval ``[lo, hi)``, or ``[lo, hi]`` when ``closed_hi``.

    ``lo = -inf`` is allowed and then the interval is open on the left.
    """

    lo: float
    hi: float
    closed_hi: bool = False

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        upper = x <= self.hi if self.closed_hi else x < self.hi
        return (x >= self.lo) & upper

    @property
    def diameter(self):
        return self.hi - self.lo

    @property
    def is_empty(self):
        return self.hi < self.lo or (self.hi == self.lo and not self.closed_hi)

    def issubset(self, other):
        """Whether this interval lies inside ``other``."""
        if self.is_empty:
            return True
        if self.lo < other.lo:
            return False
        if self.hi < other.hi:
            return True
        if self.hi == other.hi:
            return other.closed_hi or not self.closed_hi
        return False

    def intersect(self, other):
        lo = max(self.lo, other.lo)
        if self.hi < other.hi:
            return Interval(lo, self.hi, self.closed_hi)
        if other.hi < self.hi:
            return Interval(lo, other.hi, other.closed_hi)
        return Interval(lo, self.hi, self.closed_hi and other.closed_hi)

    def to_json(self):
        return {"lo": _float_to_json(self.lo), "hi": _float_to_json(self.hi),
                "closed_hi": self.closed_hi}


@dataclass(frozen=True)
class PointSet:
    """A finite set of point indices of a finite or cloud space."""

    members: frozenset

    def __init__(self, members):
        object.__setattr__(self, "members", frozenset(int(i) for i in members))

    def contains(self, x):
        x = np.asarray(x)
        if x.ndim == 0:
            return int(x) in self.members
        return np.isin(x, list(self.members))

    @property
    def is_empty(self):
        return not self.members

    def issubset(self, other):
        return self.members <= other.members

    def intersect(self, other):
        return PointSet(self.members & other.members)

    def to_json(self):
        return {"members": sorted(self.members)}


def _float_to_json(x):
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return float(x)


def _float_from_json(x):
    if x is None:
        raise ArgumentError("interval bound may not be null")
    return float(x)


# ---------------------------------------------------------------------------
# spaces
# ---------------------------------------------------------------------------


class MetricSpace:
    """Common interface of the concrete spaces."""

    kind = "abstract"

    def contains(self, x):
        raise NotImplementedError

    def check(self, x):
        """Raise :class:`DomainError` unless every point in ``x`` is in the space."""
        inside = np.asarray(self.contains(x))
        if not np.all(inside):
            bad = np.asarray(x).reshape(-1)[~inside.reshape(-1)][0]
            raise DomainError(f"point {bad!r} is not in {self!r}")

    def distance(self, x, y):
        """Metric value between two single points."""
        self.check(x)
        self.check(y)
        return float(self.pairwise(np.asarray([x]), np.asarray([y]))[0])

    def pairwise(self, xs, ys):
        """Elementwise distances ``d(xs[i], ys[i])`` (no domain checks)."""
        raise NotImplementedError

    def distance_matrix(self, xs, ys=None):
        """Matrix ``D[i, j] = d(xs[i], ys[j])``."""
        raise NotImplementedError

    def diameter(self, region):
        raise NotImplementedError

    def random_points(self, size, rng):
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class IntervalSpace(MetricSpace):
    """The closed interval ``[lo, hi]`` with ``|x - y|``; bounds may be infinite."""

    lo: float = -math.inf
    hi: float = math.inf
    kind = "interval"

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ArgumentError(f"empty interval [{self.lo}, {self.hi}]")

    def __repr__(self):
        return f"IntervalSpace({self.lo}, {self.hi})"

    @property
    def is_compact(self):
        return math.isfinite(self.lo) and math.isfinite(self.hi)

    @property
    def region(self):
        return Interval(self.lo, self.hi, closed_hi=math.isfinite(self.hi))

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        return np.isfinite(x) & (x >= self.lo) & (x <= self.hi)

    def pairwise(self, xs, ys):
        return np.abs(np.asarray(xs, dtype=float) - np.asarray(ys, dtype=float))

    def distance_matrix(self, xs, ys=None):
        xs = np.asarray(xs, dtype=float)
        ys = xs if ys is None else np.asarray(ys, dtype=float)
        return np.abs(xs[:, None] - ys[None, :])

    def diameter(self, region):
        return region.diameter

    # grid shared by exhaustions and partitions
    @property
    def anchor(self):
        if math.isfinite(self.lo):
            return self.lo
        if math.isfinite(self.hi):
            return self.hi
        return 0.0

    def grid_width(self, m):
        """Dyadic cell width at depth ``m``; always <= 1/(2m)."""
        length = self.hi - self.lo if self.is_compact else 1.0
        k = max(0, math.ceil(math.log2(2 * m * length)))
        h = length / 2.0**k
        while h > 1.0 / (2 * m):  # guards log2 rounding
            h /= 2.0
        return h

    def snap_down(self, x, m):
        h = self.grid_width(m)
        return self.anchor + math.floor((x - self.anchor) / h) * h

    def snap_up(self, x, m):
        """Smallest grid point strictly above ``x``."""
        h = self.grid_width(m)
        return self.anchor + (math.floor((x - self.anchor) / h) + 1) * h

    def random_points(self, size, rng):
        lo = self.lo if math.isfinite(self.lo) else -10.0
        hi = self.hi if math.isfinite(self.hi) else 10.0
        return rng.uniform(lo, hi, size=size)

    def to_json(self):
        return {"kind": "interval",
                "bounds": [_float_to_json(self.lo), _float_to_json(self.hi)]}


@dataclass(frozen=True, eq=False)
class FiniteSpace(MetricSpace):
    """Points ``0 .. k-1`` with a symmetric, zero-diagonal distance matrix."""

    matrix: np.ndarray = field(repr=False)
    kind = "finite"

    def __post_init__(self):
        d = np.array(self.matrix, dtype=float)
        if d.ndim != 2 or d.shape[0] != d.shape[1] or d.shape[0] < 1:
            raise ArgumentError("distance matrix must be square with >= 1 point")
        if np.any(d < 0) or np.any(np.diag(d) != 0) or not np.array_equal(d, d.T):
            raise ArgumentError("distance matrix must be nonnegative, symmetric, zero diagonal")
        d.setflags(write=False)
        object.__setattr__(self, "matrix", d)

    def __repr__(self):
        return f"{type(self).__name__}(k={self.size})"

    @property
    def size(self):
        return self.matrix.shape[0]

    @property
    def points(self):
        return np.arange(self.size)

    @property
    def region(self):
        return PointSet(range(self.size))

    def contains(self, x):
        x = np.asarray(x)
        if x.dtype.kind == "f":
            ok = np.isfinite(x) & (x == np.round(x))
            x = np.where(ok, x, -1).astype(int)
        elif x.dtype.kind not in "iu":
            return np.zeros(x.shape, dtype=bool)
        else:
            ok = np.ones(x.shape, dtype=bool)
        return ok & (x >= 0) & (x < self.size)

    def pairwise(self, xs, ys):
        return self.matrix[np.asarray(xs, dtype=int), np.asarray(ys, dtype=int)]

    def distance_matrix(self, xs, ys=None):
        xs = np.asarray(xs, dtype=int)
        ys = xs if ys is None else np.asarray(ys, dtype=int)
        return self.matrix[np.ix_(xs, ys)]

    def diameter(self, region):
        idx = sorted(region.members)
        if len(idx) <= 1:
            return 0.0
        return float(self.matrix[np.ix_(idx, idx)].max())

    def random_points(self, size, rng):
        return rng.integers(0, self.size, size=size)

    def to_json(self):
        return {"kind": "finite", "matrix": self.matrix.tolist()}


class CloudSpace(FiniteSpace):
    """A finite point cloud in R^d with the Euclidean metric."""

    kind = "cloud"

    def __init__(self, coords):
        coords = np.atleast_2d(np.array(coords, dtype=float))
        if coords.shape[0] < 1:
            raise ArgumentError("point cloud must have >= 1 point")
        diff = coords[:, None, :] - coords[None, :, :]
        d = np.sqrt((diff**2).sum(axis=-1))
        d = 0.5 * (d + d.T)
        np.fill_diagonal(d, 0.0)
        object.__setattr__(self, "coords", coords)
        super().__init__(d)

    def to_json(self):
        return {"kind": "cloud", "points": self.coords.tolist()}


def space_from_spec(spec):
    """Build a space from its JSON description.

    >>> space_from_spec({"kind": "interval", "bounds": [0, 1]})
    IntervalSpace(0.0, 1.0)
    """
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ArgumentError("space: expected an object with a 'kind' field")
    kind = spec["kind"]
    if kind == "interval":
        bounds = spec.get("bounds", ["-inf", "inf"])
        if len(bounds) != 2:
            raise ArgumentError("space.bounds: expected [lo, hi]")
        return IntervalSpace(_float_from_json(bounds[0]), _float_from_json(bounds[1]))
    if kind == "finite":
        if "matrix" not in spec:
            raise ArgumentError("space.matrix: required for kind 'finite'")
        return FiniteSpace(np.asarray(spec["matrix"], dtype=float))
    if kind == "cloud":
        if "points" not in spec:
            raise ArgumentError("space.points: required for kind 'cloud'")
        return CloudSpace(spec["points"])
    raise ArgumentError(f"space.kind: unknown kind {kind!r}")


def metric_axiom_violation(space, n_triples=10_000, seed=0):
    """Largest violation of the metric axioms over random triples.

    Returns the maximum of ``d(x,z) - d(x,y) - d(y,z)``, ``|d(x,y) - d(y,x)|``,
    ``-d(x,y)`` and ``|d(x,x)|`` over the sampled triples; a value ``<= 0``
    (up to rounding) means no violation was found.
    """
    rng = np.random.default_rng(seed)
    x, y, z = (space.random_points(n_triples, rng) for _ in range(3))
    dxy = space.pairwise(x, y)
    tri = space.pairwise(x, z) - dxy - space.pairwise(y, z)
    sym = np.abs(dxy - space.pairwise(y, x))
    ident = np.abs(space.pairwise(x, x))
    return float(max(tri.max(), sym.max(), (-dxy).max(), ident.max()))


# ---------------------------------------------------------------------------
# compact exhaustions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CompactExhaustion:
    """Nested compacts ``K_1 <= ... <= K_m_max`` with certified tail masses.

    ``sets[m - 1]`` is an :class:`Interval` (for interval spaces) or a
    :class:`PointSet`; ``tail_bounds[m - 1]`` is the reference mass outside it.
    For interval spaces the good region is the half-open ``[lo, hi)`` unless
    ``hi`` is the space's own finite upper end.
    """

    sets: tuple
    tail_bounds: tuple

    @property
    def m_max(self):
        return len(self.sets)

    def compact(self, m):
        return self.sets[m - 1]

    def tail(self, m):
        return self.tail_bounds[m - 1]

    def is_nested(self):
        return all(a.issubset(b) for a, b in zip(self.sets, self.sets[1:]))

    def within_budget(self):
        return all(t <= tail_budget(m) for m, t in enumerate(self.tail_bounds, start=1))


def build_exhaustion(mu, m_max, space=None):
    """Compacts ``K_m`` with ``mu(K_m^c) <= e^(-m^2-1)/m`` for ``m = 1..m_max``.

    Parameters
    ----------
    mu : SourceMeasure
        Reference measure; must expose tail quantiles (analytic families) or
        atoms (finite measures).
    m_max : int
        Deepest depth.
    space : MetricSpace, optional
        Ground space. Defaults to the real line, or to the index space of a
        finite measure with integer atoms. Interval compacts are snapped
        outward to the space's dyadic grid at each depth.

    Raises
    ------
    UnsupportedMeasureError
        If ``mu`` has unbounded support and no tail-quantile access.
    """
    if m_max < 1:
        raise ArgumentError(f"m_max must be >= 1, got {m_max}")
    if space is None:
        support = getattr(mu, "support", None)
        if support is not None and np.asarray(support).dtype.kind in "iu":
            return _point_exhaustion(mu, m_max)
        space = IntervalSpace()
    if isinstance(space, FiniteSpace):
        return _point_exhaustion(mu, m_max, space)
    return _interval_exhaustion(mu, m_max, space)


def _interval_exhaustion(mu, m_max, space):
    if not hasattr(mu, "tail_interval"):
        raise UnsupportedMeasureError(f"{type(mu).__name__} has no tail-quantile access")
    sets, tails = [], []
    prev = None
    for m in range(1, m_max + 1):
        budget = tail_budget(m)
        lo, hi = mu.tail_interval(SAFETY * budget)
        lo = space.lo if lo <= space.lo else max(space.lo, space.snap_down(lo, m))
        hi = space.hi if hi >= space.hi else min(space.hi, space.snap_up(hi, m))
        if prev is not None:
            lo, hi = min(lo, prev.lo), max(hi, prev.hi)
        region = Interval(lo, hi, closed_hi=(hi == space.hi and math.isfinite(hi)))
        tail = 0.0
        if lo > space.lo:
            tail += mu.cell_mass(Interval(space.lo, lo))
        if hi < space.hi:
            tail += mu.cell_mass(Interval(hi, space.hi, closed_hi=True))
        tail = float(tail)
        if tail > budget:
            raise UnsupportedMeasureError(
                f"could not certify tail at depth {m}: {tail:.3e} > {budget:.3e}")
        sets.append(region)
        tails.append(tail)
        prev = region
    return CompactExhaustion(tuple(sets), tuple(tails))


def _point_exhaustion(mu, m_max, space=None):  # noqa: ARG001 - space kept for symmetry
    support = np.asarray(getattr(mu, "support", []))
    if support.dtype.kind not in "iu":
        raise UnsupportedMeasureError("point-set exhaustions need a finite measure on indices")
    weights = np.asarray(mu.float_weights, dtype=float)
    order = np.lexsort((support, -weights))  # heaviest first, ties by index
    sets, tails = [], []
    prev = frozenset()
    for m in range(1, m_max + 1):
        budget = tail_budget(m)
        remaining = float(weights.sum())
        members = set(prev)
        remaining -= float(weights[np.isin(support, list(prev))].sum())
        for i in order:
            if remaining <= SAFETY * budget:
                break
            if int(support[i]) in members:
                continue
            members.add(int(support[i]))
            remaining -= weights[i]
        # exact certified tail: mass of atoms not included
        outside = ~np.isin(support, list(members))
        tail = float(weights[outside].sum())
        sets.append(PointSet(members))
        tails.append(tail)
        prev = frozenset(members)
    return CompactExhaustion(tuple(sets), tuple(tails))
