"""Nested tagged partitions with good (small) and bad (tail) cells.

At depth ``m`` the good cells tile the compact ``K_m`` with diameter at most
``1/(2m)``; the bad cells cover ``K_m^c``.  Every depth-``m+1`` cell is built
by refining a depth-``m`` cell, and a refined cell that contains an older tag
keeps it, so tag sets grow monotonically.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ArgumentError, PartitionConsistencyError
from .metric_space import (
    FiniteSpace,
    Interval,
    IntervalSpace,
    PointSet,
    _float_from_json,
    _float_to_json,
)


@dataclass(frozen=True)
class Cell:
    """One cell ``A_{m,i}``: a region, its tag, and whether it is good."""

    depth: int
    index: int
    region: Interval | PointSet
    tag: float | int
    is_good: bool

    def to_json(self):
        out = {"depth": self.depth, "index": self.index}
        out.update(self.region.to_json())
        out["tag"] = _float_to_json(self.tag) if isinstance(self.region, Interval) else int(self.tag)
        out["is_good"] = self.is_good
        return out


class TaggedPartition:
    """A finite partition of a space with one tag per cell.

    Cells ``0 .. good_count-1`` are good, the rest are bad.  Construction does
    not validate; use :func:`refine_check` for that.
    """

    def __init__(self, depth, cells, space):
        self.depth = int(depth)
        self.cells = tuple(cells)
        self.space = space
        self.good_count = sum(1 for c in self.cells if c.is_good)
        self.tags = np.array([c.tag for c in self.cells])
        if isinstance(space, IntervalSpace):
            self._order = np.argsort([c.region.lo for c in self.cells], kind="stable")
            self._los = np.array([self.cells[i].region.lo for i in self._order])
        else:
            self._lookup = {}
            for i, c in enumerate(self.cells):
                for p in c.region.members:
                    self._lookup.setdefault(p, i)

    def __len__(self):
        return len(self.cells)

    def __repr__(self):
        return (f"TaggedPartition(depth={self.depth}, cells={len(self.cells)}, "
                f"good={self.good_count})")

    @property
    def good_cells(self):
        return self.cells[: self.good_count]

    @property
    def bad_cells(self):
        return self.cells[self.good_count:]

    def cell_indices(self, xs):
        """Index of the cell containing each point of ``xs`` (vectorised)."""
        xs = np.asarray(xs)
        scalar = xs.ndim == 0
        xs = np.atleast_1d(xs)
        self.space.check(xs)
        if isinstance(self.space, IntervalSpace):
            pos = np.searchsorted(self._los, xs.astype(float), side="right") - 1
            pos = np.clip(pos, 0, len(self._order) - 1)
            idx = self._order[pos]
            ok = np.zeros(len(xs), dtype=bool)
            for j in np.unique(idx):
                sel = idx == j
                ok[sel] = self.cells[j].region.contains(xs[sel])
        else:
            idx = np.array([self._lookup.get(int(x), -1) for x in xs], dtype=int)
            ok = idx >= 0
        if not np.all(ok):
            bad = xs[~ok][0]
            raise PartitionConsistencyError(f"point {bad!r} lies in no cell at depth {self.depth}")
        return int(idx[0]) if scalar else idx

    def cell_of(self, x):
        return self.cells[self.cell_indices(x)]

    def project(self, x):
        """The tag of the cell containing ``x`` (vectorised over arrays)."""
        idx = self.cell_indices(x)
        return self.tags[idx]

    def is_bad_point(self, xs):
        return np.asarray(self.cell_indices(xs)) >= self.good_count

    def to_json(self):
        return [c.to_json() for c in self.cells]


class PartitionSequence:
    """Partitions indexed by depth ``m = 1 .. m_max`` over one space."""

    def __init__(self, partitions, space, exhaustion=None):
        self.partitions = tuple(partitions)
        self.space = space
        self.exhaustion = exhaustion

    def __repr__(self):
        return f"PartitionSequence(m_max={self.m_max}, space={self.space!r})"

    @property
    def m_max(self):
        return len(self.partitions)

    @property
    def depths(self):
        return list(range(1, self.m_max + 1))

    def __getitem__(self, m):
        if not 1 <= m <= self.m_max:
            raise ArgumentError(f"depth {m} outside 1..{self.m_max}")
        return self.partitions[m - 1]

    @property
    def tag_sets(self):
        return [set(p.tags.tolist()) for p in self.partitions]

    def parent_indices(self, m):
        """Depth-``m`` cell index of every depth-``m+1`` cell (located by its tag)."""
        return np.asarray(self[m].cell_indices(self[m + 1].tags))

    def to_json(self):
        return [c for p in self.partitions for c in p.to_json()]


# ---------------------------------------------------------------------------
# construction
# ---------------------------------------------------------------------------


def build_sequence(space, exhaustion, m_max):
    """Nested tagged partitions of ``space`` for depths ``1 .. m_max``.

    Good cells have diameter at most ``1/(2m)``.  Interval spaces are cut on a
    dyadic grid; finite spaces are clustered greedily inside each parent cell.
    """
    if m_max < 1:
        raise ArgumentError(f"depth must be >= 1, got {m_max}")
    if exhaustion.m_max < m_max:
        raise ArgumentError(f"exhaustion depth {exhaustion.m_max} < requested {m_max}")
    if isinstance(space, IntervalSpace):
        parts = _interval_sequence(space, exhaustion, m_max)
    elif isinstance(space, FiniteSpace):
        parts = _point_sequence(space, exhaustion, m_max)
    else:
        raise ArgumentError(f"unsupported space {space!r}")
    return PartitionSequence(parts, space, exhaustion)


def _interval_sequence(space, exhaustion, m_max):
    parts = []
    old_tags = np.array([])
    for m in range(1, m_max + 1):
        h = space.grid_width(m)
        K = exhaustion.compact(m)
        lo, hi = K.lo, K.hi
        if not (lo >= space.lo and hi <= space.hi and lo < hi):
            raise ArgumentError(f"compact at depth {m} is not inside {space!r}")
        a = space.anchor
        j0 = math.floor((lo - a) / h)
        j1 = math.ceil((hi - a) / h)
        bounds = [a + j * h for j in range(j0, j1 + 1)]
        bounds = [lo] + [b for b in bounds if lo < b < hi] + [hi]
        regions = [Interval(bounds[i], bounds[i + 1]) for i in range(len(bounds) - 1)]
        if K.closed_hi:
            regions[-1] = Interval(regions[-1].lo, hi, closed_hi=True)
        good = [(r, True) for r in regions]
        bad = []
        if lo > space.lo:
            bad.append((Interval(space.lo, lo), False))
        if hi < space.hi:
            bad.append((Interval(hi, space.hi, closed_hi=math.isfinite(space.hi)), False))
        cells = []
        for i, (region, is_good) in enumerate(good + bad):
            inside = old_tags[region.contains(old_tags)] if old_tags.size else old_tags
            if inside.size:
                tag = float(inside[0])
            elif math.isinf(region.lo):
                tag = region.hi - h / 2
            elif math.isinf(region.hi):
                tag = region.lo + h / 2
            else:
                tag = 0.5 * (region.lo + region.hi)
            cells.append(Cell(m, i, region, tag, is_good))
        part = TaggedPartition(m, cells, space)
        parts.append(part)
        old_tags = part.tags.astype(float)
    return parts


def _cluster(space, members, radius, seed_tag):
    """Greedy clusters of diameter <= ``radius``; ``seed_tag`` (if any) seeds first."""
    order = sorted(members)
    if seed_tag is not None and seed_tag in members:
        order.remove(seed_tag)
        order.insert(0, seed_tag)
    d = space.matrix
    clusters = []
    unassigned = list(order)
    while unassigned:
        cluster = [unassigned.pop(0)]
        rest = []
        for p in unassigned:
            if all(d[p, q] <= radius for q in cluster):
                cluster.append(p)
            else:
                rest.append(p)
        unassigned = rest
        clusters.append(cluster)
    return clusters


def _medoid(space, members):
    idx = sorted(members)
    sub = space.matrix[np.ix_(idx, idx)]
    return idx[int(np.argmin(sub.sum(axis=1)))]


def _point_sequence(space, exhaustion, m_max):
    parts = []
    parents = [(frozenset(range(space.size)), None)]  # (members, tag)
    for m in range(1, m_max + 1):
        K = exhaustion.compact(m).members
        good, bad = [], []
        for members, tag in parents:
            inside = members & K
            outside = members - K
            for cl in _cluster(space, inside, 1.0 / (2 * m), tag):
                t = tag if tag in cl else _medoid(space, cl)
                good.append((PointSet(cl), t))
            if outside:
                t = tag if tag in outside else _medoid(space, outside)
                bad.append((PointSet(outside), t))
        cells = [Cell(m, i, r, int(t), i < len(good)) for i, (r, t) in enumerate(good + bad)]
        part = TaggedPartition(m, cells, space)
        parts.append(part)
        parents = [(c.region.members, c.tag) for c in cells]
    return parts


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------


@dataclass
class CheckResult:
    passed: bool = True
    counterexample: object = None

    def fail(self, example):
        if self.passed:
            self.passed = False
            self.counterexample = example


@dataclass
class PartitionReport:
    """Pass/fail per structural invariant, with the first counterexample."""

    checks: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(c.passed for c in self.checks.values())

    def failures(self):
        return {k: v.counterexample for k, v in self.checks.items() if not v.passed}

    def to_dict(self):
        return {k: {"passed": v.passed, "counterexample": _jsonable(v.counterexample)}
                for k, v in self.checks.items()}


def _jsonable(x):
    if x is None:
        return None
    return json.loads(json.dumps(x, default=str))


def _cell_id(c):
    return (c.depth, c.index)


def refine_check(seq):
    """Validate every structural invariant of a partition sequence.

    Checks, per depth: disjoint cover of the space, tags inside their cells,
    good cells listed first, good diameters ``< 1/m``, bad cells covering
    exactly ``K_m^c`` (when an exhaustion is attached), non-empty cells; and
    between depths: nestedness and tag inclusion.
    """
    names = ["disjoint-cover", "tag-in-cell", "good-first", "good-diameter",
             "bad-cover", "nonempty-cells", "nested", "tag-inclusion"]
    report = PartitionReport({n: CheckResult() for n in names})
    ch = report.checks
    space = seq.space
    for part in seq.partitions:
        m = part.depth
        for i, c in enumerate(part.cells):
            if not bool(c.region.contains(c.tag)):
                ch["tag-in-cell"].fail({"cell": _cell_id(c), "tag": c.tag})
            if c.is_good != (i < part.good_count):
                ch["good-first"].fail({"cell": _cell_id(c)})
            if c.is_good and not space.diameter(c.region) < 1.0 / m:
                ch["good-diameter"].fail({"cell": _cell_id(c),
                                          "diameter": space.diameter(c.region), "limit": 1.0 / m})
            if c.region.is_empty:
                ch["nonempty-cells"].fail({"cell": _cell_id(c)})
        _check_cover(part, space, ch["disjoint-cover"])
        if seq.exhaustion is not None and m <= seq.exhaustion.m_max:
            _check_bad_cover(part, space, seq.exhaustion.compact(m), ch["bad-cover"])
    for prev, nxt in zip(seq.partitions, seq.partitions[1:]):
        for c in nxt.cells:
            owners = [p for p in prev.cells if c.region.issubset(p.region)]
            if len(owners) != 1:
                ch["nested"].fail({"cell": _cell_id(c),
                                   "parents": [_cell_id(p) for p in owners]})
        missing = set(prev.tags.tolist()) - set(nxt.tags.tolist())
        if missing:
            ch["tag-inclusion"].fail({"depth": prev.depth, "missing": sorted(missing)[:5]})
    return report


def _check_cover(part, space, result):
    if isinstance(space, IntervalSpace):
        cells = sorted(part.cells, key=lambda c: (c.region.lo, c.region.hi))
        if cells[0].region.lo != space.lo:
            result.fail({"uncovered": [space.lo, cells[0].region.lo]})
        for a, b in zip(cells, cells[1:]):
            ra, rb = a.region, b.region
            if rb.lo < ra.hi or (rb.lo == ra.hi and ra.closed_hi):
                result.fail({"overlap": [_cell_id(a), _cell_id(b)]})
            elif rb.lo > ra.hi:
                result.fail({"gap": [ra.hi, rb.lo], "between": [_cell_id(a), _cell_id(b)]})
        last = max(part.cells, key=lambda c: c.region.hi).region
        if last.hi != space.hi or (math.isfinite(space.hi) and not last.closed_hi):
            result.fail({"uncovered": [last.hi, space.hi]})
    else:
        seen = {}
        for c in part.cells:
            for p in c.region.members:
                if p in seen:
                    result.fail({"overlap": [seen[p], _cell_id(c)], "point": p})
                seen[p] = _cell_id(c)
        missing = set(range(space.size)) - set(seen)
        if missing:
            result.fail({"uncovered": sorted(missing)[:5]})


def _check_bad_cover(part, space, K, result):
    if isinstance(space, IntervalSpace):
        for c in part.cells:
            inside_K = c.region.issubset(K)
            if c.is_good and not inside_K:
                result.fail({"good_outside_K": _cell_id(c)})
            if not c.is_good and not c.region.intersect(K).is_empty:
                result.fail({"bad_meets_K": _cell_id(c)})
    else:
        bad = set()
        for c in part.bad_cells:
            bad |= c.region.members
        expected = set(range(space.size)) - set(K.members)
        if bad != expected:
            result.fail({"bad": sorted(bad)[:5], "expected": sorted(expected)[:5]})


# ---------------------------------------------------------------------------
# dump format
# ---------------------------------------------------------------------------


def partition_from_json(records, space):
    """Rebuild a :class:`PartitionSequence` from the JSON cell dump.

    Records may be hand-edited; nothing is validated here.
    """
    by_depth = {}
    for r in records:
        try:
            m = int(r["depth"])
            if "members" in r:
                region = PointSet(r["members"])
                tag = int(r["tag"])
            else:
                region = Interval(_float_from_json(r["lo"]), _float_from_json(r["hi"]),
                                  bool(r.get("closed_hi", False)))
                tag = _float_from_json(r["tag"])
            cell = Cell(m, int(r["index"]), region, tag, bool(r["is_good"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ArgumentError(f"partition record {r!r}: {exc}") from exc
        by_depth.setdefault(m, []).append(cell)
    if sorted(by_depth) != list(range(1, len(by_depth) + 1)):
        raise ArgumentError("partition depths must be 1..m_max without gaps")
    parts = [TaggedPartition(m, sorted(cs, key=lambda c: c.index), space)
             for m, cs in sorted(by_depth.items())]
    return PartitionSequence(parts, space)

