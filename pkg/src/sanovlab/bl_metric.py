"""Bounded-Lipschitz distance between finitely supported measures.

``d_BL(nu, mu) = max sum_x f(x) (nu(x) - mu(x))`` over ``f`` with
``|f| <= 1`` and ``|f(x) - f(y)| <= d(x, y)`` on the merged support, solved as
a linear program.  Restricting to the merged support loses nothing: a
1-Lipschitz function bounded by one on a subset extends to the whole space
with the same bounds.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .exceptions import ArgumentError, SanovLabError
from .metric_space import IntervalSpace

#: Above this support size all-pairs constraints are replaced by constraint generation.
DENSE_LIMIT = 512
VIOLATION_TOL = 1e-10


@dataclass
class BLInstance:
    support: np.ndarray
    distances: np.ndarray
    delta: np.ndarray
    one_dimensional: bool = False


@dataclass
class BLSolution:
    value: float
    dual_value: float
    f: np.ndarray
    support: np.ndarray
    n_constraints: int
    rounds: int

    @property
    def gap(self):
        return abs(self.value - self.dual_value)


def bl_instance(nu, mu, space):
    pts = np.union1d(nu.support, mu.support)
    space.check(pts)
    delta = nu.masses_at(pts) - mu.masses_at(pts)
    one_d = isinstance(space, IntervalSpace)
    dist = None if one_d else space.distance_matrix(pts)
    return BLInstance(pts, dist, delta, one_d)


def _pairs_1d(pts):
    # on the line, constraints between sorted neighbours imply all the others
    i = np.arange(len(pts) - 1)
    gaps = np.diff(pts.astype(float))
    keep = gaps < 2.0
    return i[keep], i[keep] + 1, gaps[keep]


def _pairs_dense(D):
    i, j = np.triu_indices(D.shape[0], k=1)
    d = D[i, j]
    keep = d < 2.0  # |f| <= 1 already implies |f(x) - f(y)| <= 2
    return i[keep], j[keep], d[keep]


def _solve_lp(delta, I, J, d):
    n = len(delta)
    k = len(I)
    rows = np.repeat(np.arange(2 * k), 2)
    cols = np.empty(4 * k, dtype=int)
    vals = np.empty(4 * k)
    cols[0::4], cols[1::4], cols[2::4], cols[3::4] = I, J, J, I
    vals[0::4], vals[1::4], vals[2::4], vals[3::4] = 1.0, -1.0, 1.0, -1.0
    A = sparse.csr_matrix((vals, (rows, cols)), shape=(2 * k, n)) if k else None
    b = np.repeat(d, 2) if k else None  # rows alternate +/- per pair
    res = linprog(-delta, A_ub=A, b_ub=b, bounds=[(-1.0, 1.0)] * n, method="highs",
                  options={"primal_feasibility_tolerance": 1e-10,
                           "dual_feasibility_tolerance": 1e-10})
    if res.status != 0:
        raise SanovLabError(f"bounded-Lipschitz LP failed: {res.message}")
    # dual objective of the min problem: b.y + l.z_l + u.z_u
    min_dual = -float(res.lower.marginals.sum()) + float(res.upper.marginals.sum())
    if k:
        min_dual += float(res.ineqlin.marginals @ b)
    return res.x, float(-res.fun), -min_dual


def solve_bl(inst):
    """Solve the LP of a :class:`BLInstance`, adding Lipschitz rows as needed."""
    n = len(inst.delta)
    if n <= 1 or np.all(inst.delta == 0):
        return BLSolution(0.0, 0.0, np.zeros(n), inst.support, 0, 0)
    if inst.one_dimensional:
        I, J, d = _pairs_1d(inst.support)
        f, val, dual = _solve_lp(inst.delta, I, J, d)
        return BLSolution(val, dual, f, inst.support, len(I), 1)
    D = inst.distances
    if n <= DENSE_LIMIT:
        I, J, d = _pairs_dense(D)
        f, val, dual = _solve_lp(inst.delta, I, J, d)
        return BLSolution(val, dual, f, inst.support, len(I), 1)
    # constraint generation: start from nearest neighbours, add violated pairs
    nn = np.argsort(D, axis=1)[:, 1:9]
    I0 = np.repeat(np.arange(n), nn.shape[1])
    J0 = nn.reshape(-1)
    active = set(zip(np.minimum(I0, J0).tolist(), np.maximum(I0, J0).tolist()))
    rounds = 0
    while True:
        rounds += 1
        pairs = np.array(sorted(active))
        I, J = pairs[:, 0], pairs[:, 1]
        d = D[I, J]
        keep = d < 2.0
        f, val, dual = _solve_lp(inst.delta, I[keep], J[keep], d[keep])
        viol = np.abs(f[:, None] - f[None, :]) - D
        vi, vj = np.nonzero(np.triu(viol > VIOLATION_TOL, k=1))
        if len(vi) == 0:
            return BLSolution(val, dual, f, inst.support, int(keep.sum()), rounds)
        active.update(zip(vi.tolist(), vj.tolist()))


def bl_distance(nu, mu, space, *, return_solution=False):
    """Exact bounded-Lipschitz distance between two finite measures on ``space``.

    >>> from sanovlab.measure import FiniteMeasure
    >>> round(bl_distance(FiniteMeasure([0.0], [1.0]), FiniteMeasure([3.0], [1.0]),
    ...                   IntervalSpace()), 12)
    2.0
    """
    sol = solve_bl(bl_instance(nu, mu, space))
    value = min(max(sol.value, 0.0), 2.0)
    if return_solution:
        return value, sol
    return value


def coupling_bound(pairs, space):
    """``sum_i w_i (d(x_i, y_i) ^ 2)`` for a coupling given as ``(x, y, w)`` triples.

    ``pairs`` may also be a tuple of three arrays ``(xs, ys, ws)``.
    """
    if isinstance(pairs, tuple) and len(pairs) == 3 and np.ndim(pairs[0]) == 1:
        xs, ys, ws = (np.asarray(a) for a in pairs)
    else:
        if not pairs:
            raise ArgumentError("empty coupling")
        xs, ys, ws = (np.asarray(a) for a in zip(*pairs))
    ws = ws.astype(float)
    if np.any(ws < 0) or abs(math.fsum(ws) - 1.0) > 1e-12:
        raise ArgumentError(f"coupling weights must be nonnegative and sum to 1 (got {math.fsum(ws)!r})")
    space.check(xs)
    space.check(ys)
    d = np.minimum(space.pairwise(xs, ys), 2.0)
    return math.fsum(ws * d)


def projection_coupling(nu, partition):
    """The coupling ``(X, pi^m(X))`` of a finite ``nu`` with its discretization."""
    return (nu.support, partition.project(nu.support), nu.float_weights)


def in_ball(sigma, center, radius, space):
    """Closed-ball membership ``d_BL(sigma, center) <= radius`` (+1e-9 slack)."""
    if radius < 0:
        raise ArgumentError("radius must be nonnegative")
    if radius >= 2.0:
        return True
    return bl_distance(sigma, center, space) <= radius + 1e-9


def projection_bounds(sigma, partition, alpha):
    """Projection distance of ``sigma`` at depth ``m`` and its two entropy bounds.

    Returns ``(measured, simple, three_term)`` where ``measured`` is the
    coupling bound on ``d_BL(sigma^m, sigma)``, ``simple = (3 + 2 alpha)/m`` and
    ``three_term = 1/m + 2 alpha/m + 2 exp(-m^2 - 1 + m)/m^2`` (the bound
    through ``sigma(K_m^c)`` with exponential weight ``theta = m``), for any
    ``alpha >= H(sigma|mu)``.
    """
    m = partition.depth
    measured = coupling_bound(projection_coupling(sigma, partition), partition.space)
    theta = float(m)
    three = 1.0 / m + 2.0 * alpha / theta + 2.0 * math.exp(-m * m - 1 + theta) / (m * theta)
    return measured, (3.0 + 2.0 * alpha) / m, three
