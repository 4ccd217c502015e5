"""Relative entropy (integral and variational forms), entropy ladders, and the
density-ratio martingale over a partition sequence.

All entropies are in nats.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy import optimize
from scipy.special import logsumexp

from .exceptions import InfiniteEntropyError, OptimizerError
from .measure import FiniteMeasure, cell_masses


def _aligned(nu, mu):
    pts = np.union1d(nu.support, mu.support)
    return pts, nu.masses_at(pts), mu.masses_at(pts)


def kl_from_masses(p, q):
    """``sum p log(p/q)`` with ``0 log 0 = 0``; ``inf`` if ``p > 0 = q``."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    pos = p > 0
    if np.any(pos & (q <= 0)):
        return math.inf
    return math.fsum(p[pos] * np.log(p[pos] / q[pos]))


def relative_entropy_integral(nu, mu):
    """``H(nu|mu) = sum_a nu(a) log(nu(a)/mu(a))`` for finite measures.

    Supports are matched by point identity; ``+inf`` when ``nu`` charges a
    ``mu``-null point.
    """
    _, p, q = _aligned(nu, mu)
    return kl_from_masses(p, q)


relative_entropy = relative_entropy_integral


def _variational_objective(f, p, q):
    # value and gradient of  -(<f, p> - log <e^f, q>)
    z = f + np.log(q)
    lse = logsumexp(z)
    soft = np.exp(z - lse)
    return -(f @ p - lse), -(p - soft)


def _projected_grad(f, g, bound):
    pg = g.copy()
    edge = bound * (1 - 1e-12)
    pg[(f <= -edge) & (g > 0)] = 0.0
    pg[(f >= edge) & (g < 0)] = 0.0
    return pg


def _newton_polish(f, p, q, bound, gtol, steps=30):
    """Projected Newton steps on the free coordinates (quasi-Newton stalls near 1e-9)."""
    val, g = _variational_objective(f, p, q)
    for _ in range(steps):
        pg = _projected_grad(f, g, bound)
        free = pg != 0
        if np.linalg.norm(pg) <= gtol or not free.any():
            break
        z = f + np.log(q)
        soft = np.exp(z - logsumexp(z))[free]
        H = np.diag(soft) - np.outer(soft, soft)
        d = np.zeros_like(f)
        d[free] = -np.linalg.lstsq(H, g[free], rcond=1e-14)[0]
        t = 1.0
        while t > 1e-8:
            cand = np.clip(f + t * d, -bound, bound)
            cval, cg = _variational_objective(cand, p, q)
            if cval <= val:
                break
            t /= 2
        else:
            break
        f, val, g = cand, cval, cg
    return f


def relative_entropy_variational(nu, mu, bound, *, gtol=1e-10, max_iter=10_000,
                                 return_function=False):
    """Sup of ``int f dnu - log int e^f dmu`` over ``|f| <= bound``.

    The supremum runs over functions on the common support, maximised by a
    bounded quasi-Newton ascent started at ``f = 0``.  Points with
    ``mu = 0`` are dropped (``e^f`` is not charged there); if ``nu`` charges
    them, the box bound caps the objective, which then grows with ``bound``.

    Raises
    ------
    OptimizerError
        If the projected gradient is still above ``gtol`` (scaled) at the
        iteration cap.
    """
    if bound <= 0:
        raise ValueError("bound must be positive")
    pts, p, q = _aligned(nu, mu)
    keep = (p > 0) | (q > 0)
    pts, p, q = pts[keep], p[keep], q[keep]
    # nu-mass on mu-null points contributes bound * mass (f = +bound there)
    null = q <= 0
    lost = float(p[null].sum()) * bound
    p_r, q_r = p[~null], q[~null]
    # diagonal preconditioning: near the optimum the Hessian is close to
    # diag(p) - p p^T, so work in y = f * sqrt(w) with w = max(p, q)
    w = np.maximum(p_r, q_r)
    scale = np.sqrt(w / w.max())

    def obj(y):
        val, g = _variational_objective(y / scale, p_r, q_r)
        return val, g / scale

    res = optimize.minimize(
        obj, np.zeros(len(p_r)), jac=True, method="L-BFGS-B",
        bounds=[(-bound * s, bound * s) for s in scale],
        options={"maxiter": max_iter, "gtol": gtol * 1e-3, "ftol": 1e-16, "maxcor": 30},
    )
    f = _newton_polish(np.clip(res.x / scale, -bound, bound), p_r, q_r, bound, gtol)
    neg, g = _variational_objective(f, p_r, q_r)
    resid = float(np.linalg.norm(_projected_grad(f, g, bound)))
    if resid > 1e-7:
        raise OptimizerError(f"variational ascent stopped with residual {resid:.3e}: {res.message}",
                             residual=resid)
    value = float(-neg) + lost
    if return_function:
        full = np.full(len(pts), float(bound))
        full[~null] = f
        return value, (pts, full)
    return value


@dataclass
class InequalityCheck:
    passed: bool
    slack: float


def entropy_inequality_check(f, nu, mu, tol=1e-9):
    """Slack ``H(nu|mu) + log int e^f dmu - int f dnu`` of the entropy inequality.

    ``f`` is a callable on support points or an array aligned with the union
    of the supports (sorted).
    """
    pts, p, q = _aligned(nu, mu)
    vals = np.asarray(f(pts) if callable(f) else f, dtype=float)
    H = kl_from_masses(p, q)
    pos = q > 0
    log_mgf = float(logsumexp(vals[pos], b=q[pos]))
    slack = H + log_mgf - float(vals @ p)
    return InequalityCheck(passed=bool(slack >= -tol), slack=slack)


# ---------------------------------------------------------------------------
# ladders over partition sequences
# ---------------------------------------------------------------------------


@dataclass
class EntropyLadder:
    """``H(nu^m | mu^m)`` for each depth ``m``."""

    depths: list
    values: list

    @property
    def limit_estimate(self):
        return max(self.values) if self.values else math.nan

    def is_monotone(self, tol=0.0):
        return all(b >= a - tol for a, b in zip(self.values, self.values[1:]))

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["m", "H_m"])
        for m, h in zip(self.depths, self.values):
            w.writerow([m, _fmt(h)])
        return buf.getvalue()


def _fmt(x):
    if math.isinf(x):
        return "inf"
    return repr(float(x))


def entropy_ladder(nu, mu, seq, depths=None):
    """Discretized entropies along a partition sequence."""
    depths = list(seq.depths if depths is None else depths)
    values = []
    for m in depths:
        part = seq[m]
        values.append(kl_from_masses([float(x) for x in cell_masses(nu, part)],
                                     [float(x) for x in cell_masses(mu, part)]))
    return EntropyLadder(depths, values)


@dataclass
class MartingaleTrace:
    """Cell values of ``S_m = (dnu^m/dmu^m) o pi^m`` and their checks.

    ``S_values[k][i]`` is ``S`` on cell ``i`` at depth ``depths[k]`` (zero on
    ``mu``-null cells).  Values are Fractions when both measures are finite.
    """

    depths: list
    S_values: list
    mu_masses: list
    expectations: list
    s_log_s: list
    tower_exact: list = field(default_factory=list)
    tower_residuals: list = field(default_factory=list)
    exact: bool = False

    @property
    def ui_bound(self):
        return max(self.s_log_s)

    def to_csv(self, ladder=None):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["m", "H_m", "E_S_log_S"])
        for k, m in enumerate(self.depths):
            h = ladder.values[k] if ladder is not None else self.s_log_s[k]
            w.writerow([m, _fmt(h), _fmt(self.s_log_s[k])])
        return buf.getvalue()


def martingale_trace(nu, mu, seq, depths=None):
    """Density-ratio martingale of ``nu`` against ``mu`` on the filtration of ``seq``.

    For two finite measures all cell arithmetic is done in exact rationals, so
    ``E_mu[S_{m+1} | F_m] = S_m`` is checked with ``==``.

    Raises
    ------
    InfiniteEntropyError
        If ``nu`` charges a cell of zero ``mu``-mass at some depth.
    """
    depths = list(seq.depths if depths is None else depths)
    exact = isinstance(nu, FiniteMeasure) and isinstance(mu, FiniteMeasure)
    conv = Fraction if exact else float
    S_all, mu_all, exps, slogs = [], [], [], []
    for m in depths:
        part = seq[m]
        pn = [conv(x) for x in cell_masses(nu, part)]
        pm = [conv(x) for x in cell_masses(mu, part)]
        S = []
        for i, (a, b) in enumerate(zip(pn, pm)):
            if b == 0:
                if a > 0:
                    raise InfiniteEntropyError(
                        f"nu charges mu-null cell {i} at depth {m}: H(nu^m|mu^m) = inf")
                S.append(conv(0))
            else:
                S.append(a / b)
        S_all.append(S)
        mu_all.append(pm)
        exps.append(float(sum(b * s for b, s in zip(pm, S))))
        slogs.append(math.fsum(float(b) * float(s) * math.log(float(s))
                               for b, s in zip(pm, S) if s > 0))
    trace = MartingaleTrace(depths, S_all, mu_all, exps, slogs, exact=exact)
    for k in range(len(depths) - 1):
        m, m_next = depths[k], depths[k + 1]
        parent = _ancestor_map(seq, m, m_next)
        cond = [conv(0)] * len(seq[m])
        for j, i in enumerate(parent):
            cond[i] += mu_all[k + 1][j] * S_all[k + 1][j]
        ok, resid = True, 0.0
        for i, (c, q, s) in enumerate(zip(cond, mu_all[k], S_all[k])):
            if q == 0:
                continue
            ce = c / q
            if exact:
                ok = ok and ce == s
            resid = max(resid, abs(float(ce) - float(s)))
        trace.tower_exact.append(ok if exact else resid == 0.0)
        trace.tower_residuals.append(resid)
    return trace


def _ancestor_map(seq, m, m_next):
    """Depth-``m`` ancestor of each depth-``m_next`` cell."""
    idx = np.arange(len(seq[m_next]))
    for d in range(m_next - 1, m - 1, -1):
        idx = seq.parent_indices(d)[idx]
    return idx
