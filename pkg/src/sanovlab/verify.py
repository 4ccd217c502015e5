"""Named verification suite run by ``sanovlab verify``.

Each check returns a status (``pass``, ``fail`` or ``skip``) and a small dict
of the numbers it compared.  Everything is driven by one JSON config, so a
fixed config and seed reproduce the report byte for byte.
"""
from __future__ import annotations

import json
import math
from importlib import resources
from pathlib import Path

import numpy as np
from scipy.optimize import minimize_scalar

from .bl_metric import bl_distance, coupling_bound, projection_bounds
from .entropy import (
    entropy_ladder,
    martingale_trace,
    relative_entropy_integral,
    relative_entropy_variational,
)
from .exceptions import ArgumentError, ResourceError
from .measure import FiniteMeasure, discretize, measure_from_spec
from .metric_space import IntervalSpace, build_exhaustion, space_from_spec
from .partition import PartitionSequence, build_sequence, partition_from_json, refine_check
from .sanov_harness import (
    exp_equivalence_check,
    proposition_chain_check,
    supinf_ladder,
    types_log_probability,
)

CHECKS = ["coupling-bound", "partition-structure", "entropy-ladder", "exp-equivalence",
          "projection-distance", "martingale", "upper-chain", "lower-chain",
          "supinf-upper", "types-rate"]


def default_config():
    text = resources.files("sanovlab").joinpath("data/default_verify.json").read_text()
    return json.loads(text)


def _clean(x):
    """JSON-safe copy with numpy scalars unwrapped and infinities spelled out."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        if math.isnan(x):
            return "nan"
        return x
    return x


class Suite:
    """Runs the checks of one config; ``base`` resolves relative file paths."""

    def __init__(self, config, base=None):
        self.cfg = config
        self.base = Path(base) if base is not None else Path.cwd()
        try:
            self.seed = int(config["seed"])
            self.depth = int(config.get("depth", 6))
        except KeyError as exc:
            raise ArgumentError(f"config.{exc.args[0]}: required") from exc
        if self.depth < 1:
            raise ArgumentError("config.depth: must be >= 1")
        self.space = space_from_spec(config.get("space", {"kind": "interval"}))
        self.mu = measure_from_spec(self._need("mu"))
        self.nu = measure_from_spec(self._need("nu"))
        fin = self._need("finite")
        self.fmu = measure_from_spec(fin["mu"])
        self.fnu = measure_from_spec(fin["nu"])
        self._seq = None
        self._fseq = None

    def _need(self, key):
        if key not in self.cfg:
            raise ArgumentError(f"config.{key}: required")
        return self.cfg[key]

    def _section(self, key):
        return self.cfg.get(key, {})

    @property
    def seq(self):
        if self._seq is None:
            ex = build_exhaustion(self.mu, self.depth, self.space)
            self._seq = build_sequence(self.space, ex, self.depth)
        return self._seq

    @property
    def fseq(self):
        if self._fseq is None:
            ex = build_exhaustion(self.fmu, self.depth, IntervalSpace())
            self._fseq = build_sequence(IntervalSpace(), ex, self.depth)
        return self._fseq

    def run(self, only=None):
        names = CHECKS if not only else [n for n in CHECKS if n in only]
        results = []
        for name in names:
            fn = getattr(self, "check_" + name.replace("-", "_"))
            try:
                status, details = fn()
            except ResourceError as exc:
                status, details = "skip", {"reason": str(exc)}
            results.append({"name": name, "status": status, "details": _clean(details)})
        summary = {s: sum(r["status"] == s for r in results) for s in ("pass", "fail", "skip")}
        return {"seed": self.seed, "depth": self.depth, "checks": results, "summary": summary}

    # -- individual checks -------------------------------------------------

    def check_coupling_bound(self):
        sec = self._section("coupling")
        trials = int(sec.get("trials", 200))
        rng = np.random.default_rng([self.seed, 1])
        worst = -math.inf
        space = IntervalSpace()
        for _ in range(trials):
            k = int(rng.integers(1, 7))
            xs = np.round(rng.normal(0, 2, k), 3)
            ys = np.round(xs + rng.normal(0, 1, k) * rng.integers(0, 2, k), 3)
            w = rng.dirichlet(np.ones(k))
            w[-1] = 1.0 - math.fsum(w[:-1])
            bound = coupling_bound((xs, ys, w), space)
            d = bl_distance(FiniteMeasure(xs, w), FiniteMeasure(ys, w), space)
            worst = max(worst, d - bound)
        return ("pass" if worst <= 1e-9 else "fail"), {"trials": trials,
                                                     "max_excess": worst}

    def check_partition_structure(self):
        override = self.cfg.get("partition_override")
        if override:
            with open(self.base / override) as fh:
                records = json.load(fh)
            seq = partition_from_json(records, self.space)
            seq = PartitionSequence(seq.partitions, self.space,
                                    build_exhaustion(self.mu, seq.m_max, self.space))
        else:
            seq = self.seq
        report = refine_check(seq)
        ex = seq.exhaustion
        details = {"checks": report.to_dict(), "tail_within_budget": ex.within_budget()}
        ok = report.passed and ex.within_budget() and ex.is_nested()
        return ("pass" if ok else "fail"), details

    def check_entropy_ladder(self):
        lad = entropy_ladder(self.nu, self.mu, self.seq)
        nu_m = discretize(self.nu, self.seq[self.depth])
        mu_m = discretize(self.mu, self.seq[self.depth])
        var = relative_entropy_variational(nu_m, mu_m, float(self._section("entropy")
                                                                .get("bound", 30.0)))
        gap = abs(var - lad.values[-1])
        ok = lad.is_monotone() and gap <= 1e-6
        return ("pass" if ok else "fail"), {"values": lad.values, "monotone": lad.is_monotone(),
                                            "variational": var, "variational_gap": gap}

    def check_exp_equivalence(self):
        sec = self._section("exp_equivalence")
        m = int(sec.get("m", 2))
        n = int(self.cfg.get("samples", 50))
        reps = int(self.cfg.get("reps", 2000))
        if m > self.depth:
            raise ArgumentError(f"exp_equivalence.m={m} exceeds depth {self.depth}")
        rep = exp_equivalence_check(self.mu, self.seq, n, m, reps, self.seed,
                                    lp_reps=int(sec.get("lp_reps", 50)))
        return ("pass" if rep.passed else "fail"), rep.to_dict()

    def check_projection_distance(self):
        sec = self._section("projection")
        trials = int(sec.get("trials", 50))
        rng = np.random.default_rng([self.seed, 5])
        support = self.fmu.support
        worst_simple = worst_three = -math.inf
        for _ in range(trials):
            w = rng.dirichlet(np.full(len(support), 0.5))
            sigma = FiniteMeasure(support, w)
            alpha = relative_entropy_integral(sigma, self.fmu)
            for m in self.fseq.depths:
                d, simple, three = projection_bounds(sigma, self.fseq[m], alpha)
                worst_simple = max(worst_simple, d - simple)
                worst_three = max(worst_three, d - three)
        bad = sum(len(self.fseq[m].bad_cells) for m in self.fseq.depths)
        ok = worst_simple <= 0 and worst_three <= 0
        return ("pass" if ok else "fail"), {"trials": trials, "bad_cells": bad,
                                            "max_excess_simple": worst_simple,
                                            "max_excess_three_term": worst_three}

    def check_martingale(self):
        tr = martingale_trace(self.fnu, self.fmu, self.fseq)
        lad = entropy_ladder(self.fnu, self.fmu, self.fseq)
        mean_err = max(abs(e - 1.0) for e in tr.expectations)
        ladder_err = max(abs(a - b) for a, b in zip(tr.s_log_s, lad.values))
        ok = all(tr.tower_exact) and mean_err <= 1e-12 and ladder_err <= 1e-12
        return ("pass" if ok else "fail"), {"tower_exact": tr.tower_exact, "exact": tr.exact,
                                            "mean_error": mean_err, "ladder_error": ladder_err}

    def _chain(self):
        if not hasattr(self, "_chain_report"):
            sec = self._need("chain")
            mu = measure_from_spec(sec["mu"])
            nu = measure_from_spec(sec["nu"])
            m = int(sec.get("m", 3))
            ex = build_exhaustion(mu, m, IntervalSpace())
            seq = build_sequence(IntervalSpace(), ex, m)
            self._chain_report = proposition_chain_check(
                nu, mu, seq, int(sec.get("n", 100)), float(sec.get("eps", 0.05)), m,
                int(sec.get("reps", 2000)), self.seed)
        return self._chain_report

    def _chain_side(self, which):
        rep = self._chain()
        mc = getattr(rep, which)
        exact = getattr(rep, "exact_" + which)
        sides = [mc] + ([exact] if exact is not None else [])
        ok = all(s.containment_violations == 0 and s.inequality_holds and s.band_consistent
                 for s in sides)
        details = {"n": rep.n, "m": rep.m, "eps": rep.eps, "c": rep.c,
                   "monte_carlo": _side_dict(mc)}
        if exact is not None:
            details["exact"] = _side_dict(exact)
        return ("pass" if ok else "fail"), details

    def check_upper_chain(self):
        return self._chain_side("upper")

    def check_lower_chain(self):
        return self._chain_side("lower")

    def check_supinf_upper(self):
        lad = supinf_ladder(self.fnu, self.fmu, self.fseq, m0=1)
        ok = lad.within_upper(1e-6)
        return ("pass" if ok else "fail"), {"values": lad.values, "entropy": lad.entropy,
                                            "running_sup": lad.running_sup}

    def check_types_rate(self):
        sec = self._section("types")
        mu = measure_from_spec(sec.get("mu", {"family": "finite", "support": [0, 1],
                                              "weights": [0.5, 0.5]}))
        thr = float(sec.get("threshold", 0.75))
        n_list = [int(n) for n in sec.get("n_list", [50, 100, 200, 400])]
        guard = int(sec.get("guard", 10**7))
        if len(mu) != 2:
            raise ArgumentError("types.mu: a two-point measure is required")
        p1 = float(mu.float_weights[1])
        target = minimize_scalar(lambda p: _bin_kl(p, p1), bounds=(thr, 1.0),
                                 method="bounded", options={"xatol": 1e-12}).fun
        gaps = []
        for n in n_list:
            lp = types_log_probability(mu, n, lambda f: f[:, 1] >= thr - 1e-12,
                                       vectorized=True, guard=guard)
            gaps.append(-lp / n - target)
        within = all(abs(g) <= 2 * math.log(n + 1) / n for g, n in zip(gaps, n_list))
        decreasing = all(b < a for a, b in zip(gaps, gaps[1:]))
        ok = within and decreasing
        return ("pass" if ok else "fail"), {"n_list": n_list, "target": target, "gaps": gaps,
                                            "within_bound": within, "decreasing": decreasing}


def _bin_kl(p, q):
    out = 0.0
    for a, b in ((p, q), (1 - p, 1 - q)):
        if a > 0:
            out += a * math.log(a / b)
    return out


def _side_dict(s):
    d = {"left": s.left, "right_ball": s.right_ball, "right_tail": s.right_tail,
         "right_union": s.right_union, "containment_violations": s.containment_violations}
    if s.left_ci is not None:
        d["left_ci"] = list(s.left_ci)
    return d


def run_verify(config, base=None, only=None):
    """Run the suite; returns the report dict (``summary.fail == 0`` means success)."""
    return Suite(config, base).run(only)
