"""``sanovlab`` command line: discretize | entropy | bl-dist | rate | verify.

Every subcommand reads an optional JSON config (``--config``); flags given on
the command line override the matching config keys.  Exit codes: 0 success,
1 a verification check failed, 2 bad usage or an invalid spec.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

from . import __version__
from .bl_metric import bl_distance
from .entropy import entropy_ladder
from .exceptions import SanovLabError
from .measure import FiniteMeasure, cell_masses, discretize, measure_from_spec
from .metric_space import build_exhaustion, space_from_spec, tail_budget
from .partition import build_sequence
from .sanov_harness import mc_rate
from .verify import CHECKS, _clean, default_config, run_verify

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _load_json(text_or_path, what):
    """Parse inline JSON or read it from a file path."""
    s = text_or_path.strip()
    try:
        if s.startswith("{") or s.startswith("["):
            return json.loads(s)
        with open(s) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{what}: malformed JSON ({exc})") from exc
    except OSError as exc:
        raise UsageError(f"{what}: cannot read {s!r} ({exc.strerror})") from exc


def _config(args):
    cfg = {}
    base = Path.cwd()
    if args.config:
        cfg = _load_json(args.config, "--config")
        if not isinstance(cfg, dict):
            raise UsageError("--config: expected a JSON object")
        if not args.config.strip().startswith("{"):
            base = Path(args.config).resolve().parent
    for flag, key in (("seed", "seed"), ("depth", "depth"), ("samples", "samples"),
                      ("reps", "reps")):
        val = getattr(args, flag, None)
        if val is not None:
            cfg[key] = val
    return cfg, base


def _need(cfg, key):
    if key not in cfg:
        raise UsageError(f"config.{key}: required")
    return cfg[key]


def _dumps(obj):
    return json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"


def _emit(text, out):
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _sequence(cfg):
    space = space_from_spec(cfg.get("space", {"kind": "interval"}))
    mu = measure_from_spec(_need(cfg, "mu"))
    depth = int(_need(cfg, "depth"))
    ex = build_exhaustion(mu, depth, space)
    return space, mu, ex, build_sequence(space, ex, depth)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_discretize(args):
    """Write ``partition_m<m>.json`` and ``measure_m<m>.<fmt>`` per depth, plus a summary."""
    cfg, _ = _config(args)
    space, mu, ex, seq = _sequence(cfg)
    out_dir = Path(args.out) if args.out else None
    summary = []
    for m in seq.depths:
        part = seq[m]
        mu_m = discretize(mu, part)
        w = [float(x) for x in cell_masses(mu, part)]  # cell order, good cells first
        bad_mass = math.fsum(w[part.good_count:])
        summary.append({"depth": m, "cells": len(part), "good_cells": part.good_count,
                        "total_mass": math.fsum(w), "bad_mass": bad_mass,
                        "reported_tail": ex.tail(m), "tail_budget_ok": ex.tail(m) <= tail_budget(m)})
        if out_dir is None:
            continue
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / f"partition_m{m}.json").write_text(_dumps(part.to_json()))
        if args.format == "csv":
            buf = io.StringIO()
            wr = csv.writer(buf, lineterminator="\n")
            wr.writerow(["tag", "mass", "is_good"])
            for c, x in zip(part.cells, w):
                wr.writerow([repr(float(c.tag)) if isinstance(c.tag, float) else c.tag,
                             repr(float(x)), int(c.is_good)])
            (out_dir / f"measure_m{m}.csv").write_text(buf.getvalue())
        else:
            (out_dir / f"measure_m{m}.json").write_text(_dumps(mu_m.to_json()))
    text = _dumps({"space": space.to_json(), "depths": summary})
    if out_dir is None:
        sys.stdout.write(text)
    else:
        (out_dir / "summary.json").write_text(text)
    return EXIT_OK


def cmd_entropy(args):
    cfg, _ = _config(args)
    _, mu, _, seq = _sequence(cfg)
    nu = measure_from_spec(_need(cfg, "nu"))
    lad = entropy_ladder(nu, mu, seq)
    if args.format == "json":
        text = _dumps({"m": lad.depths, "H_m": lad.values})
    else:
        text = lad.to_csv()
    _emit(text, args.out)
    return EXIT_OK


def cmd_bl_dist(args):
    cfg, _ = _config(args)
    nu_spec = _load_json(args.nu, "nu") if args.nu else _need(cfg, "nu")
    mu_spec = _load_json(args.mu, "mu") if args.mu else _need(cfg, "mu")
    space_spec = _load_json(args.space, "--space") if args.space else cfg.get(
        "space", {"kind": "interval"})
    space = space_from_spec(space_spec)
    nu, mu = measure_from_spec(nu_spec), measure_from_spec(mu_spec)
    if not (isinstance(nu, FiniteMeasure) and isinstance(mu, FiniteMeasure)):
        raise UsageError("bl-dist: both measures must be finite (or empirical)")
    d = bl_distance(nu, mu, space)
    text = _dumps({"bl_distance": d}) if args.format == "json" else f"{d!r}\n"
    _emit(text, args.out)
    return EXIT_OK


def cmd_rate(args):
    cfg, _ = _config(args)
    mu = measure_from_spec(_need(cfg, "mu"))
    space = space_from_spec(cfg.get("space", {"kind": "interval"}))
    sset = _need(cfg, "set")
    if "center" not in sset or "radius" not in sset:
        raise UsageError("config.set: needs 'center' and 'radius'")
    center = measure_from_spec(sset["center"])
    seed = int(_need(cfg, "seed"))
    n_list = [int(n) for n in cfg.get("n_list", [cfg["samples"]] if "samples" in cfg else [])]
    if not n_list:
        raise UsageError("config.n_list: required (or --samples)")
    partition = None
    if not isinstance(mu, FiniteMeasure):
        _, _, _, seq = _sequence(cfg)
        partition = seq[seq.m_max]
    rep = mc_rate(mu, center, float(sset["radius"]), n_list, int(_need(cfg, "reps")), seed,
                  space, partition=partition)
    text = rep.to_csv() if args.format == "csv" else rep.to_json() + "\n"
    _emit(text, args.out)
    return EXIT_OK


def cmd_verify(args):
    if args.config:
        cfg, base = _config(args)
    else:
        cfg = default_config()
        base = Path.cwd()
        over, _ = _config(args)
        cfg.update(over)
    only = args.check or None
    report = run_verify(cfg, base, only)
    if args.format == "csv":
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["check", "status"])
        for c in report["checks"]:
            wr.writerow([c["name"], c["status"]])
        text = buf.getvalue()
    else:
        text = _dumps(report)
    _emit(text, args.out)
    for c in report["checks"]:
        print(f"{c['status'].upper():4s} {c['name']}", file=sys.stderr)
    return EXIT_FAIL if report["summary"]["fail"] else EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _common(p, fmt_default):
    p.add_argument("--config", help="JSON config file (or inline JSON object)")
    p.add_argument("--seed", type=int)
    p.add_argument("--depth", type=int)
    p.add_argument("--samples", type=int, help="sample size n")
    p.add_argument("--reps", type=int, help="Monte Carlo replicates")
    p.add_argument("--out", help="output file (directory for discretize); default stdout")
    p.add_argument("--format", choices=["csv", "json"], default=fmt_default)


def build_parser():
    ap = argparse.ArgumentParser(prog="sanovlab", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"sanovlab {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("discretize", help="partition dump and discretized measures")
    _common(p, "json")
    p.set_defaults(func=cmd_discretize)

    p = sub.add_parser("entropy", help="entropy ladder H(nu^m | mu^m)")
    _common(p, "csv")
    p.set_defaults(func=cmd_entropy)

    p = sub.add_parser("bl-dist", help="bounded-Lipschitz distance of two finite measures")
    p.add_argument("nu", nargs="?", help="measure spec (inline JSON or file)")
    p.add_argument("mu", nargs="?", help="measure spec (inline JSON or file)")
    p.add_argument("--space", help="space spec (inline JSON or file)")
    _common(p, "json")
    p.set_defaults(func=cmd_bl_dist)

    p = sub.add_parser("rate", help="Monte Carlo decay rate of a bounded-Lipschitz ball")
    _common(p, "json")
    p.set_defaults(func=cmd_rate)

    p = sub.add_parser("verify", help="run the verification suite")
    _common(p, "json")
    p.add_argument("--check", action="append", choices=CHECKS,
                   help="run only this check (repeatable)")
    p.set_defaults(func=cmd_verify)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    if getattr(args, "depth", None) is not None and args.depth < 1:
        print("error: --depth must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except (UsageError, SanovLabError, ValueError, KeyError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {msg}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
