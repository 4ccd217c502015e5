import json
import math

import pytest

from sanovlab.cli import main
from sanovlab.verify import default_config

UNIFORM = {"family": "uniform", "lo": 0.0, "hi": 1.0}
GAUSS = {"family": "gaussian", "mean": 0.0, "std": 1.0}


def write(tmp_path, name, obj):
    p = tmp_path / name
    p.write_text(json.dumps(obj) if not isinstance(obj, str) else obj)
    return str(p)


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def _phi(x):
    return 0.5 * (1 + math.erf(x / math.sqrt(2)))


# -- discretize ---------------------------------------------------------------


def test_discretize_uniform_files(tmp_path, capsys):
    cfg = write(tmp_path, "c.json", {"mu": UNIFORM, "depth": 3})
    out = tmp_path / "out"
    code, _, _ = run(capsys, "discretize", "--config", cfg, "--out", str(out))
    assert code == 0
    parts = sorted(p.name for p in out.glob("partition_m*.json"))
    assert parts == ["partition_m1.json", "partition_m2.json", "partition_m3.json"]
    for m in (1, 2, 3):
        meas = json.loads((out / f"measure_m{m}.json").read_text())
        assert math.isclose(math.fsum(meas["weights"]), 1.0, abs_tol=1e-12)
        cells = json.loads((out / f"partition_m{m}.json").read_text())
        assert all({"depth", "index", "tag", "is_good"} <= set(c) for c in cells)


def test_discretize_csv(tmp_path, capsys):
    cfg = write(tmp_path, "c.json", {"mu": UNIFORM, "depth": 2})
    out = tmp_path / "out"
    assert run(capsys, "discretize", "--config", cfg, "--out", str(out), "--format", "csv")[0] == 0
    lines = (out / "measure_m2.csv").read_text().splitlines()
    assert lines[0] == "tag,mass,is_good"
    assert math.isclose(sum(float(l.split(",")[1]) for l in lines[1:]), 1.0, abs_tol=1e-12)


def test_discretize_gaussian_bad_mass_matches_cdf(tmp_path, capsys):
    cfg = write(tmp_path, "c.json", {"mu": GAUSS, "depth": 2})
    out = tmp_path / "out"
    assert run(capsys, "discretize", "--config", cfg, "--out", str(out))[0] == 0
    summary = json.loads((out / "summary.json").read_text())["depths"]
    for row in summary:
        cells = json.loads((out / f"partition_m{row['depth']}.json").read_text())
        good = [c for c in cells if c["is_good"]]
        lo, hi = min(c["lo"] for c in good), max(c["hi"] for c in good)
        oracle = _phi(lo) + 1 - _phi(hi)
        assert row["bad_mass"] == pytest.approx(row["reported_tail"], abs=1e-12)
        assert row["bad_mass"] == pytest.approx(oracle, rel=1e-9, abs=1e-15)
        assert row["tail_budget_ok"]


def test_discretize_to_stdout(capsys):
    code, out, _ = run(capsys, "discretize", "--config", json.dumps({"mu": UNIFORM}), "--depth", "2")
    assert code == 0
    assert [r["depth"] for r in json.loads(out)["depths"]] == [1, 2]


def test_malformed_json_exits_2(tmp_path, capsys):
    cfg = write(tmp_path, "bad.json", "{\"mu\": ")
    code, _, err = run(capsys, "discretize", "--config", cfg)
    assert code == 2 and "malformed JSON" in err


def test_missing_field_named(tmp_path, capsys):
    cfg = write(tmp_path, "c.json", {"depth": 2})
    code, _, err = run(capsys, "discretize", "--config", cfg)
    assert code == 2 and "mu" in err


def test_bad_family_exits_2(capsys):
    code, _, err = run(capsys, "discretize", "--config",
                       json.dumps({"mu": {"family": "cauchy"}, "depth": 2}))
    assert code == 2 and err.startswith("error:")


def test_depth_flag_overrides_config(tmp_path, capsys):
    cfg = write(tmp_path, "c.json", {"mu": UNIFORM, "depth": 5})
    code, out, _ = run(capsys, "discretize", "--config", cfg, "--depth", "1")
    assert code == 0 and len(json.loads(out)["depths"]) == 1


def test_nonpositive_depth_rejected(capsys):
    assert run(capsys, "discretize", "--config", json.dumps({"mu": UNIFORM}), "--depth", "0")[0] == 2


# -- entropy ------------------------------------------------------------------


def _ladder_rows(text):
    rows = text.strip().splitlines()
    assert rows[0] == "m,H_m"
    return [r.split(",") for r in rows[1:]]


def test_entropy_equal_measures_zero(capsys):
    cfg = json.dumps({"mu": GAUSS, "nu": GAUSS, "depth": 4})
    code, out, _ = run(capsys, "entropy", "--config", cfg)
    assert code == 0
    assert [float(h) for _, h in _ladder_rows(out)] == [0.0] * 4


def test_entropy_gaussian_pair_monotone(capsys):
    cfg = json.dumps({"mu": {"family": "gaussian", "mean": 1.0, "std": 1.0}, "nu": GAUSS,
                      "depth": 6})
    code, out, _ = run(capsys, "entropy", "--config", cfg)
    vals = [float(h) for _, h in _ladder_rows(out)]
    assert code == 0
    assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))
    assert abs(vals[-1] - 0.5) < 0.01


def test_entropy_singular_pair_inf(capsys):
    nu = {"family": "finite", "support": [0.0, 3.0], "weights": [0.5, 0.5]}
    cfg = json.dumps({"mu": UNIFORM, "nu": nu, "depth": 3})
    code, out, _ = run(capsys, "entropy", "--config", cfg)
    assert code == 0
    assert all(h == "inf" for _, h in _ladder_rows(out))


def test_entropy_json(capsys):
    cfg = json.dumps({"mu": UNIFORM, "nu": UNIFORM, "depth": 2})
    code, out, _ = run(capsys, "entropy", "--config", cfg, "--format", "json")
    assert code == 0 and json.loads(out) == {"m": [1, 2], "H_m": [0.0, 0.0]}


# -- bl-dist ------------------------------------------------------------------


def test_bl_dist_two_point(capsys):
    a = json.dumps({"family": "finite", "support": [0.0, 0.5], "weights": [0.7, 0.3]})
    b = json.dumps({"family": "finite", "support": [0.0, 0.5], "weights": [0.2, 0.8]})
    code, out, _ = run(capsys, "bl-dist", a, b)
    assert code == 0
    assert json.loads(out)["bl_distance"] == pytest.approx(0.25, abs=1e-9)
    code, out, _ = run(capsys, "bl-dist", a, b, "--format", "csv")
    assert float(out) == pytest.approx(0.25, abs=1e-9)


def test_bl_dist_from_files_and_space(tmp_path, capsys):
    a = write(tmp_path, "a.json", {"family": "finite", "support": [0, 1], "weights": [1, 0]})
    b = write(tmp_path, "b.json", {"family": "finite", "support": [0, 1], "weights": [0, 1]})
    space = json.dumps({"kind": "finite", "matrix": [[0, 5], [5, 0]]})
    code, out, _ = run(capsys, "bl-dist", a, b, "--space", space)
    assert code == 0 and json.loads(out)["bl_distance"] == pytest.approx(2.0, abs=1e-9)


def test_bl_dist_rejects_continuous(capsys):
    a = json.dumps(GAUSS)
    assert run(capsys, "bl-dist", a, a)[0] == 2


def test_bl_dist_missing_file(capsys):
    code, _, err = run(capsys, "bl-dist", "/nonexistent/a.json", "/nonexistent/b.json")
    assert code == 2 and "cannot read" in err


# -- rate ---------------------------------------------------------------------


RATE_CFG = {
    "mu": {"family": "finite", "support": [0, 1], "weights": [0.5, 0.5]},
    "set": {"center": {"family": "finite", "support": [0, 1], "weights": [0.1, 0.9]},
            "radius": 0.4},
    "n_list": [10, 20], "reps": 500, "seed": 3,
}


def test_rate_json_and_csv(tmp_path, capsys):
    cfg = write(tmp_path, "r.json", RATE_CFG)
    code, out, _ = run(capsys, "rate", "--config", cfg)
    assert code == 0
    rep = json.loads(out)
    assert [r["n"] for r in rep["rows"]] == [10, 20]
    code, out, _ = run(capsys, "rate", "--config", cfg, "--format", "csv")
    assert code == 0 and len(out.strip().splitlines()) == 3


def test_rate_reproducible(tmp_path, capsys):
    cfg = write(tmp_path, "r.json", RATE_CFG)
    outs = []
    for i in range(2):
        path = tmp_path / f"o{i}.csv"
        assert run(capsys, "rate", "--config", cfg, "--format", "csv", "--out", str(path))[0] == 0
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]


def test_rate_requires_seed(capsys):
    cfg = {k: v for k, v in RATE_CFG.items() if k != "seed"}
    code, _, err = run(capsys, "rate", "--config", json.dumps(cfg))
    assert code == 2 and "seed" in err


def test_rate_requires_radius(capsys):
    cfg = dict(RATE_CFG, set={"center": RATE_CFG["set"]["center"]})
    assert run(capsys, "rate", "--config", json.dumps(cfg))[0] == 2


# -- verify -------------------------------------------------------------------


def test_verify_default_passes(tmp_path, capsys):
    out = tmp_path / "v.json"
    code, _, err = run(capsys, "verify", "--out", str(out))
    assert code == 0
    rep = json.loads(out.read_text())
    assert rep["summary"] == {"pass": 10, "fail": 0, "skip": 0}
    assert err.count("PASS") == 10


def test_verify_single_check_and_seed_flag(capsys):
    code, out, _ = run(capsys, "verify", "--check", "martingale", "--check", "types-rate",
                       "--seed", "7")
    rep = json.loads(out)
    assert code == 0 and rep["seed"] == 7
    assert [c["name"] for c in rep["checks"]] == ["martingale", "types-rate"]


def test_verify_planted_defect_fails(tmp_path, capsys):
    # depth-2 cells that do not refine depth 1
    cells = [
        {"depth": 1, "index": 0, "lo": 0.0, "hi": 0.5, "tag": 0.25, "is_good": True},
        {"depth": 1, "index": 1, "lo": 0.5, "hi": 1.0, "tag": 0.75, "is_good": True},
        {"depth": 2, "index": 0, "lo": 0.0, "hi": 0.6, "tag": 0.25, "is_good": True},
        {"depth": 2, "index": 1, "lo": 0.6, "hi": 1.0, "tag": 0.75, "is_good": True},
    ]
    write(tmp_path, "planted.json", cells)
    cfg = default_config()
    cfg["mu"] = UNIFORM
    cfg["partition_override"] = "planted.json"
    path = write(tmp_path, "cfg.json", cfg)
    code, out, _ = run(capsys, "verify", "--config", path, "--check", "partition-structure")
    rep = json.loads(out)
    assert code == 1
    assert rep["checks"][0]["status"] == "fail"


def test_verify_guard_exceeded_skips(tmp_path, capsys):
    cfg = default_config()
    cfg["types"]["guard"] = 10
    path = write(tmp_path, "cfg.json", cfg)
    code, out, _ = run(capsys, "verify", "--config", path, "--check", "types-rate")
    rep = json.loads(out)
    assert code == 0
    assert rep["checks"][0]["status"] == "skip"
    assert rep["summary"]["skip"] == 1


def test_verify_csv(capsys):
    code, out, _ = run(capsys, "verify", "--check", "coupling-bound", "--format", "csv")
    assert code == 0 and out.splitlines() == ["check,status", "coupling-bound,pass"]


def test_verify_unknown_check_is_usage_error(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["verify", "--check", "nope"])
    assert exc.value.code == 2


def test_version(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert "sanovlab" in capsys.readouterr().out
