import json
import math

import pytest

from sharprate.cli import PATHS_LIMIT, RATE_HEADER, ConfigError, main, parse_config


def run(tmp_path, config, *extra, name="cfg.json"):
    cfg = tmp_path / name
    cfg.write_text(config if isinstance(config, str) else json.dumps(config))
    out = tmp_path / "out"
    code = main(["--config", str(cfg), "--out", str(out), *extra])
    return code, out


FBM75 = {"kind": "fbm", "hurst": 0.75}
XPLUS = {"alpha": 0.0, "beta": 0.5, "atoms": [[0.0, 0.5]]}


def test_rate_without_mc(tmp_path):
    cfg = {"command": "rate", "model": FBM75, "spec": XPLUS, "n_list": [16, 64, 256, 1024, 4096]}
    code, out = run(tmp_path, cfg)
    assert code == 0
    lines = (out / "rate.csv").read_text().splitlines()
    assert lines[0] == RATE_HEADER
    assert len(lines) == 6
    assert lines[1].endswith(",,")
    summary = json.loads((out / "summary.json").read_text())
    assert set(summary) == {
        "slope", "intercept", "r_squared", "expected_slope", "constant", "envelope_band",
        "variogram_bounds", "hurst", "sigma2", "model", "n_list", "seed", "mc_paths",
    }
    assert summary["expected_slope"] == -0.5
    assert summary["slope"] == pytest.approx(-0.4440, abs=1e-3)
    assert summary["constant"] == pytest.approx(0.7978845608, rel=1e-10)


def test_rate_with_mc_fills_columns(tmp_path):
    cfg = {"command": "rate", "model": {"kind": "sub_fbm", "hurst": 0.75}, "spec": XPLUS, "n_list": [2, 4, 8], "mc": {"m": 2000, "seed": 3}}
    code, out = run(tmp_path, cfg)
    assert code == 0
    rows = [r.split(",") for r in (out / "rate.csv").read_text().splitlines()[1:]]
    for row in rows:
        analytic, mc, se = float(row[1]), float(row[5]), float(row[6])
        assert abs(mc - analytic) <= 4 * se
    summary = json.loads((out / "summary.json").read_text())
    assert summary["seed"] == 3 and summary["mc_paths"] == 2000
    assert summary["envelope_band"][0] < summary["envelope_band"][1]


def test_malformed_json_writes_nothing(tmp_path):
    code, out = run(tmp_path, "{not json")
    assert code == 2 and not out.exists()


@pytest.mark.parametrize(
    "cfg",
    [
        {"command": "rate", "model": FBM75, "spec": XPLUS, "n_list": [16, 64]},
        {"command": "rate", "model": FBM75, "spec": XPLUS, "n_list": [64, 16, 256]},
        {"command": "rate", "model": FBM75, "spec": XPLUS, "n_list": [16, 64, 256], "colour": 1},
        {"command": "constant", "model": {"kind": "custom", "expression": "min(t, s)", "hurst": 0.75}, "spec": XPLUS},
        {"command": "constant", "model": {"kind": "fbm", "hurst": 0.4}, "spec": XPLUS},
        {"command": "paths", "model": FBM75, "n": 10**4, "m": 10**5},
        {"command": "bogus"},
    ],
)
def test_config_errors_exit_2(tmp_path, cfg):
    code, out = run(tmp_path, cfg)
    assert code == 2 and not out.exists()


def test_paths_guard_boundary():
    ok = parse_config({"command": "paths", "model": FBM75, "n": 99, "m": PATHS_LIMIT // 100})
    assert ok.m * (ok.n + 1) == PATHS_LIMIT
    with pytest.raises(ConfigError):
        parse_config({"command": "paths", "model": FBM75, "n": 100, "m": PATHS_LIMIT // 100})


def test_constant(tmp_path):
    code, out = run(tmp_path, {"command": "constant", "model": FBM75, "spec": {"atoms": [[0.0, 0.5]]}})
    assert code == 0
    doc = json.loads((out / "constant.json").read_text())
    assert doc["aggregate"] == pytest.approx(0.7978845608, rel=1e-10)
    assert doc["quadrature_rel_error"] <= doc["quadrature_rel_tolerance"]
    assert doc["atoms"][0]["C"] == pytest.approx(1.5957691216, rel=1e-10)


def test_constant_stationary_uses_sigma2_two(tmp_path):
    code, out = run(tmp_path, {"command": "constant", "model": {"kind": "stationary_powexp", "hurst": 0.75}, "spec": {"atoms": [[1.0, 1.0]]}})
    doc = json.loads((out / "constant.json").read_text())
    assert code == 0 and doc["sigma2"] == 2.0
    assert doc["aggregate"] == pytest.approx(2.0 * math.exp(-0.5) / math.sqrt(2 * math.pi), rel=1e-12)


def test_paths_output(tmp_path):
    cfg = {"command": "paths", "model": FBM75, "n": 4, "m": 2, "seed": 7}
    code, out = run(tmp_path, cfg)
    text = (out / "paths.csv").read_text()
    lines = text.splitlines()
    assert code == 0 and lines[0] == "path_id,t,X" and len(lines) == 11
    assert all(float(l.split(",")[2]) == 0.0 for l in lines[1:] if float(l.split(",")[1]) == 0.0)
    code, out2 = run(tmp_path, cfg, name="again.json")
    assert (out2 / "paths.csv").read_text() == text


def test_paths_non_psd_table_exit_3(tmp_path):
    (tmp_path / "bad.csv").write_text("0\n0,1\n0,-1.5,1\n")
    cfg = {"command": "paths", "model": {"kind": "custom", "table": "bad.csv", "n": 2, "hurst": 0.75, "sigma2": 1.0}, "n": 2, "m": 3, "sampler": "cholesky"}
    code, out = run(tmp_path, cfg)
    assert code == 3 and not out.exists()


def test_seed_flag_overrides(tmp_path):
    cfg = {"command": "paths", "model": FBM75, "n": 4, "m": 1, "seed": 1}
    _, out = run(tmp_path, cfg, "--seed", "2")
    a = (out / "paths.csv").read_text()
    cfg["seed"] = 2
    _, out = run(tmp_path, cfg, name="b.json")
    assert (out / "paths.csv").read_text() == a


def test_verify_small(tmp_path):
    sizes = {"n_specs": 200, "n_triples": 2000, "sampler_m": 20000, "decomposition_m": 200}
    code, out = run(tmp_path, {"command": "verify", "verify": sizes})
    doc = json.loads((out / "verify.json").read_text())
    assert code == 0 and doc["passed"]
    assert doc["seed"] == 0 and doc["seed_source"] == "default"
    for name in ("convexity_gap", "signed_representation", "gaussian_relation", "telescoping"):
        assert doc["suites"][name]["max_residual"] < 1e-12


def test_verify_fails_with_printed_denominator(monkeypatch, tmp_path):
    from functools import partial

    from sharprate import analytic, verify

    broken = partial(analytic.gaussian_relation_check, corrected=False)
    original = verify.suite_gaussian_relation
    monkeypatch.setattr(verify, "suite_gaussian_relation", lambda n, seed: original(n, seed, relation=broken))
    sizes = {"n_specs": 50, "n_triples": 500, "sampler_m": 5000, "decomposition_m": 100}
    code, out = run(tmp_path, {"command": "verify", "verify": sizes, "seed": 4})
    doc = json.loads((out / "verify.json").read_text())
    assert code == 1 and not doc["suites"]["gaussian_relation"]["passed"]
    assert doc["suites"]["gaussian_relation"]["counterexample"] == pytest.approx([0.25, 0.75])
    assert doc["seed_source"] == "config"
