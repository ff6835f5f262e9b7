import json
import subprocess
import sys

import pytest

from gdiffusion.cli import main
from gdiffusion.config import load_config
from gdiffusion.errors import ConfigError
from gdiffusion.experiments import dispatch


def run_cli(args, capsys):
    code = main(args)
    out = capsys.readouterr().out
    return code, (json.loads(out) if out.strip() else None)


def comparison_config(tmp_path, delta=0.1, **extra):
    cfg = {
        "seed": 20240601,
        "theta": {"interval": [0.25, 1.0]},
        "coefficients": {
            "n": 2, "d": 1,
            "b": {"family": "offdiag-monotone"},
            "sigma": {"family": "per-coordinate",
                      "entries": [["expr:0.8 + 0.2*tanh(x_1)", "expr:0.8 + 0.2*tanh(x_1)"]]},
            "label": "offdiag-monotone",
        },
        "coefficients_bar": {
            "n": 2, "d": 1,
            "b": [f"expr:x_2 + {delta}", f"expr:x_1 + {delta}"],
            "sigma": {"family": "per-coordinate",
                      "entries": [["expr:0.8 + 0.2*tanh(x_1)", "expr:0.8 + 0.2*tanh(x_1)"]]},
            "label": "offdiag-monotone-shifted",
        },
        "x0": [-0.1, -0.1],
        "y0": [0.0, 0.0],
        "domain": {"box": [[-2.0, 2.0], [-2.0, 2.0]], "n_samples": 96, "n_refine": 6,
                   "seed": 7},
        "scenario": {"T": 1.0, "n_steps": 100, "n_paths": 60,
                     "controls": {"constants": True, "random_switching": 6, "seed": 3}},
    }
    cfg.update(extra)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    return str(path)


def test_verify_comparison_ok(tmp_path, capsys):
    code, report = run_cli(["verify-comparison", "--config",
                            comparison_config(tmp_path)], capsys)
    assert code == 0
    assert report["status"] == "ok"
    assert report["results"]["min_gap"] >= -1e-8
    assert report["results"]["checks"]["B1"]["verdict"] == "satisfied-on-domain"


def test_verify_comparison_hypothesis_violated(tmp_path, capsys):
    code, report = run_cli(["verify-comparison", "--config",
                            comparison_config(tmp_path, delta=-0.1)], capsys)
    assert code == 3
    assert report["status"] == "hypothesis-violated"
    assert report["results"]["violated"] == ["B1"]
    w = report["results"]["checks"]["B1"]["witness"]
    assert w["residual"] == pytest.approx(0.1, abs=1e-6)


def test_verify_comparison_counterexample_mode(tmp_path, capsys):
    path = comparison_config(tmp_path, x0=[0.5, 0.5], y0=[0.0, 0.0])
    with pytest.warns(UserWarning, match="counterexample"):
        code, report = run_cli(["verify-comparison", "--config", path], capsys)
    assert code == 0
    assert report["results"]["counterexample_mode"] is True
    assert report["results"]["min_gap"] < 0  # started unordered


def test_config_error_exit_code(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"theta": {"interval": [0.25, 1.0]}}))
    code, report = run_cli(["verify-comparison", "--config", str(path)], capsys)
    assert code == 2
    assert report["status"] == "config-error"
    assert "coefficients" in report["results"]["error"]


def test_counterexample_remark_defaults(capsys):
    code, report = run_cli(["counterexample-remark"], capsys)
    assert code == 0
    res = report["results"]
    assert res["gap_at_horizon"] == 0.25
    assert res["gap_is_linear_in_t"] is True
    assert res["b1_check"]["verdict"] == "violated"


def test_counterexample_remark_horizon_two(capsys):
    code, report = run_cli(["counterexample-remark",
                            "--set", "theta.interval=[0.25, 1.0]",
                            "--set", "scenario.T=2.0"], capsys)
    assert code == 0
    assert report["results"]["gap_at_horizon"] == pytest.approx(0.75, abs=1e-12)


def test_counterexample_remark_rejects_degenerate(capsys):
    code, report = run_cli(["counterexample-remark",
                            "--set", "theta.interval=[1.0, 1.0]"], capsys)
    assert code == 2
    assert "degenerate" in report["results"]["error"]


def monotone_config(tmp_path, functions=None):
    cfg = {
        "seed": 5,
        "theta": {"generators": [[[0.5, 0.0], [0.0, 0.5]], [[1.0, 0.0], [0.0, 1.0]]]},
        "coefficients": {
            "n": 2, "d": 2,
            "b": {"family": "arctan-coupling"},
            "sigma": {"family": "diag-sigma", "values": [1.0, 1.0]},
            "label": "arctan-coupling",
        },
        "domain": {"box": [[-2.0, 2.0], [-2.0, 2.0]], "n_samples": 48, "n_refine": 4,
                   "seed": 11},
        "grid": {"bounds": [[-4.0, 4.0], [-4.0, 4.0]], "counts": [61, 61],
                 "T": 0.25, "n_levels": 160},
        "functions": functions or [
            {"expr": "tanh(x_1 + x_2)", "monotone": True, "name": "tanh-sum"},
            {"expr": "0.4*x_1 + 0.6*x_2", "monotone": True, "name": "affine"},
        ],
    }
    path = tmp_path / "monotone.json"
    path.write_text(json.dumps(cfg))
    return str(path)


def test_verify_monotone_ok(tmp_path, capsys):
    code, report = run_cli(["verify-monotone", "--config", monotone_config(tmp_path)],
                           capsys)
    assert code == 0
    for entry in report["results"]["functions"]:
        assert entry["nondecreasing"] is True
        assert entry["min_forward_difference"] >= -1e-8


def test_verify_monotone_negative_control_reported(tmp_path, capsys):
    functions = [{"expr": "x_1^2", "monotone": False, "name": "square-x1"}]
    code, report = run_cli(["verify-monotone", "--config",
                            monotone_config(tmp_path, functions)], capsys)
    assert code == 0  # negative controls are allowed to fail
    entry = report["results"]["functions"][0]
    assert entry["negative_control"] is True
    assert entry["nondecreasing"] is False


def test_verify_monotone_hypothesis_violated(tmp_path, capsys):
    cfg = json.loads(open(monotone_config(tmp_path)).read())
    cfg["coefficients"]["b"] = ["expr:-x_2", "expr:0"]
    path = tmp_path / "viol.json"
    path.write_text(json.dumps(cfg))
    code, report = run_cli(["verify-monotone", "--config", str(path)], capsys)
    assert code == 3
    assert "C2" in report["results"]["violated"]


def order_config(tmp_path, shift=-0.5):
    cfg = {
        "seed": 6,
        "theta": {"interval": [0.25, 1.0]},
        "coefficients": {"n": 1, "d": 1,
                         "sigma": {"family": "constant", "matrix": [[1.0]]},
                         "label": "unit"},
        "coefficients_bar": {"n": 1, "d": 1,
                             "b": [f"expr:{shift}" if shift >= 0 else f"expr:0 - {-shift}"],
                             "sigma": {"family": "constant", "matrix": [[1.0]]},
                             "label": "shifted"},
        "domain": {"box": [[-2.0, 2.0]], "n_samples": 64, "n_refine": 4, "seed": 13},
        "grid": {"bounds": [[-6.0, 6.0]], "counts": [241], "T": 0.5, "n_levels": 406},
        "functions": [{"expr": "tanh(x_1)", "monotone": True, "name": "tanh"}],
        "monotone_side": "bar",
    }
    path = tmp_path / "order.json"
    path.write_text(json.dumps(cfg))
    return str(path)


def test_verify_order_ok(tmp_path, capsys):
    code, report = run_cli(["verify-order", "--config", order_config(tmp_path)], capsys)
    assert code == 0
    res = report["results"]
    assert res["uniform_pd_beta"] == pytest.approx(1.0)
    assert res["nondegeneracy_bound"] == pytest.approx(0.125)
    entry = res["functions"][0]
    assert entry["dominates"] is True and entry["mode"] == "nodewise-reduction"


def test_verify_order_reversed_pair_violates_d5(tmp_path, capsys):
    code, report = run_cli(["verify-order", "--config", order_config(tmp_path, shift=0.5)],
                           capsys)
    assert code == 3
    assert "D5" in report["results"]["violated"]
    assert report["results"]["checks"]["D5"]["witness"]["K"]


def test_check_subcommand_exit_codes(tmp_path, capsys):
    cfg = {
        "seed": 1,
        "theta": {"interval": [0.25, 1.0]},
        "coefficients": {"n": 2, "d": 1, "b": {"family": "offdiag-monotone"}},
        "domain": {"box": [[-1.0, 1.0], [-1.0, 1.0]], "n_samples": 48, "n_refine": 4,
                   "seed": 2},
    }
    path = tmp_path / "check.json"
    path.write_text(json.dumps(cfg))
    code, report = run_cli(["check", "--config", str(path), "--condition", "C2"], capsys)
    assert code == 0
    assert report["results"]["checks"]["C2"]["verdict"] == "satisfied-on-domain"

    cfg["coefficients"]["b"] = ["expr:-x_2", "expr:0"]
    path.write_text(json.dumps(cfg))
    code, report = run_cli(["check", "--config", str(path), "--condition", "C2"], capsys)
    assert code == 1
    assert report["results"]["checks"]["C2"]["verdict"] == "violated"

    code, _ = run_cli(["check", "--config", str(path), "--condition", "Z9"], capsys)
    assert code == 2


def test_simulate_zero_coefficients_constant_csv(tmp_path, capsys):
    cfg = {
        "seed": 4,
        "theta": {"interval": [0.25, 1.0]},
        "coefficients": {"n": 2, "d": 1, "label": "zero"},
        "x0": [1.5, -2.0],
        "scenario": {"T": 1.0, "n_steps": 16},
        "output": {"dir": str(tmp_path), "csv": "path.csv"},
    }
    path = tmp_path / "sim.json"
    path.write_text(json.dumps(cfg))
    code, report = run_cli(["simulate", "--config", str(path)], capsys)
    assert code == 0
    lines = (tmp_path / "path.csv").read_text().strip().splitlines()
    assert lines[0] == "t,X_1,X_2"
    assert len(lines) == 18
    for line in lines[1:]:
        _, x1, x2 = line.split(",")
        assert float(x1) == 1.5 and float(x2) == -2.0


def test_solve_pde_exports_and_query(tmp_path, capsys):
    cfg = {
        "seed": 4,
        "theta": {"interval": [0.25, 1.0]},
        "coefficients": {"n": 1, "d": 1,
                         "sigma": {"family": "constant", "matrix": [[1.0]]}},
        "grid": {"bounds": [[-4.0, 4.0]], "counts": [161], "T": 0.25, "n_levels": 800},
        "functions": [{"expr": "x_1^2", "name": "square"}],
        "query": {"t": 0.25, "x": [0.0]},
        "output": {"dir": str(tmp_path), "csv": "u.csv", "dump": "u.bin"},
    }
    path = tmp_path / "solve.json"
    path.write_text(json.dumps(cfg))
    code, report = run_cli(["solve-pde", "--config", str(path)], capsys)
    assert code == 0
    assert report["results"]["query"]["value"] == pytest.approx(0.25, abs=2e-3)
    assert (tmp_path / "u.csv").exists()
    from gdiffusion.pde import read_grid_dump

    dump = read_grid_dump(str(tmp_path / "u.bin"))
    assert dump["u"].shape == (801, 161)


def test_generator_limit_cli(tmp_path, capsys):
    cfg = {
        "seed": 4,
        "theta": {"interval": [0.25, 1.0]},
        "coefficients": {"n": 1, "d": 1,
                         "sigma": {"family": "constant", "matrix": [[1.0]]}},
        "functions": [{"expr": "x_1^2", "name": "square"}],
        "query": {"x": [0.0]},
        "t_list": [0.2, 0.1, 0.05],
        "output": {"dir": str(tmp_path), "csv": "limit.csv"},
    }
    path = tmp_path / "gen.json"
    path.write_text(json.dumps(cfg))
    code, report = run_cli(["generator", "--config", str(path)], capsys)
    assert code == 0
    assert report["results"]["final_residual"] <= 5e-2
    lines = (tmp_path / "limit.csv").read_text().strip().splitlines()
    assert lines[0] == "t,quotient,generator_value,residual"
    assert len(lines) == 4


def test_reports_embed_config_and_roundtrip(tmp_path, capsys):
    path = comparison_config(tmp_path)
    code, report = run_cli(["verify-comparison", "--config", path], capsys)
    assert code == 0
    # the embedded config re-runs to the same result
    report2, code2 = dispatch("verify-comparison", json.loads(json.dumps(report["config"])))
    assert code2 == 0
    assert report2["results"] == report["results"]


def test_report_determinism_excluding_timestamp(tmp_path, capsys):
    path = comparison_config(tmp_path)
    _, r1 = run_cli(["verify-comparison", "--config", path], capsys)
    _, r2 = run_cli(["verify-comparison", "--config", path], capsys)
    for r in (r1, r2):
        r.pop("timestamp")
    assert json.dumps(r1, sort_keys=True) == json.dumps(r2, sort_keys=True)


def test_seed_precedence(tmp_path, monkeypatch):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"seed": 1}))
    assert load_config(str(path))["seed"] == 1
    monkeypatch.setenv("GDIFFUSION_SEED", "2")
    assert load_config(str(path))["seed"] == 2
    assert load_config(str(path), seed_flag=3)["seed"] == 3
    monkeypatch.setenv("GDIFFUSION_SEED", "not-an-int")
    with pytest.raises(ConfigError):
        load_config(str(path))


def test_set_overrides_nested_keys(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"scenario": {"T": 1.0}}))
    cfg = load_config(str(path), overrides=["scenario.n_steps=50", "note=hello"])
    assert cfg["scenario"]["n_steps"] == 50
    assert cfg["note"] == "hello"
    with pytest.raises(ConfigError):
        load_config(str(path), overrides=["oops"])


def test_console_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "gdiffusion.cli", "counterexample-remark", "--seed", "9"],
        capture_output=True, text=True, timeout=120,
    )
    assert proc.returncode == 0
    report = json.loads(proc.stdout)
    assert report["results"]["gap_at_horizon"] == 0.25


def test_check_remark_pair_reports_b1_violated(tmp_path, capsys):
    cfg = {
        "seed": 3,
        "theta": {"interval": [0.5, 1.0]},
        "pair_family": {"family": "remark-counterexample"},
        "domain": {"box": [[-1.0, 1.0], [-1.0, 1.0]], "n_samples": 64, "n_refine": 4,
                   "seed": 2},
        "conditions": ["B1"],
    }
    path = tmp_path / "remark-check.json"
    path.write_text(json.dumps(cfg))
    code, report = run_cli(["check", "--config", str(path)], capsys)
    assert code == 1
    rep = report["results"]["checks"]["B1"]
    assert rep["verdict"] == "violated"
    assert rep["max_violation"] == pytest.approx(0.25, abs=1e-9)
