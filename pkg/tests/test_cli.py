import json
import math
import subprocess
import sys

import pytest

from foldsaddle import __version__
from foldsaddle.cli import main, resolve_config
from foldsaddle.normal_forms import thresholds_L


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_classify_visible_center(capsys):
    code, out, _ = run(capsys, "classify", "--tau", "vis", "--lambda", "0", "--beta", "0", "--mu", "0")
    assert code == 0
    body = json.loads(out)
    assert body["case_index"] == "5_4" and body["theorem"] == "T4"


def test_classify_organizing_center(capsys):
    code, out, _ = run(capsys, "classify", "--tau", "inv", "--lambda", "0", "--beta", "0", "--mu", "0")
    assert code == 0
    body = json.loads(out)
    assert body["details"]["organizing_center"] is True
    assert body["details"]["codimension"] == 3


def test_classify_case_13_2(capsys):
    lam = -0.5 + 11 * math.sqrt(6) / 60
    code, out, _ = run(capsys, "classify", "--lambda", repr(lam), "--beta", "0.5", "--mu", "0")
    assert code == 0 and json.loads(out)["case_index"] == "13_2"


def test_classify_mismatch_exit_code(capsys):
    # the fold of Y on the T2 slice: the predicted repeller cycle does not exist
    from foldsaddle.normal_forms import mu0, y_fold_x
    b = 0.425
    mu = mu0(b) + 0.2
    code, out, _ = run(capsys, "classify", "--lambda", repr(y_fold_x(mu - 1, b)),
                       "--beta", repr(b), "--mu", repr(mu))
    assert code == 2
    assert json.loads(out)["error"] == "StructuralMismatch"


@pytest.mark.parametrize("argv", [
    ["classify", "--bogus"],
    ["classify", "--tau", "vis"],
    ["classify", "--tau", "vis", "--lambda", "3", "--beta", "0", "--mu", "0"],
    ["scan", "--format", "svg", "--lambda-range", "1:0:5"],
    ["portrait", "--format", "csv", "--lambda", "0", "--beta", "0", "--mu", "0"],
    ["classify", "--tol-override", "nonsense=1", "--lambda", "0", "--beta", "0", "--mu", "0"],
    ["nonsense"],
    [],
])
def test_usage_errors(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 1
    assert "error" in err


def test_config_precedence(tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"command": "classify",
                               "params": {"tau": "vis", "lambda": 0.1, "beta": 0.2, "mu": 0.0},
                               "output": {"path": "x.json", "format": "json"},
                               "tolerances": {"boundary": 1e-8}}))
    rc = resolve_config(["classify", "--config", str(cfg), "--lambda", "0.3"])
    assert rc.options["lambda"] == 0.3          # flag beats file
    assert rc.options["beta"] == 0.2            # file beats default
    assert rc.options["tau"] == "vis"
    assert rc.options["out"] == "x.json"
    assert rc.options["tol_override"] == {"boundary": 1e-8}
    assert rc.options["seed_grid"] == 6         # default
    rc = resolve_config(["classify", "--config", str(cfg), "--tol-override", "boundary=1e-7"])
    assert rc.options["tol_override"] == {"boundary": 1e-7}


def test_config_errors(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"command": "scan"}))
    code, _, _ = run(capsys, "classify", "--config", str(bad))
    assert code == 1
    bad.write_text(json.dumps({"whatever": 1}))
    code, _, _ = run(capsys, "classify", "--config", str(bad))
    assert code == 1
    code, _, _ = run(capsys, "classify", "--config", str(tmp_path / "missing.json"))
    assert code == 1


def test_negative_ranges_are_accepted():
    rc = resolve_config(["scan", "--lambda-range", "-0.5:0.5:3", "--beta-range", "-0.2:0.2:3"])
    assert rc.options["lambda_range"] == [-0.5, 0.5, 3]
    assert rc.options["beta_range"] == [-0.2, 0.2, 3]


def test_scan_csv_rows_and_determinism(capsys, tmp_path):
    argv = ["scan", "--theorem", "T4", "--lambda-range", "-0.9:0.9:4", "--beta-range", "-0.8:0.8:3"]
    code, out1, err = run(capsys, *argv)
    assert code == 0
    lines = out1.strip().split("\n")
    assert lines[0] == "lambda,beta,theorem,case_index,status"
    assert len(lines) - 1 == 12
    assert "distinct labels" in err
    _, out2, _ = run(capsys, *argv)
    assert out1 == out2
    code, _, _ = run(capsys, *argv, "--format", "json", "--out", str(tmp_path / "s.json"))
    assert code == 0 and json.loads((tmp_path / "s.json").read_text())["tau"] == "vis"


def test_scan_svg(capsys):
    code, out, _ = run(capsys, "scan", "--theorem", "T4", "--format", "svg",
                       "--lambda-range", "-0.9:0.9:3", "--beta-range", "-0.8:0.8:3")
    assert code == 0
    assert out.startswith("<?xml") and f"generator: foldsaddle {__version__}" in out
    assert out.count("<rect") >= 9


def test_portrait_is_byte_identical(capsys, tmp_path):
    argv = ["portrait", "--lambda", repr(thresholds_L(0.5)[1]), "--beta", "0.5",
            "--mu", repr(2 - math.sqrt(6)), "--seed-grid", "3"]
    a, b = tmp_path / "a.svg", tmp_path / "b.svg"
    assert main(argv + ["--out", str(a)]) == 0
    assert main(argv + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    text = a.read_text()
    assert "stroke-dasharray" in text and "</svg>" in text


def test_portrait_two_cycles(capsys):
    from foldsaddle.normal_forms import mu0
    code, out, _ = run(capsys, "portrait", "--lambda", "-0.095", "--beta", "0.5",
                       "--mu", repr(mu0(0.5)), "--seed-grid", "2")
    assert code == 0
    assert out.count('stroke-width="1.6"') == 2


def test_portrait_crossing_only(capsys):
    code, out, _ = run(capsys, "portrait", "--lambda", "0.3", "--beta", "-0.4", "--mu", "0",
                       "--tau", "vis", "--seed-grid", "2")
    assert code == 0
    assert "#9e9e9e" in out


def _phi_crossings(out):
    rows = [list(map(float, r.split(","))) for r in out.strip().split("\n")[1:]]
    g = [phi - x for x, phi, _ in rows]
    return sum(1 for u, v in zip(g, g[1:]) if u * v < 0)


def test_return_map_command(capsys):
    lam = -0.5 + 11 * math.sqrt(6) / 60
    code, out, _ = run(capsys, "return-map", "--lambda", repr(lam), "--beta", "0.5",
                       "--mu", "0", "--samples", "400")
    assert code == 0 and _phi_crossings(out) == 1
    from foldsaddle.normal_forms import mu0
    code, out, _ = run(capsys, "return-map", "--lambda", "-0.2", "--beta", "0.5",
                       "--mu", repr(mu0(0.5)), "--samples", "400")
    assert code == 0 and _phi_crossings(out) == 0
    code, out, _ = run(capsys, "return-map", "--lambda", "-0.095", "--beta", "0.5",
                       "--mu", repr(mu0(0.5)), "--samples", "400")
    assert code == 0 and _phi_crossings(out) == 2
    code, _, _ = run(capsys, "return-map", "--tau", "vis", "--lambda", "0", "--beta", "0.5", "--mu", "0")
    assert code == 1


def test_verify_command(capsys):
    code, out, _ = run(capsys, "verify")
    report = json.loads(out)
    assert code == 0 and report["passed"] and report["n_failed"] == 0
    names = [c["name"] for c in report["checks"]]
    assert any("x* = -sqrt(29/2)/10" in n for n in names)
    assert any("L1 shooting" in n for n in names)
    assert all({"expected", "actual", "tolerance"} <= set(c) for c in report["checks"])


def test_verify_failure_exit_code(capsys, monkeypatch):
    from foldsaddle import cli, verify
    monkeypatch.setattr(cli, "run_checks",
                        lambda: [verify.Check.close("forced", 0.0, 1.0, 1e-9)])
    code, out, _ = run(capsys, "verify")
    assert code == 3 and json.loads(out)["passed"] is False


@pytest.mark.parametrize("fmt", ["csv", "json", "svg"])
def test_demo_spring(capsys, fmt):
    code, out, _ = run(capsys, "demo-spring", "--format", fmt, "--t-max", "2", "--seed-grid", "2")
    assert code == 0 and out


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "foldsaddle", "classify", "--tau", "vis",
                           "--lambda", "0", "--beta", "0", "--mu", "0"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and json.loads(proc.stdout)["case_index"] == "5_4"
