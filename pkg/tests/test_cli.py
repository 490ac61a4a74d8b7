import json

import numpy as np
import pytest

from plaplace.cli import main
from plaplace.snapshots import read_snapshot


def write(tmp_path, text, name="cfg.toml"):
    path = tmp_path / name
    path.write_text(text)
    return path


def run(tmp_path, command, text, *extra):
    cfg = write(tmp_path, text)
    out = tmp_path / "out"
    return main([command, "--config", str(cfg), "--out", str(out), *extra]), out


def report(out):
    return json.loads((out / "report.json").read_text())


def test_solve_constant_is_reproduced(tmp_path):
    code, out = run(tmp_path, "solve", """
[problem]
p = 3.0
initial = "constant"
constant = 2.5
time = [0.0, 1.0]
[refinement]
levels = [16]
""")
    assert code == 0
    snaps = sorted((out / "snapshots").glob("*.bin"))
    assert [s.name for s in snaps] == ["level0_16x16.bin"]
    head, u = read_snapshot(snaps[0])
    assert head["nx"] == 16 and np.all(u.values == 2.5)
    for f in ("report.json", "timings.json", "summary.txt", "tables/solve.csv"):
        assert (out / f).exists()


def test_solve_heat_decay_rate(tmp_path):
    code, out = run(tmp_path, "solve", """
[problem]
p = 2.0
initial = "heat_sine"
time = [0.0, 0.1]
[refinement]
levels = [16, 32]
time_levels = [128, 512]
""")
    assert code == 0
    checks = {c["name"]: c for c in report(out)["checks"]}
    rate = checks["decay_rate"]["rows"][0]
    assert rate["measured"] == pytest.approx(np.pi ** 2, rel=0.01)
    assert checks["convergence"]["passed"]


def test_solve_barenblatt_order(tmp_path):
    code, out = run(tmp_path, "solve", "[problem]\np = 3.0\n[refinement]\nlevels = [32, 64, 128]\n")
    assert code == 0
    conv = next(c for c in report(out)["checks"] if c["name"] == "convergence")
    assert conv["rows"][-1]["order"] >= 1.0


def test_verify_inequalities_only(tmp_path, capsys):
    code, out = run(tmp_path, "verify", "seed = 5\n[verify]\nchecks = [\"inequalities\"]\nsamples = 20000\n")
    assert code == 0
    rep = report(out)
    assert [c["name"] for c in rep["checks"]] == ["inequalities"]
    assert "worst_gap" in (out / "summary.txt").read_text()
    assert "PASS  inequalities" in capsys.readouterr().out


def test_verify_without_checks_is_a_config_error(tmp_path, capsys):
    code, out = run(tmp_path, "verify", "[problem]\np = 3.0\n")
    assert code == 2
    assert "no checks selected" in capsys.readouterr().err
    assert not out.exists()


def test_bad_config_exit_code(tmp_path):
    code, _ = run(tmp_path, "verify", "[problem]\nq = 3.0\n")
    assert code == 2
    assert main(["solve", "--config", str(tmp_path / "missing.toml")]) == 2


def test_solver_error_exit_code(tmp_path):
    code, _ = run(tmp_path, "solve", """
[problem]
p = 3.0
[solver]
scheme = "implicit"
max_nonlinear_iters = 1
nonlinear_tol = 1e-14
[refinement]
levels = [32]
""")
    assert code == 3


VERIFY_SMALL = """
seed = 11
[problem]
p = 3.0
[refinement]
levels = [32, 64]
[verify]
checks = ["inequalities", "estimate9", "transition", "theorem1"]
samples = 5000
gate_first = false
"""


def test_verify_is_deterministic(tmp_path):
    cfg = write(tmp_path, VERIFY_SMALL)
    out = tmp_path / "out"
    args = ["verify", "--config", str(cfg), "--out", str(out)]
    assert main(args) == 0
    first = (out / "report.json").read_bytes(), (out / "summary.txt").read_bytes()
    assert main(args) == 0
    assert (out / "report.json").read_bytes() == first[0]
    assert (out / "summary.txt").read_bytes() == first[1]


def test_gate_runs_first_and_failure_skips(tmp_path):
    code, out = run(tmp_path, "verify", """
[problem]
p = 3.0
[refinement]
levels = [32, 64]
[verify]
checks = ["transition"]
oracle_p = [3.0]
oracle_levels = [32, 64]
min_order = 0.8
""")
    names = [c["name"] for c in report(out)["checks"]]
    assert names == ["oracle_gate", "transition"] and code == 0


def test_levels_override(tmp_path):
    code, out = run(tmp_path, "solve", "[problem]\np = 3.0\n", "--levels", "16,32")
    assert code == 0
    assert [r["nx"] for r in report(out)["checks"][0]["rows"]] == [16, 32]


def test_sweep_p(tmp_path):
    code, out = run(tmp_path, "sweep", """
[problem]
initial = "tent"
boundary = "zero"
time = [0.0, 0.5]
[refinement]
levels = [16, 32]
time_levels = [128, 512]
[verify]
checks = ["theorem1"]
gate_first = false
region_half_width = 1.0
[sweep]
axis = "p"
values = [2.0, 3.0]
""")
    assert code == 0
    rep = report(out)
    assert rep["checks"][0]["name"] == "sweep_p"
    assert (out / "tables" / "sweep.csv").exists()


def test_sweep_unknown_axis(tmp_path, capsys):
    code, _ = run(tmp_path, "sweep", "[problem]\np = 3.0\n", "--axis", "gamma", "--values", "1,2")
    assert code == 2
    assert "unknown axis" in capsys.readouterr().err


def test_selftest(tmp_path):
    cfg = write(tmp_path, "[verify]\nsamples = 2000\noracle_p = [3.0]\noracle_levels = [32, 64]\n")
    assert main(["selftest", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
