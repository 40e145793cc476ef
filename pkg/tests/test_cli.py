import json
import shutil
from pathlib import Path

import numpy as np
import pytest

from stallbound import io
from stallbound.cli import main

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


@pytest.fixture
def tiny(tmp_path):
    cfg = tmp_path / "tiny.json"
    shutil.copy(CONFIGS / "tiny.json", cfg)
    return cfg


def write_config(path, **changes):
    doc = json.loads(path.read_text())
    doc.update(changes)
    path.write_text(json.dumps(doc))
    return path


def table(path):
    comments, header, rows = io.read_csv(path)
    assert comments[0].startswith("# stallbound ")
    return header, [dict(zip(header, values)) for _, values in rows]


def test_bounds_and_simulation_agree(tiny, tmp_path):
    out = tmp_path / "out"
    assert main(["eval-bound", "--config", str(tiny), "--out", str(out)]) == 0
    assert main(["simulate", "--config", str(tiny), "--out", str(out)]) == 0
    _, bounds = table(out / "bounds.csv")
    _, emp = table(out / "empirical.csv")
    bound = {(int(b["file_id"]), float(b["sigma"])): float(b["clipped_bound"]) for b in bounds}
    for i in range(4):
        per_sigma = [bound[(i, s)] for s in (0.0, 0.5, 1.0, 2.0, 4.0)]
        assert np.all(np.diff(per_sigma) <= 1e-12)
    for e in emp:
        key = (int(e["file_id"]), float(e["sigma"]))
        assert float(e["p_hat"]) <= bound[key] + 3 * float(e["stderr"]) + 1e-12


def test_optimize_then_resume_from_point(tiny, tmp_path):
    out = tmp_path / "out"
    assert main(["--command", "optimize", "--config", str(tiny), "--out", str(out)]) == 0
    _, trace = table(out / "trace.csv")
    first_final = float(trace[-1]["objective"])
    resume = write_config(tiny, control_point_file=str(out / "point.json"))
    again = tmp_path / "again"
    assert main(["optimize", "--config", str(resume), "--out", str(again)]) == 0
    _, trace2 = table(again / "trace.csv")
    assert float(trace2[0]["objective"]) == pytest.approx(first_final, rel=1e-12)
    assert float(trace2[-1]["objective"]) <= first_final


def test_gen_workload_is_reproducible(tmp_path):
    cfg = tmp_path / "wl.json"
    cfg.write_text(json.dumps({"workload": {"r": 30, "seed": 5}, "d_s": 2.0}))
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["gen_workload", "--config", str(cfg), "--out", str(a)]) == 0
    assert main(["gen-workload", "--config", str(cfg), "--out", str(b)]) == 0
    assert (a / "catalog.csv").read_bytes() == (b / "catalog.csv").read_bytes()
    cat = io.read_catalog(a / "catalog.csv")
    assert cat.r == 30 and cat.d_s == 2.0
    c = tmp_path / "c"
    assert main(["gen-workload", "--config", str(cfg), "--out", str(c), "--seed", "6"]) == 0
    assert (a / "catalog.csv").read_bytes() != (c / "catalog.csv").read_bytes()


def test_compare_puts_opt_first_and_on_top(tiny, tmp_path):
    out = tmp_path / "out"
    write_config(tiny, strategies=["FIXED_T", "PEA"])
    assert main(["compare", "--config", str(tiny), "--out", str(out),
                 "--sigma-grid", "0.5,2"]) == 0
    header, rows = table(out / "compare.csv")
    assert header == ["strategy", "objective", "bound_sigma_0.5", "bound_sigma_2.0"]
    assert [r["strategy"] for r in rows] == ["OPT", "FIXED_T", "PEA"]
    objs = [float(r["objective"]) for r in rows]
    assert objs[0] <= min(objs[1:])


def one_line_error(capsys):
    err = capsys.readouterr().err
    assert err.count("\n") == 1 and err.startswith("stallbound: error: ")
    return err


def test_parse_error_names_file_and_line(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{\n "seed": 1,\n "topology": }\n')
    assert main(["eval-bound", "--config", str(bad)]) == 2
    assert "bad.json:3:" in one_line_error(capsys)


@pytest.mark.parametrize("argv", [
    ["warp", "--config", "x.json"],
    ["eval-bound"],
    ["eval-bound", "--config", "CFG", "--sigma-grid", "2,1"],
    ["eval-bound", "--config", "CFG", "--sigma-grid", "a,b"],
    ["eval-bound", "--command", "simulate", "--config", "CFG"],
])
def test_usage_errors_exit_two(argv, tiny, capsys):
    argv = [str(tiny) if a == "CFG" else a for a in argv]
    assert main(argv) == 2
    one_line_error(capsys)


def test_bad_config_values_exit_two(tiny, capsys):
    write_config(tiny, capacity=[3])
    assert main(["eval-bound", "--config", str(tiny)]) == 2
    assert "capacity" in one_line_error(capsys)


def test_infeasible_control_point_exits_three(tiny, tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["optimize", "--config", str(tiny), "--out", str(out)]) == 0
    doc = json.loads((out / "point.json").read_text())
    doc["t"] = [[i, 1e3] for i in range(4)]
    (tmp_path / "hot.json").write_text(json.dumps(doc))
    write_config(tiny, control_point_file="hot.json")
    assert main(["eval-bound", "--config", str(tiny), "--out", str(out)]) == 3
    assert "infeasible" in one_line_error(capsys)
