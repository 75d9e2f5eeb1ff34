import json
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from exterior_decay.cli import fixture_path, main
from exterior_decay.config import parse_config
from exterior_decay.errors import ConfigError
from exterior_decay.pipeline import canonical_problem_doc, combine, exit_status, run_pipeline

from conftest import KAPPA_1


def fixture_doc(name):
    return json.loads(fixture_path(name).read_text())


def write(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return p


def run(argv, capsys):
    code = main([str(a) for a in argv])
    return code, capsys.readouterr()


def test_fixtures_parse():
    for name in ("canonical-1", "canonical-2", "failing-c1"):
        cfg = parse_config(fixture_doc(name))
        assert cfg.problem.n == 3 and cfg.grid.N == 4096


def test_defaults_filled():
    cfg = parse_config({"problem": canonical_problem_doc()})
    assert cfg.grid.N == 4096 and cfg.grid.tmax_mult == 1e6
    assert cfg.solver.tol == 1e-10 and cfg.solver.max_iter == 200 and cfg.solver.projection
    assert cfg.checker.k == 8 and cfg.checker.seed == 0
    assert cfg.outputs.report == "report.json"


def test_config_round_trip():
    cfg = parse_config(fixture_doc("canonical-2"))
    again = parse_config(cfg.to_dict())
    assert again.to_dict() == cfg.to_dict()


@pytest.mark.parametrize(
    "patch,match",
    [
        ({"n": 2}, "n >= 3"),
        ({"u0": 2.0}, "u0/t0 <= varsigma"),
        ({"R": 0.0}, "R > 0"),
    ],
)
def test_physical_errors_cite_condition(patch, match):
    doc = fixture_doc("canonical-1")
    doc["problem"].update(patch)
    with pytest.raises(ConfigError, match=match):
        parse_config(doc)


def test_unknown_keys_rejected_with_path():
    doc = fixture_doc("canonical-1")
    doc["solver"]["speed"] = 3
    with pytest.raises(ConfigError) as exc:
        parse_config(doc)
    assert exc.value.path == "solver"
    doc = fixture_doc("canonical-1")
    doc["problem"]["m"]["a"]["colour"] = 1
    with pytest.raises(ConfigError):
        parse_config(doc)


def test_range_errors():
    doc = fixture_doc("canonical-1")
    doc["grid"]["N"] = 10
    with pytest.raises(ConfigError) as exc:
        parse_config(doc)
    assert exc.value.path == "grid/N"
    doc = fixture_doc("canonical-1")
    doc["solver"]["damping"] = 1.5
    with pytest.raises(ConfigError):
        parse_config(doc)


def test_invalid_json_text():
    with pytest.raises(ConfigError):
        parse_config("{not json")


def test_table_function_in_config():
    doc = fixture_doc("canonical-1")
    doc["problem"]["q_plus"] = {"kind": "table", "x": [1.0, 1e7], "y": [0.5, 0.5], "rule": "linear", "finite_support": True}
    cfg = parse_config(doc)
    assert cfg.problem.q_plus(10.0) == 0.5


def test_demo_writes_three_files(tmp_path, capsys):
    code, out = run(["demo", "--out", tmp_path / "d"], capsys)
    assert code == 0
    files = sorted(p.name for p in (tmp_path / "d").iterdir())
    assert files == ["plot.dat", "report.json", "series.tsv"]
    rep = json.loads((tmp_path / "d" / "report.json").read_text())
    kappa = rep["solution"]["b0_times_t_last_decade"]
    assert kappa["value"] == pytest.approx(0.14644661, abs=5e-9)
    assert kappa["value"] == pytest.approx(KAPPA_1, abs=1e-8)
    assert rep["exit_status"] == 0 and rep["overall"] == "pass"
    assert rep["radial"]["decay_bound_exponent"]["value"] == -0.5
    assert rep["radial"]["measured_slope"]["value"] == pytest.approx(KAPPA_1 - 1, rel=1e-6)
    assert "0.1464466" in out.out


def test_series_file(tmp_path, capsys):
    run(["verify", "--config", fixture_path("canonical-1"), "--out", tmp_path, "--grid-n", 256], capsys)
    lines = (tmp_path / "series.tsv").read_text().splitlines()
    assert lines[0].startswith("#")
    assert lines[0].lstrip("# ").split("\t") == ["t", "b0", "u", "uprime", "residual", "r", "U", "E"]
    data = np.loadtxt(tmp_path / "series.tsv")
    assert data.shape == (256, 8)
    assert data[0, 0] == 1.0


def test_plot_file_blocks(tmp_path, capsys):
    run(["lift", "--config", fixture_path("canonical-1"), "--out", tmp_path, "--grid-n", 256], capsys)
    text = (tmp_path / "plot.dat").read_text()
    blocks = [b for b in text.split("\n\n\n") if b.strip()]
    assert len(blocks) == 5
    for b in blocks:
        rows = [line for line in b.splitlines() if line and not line.startswith("#")]
        assert len(rows) == 256
        assert all(len(r.split()) == 2 for r in rows)


def test_check_failing_fixture(capsys):
    code, out = run(["check", "--config", fixture_path("failing-c1"), "--grid-n", 256], capsys)
    assert code == 1
    rep = json.loads(out.out[: out.out.rindex("}") + 1])
    item = next(i for i in rep["hypotheses"]["items"] if i["id"] == "hale-onuchic")
    assert item["verdict"] == "fail"


def test_check_trivial(tmp_path, capsys):
    doc = {"problem": {"n": 3, "R": 1, "u0": 1, "varsigma": 1, "p": 1, "m": 0, "gamma": {"kind": "zero"}}}
    code, _ = run(["check", "--config", write(tmp_path, doc), "--grid-n", 256], capsys)
    assert code == 0


def test_inconclusive_exit_and_strict(tmp_path, capsys):
    doc = fixture_doc("canonical-1")
    doc["solver"]["max_iter"] = 2
    cfg = write(tmp_path, doc)
    code, out = run(["solve", "--config", cfg, "--grid-n", 256], capsys)
    assert code == 2
    assert "solution:picard" in out.out
    code, _ = run(["solve", "--config", cfg, "--grid-n", 256, "--strict"], capsys)
    assert code == 1


def test_config_errors_exit_one(tmp_path, capsys):
    code, out = run(["check"], capsys)
    assert code == 1 and "--config" in out.err
    doc = fixture_doc("canonical-1")
    doc["problem"]["n"] = 2
    code, out = run(["check", "--config", write(tmp_path, doc)], capsys)
    assert code == 1 and "n >= 3" in out.err
    code, out = run(["check", "--config", tmp_path / "missing.json"], capsys)
    assert code == 1


def test_overrides_applied(tmp_path, capsys):
    run(["solve", "--config", fixture_path("canonical-1"), "--out", tmp_path, "--grid-n", 300, "--tmax-mult", 1e4, "--tol", 1e-9, "--seed", 7], capsys)
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["grid"]["N"] == 300
    assert rep["grid"]["t_max"]["value"] == 1e4
    assert rep["solution"]["fixed_point_residual"]["tolerance"] == 1e-9
    assert rep["hypotheses"]["sampling"]["seed"] == 7


def test_report_deterministic(tmp_path, capsys):
    for d in ("a", "b"):
        run(["verify", "--config", fixture_path("canonical-2"), "--out", tmp_path / d, "--grid-n", 256], capsys)
    docs = []
    for d in ("a", "b"):
        rep = json.loads((tmp_path / d / "report.json").read_text())
        assert "timestamp" in rep.pop("generated")
        docs.append(json.dumps(rep, sort_keys=True))
    assert docs[0] == docs[1]
    assert (tmp_path / "a" / "series.tsv").read_bytes() == (tmp_path / "b" / "series.tsv").read_bytes()


def test_numbers_carry_errors(tmp_path, capsys):
    run(["verify", "--config", fixture_path("canonical-1"), "--out", tmp_path, "--grid-n", 256], capsys)
    rep = json.loads((tmp_path / "report.json").read_text())
    for item in rep["hypotheses"]["items"]:
        assert "error" in item and "tail_bound" in item
    for section in ("solution", "radial"):
        for key, val in rep[section].items():
            if isinstance(val, float):
                pytest.fail(f"{section}/{key} has no error attached")
            if isinstance(val, dict) and "value" in val:
                assert "error" in val, f"{section}/{key}"
    for val in rep["compactness"].values():
        if isinstance(val, dict):
            assert "error" in val


def test_console_script_runs(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "exterior_decay.cli", "check", "--config", str(fixture_path("canonical-1")), "--grid-n", "128"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    assert "overall: pass" in proc.stdout


@settings(max_examples=30, deadline=None)
@given(verdicts=st.lists(st.sampled_from(["pass", "fail", "inconclusive", "warn"]), min_size=1, max_size=12), strict=st.booleans())
def test_exit_status_contract(verdicts, strict):
    overall = combine(verdicts)
    code = exit_status(overall, strict)
    if "fail" in verdicts:
        assert code == 1
    elif set(verdicts) & {"inconclusive", "warn"}:
        assert code == (1 if strict else 2)
    else:
        assert code == 0


@settings(max_examples=4, deadline=None)
@given(c=st.sampled_from([0.05, 0.125, 1.0, 2.0]))
def test_exit_status_matches_pipeline(c):
    doc = {"problem": canonical_problem_doc(c=c), "grid": {"N": 256}}
    res = run_pipeline(parse_config(doc), "check")
    expected = 0 if c <= 0.25 else 1
    assert exit_status(res.overall) == expected
