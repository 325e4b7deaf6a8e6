import json
import subprocess
import sys

import pytest

from npqs.cli import main
from npqs.report import ConfigError, RunConfig, csv_text, run_report, write_report

SMALL = ["--samples", "20000"]


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_check_identities_passes(capsys):
    code, out, _ = run(["check-identities", "--samples", "20000"], capsys)
    assert code == 0
    assert "checks passed" in out


def test_check_identities_n1_reports_collapse(capsys):
    code, out, _ = run(["check-identities", "--n", "1", "--samples", "5000"], capsys)
    assert code == 0
    assert "projection kernel equals the Euclidean kernel" in out


def test_check_identities_mutant_exits_one(capsys):
    code, _, err = run(["check-identities", "--n", "2", "--samples", "5000", "--seed", "4", "--mutate", "sa-sign"], capsys)
    assert code == 1
    assert "derivative at 0" in err and "seed=4" in err and "index=" in err


def test_norm_examples(capsys):
    code, out, _ = run(["norm", "--expr", "0", "--params", "2,1,1", "--a", "0", *SMALL], capsys)
    assert code == 0 and "= 0 " in out
    code, out, _ = run(["norm", "--expr", "1", "--params", "2,1,1", "--a", "0", *SMALL], capsys)
    assert code == 0 and "= 1 +/- 0" in out


def test_norm_rejects_q_zero(capsys):
    code, _, err = run(["norm", "--expr", "z1", "--params", "2,0,1", *SMALL], capsys)
    assert code == 2 and "q>0" in err


@pytest.mark.parametrize(
    "argv",
    [
        ["norm", "--expr", "z1 +", "--params", "2,1,1"],
        ["norm", "--expr", "z2", "--params", "2,1,1"],
        ["norm", "--expr", "z1", "--params", "2,1"],
        ["norm", "--expr", "z1", "--params", "2,1,1", "--a", "0.8,0.8"],
        ["functional", "--expr", "z1", "--params", "4,1,1", "--kind", "HWEuclid"],
    ],
)
def test_input_errors_exit_two(argv, capsys):
    code, _, err = run(argv + SMALL, capsys)
    assert code == 2 and err.strip()


def test_functional_and_sup_search(capsys, tmp_path):
    code, out, _ = run(
        ["functional", "--expr", "z1", "--params", "7,1,1,0.5", "--kind", "DAlpha", "--a", "0.3", *SMALL], capsys
    )
    assert code == 0 and "DAlpha[z1]" in out
    code, out, _ = run(
        ["sup-search", "--expr", "z1^2", "--params", "7,1,1,0.5", "--kind", "NNorm", "--budget", "40",
         "--out-dir", str(tmp_path), *SMALL],
        capsys,
    )
    assert code == 0 and "probed lower bound" in out
    lines = (tmp_path / "report.csv").read_text().splitlines()
    assert lines[0].startswith("function,kind,n,p,q,s,alpha,a_star,value,std_error,samples,diverged,seconds,seed")
    assert len(lines) == 2


def test_seed_falls_back_to_environment(monkeypatch, capsys):
    argv = ["norm", "--expr", "z1", "--params", "2,1,1", "--a", "0.2", *SMALL]
    monkeypatch.setenv("NPQS_SEED", "31")
    _, a, _ = run(argv, capsys)
    _, b, _ = run(argv + ["--seed", "31"], capsys)
    _, c, _ = run(argv + ["--seed", "32"], capsys)
    assert a == b and a != c
    monkeypatch.setenv("NPQS_SEED", "x")
    code, _, _ = run(argv, capsys)
    assert code == 2


def test_run_config_round_trip(tmp_path):
    rc = RunConfig(n=1, corpus=["z1", "log(1 - z1)"], t_grid=[0.5], seed=9, samples=1000, time_limit=5.0)
    again = RunConfig.from_dict(json.loads(rc.to_json()))
    assert again == rc
    path = tmp_path / "c.json"
    path.write_text(rc.to_json())
    assert RunConfig.load(path) == rc
    assert rc.functions() == ["z1", "log(1 - z1)", "(1 - dot(z,[1]))^-0.5"]


@pytest.mark.parametrize(
    "bad",
    [
        {"n": 1, "colour": "red"},
        {"n": 1, "corpus": ["z2"]},
        {"n": 1, "params": [{"p": 7, "q": 0, "s": 1}]},
        {"n": 1, "params": [{"p": 7, "q": 1}]},
        {"n": 1, "kinds": ["Bloch"]},
        {"n": 2, "budget": 40},
    ],
)
def test_run_config_rejects_bad_input(bad):
    with pytest.raises((ConfigError, ValueError)):
        RunConfig.from_dict(bad)


def test_empty_corpus_gives_empty_report(tmp_path, capsys):
    cfg = tmp_path / "empty.json"
    cfg.write_text(json.dumps({"n": 2, "corpus": []}))
    code, _, _ = run(["equivalence-report", "--config", str(cfg), "--out-dir", str(tmp_path / "out")], capsys)
    assert code == 0
    lines = (tmp_path / "out" / "report.csv").read_text().splitlines()
    assert len(lines) == 1
    summary = json.loads((tmp_path / "out" / "summary.json").read_text())
    assert summary["functions"] == [] and summary["all_agree"] is True


def test_strong_kernel_power_diverges_in_every_difference_kind():
    rc = RunConfig(n=2, corpus=["(1 - z1)^-3"], samples=100_000, budget=80)
    jobs, summary = run_report(rc)
    rows = {r.kind: r for r in jobs[0].rows}
    for kind in ("DAlpha", "HWEuclid", "HWProj", "JMeanOsc"):
        assert rows[kind].verdict == "infinite", kind
    assert summary["all_agree"]


def test_polynomials_are_finite_and_agree():
    rc = RunConfig(n=2, corpus=["1", "z1", "z1^2", "z1*z2"], samples=20_000, budget=80)
    jobs, summary = run_report(rc)
    assert all(r.verdict == "finite" for j in jobs for r in j.rows)
    assert summary["all_agree"] and summary["dominance_violations"] == 0
    assert summary["consistent"]


def test_report_is_byte_identical_across_runs_and_workers(tmp_path):
    base = dict(n=1, corpus=["z1", "(1 - z1)^-1"], samples=20_000, budget=40, seed=3)
    j1, s1 = run_report(RunConfig(**base))
    j2, _ = run_report(RunConfig(**base))
    j3, _ = run_report(RunConfig(**base, workers=2))
    rc = RunConfig(**base)
    assert csv_text(rc, j1) == csv_text(rc, j2) == csv_text(rc, j3)
    csv_path, json_path = write_report(rc, j1, s1, tmp_path)
    assert csv_path.read_text() == csv_text(rc, j1)
    assert json.loads(json_path.read_text())["config"]["seed"] == 3


def test_time_limit_marks_rows_skipped():
    rc = RunConfig(n=1, corpus=["z1", "z1^2"], samples=20_000, budget=40, time_limit=0.0)
    jobs, summary = run_report(rc)
    rows = [r for j in jobs for r in j.rows]
    assert rows and all(r.verdict == "skipped" for r in rows)
    assert summary["skipped_rows"] == len(rows)


def test_console_script_entry_point():
    out = subprocess.run(
        [sys.executable, "-m", "npqs.cli", "norm", "--expr", "1", "--params", "2,1,1", "--a", "0", "--samples", "1000"],
        capture_output=True,
        text=True,
    )
    assert out.returncode == 0, out.stderr
