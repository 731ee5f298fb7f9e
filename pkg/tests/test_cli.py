from __future__ import annotations

import json
import shutil
import subprocess
import sys

import pytest

from vdc.cli import RunConfig, execute, main

from conftest import CORPUS, corpus, corpus_files, needs_solver

TOP_KEYS = {"tool_version", "command", "result", "vcs", "audit", "oracle"}


def run_cli(tmp_path, *args):
    out = tmp_path / "report.json"
    code = main([*map(str, args), "--json", str(out)])
    report = json.loads(out.read_text())
    assert TOP_KEYS <= set(report)
    return code, report


def c(name):
    return CORPUS / f"{name}.vdc"


def write(tmp_path, text, name="p.vdc"):
    p = tmp_path / name
    p.write_text(text)
    return p


# ------------------------------------------------------------------ verify


@needs_solver
def test_verify_avg(tmp_path):
    code, rep = run_cli(tmp_path, "verify", c("avg"))
    assert code == 0 and rep["result"] == "verified"
    assert rep["vcs"] and all(v["status"] == "Valid" for v in rep["vcs"])
    assert all({"id", "kind", "status", "span"} <= set(v) for v in rep["vcs"])
    assert len(rep["audit"]) == 1


@needs_solver
def test_verify_branch_on_high(tmp_path):
    code, rep = run_cli(tmp_path, "verify", c("branch_on_high"))
    assert code == 1
    bad = [v for v in rep["vcs"] if v["status"] == "Invalid"]
    assert {v["kind"] for v in bad} == {"branch-low"}
    assert "countermodel" in bad[0]


def test_verify_missing_file(tmp_path):
    code, rep = run_cli(tmp_path, "verify", tmp_path / "nope.vdc")
    assert code == 3 and rep["result"] == "error"


def test_parse_error_exit(tmp_path):
    f = write(tmp_path, "proc main() requires: emp ensures: emp { x := ; }")
    code, rep = run_cli(tmp_path, "verify", f)
    assert code == 3
    assert rep["diagnostics"][0]["span"]["line"] == 1


def test_bad_arguments_exit_3(capsys):
    with pytest.raises(SystemExit) as info:
        main(["verify"])
    assert info.value.code == 3
    with pytest.raises(SystemExit) as info:
        main(["oracle", str(c("avg")), "--range", "5..1"])
    assert info.value.code == 3


def test_unknown_attacker_level(tmp_path):
    code, _ = run_cli(tmp_path, "verify", c("avg"), "--attacker", "nobody")
    assert code == 3


@needs_solver
def test_unknown_without_solver(tmp_path):
    code, rep = run_cli(tmp_path, "verify", c("public_straight"), "--solver", "/nonexistent/z3")
    assert code in (0, 2)
    if code == 2:
        assert rep["result"] == "unknown"


# ------------------------------------------------------------------- audit


@needs_solver
def test_audit_avg(tmp_path):
    code, rep = run_cli(tmp_path, "audit", c("avg"), "--policy", "avg")
    assert code == 0
    (entry,) = rep["audit"]
    assert entry["when"]["status"] == "Valid" and entry["release"]["status"] == "Valid"


@needs_solver
@pytest.mark.parametrize("name,kind", [("mutant_no_guard", "audit-when"), ("mutant_assume_sum", "audit-release")])
def test_audit_mutants(tmp_path, name, kind):
    code, rep = run_cli(tmp_path, "audit", c(name))
    assert code == 1
    (entry,) = rep["audit"]
    bad = [e for e in (entry["when"], entry["release"]) if e["status"] == "Invalid"]
    assert [e["kind"] for e in bad] == [kind]


def test_audit_unknown_policy(tmp_path):
    code, rep = run_cli(tmp_path, "audit", c("avg"), "--policy", "median")
    assert code == 3 and "median" in rep["error"]


@needs_solver
def test_inline_audit_output(tmp_path, capsys):
    code = main(["inline-audit", str(c("avg"))])
    assert code == 0
    text = capsys.readouterr().out
    assert "assert(len(history) >= 6)" in text
    assert "by avg" in text


@needs_solver
@pytest.mark.parametrize("path", corpus_files(), ids=lambda p: p.stem)
def test_audit_exit_matches_inlined_verify(tmp_path, path):
    from vdc.parser import format_program
    from vdc.verifier import inline_audit

    prog = corpus(path.stem)
    for pol in prog.policies:
        a, _ = execute(RunConfig(command="audit", files=[path], policy=pol.name))
        f = write(tmp_path, format_program(inline_audit(prog, pol)), f"{path.stem}_{pol.name}.vdc")
        b, _ = execute(RunConfig(command="verify", files=[f]))
        assert a == b


# ------------------------------------------------------------------ oracle


def test_oracle_avg_small(tmp_path):
    code, rep = run_cli(tmp_path, "oracle", c("avg_small"), "--range", "0..2", "--max-steps", "14", "--policy", "avg2")
    assert code == 0
    assert [r["theorem"] for r in rep["oracle"]] == ["policy-agnostic", "policy-specific"]
    assert all(r["status"] == "pass" for r in rep["oracle"])


def test_oracle_direct_leak_needs_range(tmp_path):
    code, rep = run_cli(tmp_path, "oracle", c("direct_leak"))
    assert code == 3


def test_oracle_direct_leak_witness(tmp_path):
    code, rep = run_cli(tmp_path, "oracle", c("direct_leak"), "--range", "0..3", "--attacker", "low")
    assert code == 1 and rep["result"] == "violation"
    (r,) = rep["oracle"]
    pairs = {(v["major"]["store"]["x"], v["minor"]["store"]["x"]) for v in r["violations"]}
    assert (1, 0) in pairs


def test_oracle_budget_exit(tmp_path):
    code, rep = run_cli(tmp_path, "oracle", c("trace_loop"), "--range", "0..3", "--max-steps", "0")
    assert code == 0
    spin = "{ requires: emp ensures: emp { while (true) invariant(true) { x := x + 1; } } }"
    f = write(tmp_path, f"proc main(x) requires: x :: low ensures: emp {{ par {spin} {spin} }}")
    code, rep = run_cli(tmp_path, "oracle", f, "--range", "0..1", "--max-steps", "60", "--max-nodes", "5000")
    assert code == 2 and rep["result"] == "budget-exceeded"


def test_oracle_paper_direction_flag(tmp_path):
    f = write(tmp_path, "proc main(x) requires: x :: high ensures: emp { out[high](x); }")
    code, _ = run_cli(tmp_path, "oracle", f, "--range", "0..2", "--attacker", "low")
    assert code == 0
    code, _ = run_cli(tmp_path, "oracle", f, "--range", "0..2", "--attacker", "low", "--visibility-direction", "paper")
    assert code == 1


# --------------------------------------------------------------------- run


def test_run_skip(tmp_path):
    f = write(tmp_path, "proc main() requires: emp ensures: emp { skip; }")
    code, rep = run_cli(tmp_path, "run", f)
    assert code == 0
    assert [r["schedule"]["text"] for r in rep["runs"]] == ["<tau>"]


def test_run_parallel(tmp_path):
    f = write(
        tmp_path,
        "proc main(x) requires: emp ensures: emp { par { requires: emp ensures: emp { x := 1; } }"
        " { requires: emp ensures: emp { x := 2; } } }",
    )
    code, rep = run_cli(tmp_path, "run", f, "--set", "x=0")
    done = [r for r in rep["runs"] if r["final"]["kind"] == "stop"]
    assert len(done) == 2
    assert sorted(r["final"]["store"]["x"] for r in done) == [1, 2]


def test_run_avg_small_trace_payload(tmp_path):
    code, rep = run_cli(tmp_path, "run", c("avg_small"), "--range", "0..2", "--max-steps", "6", "--set", "[2]=2",
                        "--visible", "low")
    assert code == 0
    events = [a for r in rep["runs"] for a in r["schedule"]["actions"] if a["kind"] == "trace"]
    assert events and all(a["event"] == {"event": "Input", "fields": [2]} for a in events)
    assert all("visible" in r for r in rep["runs"])
    assert rep["budget_exceeded"] is True


def test_run_unsatisfiable_pin(tmp_path):
    code, _ = run_cli(tmp_path, "run", c("avg_small"), "--range", "0..2", "--set", "[2]=9")
    assert code == 3


# ----------------------------------------------------------- entry points


def test_stdout_report(capsys):
    code = main(["run", str(c("public_straight")), "--json", "-", "--max-steps", "3"])
    rep = json.loads(capsys.readouterr().out)
    assert code == 0 and rep["command"] == "run"


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "vdc.cli", "--version"], capture_output=True, text=True)
    assert out.returncode == 0 and out.stdout.startswith("vdc ")


@pytest.mark.skipif(shutil.which("vdc") is None, reason="console script not installed")
def test_console_script(tmp_path):
    out = subprocess.run(["vdc", "verify", str(tmp_path / "missing.vdc")], capture_output=True, text=True)
    assert out.returncode == 3


def test_runconfig_defaults():
    cfg = RunConfig()
    assert cfg.max_steps == 14 and cfg.direction == "sound" and cfg.timeout == 10.0
