import json
import os
import subprocess
import sys

import pytest

from buchi_rank.cli import EXIT_DECIDED, EXIT_ERROR, EXIT_UNKNOWN, main, read_ltl

from conftest import FIGURE1, needs_z3

FAST = ["--degree-max", "1", "--sos", "diagonal", "--timeout", "20"]

NONDET_HOA = """HOA: v1
States: 2
Start: 0
AP: 1 "at(l_t)"
acc-name: Buchi
Acceptance: 1 Inf(0)
--BODY--
State: 0
[t] 0
[0] 1
State: 1 {0}
[0] 1
--END--
"""


@needs_z3
def test_exists_mode_json(capsys):
    code = main(["exists", FIGURE1, "--ltl", "G F at(l2)", "--json", "--oracle-bounds", "0:3"] + FAST)
    out = json.loads(capsys.readouterr().out)
    assert code == EXIT_DECIDED
    assert out["verdict"] == "Proved" and out["check"]["ok"]
    assert {"verdict", "witness", "timings"} <= set(out)
    assert out["witness"]["kind"] == "EBRF"
    assert out["oracle"]["applicable"] is False


@needs_z3
def test_true_is_proved(tmp_path, capsys):
    prog = tmp_path / "p.prog"
    prog.write_text("pre: x >= 0\nwhile x >= 1 do x = x - 1 done\n")
    assert main(["verify", str(prog), "--ltl", "true"] + FAST) == EXIT_DECIDED
    assert capsys.readouterr().out.startswith("Proved")


@needs_z3
def test_unknown_exit_code(tmp_path, capsys):
    prog = tmp_path / "p.prog"
    prog.write_text("pre: x >= 0\nwhile x >= 1 do x = x - 1 done\n")
    code = main(["verify", str(prog), "--ltl", "G F at(l1)", "--degree-max", "0", "--sos", "diagonal",
                 "--timeout", "5"])
    # constant templates cannot count the loop down
    assert code == EXIT_UNKNOWN
    assert capsys.readouterr().out.startswith("Unknown")


def test_errors_exit_one(tmp_path, capsys):
    assert main(["verify", str(tmp_path / "missing.prog"), "--ltl", "true"]) == EXIT_ERROR
    bad = tmp_path / "bad.prog"
    bad.write_text("x = = 1")
    assert main(["verify", str(bad), "--ltl", "true"]) == EXIT_ERROR
    assert "error" in capsys.readouterr().err


def test_nondeterministic_hoa_rejected_for_verification(tmp_path, capsys):
    prog = tmp_path / "p.prog"
    prog.write_text("pre: x >= 0\nwhile x >= 1 do x = x - 1 done\n")
    hoa = tmp_path / "a.hoa"
    hoa.write_text(NONDET_HOA)
    assert main(["verify", str(prog), "--ltl", "F G at(l_t)", "--hoa", str(hoa)]) == EXIT_ERROR
    assert "deterministic" in capsys.readouterr().err


def test_missing_solver_is_an_error(capsys):
    code = main(["exists", FIGURE1, "--ltl", "G F at(l2)", "--solvers", "no-such-solver-xyz"])
    assert code == EXIT_ERROR


@needs_z3
def test_artifacts_are_byte_identical(tmp_path):
    dirs = [tmp_path / "a", tmp_path / "b"]
    for d in dirs:
        assert main(["exists", FIGURE1, "--ltl", "G F at(l2)", "--out", str(d)] + FAST) == EXIT_DECIDED
    names = sorted(f for f in os.listdir(dirs[0]) if f.endswith((".smt2", ".dot", "witness.json")))
    assert any(n.endswith(".smt2") for n in names)
    assert names == sorted(f for f in os.listdir(dirs[1]) if f.endswith((".smt2", ".dot", "witness.json")))
    for n in names:
        assert (dirs[0] / n).read_bytes() == (dirs[1] / n).read_bytes(), n
    rep = json.loads((dirs[0] / "report.json").read_text())
    assert rep["verdict"] == "Proved"


def test_read_ltl_from_file(tmp_path):
    f = tmp_path / "s.ltl"
    f.write_text("# comment\nG F at(l2)  # trailing\n")
    assert read_ltl(str(f)) == "G F at(l2)"
    assert read_ltl("F at(l1)") == "F at(l1)"


@needs_z3
def test_corpus_subcommand(capsys):
    code = main(["corpus", "--programs", "countdown", "--specs", "RC", "--json"])
    out = json.loads(capsys.readouterr().out)
    assert code == EXIT_DECIDED and out["contradictions"] == 0
    assert len(out["instances"]) == 1


def test_console_script_help():
    out = subprocess.run([sys.executable, "-m", "buchi_rank.cli", "--help"], capture_output=True, text=True)
    assert out.returncode == 0 and "verify" in out.stdout
