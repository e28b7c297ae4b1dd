import json

import pytest

from helpers import PROGRAMS
from sdtl import cli


def run_cli(capsys, *argv):
    code = cli.main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def path(name):
    return str(PROGRAMS / name)


def test_run_factorial(capsys):
    code, out, err = run_cli(capsys, "run", path("fact.sdtl"), "--input", "2")
    assert code == 0 and out == "2\n" and err == ""


def test_run_showcase(capsys):
    code, out, _ = run_cli(capsys, "run", path("showcase.sdtl"), "--input", "3,4,100")
    assert code == 0
    assert out.splitlines() == ["6", "24", "45", "90", "42", "42"]


def test_run_json_format(capsys):
    code, out, _ = run_cli(
        capsys, "run", path("fact.sdtl"), "--input", "5", "--format", "json"
    )
    assert code == 0 and json.loads(out) == {"outputs": [120]}


def test_run_trace_lines(capsys):
    code, _, err = run_cli(capsys, "run", path("fact.sdtl"), "--input", "2", "--trace")
    assert code == 0
    assert err.splitlines()
    assert all(line.startswith("sid=") and " env={" in line for line in err.splitlines())


def test_run_division_by_zero(tmp_path, capsys):
    bad = tmp_path / "div0.sdtl"
    bad.write_text("x = 1 / 0;")
    code, _, err = run_cli(capsys, "run", str(bad))
    assert code == 1
    assert "division by zero" in err and "node" in err


def test_run_uncaught_exception(tmp_path, capsys):
    bad = tmp_path / "boom.sdtl"
    bad.write_text("output 1; throw 3;")
    code, out, err = run_cli(capsys, "run", str(bad))
    assert code == 1 and out == "1\n" and "uncaught exception: 3" in err


def test_parse_error_reports_location(tmp_path, capsys):
    bad = tmp_path / "bad.sdtl"
    bad.write_text("x = ;")
    code, _, err = run_cli(capsys, "run", str(bad))
    assert code == 1 and "parse error: 1:5" in err


def test_missing_file(capsys):
    code, _, err = run_cli(capsys, "run", "no-such-file.sdtl")
    assert code == 1 and "cannot read" in err


def test_usage_error_exits_2(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["frobnicate"])
    assert exc.value.code == 2


def test_analyze_while_example(capsys):
    code, out, _ = run_cli(
        capsys, "analyze", path("while_types.sdtl"), "--format", "json"
    )
    assert code == 0
    result = json.loads(out)
    envs = [state["env"] for state in result["states"]]
    assert {"sum": "Num", "x": "Bool", "z": "Num"} in envs
    assert {"sum": "Num", "x": "Num", "z": "Num"} in envs
    assert len(envs) == 2 and result["diagnostics"] == []


def test_analyze_text_mode(capsys):
    code, out, _ = run_cli(capsys, "analyze", path("while_types.sdtl"))
    assert code == 0 and out.count("state ") == 2


def test_analyze_trace_reports_state_counts(capsys):
    code, _, err = run_cli(capsys, "analyze", path("while_types.sdtl"), "--trace")
    assert code == 0
    assert all(line.startswith("sid=") and " states=" in line
               for line in err.splitlines())
    assert any(line.endswith("states=2") for line in err.splitlines())


def test_analyze_output_is_stable(capsys):
    _, first, _ = run_cli(capsys, "analyze", path("showcase.sdtl"), "--format", "json")
    _, second, _ = run_cli(capsys, "analyze", path("showcase.sdtl"), "--format", "json")
    assert first == second


def test_check_soundness_file(capsys):
    code, out, _ = run_cli(
        capsys, "check-soundness", path("fact.sdtl"), "--input-sets", "0;1;2,0;5"
    )
    assert code == 0
    report = json.loads(out)
    assert report["checked"] == 4 and report["violations"] == []


def test_check_soundness_violation_exit_code(tmp_path, capsys):
    prog = tmp_path / "reset.sdtl"
    prog.write_text(
        "function F(v) {\n\tthis.m = v;\n}\n"
        "c = 2;\nx = 5;\na = 0;\nb = 0;\n"
        "while(c > 0) {\n\to = new F(x);\n"
        "\tif(c > 1) { a = o; } else { b = o; }\n"
        "\tx = true;\n\tc = c - 1;\n}\n"
    )
    code, out, _ = run_cli(capsys, "check-soundness", str(prog), "--input-sets", "")
    assert code == 3
    assert json.loads(out)["violations"]


def test_analyze_iteration_cap(capsys):
    code, _, err = run_cli(
        capsys, "analyze", path("while_types.sdtl"), "--max-iterations", "1"
    )
    assert code == 1 and "analysis failure" in err


def test_check_soundness_per_statement(capsys):
    # a leading negative number needs the --flag=value spelling
    code, out, _ = run_cli(
        capsys, "check-soundness", path("exceptions_basic.sdtl"),
        "--input-sets=-5;7", "--per-statement",
    )
    assert code == 0 and json.loads(out)["violations"] == []


def test_check_soundness_generated(capsys):
    code, out, _ = run_cli(
        capsys, "check-soundness", "--generate", "--seed", "9", "--count", "10"
    )
    assert code == 0
    summary = json.loads(out)
    assert summary["checked"] == 10 and summary["violationPrograms"] == 0


def test_dump_ast(capsys):
    code, out, _ = run_cli(capsys, "dump-ast", path("objects.sdtl"))
    assert code == 0
    tree = json.loads(out)
    assert tree["id"] == 1 and tree["kind"] == "Seq"

    def ids(obj):
        yield obj["id"]
        for child in obj["children"]:
            yield from ids(child)

    collected = list(ids(tree))
    assert len(collected) == len(set(collected))
