"""Command-line entry point: run, analyze, check-soundness, dump-ast.

Exit codes: 0 success, 1 run-time or program error, 2 usage error,
3 soundness violation.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import abstract, concrete, soundness, syntax
from .kernel import VOID, EvalError


class CliError(Exception):
    """Program-level failure, reported on stderr with exit code 1."""


def _parse_vector(text) -> tuple:
    text = text.strip()
    if not text:
        return ()
    return tuple(int(part) for part in text.split(","))


def _parse_vectors(text) -> list:
    return [_parse_vector(part) for part in text.split(";")]


def _load(path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as err:
        raise CliError(f"cannot read {path}: {err.strerror or err}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sdtl", description="SDTL interpreter, type analyzer and soundness checker"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute a program concretely")
    run.add_argument("file")
    run.add_argument("--input", default="", help="comma-separated input integers")
    run.add_argument("--trace", action="store_true")
    run.add_argument("--format", choices=("text", "json"), default="text")

    analyze = sub.add_parser("analyze", help="run the type analysis")
    analyze.add_argument("file")
    analyze.add_argument("--format", choices=("text", "json"), default="text")
    analyze.add_argument("--trace", action="store_true")
    analyze.add_argument("--max-iterations", type=int, default=100_000)

    check = sub.add_parser(
        "check-soundness", help="differential-test the analysis against concrete runs"
    )
    check.add_argument("file", nargs="?")
    check.add_argument(
        "--input-sets",
        default="",
        help="semicolon-separated input vectors, e.g. '0;1;2,3'",
    )
    check.add_argument("--per-statement", action="store_true")
    check.add_argument("--generate", action="store_true")
    check.add_argument("--seed", type=int, default=0)
    check.add_argument("--count", type=int, default=200)
    check.add_argument("--size", type=int, default=None)
    check.add_argument("--max-iterations", type=int, default=100_000)

    dump = sub.add_parser("dump-ast", help="dump the id-annotated AST as JSON")
    dump.add_argument("file")

    return parser


def _cmd_run(args) -> int:
    program = syntax.parse(_load(args.file))
    trace = None
    if args.trace:
        def trace(node, outcome):
            for state, _ in sorted(outcome, key=repr):
                print(concrete.trace_line(node, state), file=sys.stderr)

    result = concrete.run_program(program, _parse_vector(args.input), trace=trace)
    if args.format == "json":
        print(json.dumps({"outputs": list(result.outputs)}))
    else:
        for value in result.outputs:
            print(value)
    final = result.final_state
    if final.ex is not VOID:
        print(f"uncaught exception: {concrete.value_to_json(final.ex)}", file=sys.stderr)
        return 1
    return 0


def _cmd_analyze(args) -> int:
    program = syntax.parse(_load(args.file))
    trace = None
    if args.trace:
        def trace(node, outcome):
            print(f"sid={node.sid} states={len(outcome)}", file=sys.stderr)

    result = abstract.analyze_program(
        program, max_iterations=args.max_iterations, trace=trace
    )
    if args.format == "json":
        print(json.dumps(abstract.result_to_json(result), indent=2, sort_keys=True))
        return 0
    for index, state in enumerate(result.sorted_states(), 1):
        rendered = abstract.state_to_json(state)
        print(f"state {index}:")
        for key in ("env", "objmem", "this", "curried", "ret", "ex"):
            print(f"  {key}: {json.dumps(rendered[key], sort_keys=True)}")
    for diagnostic in result.diagnostics:
        print(f"diagnostic: node {diagnostic.node}: {diagnostic.message}")
    return 0


def _cmd_check(args) -> int:
    if args.generate:
        reports = soundness.check_generated_corpus(
            args.seed,
            args.count,
            size_bound=args.size,
            max_iterations=args.max_iterations,
        )
        violating = [r for r in reports if r["violations"]]
        summary = {
            "checked": len(reports),
            "violationPrograms": len(violating),
            "reports": violating,
        }
        print(json.dumps(summary, indent=2, sort_keys=True))
        return 3 if violating else 0
    if not args.file:
        raise CliError("check-soundness needs a file or --generate")
    report = soundness.differential_test(
        _load(args.file),
        _parse_vectors(args.input_sets),
        label=args.file,
        per_statement=args.per_statement,
        max_iterations=args.max_iterations,
    )
    print(json.dumps(report, indent=2, sort_keys=True))
    return 3 if report["violations"] else 0


def _cmd_dump(args) -> int:
    print(syntax.dump_ast(syntax.parse(_load(args.file))))
    return 0


_COMMANDS = {
    "run": _cmd_run,
    "analyze": _cmd_analyze,
    "check-soundness": _cmd_check,
    "dump-ast": _cmd_dump,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except syntax.ParseError as err:
        print(f"parse error: {err}", file=sys.stderr)
        return 1
    except EvalError as err:
        print(f"run-time error: {err}", file=sys.stderr)
        return 1
    except abstract.AnalysisLimitError as err:
        print(f"analysis failure: {err}", file=sys.stderr)
        return 1
    except CliError as err:
        print(str(err), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
