"""Shared test utilities: corpus loading and AST lookups.

The parser assigns ids by pre-order position, so tests pin expected
sids/eids by locating the relevant node in the parsed tree instead of
hard-coding numbers.
"""

from pathlib import Path

from sdtl import syntax

PROGRAMS = Path(__file__).parent / "programs"

GOLDEN = [
    "fact.sdtl",
    "showcase.sdtl",
    "while_types.sdtl",
    "currying_add.sdtl",
    "currying_loop.sdtl",
    "objects.sdtl",
    "exceptions_basic.sdtl",
    "tryorerror.sdtl",
    "sideeffect_fact.sdtl",
]

# programs whose concrete runs terminate (currying_loop spins forever)
GOLDEN_RUNNABLE = [name for name in GOLDEN if name != "currying_loop.sdtl"]


def load(name: str) -> str:
    return (PROGRAMS / name).read_text(encoding="utf-8")


def load_program(name: str) -> syntax.Program:
    return syntax.parse(load(name))


def find_fundecl(program, name) -> syntax.FunDecl:
    for node in syntax.iter_nodes(program.root):
        if isinstance(node, syntax.FunDecl) and node.name == name:
            return node
    raise LookupError(name)


def find_call_eid(program, callee_name) -> int:
    """Eid of the (unique) call expression whose callee is a plain variable."""
    for node in syntax.iter_nodes(program.root):
        if isinstance(node, syntax.Call) and node.callee.name == callee_name:
            return node.eid
    raise LookupError(callee_name)


def find_new_eid(program, ctor_name) -> int:
    """Eid (allocation site) of the (unique) `new` on the named constructor."""
    for node in syntax.iter_nodes(program.root):
        if isinstance(node, syntax.New) and isinstance(node.callee, syntax.Var) \
                and node.callee.name == ctor_name:
            return node.eid
    raise LookupError(ctor_name)
