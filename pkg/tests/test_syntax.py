import collections

import pytest

from helpers import GOLDEN, find_fundecl, load, load_program
from sdtl import syntax
from sdtl.syntax import (
    Assign, BinOp, Call, Con, FunDecl, Member, MethodCall, Nil, ParseError,
    Seq, Var, iter_nodes, node_id, parse,
)


def test_smallest_program_ids():
    program = parse("x = 1;")
    nodes = [(node_id(n), type(n).__name__) for n in iter_nodes(program.root)]
    assert nodes == [(1, "Assign"), (2, "Var"), (3, "Con")]


def test_factorial_declaration():
    program = load_program("fact.sdtl")
    decl = find_fundecl(program, "fact")
    assert decl.params == ("f", "n")
    assert program.arity(decl.sid) == 2
    assert program.param(decl.sid) == ("f", "n")
    assert program.stm(decl.sid) is decl.body


def test_empty_parameter_list():
    program = parse("function g(){}")
    decl = find_fundecl(program, "g")
    assert program.arity(decl.sid) == 0
    assert isinstance(decl.body, Nil)


def test_showcase_juiceme_params():
    program = load_program("showcase.sdtl")
    assert find_fundecl(program, "juiceMe").params == ("j", "x")


def test_duplicate_parameter_rejected():
    with pytest.raises(ParseError, match="duplicate parameter"):
        parse("function f(a,a){}")


def test_unknown_function_sid_is_internal_error():
    program = parse("x = 1;")
    with pytest.raises(KeyError, match="internal error"):
        program.stm(99)


@pytest.mark.parametrize("name", GOLDEN)
def test_ids_unique(name):
    program = load_program(name)
    ids = [node_id(n) for n in iter_nodes(program.root)]
    assert len(ids) == len(set(ids))
    assert min(ids) == 1 and max(ids) == len(ids)


@pytest.mark.parametrize("name", GOLDEN)
def test_reparse_is_stable(name):
    source = load(name)
    assert parse(source) == parse(source)


def test_fun_table_matches_declarations():
    program = load_program("showcase.sdtl")
    decl_sids = {n.sid for n in iter_nodes(program.root) if isinstance(n, FunDecl)}
    assert set(program.fun_table) == decl_sids
    assert {d.name for d in program.fun_table.values()} == {
        "fact", "Fruit", "juicible", "juiceMe",
    }


def test_operator_precedence():
    program = parse("x = 1 + 2 * 3;")
    value = program.root.value
    assert isinstance(value, BinOp) and value.op == "+"
    assert isinstance(value.right, BinOp) and value.right.op == "*"

    program = parse("x = 1 + 2 > 3 * 4;")
    value = program.root.value
    assert value.op == ">"
    assert value.left.op == "+" and value.right.op == "*"


def test_left_associativity():
    program = parse("x = 8 - 4 - 2;")
    value = program.root.value
    assert value.op == "-"
    assert isinstance(value.left, BinOp) and value.left.op == "-"
    assert value.right.value == 2


def test_unary_minus_desugars():
    program = parse("x = -1;")
    value = program.root.value
    assert isinstance(value, BinOp) and value.op == "-"
    assert value.left == Con(value.left.eid, 0)
    assert value.right.value == 1


def test_method_call_vs_plain_call():
    program = parse("a.b(1); f(1);")
    first, second = program.root.first.exp, program.root.second.exp
    assert isinstance(first, MethodCall) and first.member == "b"
    assert isinstance(second, Call) and second.callee.name == "f"


def test_member_chain():
    program = parse("x = a.b.c;")
    lexp = program.root.value.lexp
    assert isinstance(lexp, Member) and lexp.member == "c"
    inner = lexp.obj.lexp
    assert isinstance(inner, Member) and inner.member == "b"
    assert isinstance(inner.obj.lexp, Var)


def test_new_with_member_callee():
    program = parse("x = new a.B(2);")
    new = program.root.value
    assert isinstance(new.callee, Member) and new.callee.member == "B"

    program = parse("x = new F();")
    assert program.root.value.args == ()


def test_seq_right_associates():
    program = parse("a=1; b=2; c=3;")
    root = program.root
    assert isinstance(root, Seq) and isinstance(root.second, Seq)
    assert isinstance(root.second.second, Assign)


def test_comments_and_nil():
    program = parse("# only a comment\nnil;")
    assert isinstance(program.root, Nil)
    assert isinstance(parse("").root, Nil)


def test_block_statements_need_no_semicolon():
    program = parse("if(true){x=1;}\ny=2;")
    assert isinstance(program.root, Seq)


def test_trailing_semicolon_optional():
    assert isinstance(parse("x = 1").root, Assign)


def test_missing_semicolon_reports_position():
    with pytest.raises(ParseError) as exc:
        parse("x = 1 y = 2;")
    assert exc.value.line == 1 and "';'" in exc.value.message


def test_error_positions():
    with pytest.raises(ParseError) as exc:
        parse("x = 1;\nyy = ;")
    assert exc.value.line == 2


def test_assignment_target_must_be_lexp():
    with pytest.raises(ParseError, match="left side"):
        parse("1 = 2;")


def test_callee_must_be_variable_or_member():
    with pytest.raises(ParseError, match="callee"):
        parse("(f)(1);")


def test_keywords_are_not_identifiers():
    with pytest.raises(ParseError):
        parse("while = 1;")


def test_dump_ast_schema():
    program = load_program("objects.sdtl")
    dumped = syntax.node_to_json(program.root)

    ids = []

    def walk(obj):
        assert set(obj) >= {"id", "kind", "children"}
        ids.append(obj["id"])
        for child in obj["children"]:
            walk(child)

    walk(dumped)
    assert len(ids) == len(set(ids))
    kinds = collections.Counter(
        type(n).__name__ for n in iter_nodes(program.root)
    )
    assert kinds["FunDecl"] == 3 and kinds["New"] == 1
