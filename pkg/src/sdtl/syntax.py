"""SDTL syntax: lexer, recursive-descent parser and id-annotated AST.

Every statement and expression node carries a unique positive id (``sid``
for statements, ``eid`` for expressions and left-expressions).  Ids are
assigned in a single left-to-right pre-order traversal starting at 1, so
parsing the same text twice yields identical trees.
"""

from __future__ import annotations

import dataclasses
import itertools
import json
from dataclasses import dataclass
from typing import Iterator, NamedTuple, Union


class ParseError(Exception):
    def __init__(self, message, line, col):
        super().__init__(f"{line}:{col}: {message}")
        self.message = message
        self.line = line
        self.col = col


# --- AST nodes -------------------------------------------------------------


@dataclass(frozen=True)
class Stm:
    sid: int


@dataclass(frozen=True)
class Exp:
    eid: int


@dataclass(frozen=True)
class Lexp:
    eid: int


@dataclass(frozen=True)
class Nil(Stm):
    pass


@dataclass(frozen=True)
class Seq(Stm):
    first: Stm
    second: Stm


@dataclass(frozen=True)
class ExpStm(Stm):
    exp: Exp


@dataclass(frozen=True)
class Output(Stm):
    exp: Exp


@dataclass(frozen=True)
class Assign(Stm):
    target: Lexp
    value: Exp


@dataclass(frozen=True)
class If(Stm):
    guard: Exp
    then_body: Stm


@dataclass(frozen=True)
class IfElse(Stm):
    guard: Exp
    then_body: Stm
    else_body: Stm


@dataclass(frozen=True)
class While(Stm):
    guard: Exp
    body: Stm


@dataclass(frozen=True)
class FunDecl(Stm):
    name: str
    params: tuple[str, ...]
    body: Stm


@dataclass(frozen=True)
class Return(Stm):
    exp: Exp


@dataclass(frozen=True)
class TryCatch(Stm):
    body: Stm
    exc_name: str
    handler: Stm


@dataclass(frozen=True)
class Throw(Stm):
    exp: Exp


@dataclass(frozen=True)
class Con(Exp):
    value: Union[int, bool]


@dataclass(frozen=True)
class LexpRef(Exp):
    lexp: Lexp


@dataclass(frozen=True)
class Input(Exp):
    pass


@dataclass(frozen=True)
class Call(Exp):
    callee: Lexp
    args: tuple[Exp, ...]


@dataclass(frozen=True)
class MethodCall(Exp):
    receiver: Exp
    member: str
    args: tuple[Exp, ...]


@dataclass(frozen=True)
class BinOp(Exp):
    op: str
    left: Exp
    right: Exp


@dataclass(frozen=True)
class Paren(Exp):
    inner: Exp


@dataclass(frozen=True)
class Global(Exp):
    pass


@dataclass(frozen=True)
class This(Exp):
    pass


@dataclass(frozen=True)
class New(Exp):
    callee: Lexp
    args: tuple[Exp, ...]


@dataclass(frozen=True)
class Var(Lexp):
    name: str


@dataclass(frozen=True)
class Member(Lexp):
    obj: Exp
    member: str


Node = Union[Stm, Exp, Lexp]

BINOPS = ("+", "-", "*", "/", ">", "<", "==")


def node_id(node: Node) -> int:
    return node.sid if isinstance(node, Stm) else node.eid


def child_nodes(node: Node) -> Iterator[Node]:
    """Children in source order (the order used for pre-order numbering)."""
    for field in dataclasses.fields(node):
        value = getattr(node, field.name)
        if isinstance(value, (Stm, Exp, Lexp)):
            yield value
        elif isinstance(value, tuple):
            for item in value:
                if isinstance(item, (Stm, Exp, Lexp)):
                    yield item


def iter_nodes(node: Node) -> Iterator[Node]:
    """Pre-order traversal of a subtree."""
    yield node
    for child in child_nodes(node):
        yield from iter_nodes(child)


@dataclass(frozen=True)
class Program:
    root: Stm
    fun_table: dict  # Sid -> FunDecl node

    def stm(self, sid: int) -> Stm:
        """Body statement of the function declared at `sid`."""
        return self._decl(sid).body

    def param(self, sid: int) -> tuple[str, ...]:
        return self._decl(sid).params

    def arity(self, sid: int) -> int:
        return len(self._decl(sid).params)

    def _decl(self, sid: int) -> FunDecl:
        try:
            return self.fun_table[sid]
        except KeyError:
            raise KeyError(f"internal error: no function declared at sid {sid}") from None


# --- Lexer -----------------------------------------------------------------

KEYWORDS = frozenset(
    [
        "nil", "output", "if", "else", "while", "function", "return",
        "try", "catch", "throw", "global", "this", "new", "input",
        "true", "false",
    ]
)

# longest symbols first so '==' wins over '='
SYMBOLS = ("==", ";", ",", "(", ")", "{", "}", ".", "=", "+", "-", "*", "/", "<", ">")


class Token(NamedTuple):
    kind: str  # 'id', 'num', a keyword, a symbol, or 'eof'
    value: object
    line: int
    col: int


def tokenize(source: str) -> list[Token]:
    tokens = []
    line, col = 1, 1
    i, n = 0, len(source)
    while i < n:
        ch = source[i]
        if ch == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if ch == "#":
            while i < n and source[i] != "\n":
                i += 1
            continue
        if ch.isdigit():
            start, start_col = i, col
            while i < n and source[i].isdigit():
                i += 1
                col += 1
            tokens.append(Token("num", int(source[start:i]), line, start_col))
            continue
        if ch.isalpha():
            start, start_col = i, col
            while i < n and source[i].isalnum():
                i += 1
                col += 1
            word = source[start:i]
            kind = word if word in KEYWORDS else "id"
            tokens.append(Token(kind, word, line, start_col))
            continue
        for sym in SYMBOLS:
            if source.startswith(sym, i):
                tokens.append(Token(sym, sym, line, col))
                i += len(sym)
                col += len(sym)
                break
        else:
            raise ParseError(f"unexpected character {ch!r}", line, col)
    tokens.append(Token("eof", None, line, col))
    return tokens


# --- Parser ----------------------------------------------------------------

_BLOCK_STARTERS = frozenset(["if", "while", "function", "try"])


class _Parser:
    def __init__(self, tokens):
        self.tokens = tokens
        self.pos = 0

    def peek(self, offset=0) -> Token:
        return self.tokens[min(self.pos + offset, len(self.tokens) - 1)]

    def next(self) -> Token:
        tok = self.peek()
        self.pos += 1
        return tok

    def expect(self, kind) -> Token:
        tok = self.peek()
        if tok.kind != kind:
            self.fail(f"expected {kind!r}, found {self.describe(tok)}")
        return self.next()

    def describe(self, tok: Token) -> str:
        return "end of input" if tok.kind == "eof" else repr(str(tok.value))

    def fail(self, message):
        tok = self.peek()
        raise ParseError(message, tok.line, tok.col)

    # statements

    def parse_program(self) -> Stm:
        root = self.parse_stm_list(("eof",))
        self.expect("eof")
        return root

    def parse_stm_list(self, terminators) -> Stm:
        stms = []
        while self.peek().kind not in terminators:
            stm = self.parse_stm()
            stms.append(stm)
            if self.peek().kind == ";":
                self.next()
            elif not isinstance(stm, (If, IfElse, While, FunDecl, TryCatch)):
                if self.peek().kind not in terminators:
                    self.fail(f"expected ';', found {self.describe(self.peek())}")
        return seq_normalize(stms)

    def parse_block(self) -> Stm:
        self.expect("{")
        body = self.parse_stm_list(("}",))
        self.expect("}")
        return body

    def parse_stm(self) -> Stm:
        kind = self.peek().kind
        if kind == "nil":
            self.next()
            return Nil(0)
        if kind == "output":
            self.next()
            return Output(0, self.parse_exp())
        if kind == "return":
            self.next()
            return Return(0, self.parse_exp())
        if kind == "throw":
            self.next()
            return Throw(0, self.parse_exp())
        if kind == "if":
            return self.parse_if()
        if kind == "while":
            self.next()
            self.expect("(")
            guard = self.parse_exp()
            self.expect(")")
            return While(0, guard, self.parse_block())
        if kind == "function":
            return self.parse_fundecl()
        if kind == "try":
            self.next()
            body = self.parse_block()
            self.expect("catch")
            self.expect("(")
            exc_name = self.expect("id").value
            self.expect(")")
            return TryCatch(0, body, exc_name, self.parse_block())
        return self.parse_assign_or_exp()

    def parse_if(self) -> Stm:
        self.next()
        self.expect("(")
        guard = self.parse_exp()
        self.expect(")")
        then_body = self.parse_block()
        if self.peek().kind == "else":
            self.next()
            return IfElse(0, guard, then_body, self.parse_block())
        return If(0, guard, then_body)

    def parse_fundecl(self) -> Stm:
        tok = self.next()
        name = self.expect("id").value
        self.expect("(")
        params = []
        if self.peek().kind != ")":
            params.append(self.expect("id").value)
            while self.peek().kind == ",":
                self.next()
                params.append(self.expect("id").value)
        self.expect(")")
        if len(set(params)) != len(params):
            raise ParseError(
                f"duplicate parameter name in function {name!r}", tok.line, tok.col
            )
        return FunDecl(0, name, tuple(params), self.parse_block())

    def parse_assign_or_exp(self) -> Stm:
        exp = self.parse_exp()
        if self.peek().kind == "=":
            if not isinstance(exp, LexpRef):
                self.fail("left side of '=' must be a variable or member")
            self.next()
            return Assign(0, exp.lexp, self.parse_exp())
        return ExpStm(0, exp)

    # expressions, by descending precedence level

    def parse_exp(self) -> Exp:
        return self.parse_binop(0)

    _LEVELS = ((">", "<", "=="), ("+", "-"), ("*", "/"))

    def parse_binop(self, level) -> Exp:
        if level == len(self._LEVELS):
            return self.parse_unary()
        exp = self.parse_binop(level + 1)
        while self.peek().kind in self._LEVELS[level]:
            op = self.next().kind
            exp = BinOp(0, op, exp, self.parse_binop(level + 1))
        return exp

    def parse_unary(self) -> Exp:
        if self.peek().kind == "-":
            self.next()
            # unary minus is sugar for 0 - E
            return BinOp(0, "-", Con(0, 0), self.parse_unary())
        return self.parse_postfix()

    def parse_postfix(self) -> Exp:
        exp = self.parse_primary()
        while True:
            kind = self.peek().kind
            if kind == ".":
                self.next()
                member = self.expect("id").value
                if self.peek().kind == "(":
                    exp = MethodCall(0, exp, member, self.parse_args())
                else:
                    exp = LexpRef(0, Member(0, exp, member))
            elif kind == "(":
                if not (isinstance(exp, LexpRef) and isinstance(exp.lexp, Var)):
                    self.fail("callee must be a variable or member")
                exp = Call(0, exp.lexp, self.parse_args())
            else:
                return exp

    def parse_args(self) -> tuple[Exp, ...]:
        self.expect("(")
        args = []
        if self.peek().kind != ")":
            args.append(self.parse_exp())
            while self.peek().kind == ",":
                self.next()
                args.append(self.parse_exp())
        self.expect(")")
        return tuple(args)

    def parse_primary(self) -> Exp:
        tok = self.peek()
        if tok.kind == "num":
            self.next()
            return Con(0, tok.value)
        if tok.kind in ("true", "false"):
            self.next()
            return Con(0, tok.kind == "true")
        if tok.kind == "input":
            self.next()
            return Input(0)
        if tok.kind == "global":
            self.next()
            return Global(0)
        if tok.kind == "this":
            self.next()
            return This(0)
        if tok.kind == "new":
            self.next()
            return self.parse_new()
        if tok.kind == "id":
            self.next()
            return LexpRef(0, Var(0, tok.value))
        if tok.kind == "(":
            self.next()
            inner = self.parse_exp()
            self.expect(")")
            return Paren(0, inner)
        self.fail(f"expected an expression, found {self.describe(tok)}")

    def parse_new(self) -> Exp:
        # callee of `new` is a left-expression: ID followed by member chain
        if self.peek().kind == "id":
            tok = self.next()
            exp: Exp = LexpRef(0, Var(0, tok.value))
        elif self.peek().kind == "global":
            self.next()
            exp = Global(0)
        elif self.peek().kind == "this":
            self.next()
            exp = This(0)
        else:
            self.fail("expected a constructor name after 'new'")
        while self.peek().kind == ".":
            self.next()
            member = self.expect("id").value
            exp = LexpRef(0, Member(0, exp, member))
        if not isinstance(exp, LexpRef):
            self.fail("constructor of 'new' must be a variable or member")
        return New(0, exp.lexp, self.parse_args())


def seq_normalize(stms: list[Stm]) -> Stm:
    """Right-associate a statement list into nested Seq; [] is Nil, [s] is s."""
    if not stms:
        return Nil(0)
    result = stms[-1]
    for stm in reversed(stms[:-1]):
        result = Seq(0, stm, result)
    return result


def _renumber(node: Node, counter: Iterator[int]) -> Node:
    updates = {"sid" if isinstance(node, Stm) else "eid": next(counter)}
    for field in dataclasses.fields(node):
        value = getattr(node, field.name)
        if isinstance(value, (Stm, Exp, Lexp)):
            updates[field.name] = _renumber(value, counter)
        elif isinstance(value, tuple) and value and isinstance(value[0], (Stm, Exp, Lexp)):
            updates[field.name] = tuple(_renumber(item, counter) for item in value)
    return dataclasses.replace(node, **updates)


def parse(source: str) -> Program:
    """Parse SDTL source text into an id-annotated Program."""
    root = _Parser(tokenize(source)).parse_program()
    root = _renumber(root, itertools.count(1))
    fun_table = {n.sid: n for n in iter_nodes(root) if isinstance(n, FunDecl)}
    return Program(root, fun_table)


# --- Debug dump ------------------------------------------------------------

_SCALAR_FIELDS = ("value", "op", "name", "member", "params", "exc_name")


def node_to_json(node: Node) -> dict:
    """Id-annotated AST node as {"id", "kind", "children", ...detail fields}."""
    obj = {"id": node_id(node), "kind": type(node).__name__}
    for field in dataclasses.fields(node):
        if field.name in _SCALAR_FIELDS:
            value = getattr(node, field.name)
            if isinstance(value, (Stm, Exp, Lexp)):
                continue  # e.g. Assign.value is a child node, not a literal
            obj[field.name] = list(value) if isinstance(value, tuple) else value
    obj["children"] = [node_to_json(child) for child in child_nodes(node)]
    return obj


def dump_ast(program: Program) -> str:
    return json.dumps(node_to_json(program.root), indent=2)
