"""Parametric semantics kernel.

The meaning of a program fragment is a *transformer*: a function taking the
run's function table and a state, and returning a set of (successor state,
payload) pairs.  Payloads are values for expressions, ``UNIT`` for
statements, and ``NULL`` for states that escape (pending return or
exception).  The semantic equations here are written once against the
:class:`Interpretation` contract; the concrete interpreter and the abstract
type analysis plug in their own state/value carriers and primitives without
touching these equations.
"""

from __future__ import annotations

import dataclasses
from collections.abc import Mapping
from typing import Any, Callable, Set, Tuple

from . import syntax

Transformer = Callable[["FunctionTable", Any], Set[Tuple[Any, Any]]]


class _Marker:
    __slots__ = ("_name",)

    def __init__(self, name):
        self._name = name

    def __repr__(self):
        return self._name


UNIT = _Marker("Unit")  # payload of statement meanings
NULL = _Marker("Null")  # payload paired with escaping successor states
VOID = _Marker("Void")  # empty return/exception slot
VOID_VAL = _Marker("VoidVal")  # unusable result of a value-less function call


class EvalError(Exception):
    """Run-time error in an interpreted program, tagged with a node id."""

    def __init__(self, message, node_id=None):
        super().__init__(message)
        self.message = message
        self.node_id = node_id

    def __str__(self):
        if self.node_id is None:
            return self.message
        return f"{self.message} (node {self.node_id})"


class DeadBranch(Exception):
    """Raised by abstract primitives when a branch cannot proceed.

    The surrounding bind discards the branch; a diagnostic has already been
    logged by the interpretation.
    """


class FrozenMap(Mapping):
    """Immutable hashable mapping; ``set`` returns an updated copy."""

    __slots__ = ("_data", "_hash")

    def __init__(self, data=()):
        self._data = dict(data)
        self._hash = None

    def __getitem__(self, key):
        return self._data[key]

    def __iter__(self):
        return iter(self._data)

    def __len__(self):
        return len(self._data)

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(frozenset(self._data.items()))
        return self._hash

    def __eq__(self, other):
        if isinstance(other, FrozenMap):
            return self._data == other._data
        if isinstance(other, Mapping):
            return self._data == dict(other)
        return NotImplemented

    def set(self, key, value) -> "FrozenMap":
        data = dict(self._data)
        data[key] = value
        return FrozenMap(data)

    def __repr__(self):
        items = sorted(self._data.items(), key=lambda kv: repr(kv[0]))
        return "{" + ", ".join(f"{k!r}: {v!r}" for k, v in items) + "}"


# --- Record focus utilities --------------------------------------------------
# States are records (frozen dataclasses); operations written against a few
# named fields are reusable when the state grows new dimensions.


def _as_fields(field_selection) -> tuple:
    if isinstance(field_selection, str):
        return (field_selection,)
    return tuple(field_selection)


def focus_update(field_selection, update):
    """Project the selected fields, apply `update`, inject the result back.

    With one selected field `update` maps a bare value to a bare value; with
    several it maps the values positionally to a tuple of replacements.
    """
    fields = _as_fields(field_selection)

    def apply(record):
        out = update(*(getattr(record, name) for name in fields))
        if len(fields) == 1:
            out = (out,)
        return dataclasses.replace(record, **dict(zip(fields, out)))

    return apply


def focus_update_returning(field_selection, update):
    """Like :func:`focus_update`, but `update` also returns an auxiliary
    value: it maps the selected fields to (replacements, auxiliary)."""
    fields = _as_fields(field_selection)

    def apply(record):
        out, aux = update(*(getattr(record, name) for name in fields))
        if len(fields) == 1:
            out = (out,)
        return dataclasses.replace(record, **dict(zip(fields, out))), aux

    return apply


def focus_read(field_selection, read):
    """Read-only projection of the selected fields through `read`."""
    fields = _as_fields(field_selection)

    def apply(record):
        return read(*(getattr(record, name) for name in fields))

    return apply


def singleton(fn):
    """Wrap a function's result in a one-element set."""

    def apply(x):
        return {fn(x)}

    return apply


# --- Transformer combinators -------------------------------------------------


def pure(value) -> Transformer:
    """Identity state transformer yielding `value` (the monadic return)."""

    def run(f, s):
        return {(s, value)}

    return run


def lift_value(read) -> Transformer:
    """Lift a value reader (State -> Value) to a transformer."""

    def run(f, s):
        try:
            return {(s, read(s))}
        except DeadBranch:
            return set()

    return run


def lift_states(transform) -> Transformer:
    """Lift a state transformation (State -> set of States) to a transformer
    whose payload is UNIT."""

    def run(f, s):
        try:
            return {(s1, UNIT) for s1 in transform(s)}
        except DeadBranch:
            return set()

    return run


def bind(t: Transformer, k) -> Transformer:
    """Sequence `t` with `k`, short-circuiting escaping states.

    Each escaping successor of `t` is emitted as (state, NULL); every other
    successor flows into ``k(payload)``.
    """

    def run(f, s):
        out = set()
        for s1, a in t(f, s):
            if f.interp.esc(s1):
                out.add((s1, NULL))
            else:
                try:
                    out |= k(a)(f, s1)
                except DeadBranch:
                    pass
        return out

    return run


def bind_noesc(t: Transformer, k) -> Transformer:
    """Sequence without the escape filter: `k` sees every successor state,
    escaping or not, and receives the raw payload (possibly NULL)."""

    def run(f, s):
        out = set()
        for s1, a in t(f, s):
            try:
                out |= k(a)(f, s1)
            except DeadBranch:
                pass
        return out

    return run


# --- The interpretation contract ----------------------------------------------


class Interpretation:
    """Parameter set of the semantics: state and value carriers plus the
    primitive operations the equations below defer to.

    State equality must be decidable; distinct states are never compared for
    order.  Methods documented as ``State -> ...`` return functions of the
    state so the equations can lift them point-wise.
    """

    # node under evaluation, maintained by the kernel (single-threaded per run)
    current_node = None

    def initial_state(self):
        raise NotImplementedError

    def esc(self, state) -> bool:
        raise NotImplementedError

    def cond(self, value, then_t: Transformer, else_t: Transformer) -> Transformer:
        raise NotImplementedError

    def asg(self, name, value):  # State -> set of States
        raise NotImplementedError

    def val(self, name):  # State -> Value
        raise NotImplementedError

    def conval(self, constant):  # -> Value
        raise NotImplementedError

    def getinput(self) -> Transformer:
        raise NotImplementedError

    def dooutput(self, value):  # State -> set of States
        raise NotImplementedError

    def bin(self, op, left, right):  # -> Value
        raise NotImplementedError

    def ret(self, value):  # State -> set of States
        raise NotImplementedError

    def fundecl(self, name, sid):  # State -> set of States
        raise NotImplementedError

    def apply(self, fun_value, args, this_value, eid) -> Transformer:
        raise NotImplementedError

    def get(self, ref, member):  # State -> Value
        raise NotImplementedError

    def set(self, ref, member, value):  # State -> set of States
        raise NotImplementedError

    def getglobal(self, state):  # -> Value
        raise NotImplementedError

    def getthis(self, state):  # -> Value
        raise NotImplementedError

    def newobj(self, eid) -> Transformer:
        raise NotImplementedError

    def throw(self, value):  # State -> set of States
        raise NotImplementedError

    def catch(self, exc_name, handler_t: Transformer) -> Transformer:
        raise NotImplementedError

    def exs(self, exc_name):  # State -> State
        raise NotImplementedError

    def enter(self, caller, sid, args, this_value, params):  # -> State
        raise NotImplementedError

    def leave(self, caller, callee):  # -> (State, return slot)
        raise NotImplementedError

    # call-time hooks with default realizations

    def run_call(self, f: "FunctionTable", sid, entry):
        """Exit states of function `sid`'s body started from `entry`.

        Default: run the body directly (recursion in the interpreted program
        becomes recursion in the host).  The abstract interpretation replaces
        this with its summary-table fixed-point engine.
        """
        _, transform = f.lookup(sid)
        return transform(entry)

    def fix_loop(self, unfold) -> Transformer:
        """Loop meaning as the fixed point of the unfolding function.

        Default: lazy self-reference.  The abstract interpretation replaces
        this with a terminating iterate-to-stability engine.
        """

        def loop(f, s):
            return unfold(loop)(f, s)

        return loop


class FunctionTable:
    """The run's function space: sid -> (body statement, state transformation).

    One immutable handle per run; it carries the interpretation so
    transformers can reach the primitives, plus an optional trace callback
    ``trace(node, outcome)`` invoked per statement evaluation.
    """

    def __init__(self, program: syntax.Program, interp: Interpretation, trace=None):
        self.program = program
        self.interp = interp
        self.trace = trace
        self._entries = {}

    def lookup(self, sid):
        entry = self._entries.get(sid)
        if entry is None:
            body = self.program.stm(sid)
            meaning = stm_meaning(body)

            def transform(state, _meaning=meaning):
                return {s1 for s1, _ in _meaning(self, state)}

            entry = self._entries[sid] = (body, transform)
        return entry

    def sids(self) -> frozenset:
        return frozenset(self.program.fun_table)

    def __contains__(self, sid):
        return sid in self.program.fun_table


def solve_function_table(program, interp, trace=None) -> FunctionTable:
    """The least fixed point of the function space.

    Realized lazily: each entry's transformation re-invokes the interpreter
    on the body, so recursion in the interpreted program becomes recursion in
    the host (or, abstractly, a query against the summary engine).
    """
    return FunctionTable(program, interp, trace)


# --- Auxiliary call machinery --------------------------------------------------


def call(sid, args, this_value) -> Transformer:
    """Run function `sid` on `args` with receiver `this_value`.

    Builds the callee entry state, runs the body via the interpretation's
    call hook, and maps every exit state back through ``leave``.  A Void
    return slot becomes the unusable ``VOID_VAL`` payload.
    """

    def run(f, s):
        interp = f.interp
        entry = interp.enter(s, sid, args, this_value, f.program.param(sid))
        out = set()
        for exit_state in interp.run_call(f, sid, entry):
            after, ret = interp.leave(s, exit_state)
            out.add((after, VOID_VAL if ret is VOID else ret))
        return out

    return run


def eval_params(exps) -> Transformer:
    """Evaluate expressions left to right, collecting their values."""

    def step(index, collected):
        if index == len(exps):
            return pure(collected)
        exp_t = exp_meaning(exps[index])
        return bind(exp_t, lambda v: step(index + 1, collected + (v,)))

    return step(0, ())


# --- Semantic equations ---------------------------------------------------------


def _prim_v(read) -> Transformer:
    """Value-yielding primitive: read(interp, state) -> value."""

    def run(f, s):
        try:
            return {(s, read(f.interp, s))}
        except DeadBranch:
            return set()

    return run


def _prim_s(transform) -> Transformer:
    """State-transforming primitive: transform(interp, state) -> states."""

    def run(f, s):
        try:
            return {(s1, UNIT) for s1 in transform(f.interp, s)}
        except DeadBranch:
            return set()

    return run


def _cond(value, then_t, else_t) -> Transformer:
    def run(f, s):
        return f.interp.cond(value, then_t, else_t)(f, s)

    return run


def _apply(fun_value, args, this_value, eid) -> Transformer:
    def run(f, s):
        return f.interp.apply(fun_value, args, this_value, eid)(f, s)

    return run


def _with_node(node, run) -> Transformer:
    """Maintain the current-node context, tag run-time errors with the node
    id, and report statement outcomes to the trace hook."""
    nid = syntax.node_id(node)
    trace_stm = isinstance(node, syntax.Stm)

    def wrapped(f, s):
        interp = f.interp
        previous = interp.current_node
        interp.current_node = nid
        try:
            out = run(f, s)
        except EvalError as err:
            if err.node_id is None:
                err.node_id = nid
            raise
        finally:
            interp.current_node = previous
        if trace_stm and f.trace is not None:
            f.trace(node, out)
        return out

    return wrapped


def stm_meaning(node: syntax.Stm) -> Transformer:
    """Meaning of a statement (payloads are UNIT, or NULL once escaped)."""
    match node:
        case syntax.Nil():
            run = pure(UNIT)
        case syntax.Seq(first=first, second=second):
            second_t = stm_meaning(second)
            run = bind(stm_meaning(first), lambda _: second_t)
        case syntax.ExpStm(exp=exp):
            run = bind(exp_meaning(exp), lambda _: pure(UNIT))
        case syntax.Output(exp=exp):
            run = bind(
                exp_meaning(exp),
                lambda v: _prim_s(lambda i, s: i.dooutput(v)(s)),
            )
        case syntax.Assign(target=syntax.Var(name=name), value=value):
            run = bind(
                exp_meaning(value),
                lambda v: _prim_s(lambda i, s: i.asg(name, v)(s)),
            )
        case syntax.Assign(target=syntax.Member(obj=obj, member=member), value=value):
            value_t = exp_meaning(value)
            run = bind(
                exp_meaning(obj),
                lambda r: bind(
                    value_t,
                    lambda v: _prim_s(lambda i, s: i.set(r, member, v)(s)),
                ),
            )
        case syntax.If(guard=guard, then_body=then_body):
            then_t = stm_meaning(then_body)
            run = bind(exp_meaning(guard), lambda v: _cond(v, then_t, pure(UNIT)))
        case syntax.IfElse(guard=guard, then_body=then_body, else_body=else_body):
            then_t, else_t = stm_meaning(then_body), stm_meaning(else_body)
            run = bind(exp_meaning(guard), lambda v: _cond(v, then_t, else_t))
        case syntax.While(guard=guard, body=body):
            guard_t, body_t = exp_meaning(guard), stm_meaning(body)

            def unfold(x, _g=guard_t, _b=body_t):
                loop_body = bind(_b, lambda _: x)
                return bind(_g, lambda v: _cond(v, loop_body, pure(UNIT)))

            def run(f, s, _unfold=unfold):
                return f.interp.fix_loop(_unfold)(f, s)

        case syntax.FunDecl(name=name):
            run = _prim_s(lambda i, s, _sid=node.sid: i.fundecl(name, _sid)(s))
        case syntax.Return(exp=exp):
            run = bind(
                exp_meaning(exp),
                lambda v: _prim_s(lambda i, s: i.ret(v)(s)),
            )
        case syntax.TryCatch(body=body, exc_name=exc_name, handler=handler):
            handler_t = stm_meaning(handler)

            def catch_k(_payload, _name=exc_name, _h=handler_t):
                def run_catch(f, s):
                    return f.interp.catch(_name, _h)(f, s)

                return run_catch

            run = bind_noesc(stm_meaning(body), catch_k)
        case syntax.Throw(exp=exp):
            run = bind(
                exp_meaning(exp),
                lambda v: _prim_s(lambda i, s: i.throw(v)(s)),
            )
        case _:
            raise TypeError(f"not a statement node: {node!r}")
    return _with_node(node, run)


def exp_meaning(node: syntax.Exp) -> Transformer:
    """Meaning of an expression (payloads are values)."""
    match node:
        case syntax.Con(value=value):
            def run(f, s, _v=value):
                return {(s, f.interp.conval(_v))}

        case syntax.LexpRef(lexp=lexp):
            run = lexp_meaning(lexp)
        case syntax.Input():
            def run(f, s):
                return f.interp.getinput()(f, s)

        case syntax.Call(callee=callee, args=args):
            params_t = eval_params(args)
            eid = node.eid
            run = bind(
                lexp_meaning(callee),
                lambda n: bind(
                    params_t,
                    lambda p: bind(
                        _prim_v(lambda i, s: i.getthis(s)),
                        lambda t: _apply(n, p, t, eid),
                    ),
                ),
            )
        case syntax.MethodCall(receiver=receiver, member=member, args=args):
            params_t = eval_params(args)
            eid = node.eid
            run = bind(
                exp_meaning(receiver),
                lambda t: bind(
                    _prim_v(lambda i, s: i.get(t, member)(s)),
                    lambda n: bind(params_t, lambda p: _apply(n, p, t, eid)),
                ),
            )
        case syntax.BinOp(op=op, left=left, right=right):
            right_t = exp_meaning(right)
            run = bind(
                exp_meaning(left),
                lambda c1: bind(
                    right_t,
                    lambda c2: _prim_v(lambda i, s: i.bin(op, c1, c2)),
                ),
            )
        case syntax.Paren(inner=inner):
            run = exp_meaning(inner)
        case syntax.Global():
            run = _prim_v(lambda i, s: i.getglobal(s))
        case syntax.This():
            run = _prim_v(lambda i, s: i.getthis(s))
        case syntax.New(callee=callee, args=args):
            params_t = eval_params(args)
            eid = node.eid

            def new_obj_t(f, s, _eid=eid):
                return f.interp.newobj(_eid)(f, s)

            run = bind(
                lexp_meaning(callee),
                lambda n: bind(
                    params_t,
                    lambda p: bind(
                        new_obj_t,
                        lambda m: bind(_apply(n, p, m, eid), lambda _: pure(m)),
                    ),
                ),
            )
        case _:
            raise TypeError(f"not an expression node: {node!r}")
    return _with_node(node, run)


def lexp_meaning(node: syntax.Lexp) -> Transformer:
    """Meaning of a left-expression (payloads are values)."""
    match node:
        case syntax.Var(name=name):
            run = _prim_v(lambda i, s: i.val(name)(s))
        case syntax.Member(obj=obj, member=member):
            run = bind(
                exp_meaning(obj),
                lambda v: _prim_v(lambda i, s: i.get(v, member)(s)),
            )
        case _:
            raise TypeError(f"not a left-expression node: {node!r}")
    return _with_node(node, run)
