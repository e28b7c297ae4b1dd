"""Concrete interpretation: executable SDTL semantics.

Values are Python ints and bools plus object references, curried function
pointers and the unusable void-result marker.  States carry an environment,
a numbered object memory, the current receiver, return/exception slots and
a deterministic I/O model (finite input queue, append-only output log).
"""

from __future__ import annotations

import contextlib
import dataclasses
import sys
from dataclasses import dataclass
from typing import Union

from . import kernel
from .kernel import VOID, VOID_VAL, EvalError, FrozenMap
from .syntax import Program


@dataclass(frozen=True)
class ObjRef:
    ref: int

    def __repr__(self):
        return f"obj({self.ref})"


@dataclass(frozen=True)
class FunPtr:
    sid: int
    curried: tuple = ()

    def __repr__(self):
        if not self.curried:
            return f"fn({self.sid})"
        return f"fn({self.sid}, {list(self.curried)!r})"


CValue = Union[int, bool, ObjRef, FunPtr]  # or VOID_VAL


@dataclass(frozen=True)
class IOState:
    inputs: tuple = ()
    outputs: tuple = ()


@dataclass(frozen=True)
class CState:
    env: FrozenMap
    obj_mem: FrozenMap  # ref -> FrozenMap of members
    this_ref: int
    ret: object
    ex: object
    io: IOState


def initial_state(inputs=()) -> CState:
    return CState(
        env=FrozenMap(),
        obj_mem=FrozenMap({0: FrozenMap()}),
        this_ref=0,
        ret=VOID,
        ex=VOID,
        io=IOState(tuple(inputs), ()),
    )


def _category(value) -> str:
    if value is VOID_VAL:
        return "void"
    if type(value) is bool:
        return "boolean"
    if isinstance(value, int):
        return "integer"
    if isinstance(value, ObjRef):
        return "object"
    if isinstance(value, FunPtr):
        return "function"
    raise AssertionError(f"not a concrete value: {value!r}")


def _check_not_void(value):
    if value is VOID_VAL:
        raise EvalError("used void function result")


class ConcreteInterpretation(kernel.Interpretation):
    """Primitive operations of the executable semantics.

    Run-time errors raise :class:`EvalError`; the kernel tags them with the
    id of the node being evaluated.
    """

    def __init__(self, inputs=()):
        self._inputs = tuple(inputs)
        # allocation-site history, consumed by the soundness harness
        self.site_allocations = {}

    def initial_state(self) -> CState:
        return initial_state(self._inputs)

    def esc(self, state) -> bool:
        return state.ret is not VOID or state.ex is not VOID

    def cond(self, value, then_t, else_t):
        if value is True:
            return then_t
        if value is False:
            return else_t
        _check_not_void(value)
        raise EvalError(f"condition not boolean (got {_category(value)})")

    def asg(self, name, value):
        return kernel.singleton(
            kernel.focus_update("env", lambda env: env.set(name, value))
        )

    def val(self, name):
        def read(state):
            try:
                return state.env[name]
            except KeyError:
                raise EvalError(f"undefined variable {name!r}") from None

        return read

    def conval(self, constant):
        return constant

    def getinput(self):
        def pop(io):
            if not io.inputs:
                raise EvalError("input exhausted")
            return IOState(io.inputs[1:], io.outputs), io.inputs[0]

        step = kernel.focus_update_returning("io", pop)

        def run(f, state):
            return {step(state)}

        return run

    def dooutput(self, value):
        _check_not_void(value)
        if type(value) is bool:
            emitted = int(value)
        elif isinstance(value, int):
            emitted = value
        else:
            raise EvalError(f"unprintable value ({_category(value)})")
        return kernel.singleton(
            kernel.focus_update(
                "io", lambda io: IOState(io.inputs, io.outputs + (emitted,))
            )
        )

    def bin(self, op, left, right):
        _check_not_void(left)
        _check_not_void(right)
        if op == "==":
            if _category(left) != _category(right):
                raise EvalError(
                    f"cannot compare {_category(left)} and {_category(right)}"
                )
            return left == right
        if type(left) is bool or not isinstance(left, int) or \
                type(right) is bool or not isinstance(right, int):
            raise EvalError(
                f"operator {op!r} needs integers "
                f"(got {_category(left)} and {_category(right)})"
            )
        if op == "+":
            return left + right
        if op == "-":
            return left - right
        if op == "*":
            return left * right
        if op == "/":
            if right == 0:
                raise EvalError("division by zero")
            # truncate toward zero
            quotient = abs(left) // abs(right)
            return -quotient if (left < 0) != (right < 0) else quotient
        if op == ">":
            return left > right
        if op == "<":
            return left < right
        raise AssertionError(f"unknown operator {op!r}")

    def ret(self, value):
        return kernel.singleton(kernel.focus_update("ret", lambda _: value))

    def fundecl(self, name, sid):
        return kernel.singleton(
            kernel.focus_update("env", lambda env: env.set(name, FunPtr(sid, ())))
        )

    def apply(self, fun_value, args, this_value, eid):
        def run(f, state):
            _check_not_void(fun_value)
            if not isinstance(fun_value, FunPtr):
                raise EvalError(
                    f"calling a non-function ({_category(fun_value)})"
                )
            combined = fun_value.curried + tuple(args)
            arity = f.program.arity(fun_value.sid)
            if len(combined) == arity:
                return kernel.call(fun_value.sid, combined, this_value)(f, state)
            if len(combined) < arity:
                return {(state, FunPtr(fun_value.sid, combined))}
            raise EvalError(
                f"too many arguments ({len(combined)} for arity {arity})"
            )

        return run

    def _members(self, state, ref):
        _check_not_void(ref)
        if not isinstance(ref, ObjRef):
            raise EvalError(f"member access on a non-object ({_category(ref)})")
        return state.obj_mem[ref.ref]

    def get(self, ref, member):
        def read(state):
            members = self._members(state, ref)
            try:
                return members[member]
            except KeyError:
                raise EvalError(f"undefined member {member!r}") from None

        return read

    def set(self, ref, member, value):
        def transform(state):
            members = self._members(state, ref)
            obj_mem = state.obj_mem.set(ref.ref, members.set(member, value))
            return {dataclasses.replace(state, obj_mem=obj_mem)}

        return transform

    def getglobal(self, state):
        return ObjRef(0)

    def getthis(self, state):
        return ObjRef(state.this_ref)

    def newobj(self, eid):
        def alloc(obj_mem):
            ref = len(obj_mem)
            return obj_mem.set(ref, FrozenMap()), ObjRef(ref)

        step = kernel.focus_update_returning("obj_mem", alloc)

        def run(f, state):
            self.site_allocations[eid] = self.site_allocations.get(eid, 0) + 1
            return {step(state)}

        return run

    def throw(self, value):
        return kernel.singleton(kernel.focus_update("ex", lambda _: value))

    def catch(self, exc_name, handler_t):
        def run(f, state):
            if state.ex is VOID:
                return {(state, kernel.UNIT)}
            return handler_t(f, self.exs(exc_name)(state))

        return run

    def exs(self, exc_name):
        return kernel.focus_update(
            ("env", "ex"), lambda env, ex: (env.set(exc_name, ex), VOID)
        )

    def enter(self, caller, sid, args, this_value, params):
        assert isinstance(this_value, ObjRef), this_value
        return CState(
            env=FrozenMap(dict(zip(params, args))),
            obj_mem=caller.obj_mem,
            this_ref=this_value.ref,
            ret=VOID,
            ex=VOID,
            io=caller.io,
        )

    def leave(self, caller, callee):
        after = dataclasses.replace(
            caller, obj_mem=callee.obj_mem, io=callee.io, ex=callee.ex, ret=VOID
        )
        return after, callee.ret


@dataclass(frozen=True)
class RunResult:
    final_states: tuple
    outputs: tuple

    @property
    def final_state(self) -> CState:
        return self.final_states[0]


@contextlib.contextmanager
def recursion_headroom(limit=10_000):
    """Interpreted recursion and loops consume host stack; give them room
    and surface exhaustion as a run-time error."""
    previous = sys.getrecursionlimit()
    sys.setrecursionlimit(max(previous, limit))
    try:
        yield
    except RecursionError:
        raise EvalError("recursion limit exceeded (non-terminating program?)") from None
    finally:
        sys.setrecursionlimit(previous)


def run_program(program: Program, inputs=(), trace=None, interp=None) -> RunResult:
    """Run a program on a finite input queue.

    The concrete semantics is deterministic: there is exactly one final
    state, whose output log is returned alongside it.
    """
    if interp is None:
        interp = ConcreteInterpretation(inputs)
    f = kernel.solve_function_table(program, interp, trace)
    with recursion_headroom():
        outcome = kernel.stm_meaning(program.root)(f, interp.initial_state())
    finals = tuple(state for state, _ in outcome)
    assert len(finals) == 1, "internal error: concrete run must be deterministic"
    return RunResult(finals, finals[0].io.outputs)


# --- Rendering ---------------------------------------------------------------


def value_to_json(value):
    if value is VOID_VAL:
        return "void"
    if type(value) is bool or isinstance(value, int):
        return value
    if isinstance(value, ObjRef):
        return {"obj": value.ref}
    if isinstance(value, FunPtr):
        return {"fun": [value.sid, [value_to_json(v) for v in value.curried]]}
    raise AssertionError(f"not a concrete value: {value!r}")


def _slot_to_json(slot):
    return "void" if slot is VOID else value_to_json(slot)


def state_to_json(state: CState) -> dict:
    return {
        "env": {name: value_to_json(v) for name, v in sorted(state.env.items())},
        "objmem": {
            str(ref): {name: value_to_json(v) for name, v in sorted(members.items())}
            for ref, members in sorted(state.obj_mem.items())
        },
        "this": state.this_ref,
        "ret": _slot_to_json(state.ret),
        "ex": _slot_to_json(state.ex),
        "outputs": list(state.io.outputs),
    }


def trace_line(node, state: CState) -> str:
    env = ", ".join(f"{name}: {value!r}" for name, value in sorted(state.env.items()))
    return (
        f"sid={node.sid} env={{{env}}} "
        f"ex={_slot_to_json(state.ex)} ret={_slot_to_json(state.ret)}"
    )
