"""Abstract interpretation: type analysis over finite domains.

Constants are approximated by their types (Num/Bool), objects by their
allocation site, and curried function pointers by the call-site expression
that produced them.  Branches are explored non-deterministically, and loops
and (possibly recursive, side-effecting) calls are resolved by terminating
fixed-point iteration: summaries accumulate monotonically over a finite
state space.  Impossible operations never abort the analysis; they kill the
offending branch and log a diagnostic.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from typing import Union

from . import kernel
from .kernel import VOID, VOID_VAL, DeadBranch, FrozenMap
from .syntax import Program


class _Atom:
    __slots__ = ("_name",)

    def __init__(self, name):
        self._name = name

    def __repr__(self):
        return self._name


NUM = _Atom("Num")
BOOL = _Atom("Bool")


@dataclass(frozen=True)
class AObjRef:
    site: int  # 0 (global object) or the eid of the `new` expression

    def __repr__(self):
        return f"obj@{self.site}"


@dataclass(frozen=True)
class AFunPtr:
    sid: int
    count: int = 0  # number of curried arguments
    anchor: int = 0  # eid of the partial-application site, 0 if none

    def __repr__(self):
        return f"fn({self.sid},{self.count},{self.anchor})"


AVal = Union[_Atom, AObjRef, AFunPtr]  # or VOID_VAL


@dataclass(frozen=True)
class AState:
    env: FrozenMap
    obj_mem: FrozenMap  # site -> FrozenMap of members
    this_site: int
    curried: FrozenMap  # (sid, count, anchor) -> frozenset of value tuples
    ret: object
    ex: object


def initial_state() -> AState:
    return AState(
        env=FrozenMap(),
        obj_mem=FrozenMap({0: FrozenMap()}),
        this_site=0,
        curried=FrozenMap(),
        ret=VOID,
        ex=VOID,
    )


@dataclass(frozen=True, order=True)
class Diagnostic:
    node: int
    message: str


class AnalysisLimitError(Exception):
    """A fixed-point engine exceeded its iteration cap (should be
    unreachable: the abstract state space is finite)."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


def _category(value) -> str:
    if value is VOID_VAL:
        return "void"
    if value is NUM:
        return "number"
    if value is BOOL:
        return "boolean"
    if isinstance(value, AObjRef):
        return "object"
    if isinstance(value, AFunPtr):
        return "function"
    raise AssertionError(f"not an abstract value: {value!r}")


class AbstractInterpretation(kernel.Interpretation):
    """Primitive operations of the type analysis.

    A single analysis run owns its summary tables and is single-threaded;
    distinct runs share nothing.
    """

    def __init__(self, max_iterations=100_000):
        self.max_iterations = max_iterations
        self.diagnostics = set()
        # (sid, entry state) -> frozenset of callee exit states
        self._summaries = {}
        self._active = set()
        self.stats = {"max_call_iterations": 0, "max_loop_iterations": 0}
        # abstract-cell reuse history, consumed by the soundness harness
        self.reused_sites = set()
        self.reset_curried_keys = set()

    # diagnostics

    def _diag(self, message):
        self.diagnostics.add(Diagnostic(self.current_node or 0, message))

    def _dead(self, message):
        self._diag(message)
        raise DeadBranch(message)

    # primitives

    def initial_state(self) -> AState:
        return initial_state()

    def esc(self, state) -> bool:
        return state.ret is not VOID or state.ex is not VOID

    def cond(self, value, then_t, else_t):
        if value is not BOOL:
            self._diag(
                f"possible type error: condition is {_category(value)}, not boolean"
            )

        def run(f, s):
            out = set()
            for branch in (then_t, else_t):
                try:
                    out |= branch(f, s)
                except DeadBranch:
                    pass
            return out

        return run

    def asg(self, name, value):
        return kernel.singleton(
            kernel.focus_update("env", lambda env: env.set(name, value))
        )

    def val(self, name):
        def read(state):
            try:
                return state.env[name]
            except KeyError:
                self._dead(f"possibly undefined variable {name!r}")

        return read

    def conval(self, constant):
        return BOOL if type(constant) is bool else NUM

    def getinput(self):
        def run(f, state):
            return {(state, NUM)}

        return run

    def dooutput(self, value):
        return kernel.singleton(lambda state: state)

    def bin(self, op, left, right):
        for value in (left, right):
            if value is VOID_VAL:
                self._dead("possible use of void function result")
        if op == "==":
            if _category(left) != _category(right):
                self._dead(
                    f"possible type error: comparing {_category(left)} "
                    f"with {_category(right)}"
                )
            return BOOL
        if left is not NUM or right is not NUM:
            self._dead(
                f"possible type error: {op!r} on {_category(left)} "
                f"and {_category(right)}"
            )
        return NUM if op in ("+", "-", "*", "/") else BOOL

    def ret(self, value):
        return kernel.singleton(kernel.focus_update("ret", lambda _: value))

    def fundecl(self, name, sid):
        return kernel.singleton(
            kernel.focus_update("env", lambda env: env.set(name, AFunPtr(sid, 0, 0)))
        )

    def apply(self, fun_value, args, this_value, eid):
        def run(f, state):
            if fun_value is VOID_VAL:
                self._dead("possible use of void function result")
            if not isinstance(fun_value, AFunPtr):
                self._dead(
                    f"possible type error: calling a {_category(fun_value)}"
                )
            sid, count, anchor = fun_value.sid, fun_value.count, fun_value.anchor
            arity = f.program.arity(sid)
            if count == 0:
                prefixes = ((),)
            else:
                prefixes = state.curried.get((sid, count, anchor), frozenset())
            total = count + len(args)
            if total == arity:
                out = set()
                for prefix in prefixes:
                    out |= kernel.call(sid, prefix + tuple(args), this_value)(f, state)
                return out
            if total < arity:
                if total == 0:
                    # zero arguments were supplied: the pointer is unchanged
                    # (uncurried pointers stay unanchored)
                    return {(state, fun_value)}
                key = (sid, total, eid)
                lists = frozenset(prefix + tuple(args) for prefix in prefixes)
                old = state.curried.get(key)
                if old is not None and old != lists:
                    self.reset_curried_keys.add(key)
                new_state = dataclasses.replace(
                    state, curried=state.curried.set(key, lists)
                )
                return {(new_state, AFunPtr(sid, total, eid))}
            self._dead(
                f"possible type error: too many arguments "
                f"({total} for arity {arity})"
            )

        return run

    def _members(self, state, ref):
        if ref is VOID_VAL:
            self._dead("possible use of void function result")
        if not isinstance(ref, AObjRef):
            self._dead(
                f"possible type error: member access on a {_category(ref)}"
            )
        return state.obj_mem.get(ref.site)

    def get(self, ref, member):
        def read(state):
            members = self._members(state, ref)
            if members is None or member not in members:
                self._dead(f"possibly undefined member {member!r}")
            return members[member]

        return read

    def set(self, ref, member, value):
        def transform(state):
            members = self._members(state, ref)
            if members is None:
                self._dead("possible write to an unallocated object")
            obj_mem = state.obj_mem.set(ref.site, members.set(member, value))
            return {dataclasses.replace(state, obj_mem=obj_mem)}

        return transform

    def getglobal(self, state):
        return AObjRef(0)

    def getthis(self, state):
        return AObjRef(state.this_site)

    def newobj(self, eid):
        def run(f, state):
            # allocation-site abstraction: the site's previous abstract
            # object, if any, is reset to empty
            if eid in state.obj_mem:
                self.reused_sites.add(eid)
            obj_mem = state.obj_mem.set(eid, FrozenMap())
            return {(dataclasses.replace(state, obj_mem=obj_mem), AObjRef(eid))}

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
        assert isinstance(this_value, AObjRef), this_value
        return AState(
            env=FrozenMap(dict(zip(params, args))),
            obj_mem=caller.obj_mem,
            this_site=this_value.site,
            curried=caller.curried,
            ret=VOID,
            ex=VOID,
        )

    def leave(self, caller, callee):
        after = dataclasses.replace(
            caller,
            obj_mem=callee.obj_mem,
            curried=callee.curried,
            ex=callee.ex,
            ret=VOID,
        )
        return after, callee.ret

    # fixed-point engines

    def run_call(self, f, sid, entry):
        """Call summaries by fixed-point iteration.

        Summaries are keyed by (function, entry state).  Starting from the
        null hypothesis (no exit states), the body is re-evaluated with the
        current summaries answering nested and recursive calls, and its exit
        states accumulate into the key's summary until nothing changes.
        """
        key = (sid, entry)
        if key in self._active:
            return set(self._summaries.get(key, frozenset()))
        _, transform = f.lookup(sid)
        self._active.add(key)
        try:
            iterations = 0
            while True:
                iterations += 1
                if iterations > self.max_iterations:
                    raise AnalysisLimitError(
                        f"call summary for function {sid} did not stabilize "
                        f"within {self.max_iterations} iterations",
                        key,
                    )
                previous = self._summaries.get(key, frozenset())
                exits = frozenset(transform(entry))
                # summaries never shrink between iterations
                assert previous <= exits, "call summary shrank"
                new = previous | exits
                if new == previous:
                    break
                self._summaries[key] = new
            self.stats["max_call_iterations"] = max(
                self.stats["max_call_iterations"], iterations
            )
            return set(self._summaries.get(key, frozenset()))
        finally:
            self._active.discard(key)

    def fix_loop(self, unfold):
        """Loop meaning by Kleene iteration from the empty transformer.

        The approximation maps every state the loop has been entered from to
        its current set of (state, payload) exits; re-evaluation continues
        until the whole table stabilizes, so the result covers every number
        of unfoldings including zero.
        """

        def engine(f, start):
            cache = {}
            queried = {start}

            def approximation(_f, state):
                queried.add(state)
                return set(cache.get(state, frozenset()))

            body = unfold(approximation)
            iterations = 0
            while True:
                iterations += 1
                if iterations > self.max_iterations:
                    raise AnalysisLimitError(
                        f"loop did not stabilize within "
                        f"{self.max_iterations} iterations"
                    )
                changed = False
                for state in list(queried):
                    previous = cache.get(state, frozenset())
                    try:
                        out = frozenset(body(f, state))
                    except DeadBranch:
                        out = frozenset()
                    # the unfolding is monotone: exits never shrink
                    assert previous <= out, "loop exits shrank"
                    new = previous | out
                    if new != previous:
                        cache[state] = new
                        changed = True
                if not changed:
                    break
            self.stats["max_loop_iterations"] = max(
                self.stats["max_loop_iterations"], iterations
            )
            return set(cache.get(start, frozenset()))

        return engine


@dataclass(frozen=True)
class AnalysisResult:
    final_states: frozenset
    diagnostics: tuple
    stats: dict = field(compare=False)

    def sorted_states(self) -> list:
        return sorted(self.final_states, key=lambda s: json.dumps(state_to_json(s)))


def analyze_program(program: Program, max_iterations=100_000, trace=None) -> AnalysisResult:
    """Analyze a program, returning all final abstract states plus the
    diagnostic log."""
    interp = AbstractInterpretation(max_iterations=max_iterations)
    f = kernel.solve_function_table(program, interp, trace)
    try:
        outcome = kernel.stm_meaning(program.root)(f, interp.initial_state())
    except DeadBranch:
        outcome = set()
    stats = dict(interp.stats)
    stats["reused_allocation_sites"] = frozenset(interp.reused_sites)
    stats["reset_curried_keys"] = frozenset(interp.reset_curried_keys)
    return AnalysisResult(
        final_states=frozenset(state for state, _ in outcome),
        diagnostics=tuple(sorted(interp.diagnostics)),
        stats=stats,
    )


# --- Rendering ---------------------------------------------------------------


def aval_to_json(value):
    if value is VOID_VAL:
        return "void"
    if value is NUM:
        return "Num"
    if value is BOOL:
        return "Bool"
    if isinstance(value, AObjRef):
        return {"obj": value.site}
    if isinstance(value, AFunPtr):
        return {"fun": [value.sid, value.count, value.anchor]}
    raise AssertionError(f"not an abstract value: {value!r}")


def _slot_to_json(slot):
    return "void" if slot is VOID else aval_to_json(slot)


def state_to_json(state: AState) -> dict:
    curried = []
    for (sid, count, anchor), lists in sorted(state.curried.items()):
        rendered = sorted(
            ([aval_to_json(v) for v in values] for values in lists),
            key=json.dumps,
        )
        curried.append({"key": [sid, count, anchor], "lists": rendered})
    return {
        "env": {name: aval_to_json(v) for name, v in sorted(state.env.items())},
        "objmem": {
            str(site): {name: aval_to_json(v) for name, v in sorted(members.items())}
            for site, members in sorted(state.obj_mem.items())
        },
        "this": state.this_site,
        "curried": curried,
        "ret": _slot_to_json(state.ret),
        "ex": _slot_to_json(state.ex),
    }


def result_to_json(result: AnalysisResult) -> dict:
    return {
        "states": [state_to_json(s) for s in result.sorted_states()],
        "diagnostics": [
            {"node": d.node, "message": d.message} for d in result.diagnostics
        ],
    }
