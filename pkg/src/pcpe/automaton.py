"""
Security automata: a validated policy compiled into guard and update
tables, and the stepwise simulation the reference monitor runs.
"""

import json
from dataclasses import dataclass, field
from enum import Enum
from types import MappingProxyType
from typing import Callable, Mapping

from src.pcpe.exceptions import CompileError, StateSchemaMismatchError
from .canonical import canonical_dumps, sha256_hex
from .models import Principal
from .policy.ast import (
    And,
    ArgRef,
    BoolLit,
    Compare,
    Credential,
    Expr,
    IntLit,
    Not,
    Or,
    PolicyAST,
    PolicyScope,
    Receipt,
    StrLit,
    VarRef,
    handler_id,
)
from .policy.printer import render_expr, render_policy

Value = bool | int | str


def value_type(value: object) -> str | None:
    if isinstance(value, bool):
        return "bool"
    if isinstance(value, int):
        return "int"
    if isinstance(value, str):
        return "string"
    return None


@dataclass(frozen=True)
class PrincipalSnapshot:
    credentials: frozenset[str] = frozenset()
    receipts: tuple[tuple[str, int], ...] = ()

    @classmethod
    def of(cls, principal: Principal) -> "PrincipalSnapshot":
        return cls(
            frozenset(principal.credentials),
            tuple((r.name, r.amount) for r in principal.receipts),
        )


@dataclass(frozen=True)
class Event:
    """
    One invocation as the automaton sees it.
    """

    method: str
    args: Mapping[str, Value] = field(default_factory=dict)
    principal: PrincipalSnapshot = field(default_factory=PrincipalSnapshot)

    def __post_init__(self):
        object.__setattr__(self, "args", MappingProxyType(dict(self.args)))

    def __hash__(self):
        return hash((self.method, tuple(sorted(self.args.items())), self.principal))


@dataclass(frozen=True)
class AutomatonState:
    valuation: Mapping[str, Value] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "valuation", MappingProxyType(dict(self.valuation)))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, AutomatonState):
            return NotImplemented
        # True == 1 in Python; states of different types are still different.
        return _typed(self.valuation) == _typed(other.valuation)

    def __hash__(self):
        return hash(tuple(sorted(_typed(self.valuation).items())))


def _typed(valuation: Mapping[str, Value]) -> dict:
    return {k: (value_type(v), v) for k, v in valuation.items()}


@dataclass(frozen=True)
class Allow:
    next: AutomatonState

    @property
    def allowed(self) -> bool:
        return True


@dataclass(frozen=True)
class Halt:
    """
    Denial: which handler of which policy refused the event.
    """

    policy_id: str
    handler_id: str
    guard: str
    line: int

    @property
    def allowed(self) -> bool:
        return False

    @property
    def message(self) -> str:
        return (
            f"Denegado por la política {self.policy_id} ({self.handler_id}, "
            f"línea {self.line}): require {self.guard}"
        )


Decision = Allow | Halt


class ViolationMode(str, Enum):
    DENY_REQUEST = "deny-request"
    KILL_SESSION = "kill-session"


@dataclass(frozen=True)
class TraceResult:
    decisions: tuple[Decision, ...]
    final: AutomatonState
    halted_at: int | None = None


class _Undefined(Exception):
    """Raised while evaluating a guard that touches a missing or ill-typed value."""


Evaluator = Callable[[Mapping[str, Value], Event], Value]


@dataclass(frozen=True)
class CompiledGuard:
    handler_id: str
    methods: frozenset[str] | None  # None matches every method
    check: Evaluator
    text: str
    line: int


@dataclass(frozen=True)
class CompiledUpdate:
    handler_id: str
    methods: frozenset[str] | None
    assignments: tuple[tuple[str, str, Evaluator], ...]


@dataclass(frozen=True)
class SecurityAutomaton:
    policy_id: str
    scope: PolicyScope
    guards: tuple[CompiledGuard, ...]
    updates: tuple[CompiledUpdate, ...]
    initial: AutomatonState
    schema: Mapping[str, str]
    policy_hash: str

    def __hash__(self):
        return hash((self.policy_id, self.policy_hash))


def policy_hash(ast: PolicyAST) -> str:
    return sha256_hex(render_policy(ast).encode("utf-8"))


_ORDERING = {
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
}


def _compile_expr(expr: Expr, schema: Mapping[str, str]) -> Evaluator:
    match expr:
        case BoolLit(value=value) | IntLit(value=value) | StrLit(value=value):
            return lambda val, ev, v=value: v
        case VarRef(name=name):
            if name not in schema:
                raise CompileError(f"Variable no declarada: {name}")
            return lambda val, ev: val[name]
        case ArgRef(name=name):

            def arg(val, ev):
                if name not in ev.args:
                    raise _Undefined(name)
                return ev.args[name]

            return arg
        case Credential(name=name):
            return lambda val, ev: name in ev.principal.credentials
        case Receipt(name=name, op=op, cents=cents):
            cmp = _comparison(op)
            return lambda val, ev: any(
                n == name and cmp(amount, cents) for n, amount in ev.principal.receipts
            )
        case Compare(op=op, left=left, right=right):
            lhs, rhs = _compile_expr(left, schema), _compile_expr(right, schema)
            cmp = _comparison(op)

            def compare(val, ev):
                a, b = lhs(val, ev), rhs(val, ev)
                kind = value_type(a)
                if kind is None or kind != value_type(b):
                    raise _Undefined(op)
                if kind == "bool" and op in _ORDERING:
                    raise _Undefined(op)
                return cmp(a, b)

            return compare
        case Not(operand=operand):
            inner = _compile_expr(operand, schema)
            return lambda val, ev: not _as_bool(inner(val, ev))
        case And(left=left, right=right):
            lhs, rhs = _compile_expr(left, schema), _compile_expr(right, schema)

            def conj(val, ev):
                a, b = _as_bool(lhs(val, ev)), _as_bool(rhs(val, ev))
                return a and b

            return conj
        case Or(left=left, right=right):
            lhs, rhs = _compile_expr(left, schema), _compile_expr(right, schema)

            def disj(val, ev):
                a, b = _as_bool(lhs(val, ev)), _as_bool(rhs(val, ev))
                return a or b

            return disj
    raise CompileError(f"Nodo de expresión desconocido: {expr!r}")


def _comparison(op: str) -> Callable[[Value, Value], bool]:
    if op == "==":
        return lambda a, b: a == b
    if op == "!=":
        return lambda a, b: a != b
    if op in _ORDERING:
        return _ORDERING[op]
    raise CompileError(f"Operador de comparación desconocido: {op}")


def _as_bool(value: Value) -> bool:
    if not isinstance(value, bool):
        raise _Undefined("bool")
    return value


def compile_policy(ast: PolicyAST) -> SecurityAutomaton:
    """
    Compiles a validated policy into a security automaton. Only an AST
    that skipped validation can make this fail.
    """

    schema: dict[str, str] = {}
    initial: dict[str, Value] = {}
    for decl in ast.state_decls:
        if decl.name in schema:
            raise CompileError(f"Variable duplicada: {decl.name}")
        if value_type(decl.initial.value) != decl.type:
            raise CompileError(f"Valor inicial mal tipado para {decl.name}")
        schema[decl.name] = decl.type
        initial[decl.name] = decl.initial.value

    guards: list[CompiledGuard] = []
    updates: list[CompiledUpdate] = []
    for index, handler in enumerate(ast.handlers):
        hid = handler_id(index, handler)
        methods = (
            None
            if handler.pattern.kind == "wildcard"
            else frozenset(handler.pattern.methods)
        )
        if handler.phase == "before":
            if handler.require is None:
                raise CompileError(f"El manejador {hid} no tiene require.")
            guards.append(
                CompiledGuard(
                    hid,
                    methods,
                    _compile_expr(handler.require, schema),
                    render_expr(handler.require),
                    handler.pos.line,
                )
            )
        elif handler.phase == "after":
            compiled = []
            for assignment in handler.assignments:
                if assignment.target not in schema:
                    raise CompileError(f"Variable no declarada: {assignment.target}")
                compiled.append(
                    (
                        assignment.target,
                        schema[assignment.target],
                        _compile_expr(assignment.expr, schema),
                    )
                )
            updates.append(CompiledUpdate(hid, methods, tuple(compiled)))
        else:
            raise CompileError(f"Fase desconocida: {handler.phase}")

    return SecurityAutomaton(
        policy_id=ast.name,
        scope=ast.scope,
        guards=tuple(guards),
        updates=tuple(updates),
        initial=AutomatonState(initial),
        schema=MappingProxyType(schema),
        policy_hash=policy_hash(ast),
    )


def step(automaton: SecurityAutomaton, state: AutomatonState, event: Event) -> Decision:
    """
    Consults every matching guard in order; the first false one halts
    the event without touching the state. Otherwise the matching
    updates run in order and their result is the next state.
    """

    for guard in automaton.guards:
        if guard.methods is not None and event.method not in guard.methods:
            continue
        try:
            passed = guard.check(state.valuation, event) is True
        except _Undefined:
            passed = False
        if not passed:
            return Halt(automaton.policy_id, guard.handler_id, guard.text, guard.line)

    valuation = dict(state.valuation)
    for update in automaton.updates:
        if update.methods is not None and event.method not in update.methods:
            continue
        for target, kind, evaluate in update.assignments:
            try:
                value = evaluate(valuation, event)
            except _Undefined:
                continue
            if value_type(value) == kind:
                valuation[target] = value
    return Allow(AutomatonState(valuation))


def run_trace(
    automaton: SecurityAutomaton,
    events: list[Event],
    mode: ViolationMode = ViolationMode.DENY_REQUEST,
) -> TraceResult:
    state = automaton.initial
    decisions: list[Decision] = []
    for index, event in enumerate(events):
        decision = step(automaton, state, event)
        decisions.append(decision)
        if isinstance(decision, Allow):
            state = decision.next
        elif mode is ViolationMode.KILL_SESSION:
            return TraceResult(tuple(decisions), state, index)
    return TraceResult(tuple(decisions), state)


def state_to_dict(state: AutomatonState) -> dict:
    return {
        name: {"t": value_type(state.valuation[name]), "v": state.valuation[name]}
        for name in sorted(state.valuation)
    }


def serialize_state(state: AutomatonState) -> bytes:
    """
    Canonical JSON `{var: {"t": type, "v": value}}` with sorted keys.
    """

    return canonical_dumps(state_to_dict(state))


def state_from_dict(data: object, automaton: SecurityAutomaton) -> AutomatonState:
    if not isinstance(data, dict):
        raise StateSchemaMismatchError("El estado serializado debe ser un objeto JSON.")
    if set(data) != set(automaton.schema):
        raise StateSchemaMismatchError(
            f"Las variables {sorted(data)} no coinciden con {sorted(automaton.schema)}."
        )
    valuation: dict[str, Value] = {}
    for name, entry in data.items():
        expected = automaton.schema[name]
        if (
            not isinstance(entry, dict)
            or entry.get("t") != expected
            or value_type(entry.get("v")) != expected
        ):
            raise StateSchemaMismatchError(
                f"La variable {name} debe ser de tipo {expected}."
            )
        valuation[name] = entry["v"]
    return AutomatonState(valuation)


def deserialize_state(data: bytes, automaton: SecurityAutomaton) -> AutomatonState:
    try:
        parsed = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise StateSchemaMismatchError(f"Estado ilegible: {e}") from e
    return state_from_dict(parsed, automaton)
