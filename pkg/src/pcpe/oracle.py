"""
Reference interpreter: walks the policy tree directly for every event.
It shares no evaluation code with the compiler; tests compare the two
decision for decision.
"""

from .automaton import (
    Allow,
    AutomatonState,
    Decision,
    Event,
    Halt,
    TraceResult,
    ViolationMode,
)
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
    Receipt,
    StrLit,
    VarRef,
)
from .policy.printer import render_expr


class _Missing:
    def __repr__(self) -> str:
        return "UNDEFINED"


UNDEFINED = _Missing()


def _kind(value) -> str | None:
    if value is True or value is False:
        return "bool"
    if type(value) is int:
        return "int"
    if type(value) is str:
        return "string"
    return None


def _holds(op: str, a, b) -> bool:
    if op == "==":
        return a == b
    if op == "!=":
        return a != b
    if op == "<":
        return a < b
    if op == "<=":
        return a <= b
    if op == ">":
        return a > b
    return a >= b


class Interpreter:
    def __init__(self, ast: PolicyAST) -> None:
        self.ast = ast
        self.types = {d.name: d.type for d in ast.state_decls}

    def initial(self) -> AutomatonState:
        return AutomatonState({d.name: d.initial.value for d in self.ast.state_decls})

    def evaluate(self, expr: Expr, state: dict, event: Event):
        if isinstance(expr, (BoolLit, IntLit, StrLit)):
            return expr.value
        if isinstance(expr, VarRef):
            return state.get(expr.name, UNDEFINED)
        if isinstance(expr, ArgRef):
            return event.args.get(expr.name, UNDEFINED)
        if isinstance(expr, Credential):
            return expr.name in event.principal.credentials
        if isinstance(expr, Receipt):
            for name, amount in event.principal.receipts:
                if name == expr.name and _holds(expr.op, amount, expr.cents):
                    return True
            return False
        if isinstance(expr, Compare):
            a = self.evaluate(expr.left, state, event)
            b = self.evaluate(expr.right, state, event)
            if a is UNDEFINED or b is UNDEFINED:
                return UNDEFINED
            if _kind(a) is None or _kind(a) != _kind(b):
                return UNDEFINED
            if _kind(a) == "bool" and expr.op not in ("==", "!="):
                return UNDEFINED
            return _holds(expr.op, a, b)
        if isinstance(expr, Not):
            a = self.evaluate(expr.operand, state, event)
            return (not a) if _kind(a) == "bool" else UNDEFINED
        if isinstance(expr, (And, Or)):
            a = self.evaluate(expr.left, state, event)
            b = self.evaluate(expr.right, state, event)
            if _kind(a) != "bool" or _kind(b) != "bool":
                return UNDEFINED
            return (a and b) if isinstance(expr, And) else (a or b)
        raise TypeError(f"Unknown expression node {expr!r}")

    def decide(self, state: AutomatonState, event: Event) -> Decision:
        current = dict(state.valuation)
        for index, handler in enumerate(self.ast.handlers):
            if handler.phase != "before" or not handler.pattern.matches(event.method):
                continue
            if self.evaluate(handler.require, current, event) is not True:
                return Halt(
                    self.ast.name,
                    f"before#{index}",
                    render_expr(handler.require),
                    handler.pos.line,
                )
        for handler in self.ast.handlers:
            if handler.phase != "after" or not handler.pattern.matches(event.method):
                continue
            for assignment in handler.assignments:
                value = self.evaluate(assignment.expr, current, event)
                if _kind(value) == self.types.get(assignment.target):
                    current[assignment.target] = value
        return Allow(AutomatonState(current))


def oracle_eval(
    ast: PolicyAST,
    events: list[Event],
    mode: ViolationMode = ViolationMode.DENY_REQUEST,
) -> TraceResult:
    interpreter = Interpreter(ast)
    state = interpreter.initial()
    decisions: list[Decision] = []
    for index, event in enumerate(events):
        decision = interpreter.decide(state, event)
        decisions.append(decision)
        if decision.allowed:
            state = decision.next
        elif mode is ViolationMode.KILL_SESSION:
            return TraceResult(tuple(decisions), state, index)
    return TraceResult(tuple(decisions), state)
