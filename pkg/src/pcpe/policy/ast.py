"""
Syntax tree of the policy language. Positions never take part in
equality, so a re-parsed pretty-print compares equal to the original.
"""

from dataclasses import dataclass, field

COMPARISON_OPS = ("==", "!=", "<", "<=", ">", ">=")
STATE_TYPES = ("bool", "int", "string")


@dataclass(frozen=True)
class Position:
    line: int = 0
    column: int = 0


NOWHERE = Position()


@dataclass(frozen=True)
class BoolLit:
    value: bool
    pos: Position = field(default=NOWHERE, compare=False)


@dataclass(frozen=True)
class IntLit:
    value: int
    pos: Position = field(default=NOWHERE, compare=False)


@dataclass(frozen=True)
class StrLit:
    value: str
    pos: Position = field(default=NOWHERE, compare=False)


Literal = BoolLit | IntLit | StrLit


@dataclass(frozen=True)
class ArgRef:
    name: str
    pos: Position = field(default=NOWHERE, compare=False)


@dataclass(frozen=True)
class VarRef:
    name: str
    pos: Position = field(default=NOWHERE, compare=False)


@dataclass(frozen=True)
class Credential:
    name: str
    pos: Position = field(default=NOWHERE, compare=False)


@dataclass(frozen=True)
class Receipt:
    name: str
    op: str
    cents: int
    pos: Position = field(default=NOWHERE, compare=False)


@dataclass(frozen=True)
class Compare:
    op: str
    left: "Expr"
    right: "Expr"
    pos: Position = field(default=NOWHERE, compare=False)


@dataclass(frozen=True)
class Not:
    operand: "Expr"
    pos: Position = field(default=NOWHERE, compare=False)


@dataclass(frozen=True)
class And:
    left: "Expr"
    right: "Expr"
    pos: Position = field(default=NOWHERE, compare=False)


@dataclass(frozen=True)
class Or:
    left: "Expr"
    right: "Expr"
    pos: Position = field(default=NOWHERE, compare=False)


Expr = BoolLit | IntLit | StrLit | ArgRef | VarRef | Credential | Receipt | Compare | Not | And | Or


@dataclass(frozen=True)
class EventPattern:
    """
    Method matcher of a handler: kind is "wildcard", "exact" or "set".
    """

    kind: str
    methods: tuple[str, ...] = ()
    pos: Position = field(default=NOWHERE, compare=False)

    def matches(self, method: str) -> bool:
        return self.kind == "wildcard" or method in self.methods


@dataclass(frozen=True)
class Assignment:
    target: str
    expr: Expr
    pos: Position = field(default=NOWHERE, compare=False)


@dataclass(frozen=True)
class Handler:
    """
    before-handlers carry one `require`; after-handlers carry the
    assignments they perform.
    """

    phase: str
    pattern: EventPattern
    require: Expr | None = None
    assignments: tuple[Assignment, ...] = ()
    pos: Position = field(default=NOWHERE, compare=False)


@dataclass(frozen=True)
class StateDecl:
    name: str
    type: str
    initial: Literal
    pos: Position = field(default=NOWHERE, compare=False)


@dataclass(frozen=True)
class PolicyScope:
    kind: str
    interface_id: str | None = None
    pos: Position = field(default=NOWHERE, compare=False)

    @property
    def is_default(self) -> bool:
        return self.kind == "default"


@dataclass(frozen=True)
class PolicyAST:
    name: str
    scope: PolicyScope
    state_decls: tuple[StateDecl, ...] = ()
    handlers: tuple[Handler, ...] = ()
    pos: Position = field(default=NOWHERE, compare=False)


def handler_id(index: int, handler: Handler) -> str:
    return f"{handler.phase}#{index}"


def empty_policy(name: str, interface_id: str | None = None) -> PolicyAST:
    """
    The vacuous policy: no state, no handlers, allows everything.
    """

    scope = (
        PolicyScope("interface", interface_id)
        if interface_id is not None
        else PolicyScope("default")
    )
    return PolicyAST(name=name, scope=scope)
