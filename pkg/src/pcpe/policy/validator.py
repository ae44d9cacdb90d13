from dataclasses import dataclass

from src.pcpe.models import BehaviorInterface, MethodSignature
from src.pcpe.primitives import PRIMITIVE_INTERFACE, PRIMITIVE_METHODS
from .ast import (
    And,
    ArgRef,
    BoolLit,
    Compare,
    Credential,
    Expr,
    Handler,
    IntLit,
    Not,
    Or,
    PolicyAST,
    Position,
    Receipt,
    StrLit,
    VarRef,
)


@dataclass(frozen=True)
class Diagnostic:
    kind: str
    message: str
    line: int
    column: int

    def __str__(self) -> str:
        return f"{self.kind} ({self.line}:{self.column}): {self.message}"


def validate_policy(
    ast: PolicyAST,
    interface: BehaviorInterface | None = None,
    known_primitives: list[str] | tuple[str, ...] = PRIMITIVE_METHODS,
) -> list[Diagnostic]:
    """
    Checks a parsed policy against the methods it may guard. An empty
    list means the policy can be compiled.
    """

    return _Validator(ast, interface, tuple(known_primitives)).run()


class _Validator:
    def __init__(
        self,
        ast: PolicyAST,
        interface: BehaviorInterface | None,
        known_primitives: tuple[str, ...],
    ) -> None:
        self.ast = ast
        self.interface = interface
        self.known_primitives = known_primitives
        self.diagnostics: list[Diagnostic] = []
        self.variables: dict[str, str] = {}

    def _report(self, kind: str, message: str, pos: Position) -> None:
        self.diagnostics.append(Diagnostic(kind, message, pos.line, pos.column))

    def run(self) -> list[Diagnostic]:
        self._check_scope()
        if self.diagnostics:
            return self.diagnostics
        self._check_state()
        for handler in self.ast.handlers:
            self._check_handler(handler)
        return self.diagnostics

    def _check_scope(self) -> None:
        scope = self.ast.scope
        if scope.is_default:
            return
        if self.interface is None:
            self._report(
                "MissingInterface",
                f"No se proporcionó la interfaz {scope.interface_id}.",
                scope.pos,
            )
        elif self.interface.id != scope.interface_id:
            self._report(
                "ScopeMismatch",
                f"La política es para {scope.interface_id}, no para {self.interface.id}.",
                scope.pos,
            )

    def _check_state(self) -> None:
        for decl in self.ast.state_decls:
            if decl.name in self.variables:
                self._report(
                    "DuplicateVariable", f"La variable {decl.name} ya fue declarada.", decl.pos
                )
                continue
            self.variables[decl.name] = decl.type
            initial_type = self._literal_type(decl.initial)
            if initial_type != decl.type:
                self._report(
                    "TypeMismatch",
                    f"El valor inicial de {decl.name} debe ser {decl.type}, no {initial_type}.",
                    decl.initial.pos,
                )

    def _available_methods(self) -> dict[str, MethodSignature]:
        if self.ast.scope.is_default:
            return {
                name: PRIMITIVE_INTERFACE.get_method(name) or MethodSignature(name)
                for name in self.known_primitives
            }
        if self.interface is None:
            return {}
        return {m.name: m for m in self.interface.methods}

    def _check_handler(self, handler: Handler) -> None:
        available = self._available_methods()
        if handler.pattern.kind == "wildcard":
            matched = list(available.values())
        else:
            matched = []
            for name in handler.pattern.methods:
                if name in available:
                    matched.append(available[name])
                else:
                    self._report(
                        "UnknownMethod", f"El método {name} no existe.", handler.pattern.pos
                    )
        if handler.phase == "before":
            found = self._type_of(handler.require, matched)
            if found is not None and found != "bool":
                self._report(
                    "TypeMismatch",
                    f"La condición require debe ser bool, no {found}.",
                    handler.require.pos,
                )
            return
        for assignment in handler.assignments:
            target_type = self.variables.get(assignment.target)
            if target_type is None:
                self._report(
                    "UndeclaredVariable",
                    f"La variable {assignment.target} no fue declarada.",
                    assignment.pos,
                )
            found = self._type_of(assignment.expr, matched)
            if target_type is not None and found is not None and found != target_type:
                self._report(
                    "TypeMismatch",
                    f"No se puede asignar {found} a {assignment.target} ({target_type}).",
                    assignment.pos,
                )

    @staticmethod
    def _literal_type(lit: Expr) -> str:
        if isinstance(lit, BoolLit):
            return "bool"
        if isinstance(lit, IntLit):
            return "int"
        return "string"

    def _type_of(self, expr: Expr, matched: list[MethodSignature]) -> str | None:
        """
        Returns the static type of an expression, or None when an error
        was already reported inside it.
        """

        match expr:
            case BoolLit() | IntLit() | StrLit():
                return self._literal_type(expr)
            case VarRef(name=name):
                if name not in self.variables:
                    self._report(
                        "UndeclaredVariable", f"La variable {name} no fue declarada.", expr.pos
                    )
                    return None
                return self.variables[name]
            case ArgRef(name=name):
                return self._arg_type(name, matched, expr.pos)
            case Credential() | Receipt():
                return "bool"
            case Compare(op=op, left=left, right=right):
                left_type = self._type_of(left, matched)
                right_type = self._type_of(right, matched)
                if left_type is None or right_type is None:
                    return "bool"
                if left_type != right_type:
                    self._report(
                        "TypeMismatch",
                        f"No se puede comparar {left_type} con {right_type}.",
                        expr.pos,
                    )
                elif left_type == "bool" and op not in ("==", "!="):
                    self._report(
                        "TypeMismatch", f"El operador {op} no aplica a bool.", expr.pos
                    )
                return "bool"
            case Not(operand=operand):
                self._expect_bool(operand, matched)
                return "bool"
            case And(left=left, right=right) | Or(left=left, right=right):
                self._expect_bool(left, matched)
                self._expect_bool(right, matched)
                return "bool"
        raise TypeError(f"Unknown expression node {expr!r}")

    def _expect_bool(self, expr: Expr, matched: list[MethodSignature]) -> None:
        found = self._type_of(expr, matched)
        if found is not None and found != "bool":
            self._report(
                "TypeMismatch", f"Se esperaba bool, se encontró {found}.", expr.pos
            )

    def _arg_type(
        self, name: str, matched: list[MethodSignature], pos: Position
    ) -> str | None:
        types = {m.param_type(name) for m in matched} - {None}
        if not types:
            self._report(
                "UnknownArgument",
                f"Ningún método vigilado tiene el parámetro {name}.",
                pos,
            )
            return None
        if len(types) > 1:
            self._report(
                "TypeMismatch",
                f"El parámetro {name} tiene tipos distintos según el método.",
                pos,
            )
            return None
        return types.pop()
