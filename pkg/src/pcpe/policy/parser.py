from decimal import Decimal, InvalidOperation

from src.pcpe.exceptions import ParseError
from .ast import (
    COMPARISON_OPS,
    STATE_TYPES,
    And,
    ArgRef,
    Assignment,
    BoolLit,
    Compare,
    Credential,
    EventPattern,
    Expr,
    Handler,
    IntLit,
    Literal,
    Not,
    Or,
    PolicyAST,
    PolicyScope,
    Position,
    Receipt,
    StateDecl,
    StrLit,
    VarRef,
)
from .lexer import Token, tokenize


def parse_policy(text: str) -> PolicyAST:
    """
    Parses policy source text into a PolicyAST; every node keeps the
    line and column of its first token.
    """

    return _Parser(tokenize(text)).parse()


class _Parser:
    def __init__(self, tokens: list[Token]) -> None:
        self.tokens = tokens
        self.index = 0

    @property
    def current(self) -> Token:
        return self.tokens[self.index]

    def _pos(self, token: Token | None = None) -> Position:
        token = token or self.current
        return Position(token.line, token.column)

    def _fail(self, *expected: str) -> ParseError:
        token = self.current
        found = token.text if token.kind != "EOF" else "<fin>"
        return ParseError(token.line, token.column, expected, found)

    def _accept(self, kind: str) -> Token | None:
        if self.current.kind == kind:
            token = self.current
            self.index += 1
            return token
        return None

    def _expect(self, *kinds: str) -> Token:
        for kind in kinds:
            token = self._accept(kind)
            if token is not None:
                return token
        raise self._fail(*kinds)

    def parse(self) -> PolicyAST:
        start = self._expect("policy")
        name = self._expect("STRING").value
        self._expect("for")
        scope = self._scope()
        self._expect("{")
        state_decls = []
        while self.current.kind == "state":
            state_decls.append(self._state_decl())
        handlers = []
        while self.current.kind in ("before", "after"):
            handlers.append(self._handler())
        self._expect("}")
        self._expect("EOF")
        return PolicyAST(
            name=name,
            scope=scope,
            state_decls=tuple(state_decls),
            handlers=tuple(handlers),
            pos=self._pos(start),
        )

    def _scope(self) -> PolicyScope:
        token = self.current
        if self._accept("default"):
            return PolicyScope("default", None, self._pos(token))
        if self._accept("interface"):
            interface_id = self._expect("STRING").value
            return PolicyScope("interface", interface_id, self._pos(token))
        raise self._fail("interface", "default")

    def _state_decl(self) -> StateDecl:
        start = self._expect("state")
        name = self._expect("IDENT").value
        self._expect(":")
        type_token = self._expect(*STATE_TYPES)
        self._expect("=")
        initial = self._literal()
        self._expect(";")
        return StateDecl(name, type_token.kind, initial, self._pos(start))

    def _handler(self) -> Handler:
        start = self._expect("before", "after")
        self._expect("invoke")
        self._expect("(")
        pattern = self._pattern()
        self._expect(")")
        self._expect("{")
        if start.kind == "before":
            self._expect("require")
            require = self._expr()
            self._expect(";")
            self._expect("}")
            return Handler("before", pattern, require=require, pos=self._pos(start))
        assignments = [self._assignment()]
        while self.current.kind == "IDENT":
            assignments.append(self._assignment())
        self._expect("}")
        return Handler(
            "after", pattern, assignments=tuple(assignments), pos=self._pos(start)
        )

    def _pattern(self) -> EventPattern:
        token = self.current
        if self._accept("*"):
            return EventPattern("wildcard", (), self._pos(token))
        self._expect("method")
        if self._accept("=="):
            name = self._expect("STRING").value
            return EventPattern("exact", (name,), self._pos(token))
        if self._accept("in"):
            self._expect("[")
            names = [self._expect("STRING").value]
            while self._accept(","):
                names.append(self._expect("STRING").value)
            self._expect("]")
            return EventPattern("set", tuple(names), self._pos(token))
        raise self._fail("==", "in")

    def _assignment(self) -> Assignment:
        target = self._expect("IDENT")
        self._expect("=")
        expr = self._expr()
        self._expect(";")
        return Assignment(target.value, expr, self._pos(target))

    # expr := or ; or := and ("||" and)* ; and := unary ("&&" unary)*
    def _expr(self) -> Expr:
        left = self._conjunction()
        while self.current.kind == "||":
            token = self._expect("||")
            right = self._conjunction()
            left = Or(left, right, self._pos(token))
        return left

    def _conjunction(self) -> Expr:
        left = self._unary()
        while self.current.kind == "&&":
            token = self._expect("&&")
            right = self._unary()
            left = And(left, right, self._pos(token))
        return left

    def _unary(self) -> Expr:
        token = self.current
        if self._accept("!"):
            return Not(self._unary(), self._pos(token))
        return self._comparison()

    def _comparison(self) -> Expr:
        left = self._primary()
        if self.current.kind in COMPARISON_OPS:
            op_token = self.current
            self.index += 1
            right = self._primary()
            return Compare(op_token.kind, left, right, self._pos(op_token))
        return left

    def _primary(self) -> Expr:
        token = self.current
        kind = token.kind
        if kind == "credential":
            self.index += 1
            self._expect("(")
            name = self._expect("STRING").value
            self._expect(")")
            return Credential(name, self._pos(token))
        if kind == "receipt":
            self.index += 1
            self._expect("(")
            name = self._expect("STRING").value
            self._expect(",")
            op = self._expect(*COMPARISON_OPS).kind
            amount = self._expect("NUMBER")
            self._expect(")")
            return Receipt(name, op, _to_cents(amount), self._pos(token))
        if kind == "arg":
            self.index += 1
            self._expect("(")
            name = self._expect("STRING").value
            self._expect(")")
            return ArgRef(name, self._pos(token))
        if kind == "IDENT":
            self.index += 1
            return VarRef(token.value, self._pos(token))
        if kind == "(":
            self.index += 1
            inner = self._expr()
            self._expect(")")
            return inner
        if kind in ("true", "false", "NUMBER", "STRING"):
            return self._literal()
        raise self._fail(
            "credential", "receipt", "arg", "IDENT", "true", "false", "NUMBER", "STRING", "("
        )

    def _literal(self) -> Literal:
        token = self.current
        if self._accept("true"):
            return BoolLit(True, self._pos(token))
        if self._accept("false"):
            return BoolLit(False, self._pos(token))
        if self._accept("STRING"):
            return StrLit(token.value, self._pos(token))
        if self.current.kind == "NUMBER":
            if "." in token.text:
                raise ParseError(token.line, token.column, ("integer",), token.text)
            self.index += 1
            return IntLit(int(token.text), self._pos(token))
        raise self._fail("true", "false", "NUMBER", "STRING")


def _to_cents(token: Token) -> int:
    """
    Receipt amounts are currency units with an optional fraction,
    kept as integer cents.
    """

    try:
        cents = Decimal(token.text) * 100
    except InvalidOperation:
        raise ParseError(token.line, token.column, ("NUMBER",), token.text)
    if cents != cents.to_integral_value():
        raise ParseError(token.line, token.column, ("amount with at most 2 decimals",), token.text)
    return int(cents)
