from .ast import (
    And,
    ArgRef,
    BoolLit,
    Compare,
    Credential,
    EventPattern,
    Expr,
    Handler,
    IntLit,
    Not,
    Or,
    PolicyAST,
    Receipt,
    StrLit,
    VarRef,
)


def quote(value: str) -> str:
    escaped = (
        value.replace("\\", "\\\\")
        .replace('"', '\\"')
        .replace("\n", "\\n")
        .replace("\t", "\\t")
    )
    return f'"{escaped}"'


def _cents(cents: int) -> str:
    sign = "-" if cents < 0 else ""
    cents = abs(cents)
    return f"{sign}{cents // 100}.{cents % 100:02d}"


def render_expr(expr: Expr) -> str:
    """
    Renders an expression; nested binary nodes get parentheses so the
    text parses back to the same tree.
    """

    match expr:
        case BoolLit(value=value):
            return "true" if value else "false"
        case IntLit(value=value):
            return str(value)
        case StrLit(value=value):
            return quote(value)
        case ArgRef(name=name):
            return f"arg({quote(name)})"
        case VarRef(name=name):
            return name
        case Credential(name=name):
            return f"credential({quote(name)})"
        case Receipt(name=name, op=op, cents=cents):
            return f"receipt({quote(name)}, {op} {_cents(cents)})"
        case Compare(op=op, left=left, right=right):
            return f"{_compare_operand(left)} {op} {_compare_operand(right)}"
        case Not(operand=operand):
            return f"!{_operand(operand)}"
        case And(left=left, right=right):
            return f"{_operand(left)} && {_operand(right)}"
        case Or(left=left, right=right):
            return f"{_operand(left)} || {_operand(right)}"
    raise TypeError(f"Unknown expression node {expr!r}")


def _operand(expr: Expr) -> str:
    text = render_expr(expr)
    if isinstance(expr, (Compare, And, Or)):
        return f"({text})"
    return text


def _compare_operand(expr: Expr) -> str:
    # A bare "!" would swallow the whole comparison when re-parsed.
    if isinstance(expr, Not):
        return f"({render_expr(expr)})"
    return _operand(expr)


def render_pattern(pattern: EventPattern) -> str:
    if pattern.kind == "wildcard":
        return "*"
    if pattern.kind == "exact":
        return f"method == {quote(pattern.methods[0])}"
    return "method in [" + ", ".join(quote(m) for m in pattern.methods) + "]"


def render_handler(handler: Handler) -> list[str]:
    lines = [f"  {handler.phase} invoke({render_pattern(handler.pattern)}) {{"]
    if handler.phase == "before":
        lines.append(f"    require {render_expr(handler.require)};")
    else:
        for assignment in handler.assignments:
            lines.append(f"    {assignment.target} = {render_expr(assignment.expr)};")
    lines.append("  }")
    return lines


def render_policy(ast: PolicyAST) -> str:
    """
    Canonical text of a policy; also the input of the policy hash.
    """

    if ast.scope.is_default:
        scope = "default"
    else:
        scope = f"interface {quote(ast.scope.interface_id)}"
    lines = [f"policy {quote(ast.name)} for {scope} {{"]
    for decl in ast.state_decls:
        lines.append(
            f"  state {decl.name}: {decl.type} = {render_expr(decl.initial)};"
        )
    for handler in ast.handlers:
        lines.extend(render_handler(handler))
    lines.append("}")
    return "\n".join(lines) + "\n"
