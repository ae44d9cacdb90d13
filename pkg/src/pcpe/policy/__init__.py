from .ast import PolicyAST, empty_policy, handler_id
from .parser import parse_policy
from .printer import render_expr, render_policy
from .validator import Diagnostic, validate_policy

__all__ = [
    "Diagnostic",
    "PolicyAST",
    "empty_policy",
    "handler_id",
    "parse_policy",
    "render_expr",
    "render_policy",
    "validate_policy",
]
