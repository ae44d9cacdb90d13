import re
from dataclasses import dataclass

from src.pcpe.exceptions import ParseError

KEYWORDS = frozenset(
    {
        "policy", "for", "interface", "default", "state", "bool", "int", "string",
        "before", "after", "invoke", "method", "in", "require", "credential",
        "receipt", "arg", "true", "false",
    }
)

_TOKEN_SPEC = [
    ("NEWLINE", r"\n"),
    ("SKIP", r"[ \t\r]+"),
    ("COMMENT", r"//[^\n]*"),
    ("NUMBER", r"-?\d+(?:\.\d+)?"),
    ("STRING", r'"(?:[^"\\\n]|\\.)*"'),
    ("IDENT", r"[A-Za-z_][A-Za-z0-9_]*"),
    ("OP", r"==|!=|<=|>=|&&|\|\||[{}()\[\];:,=<>!*]"),
    ("MISMATCH", r"."),
]
_MASTER = re.compile("|".join(f"(?P<{name}>{rx})" for name, rx in _TOKEN_SPEC))
_ESCAPES = {'"': '"', "\\": "\\", "n": "\n", "t": "\t"}


@dataclass(frozen=True)
class Token:
    """
    kind is STRING, NUMBER, IDENT, EOF, a keyword or an operator.
    """

    kind: str
    text: str
    value: object
    line: int
    column: int


def _unescape(raw: str, line: int, column: int) -> str:
    out = []
    i = 0
    while i < len(raw):
        ch = raw[i]
        if ch == "\\":
            nxt = raw[i + 1]
            if nxt not in _ESCAPES:
                raise ParseError(line, column + i + 1, ('\\"', "\\\\", "\\n", "\\t"), "\\" + nxt)
            out.append(_ESCAPES[nxt])
            i += 2
        else:
            out.append(ch)
            i += 1
    return "".join(out)


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    line = 1
    line_start = 0
    for match in _MASTER.finditer(text):
        kind = match.lastgroup
        lexeme = match.group()
        column = match.start() - line_start + 1
        if kind == "NEWLINE":
            line += 1
            line_start = match.end()
        elif kind in ("SKIP", "COMMENT"):
            continue
        elif kind == "NUMBER":
            tokens.append(Token("NUMBER", lexeme, lexeme, line, column))
        elif kind == "STRING":
            value = _unescape(lexeme[1:-1], line, column + 1)
            tokens.append(Token("STRING", lexeme, value, line, column))
        elif kind == "IDENT":
            token_kind = lexeme if lexeme in KEYWORDS else "IDENT"
            tokens.append(Token(token_kind, lexeme, lexeme, line, column))
        elif kind == "OP":
            tokens.append(Token(lexeme, lexeme, lexeme, line, column))
        else:
            expected = ("closing quote",) if lexeme == '"' else ("token",)
            raise ParseError(line, column, expected, lexeme)
    tokens.append(Token("EOF", "", None, line, len(text) - line_start + 1))
    return tokens
