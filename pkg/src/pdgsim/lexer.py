"""Tokenizer for the mini-language.

The language is whitespace-insensitive; `//` comments run to end of line.
Every token records the 1-based line it starts on so later phases can
report positions.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum, unique


class LexError(Exception):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


@unique
class TokenKind(Enum):
    IDENT = "identifier"
    INT = "integer"
    # keywords
    DEF = "def"
    IF = "if"
    ELSE = "else"
    WHILE = "while"
    FOR = "for"
    SWITCH = "switch"
    CASE = "case"
    DEFAULT = "default"
    CALL = "call"
    RETURN = "return"
    THROW = "throw"
    SKIP = "skip"
    INPUT = "input"
    # punctuation / operators
    LPAREN = "("
    RPAREN = ")"
    LBRACE = "{"
    RBRACE = "}"
    LBRACKET = "["
    RBRACKET = "]"
    SEMI = ";"
    COMMA = ","
    COLON = ":"
    ASSIGN = "="
    PLUS = "+"
    MINUS = "-"
    STAR = "*"
    SLASH = "/"
    PERCENT = "%"
    LT = "<"
    LE = "<="
    GT = ">"
    GE = ">="
    EQ = "=="
    NE = "!="
    AND = "&&"
    OR = "||"
    NOT = "!"


_KEYWORDS = {
    k.value: k
    for k in (
        TokenKind.DEF, TokenKind.IF, TokenKind.ELSE, TokenKind.WHILE,
        TokenKind.FOR, TokenKind.SWITCH, TokenKind.CASE, TokenKind.DEFAULT,
        TokenKind.CALL, TokenKind.RETURN, TokenKind.THROW, TokenKind.SKIP,
        TokenKind.INPUT,
    )
}

# Two-char operators must be tried before their one-char prefixes.
_TWO_CHAR = {
    "<=": TokenKind.LE, ">=": TokenKind.GE, "==": TokenKind.EQ,
    "!=": TokenKind.NE, "&&": TokenKind.AND, "||": TokenKind.OR,
}
_ONE_CHAR = {
    "(": TokenKind.LPAREN, ")": TokenKind.RPAREN,
    "{": TokenKind.LBRACE, "}": TokenKind.RBRACE,
    "[": TokenKind.LBRACKET, "]": TokenKind.RBRACKET,
    ";": TokenKind.SEMI, ",": TokenKind.COMMA, ":": TokenKind.COLON,
    "=": TokenKind.ASSIGN, "+": TokenKind.PLUS, "-": TokenKind.MINUS,
    "*": TokenKind.STAR, "/": TokenKind.SLASH, "%": TokenKind.PERCENT,
    "<": TokenKind.LT, ">": TokenKind.GT, "!": TokenKind.NOT,
}


@dataclass(frozen=True)
class Token:
    kind: TokenKind
    text: str
    line: int


def tokenize(source: str) -> list[Token]:
    """Split source text into tokens, discarding whitespace and comments.

    Raises LexError (with the offending line) on any character outside the
    language's alphabet. Single `&` or `|` are not in the alphabet.
    """
    tokens: list[Token] = []
    i = 0
    line = 1
    n = len(source)
    while i < n:
        c = source[i]
        if c == "\n":
            line += 1
            i += 1
            continue
        if c in " \t\r":
            i += 1
            continue
        if source.startswith("//", i):
            nl = source.find("\n", i)
            i = n if nl < 0 else nl
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            text = source[i:j]
            tokens.append(Token(_KEYWORDS.get(text, TokenKind.IDENT), text, line))
            i = j
            continue
        if c.isdigit():
            j = i
            while j < n and source[j].isdigit():
                j += 1
            tokens.append(Token(TokenKind.INT, source[i:j], line))
            i = j
            continue
        two = source[i:i + 2]
        if two in _TWO_CHAR:
            tokens.append(Token(_TWO_CHAR[two], two, line))
            i += 2
            continue
        if c in _ONE_CHAR:
            # lone & or | would fall through to the error below
            tokens.append(Token(_ONE_CHAR[c], c, line))
            i += 1
            continue
        raise LexError(f"unexpected character {c!r}", line)
    return tokens
