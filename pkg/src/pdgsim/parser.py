"""Recursive-descent parser for the mini-language.

Grammar (whitespace-insensitive):

    method := "def" IDENT "(" [IDENT {"," IDENT}] ")" block
    block  := "{" {stmt} "}"
    stmt   := IDENT ["[" expr "]"] "=" expr ";"
            | "if" "(" expr ")" block ["else" block]
            | "while" "(" expr ")" block
            | "for" "(" simple ";" expr ";" simple ")" block
            | "switch" "(" expr ")" "{" {"case" INT ":" block} ["default" ":" block] "}"
            | "call" IDENT "(" [expr {"," expr}] ")" ";"
            | "return" [expr] ";" | "throw" expr ";" | "skip" ";"
    simple := IDENT ["[" expr "]"] "=" expr

Expressions use conventional precedence: || < && < equality < relational
< additive < multiplicative < unary (!, -) < primary. A dangling else
binds to the nearest if. Exactly one method per source file.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .lexer import Token, TokenKind, tokenize


class ParseError(Exception):
    def __init__(self, expected: str, found: Token | None):
        if found is None:
            super().__init__(f"expected {expected}, found end of input")
            self.line = -1
        else:
            super().__init__(
                f"line {found.line}: expected {expected}, found {found.text!r}"
            )
            self.line = found.line
        self.expected = expected
        self.found = found


# --- expressions ------------------------------------------------------------

@dataclass(frozen=True)
class IntLit:
    value: int


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Index:
    name: str
    index: "Expr"


@dataclass(frozen=True)
class Unary:
    op: str
    operand: "Expr"


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Input:
    """The input() intrinsic: an external value, reads no variables."""


Expr = IntLit | Var | Index | Unary | Binary | Input


# --- statements -------------------------------------------------------------

@dataclass(frozen=True)
class Assign:
    target: str
    index: Expr | None
    value: Expr
    line: int


@dataclass(frozen=True)
class If:
    cond: Expr
    then: tuple["Stmt", ...]
    orelse: tuple["Stmt", ...]
    line: int


@dataclass(frozen=True)
class While:
    cond: Expr
    body: tuple["Stmt", ...]
    line: int


@dataclass(frozen=True)
class For:
    init: Assign
    cond: Expr
    update: Assign
    body: tuple["Stmt", ...]
    line: int


@dataclass(frozen=True)
class Switch:
    scrutinee: Expr
    cases: tuple[tuple[int, tuple["Stmt", ...]], ...]
    default: tuple["Stmt", ...] | None
    line: int


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple[Expr, ...]
    line: int


@dataclass(frozen=True)
class Return:
    value: Expr | None
    line: int


@dataclass(frozen=True)
class Throw:
    value: Expr
    line: int


@dataclass(frozen=True)
class Skip:
    line: int


Stmt = Assign | If | While | For | Switch | Call | Return | Throw | Skip


@dataclass(frozen=True)
class Method:
    name: str
    params: tuple[str, ...]
    body: tuple[Stmt, ...]
    line: int
    warnings: tuple[str, ...] = field(default=(), compare=False)


Ast = Method

_CMP_OPS = {TokenKind.LT, TokenKind.LE, TokenKind.GT, TokenKind.GE}
_EQ_OPS = {TokenKind.EQ, TokenKind.NE}
_ADD_OPS = {TokenKind.PLUS, TokenKind.MINUS}
_MUL_OPS = {TokenKind.STAR, TokenKind.SLASH, TokenKind.PERCENT}


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> Token | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def at(self, kind: TokenKind) -> bool:
        tok = self.peek()
        return tok is not None and tok.kind == kind

    def advance(self) -> Token:
        tok = self.peek()
        if tok is None:
            raise ParseError("more input", None)
        self.pos += 1
        return tok

    def expect(self, kind: TokenKind) -> Token:
        tok = self.peek()
        if tok is None or tok.kind != kind:
            raise ParseError(f"'{kind.value}'", tok)
        self.pos += 1
        return tok

    # -- toplevel --

    def method(self) -> Method:
        start = self.expect(TokenKind.DEF)
        name = self.expect(TokenKind.IDENT).text
        self.expect(TokenKind.LPAREN)
        params: list[str] = []
        if self.at(TokenKind.IDENT):
            params.append(self.advance().text)
            while self.at(TokenKind.COMMA):
                self.advance()
                params.append(self.expect(TokenKind.IDENT).text)
        self.expect(TokenKind.RPAREN)
        body = self.block()
        if self.peek() is not None:
            raise ParseError("end of input (one method per file)", self.peek())
        return Method(name, tuple(params), body, start.line)

    def block(self) -> tuple[Stmt, ...]:
        self.expect(TokenKind.LBRACE)
        stmts: list[Stmt] = []
        while not self.at(TokenKind.RBRACE):
            stmts.append(self.stmt())
        self.expect(TokenKind.RBRACE)
        return tuple(stmts)

    # -- statements --

    def stmt(self) -> Stmt:
        tok = self.peek()
        if tok is None:
            raise ParseError("a statement", None)
        if tok.kind == TokenKind.IDENT:
            assign = self.simple()
            self.expect(TokenKind.SEMI)
            return assign
        if tok.kind == TokenKind.IF:
            return self.if_stmt()
        if tok.kind == TokenKind.WHILE:
            line = self.advance().line
            self.expect(TokenKind.LPAREN)
            cond = self.expr()
            self.expect(TokenKind.RPAREN)
            return While(cond, self.block(), line)
        if tok.kind == TokenKind.FOR:
            return self.for_stmt()
        if tok.kind == TokenKind.SWITCH:
            return self.switch_stmt()
        if tok.kind == TokenKind.CALL:
            return self.call_stmt()
        if tok.kind == TokenKind.RETURN:
            line = self.advance().line
            if self.at(TokenKind.SEMI):
                self.advance()
                return Return(None, line)
            value = self.expr()
            self.expect(TokenKind.SEMI)
            return Return(value, line)
        if tok.kind == TokenKind.THROW:
            line = self.advance().line
            value = self.expr()
            self.expect(TokenKind.SEMI)
            return Throw(value, line)
        if tok.kind == TokenKind.SKIP:
            line = self.advance().line
            self.expect(TokenKind.SEMI)
            return Skip(line)
        raise ParseError("a statement", tok)

    def simple(self) -> Assign:
        target = self.expect(TokenKind.IDENT)
        index = None
        if self.at(TokenKind.LBRACKET):
            self.advance()
            index = self.expr()
            self.expect(TokenKind.RBRACKET)
        self.expect(TokenKind.ASSIGN)
        value = self.expr()
        return Assign(target.text, index, value, target.line)

    def if_stmt(self) -> If:
        line = self.expect(TokenKind.IF).line
        self.expect(TokenKind.LPAREN)
        cond = self.expr()
        self.expect(TokenKind.RPAREN)
        then = self.block()
        orelse: tuple[Stmt, ...] = ()
        if self.at(TokenKind.ELSE):
            self.advance()
            # else { ... } only; "else if" would need a nested block
            orelse = self.block()
        return If(cond, then, orelse, line)

    def for_stmt(self) -> For:
        line = self.expect(TokenKind.FOR).line
        self.expect(TokenKind.LPAREN)
        init = self.simple()
        self.expect(TokenKind.SEMI)
        cond = self.expr()
        self.expect(TokenKind.SEMI)
        update = self.simple()
        self.expect(TokenKind.RPAREN)
        return For(init, cond, update, self.block(), line)

    def switch_stmt(self) -> Switch:
        line = self.expect(TokenKind.SWITCH).line
        self.expect(TokenKind.LPAREN)
        scrutinee = self.expr()
        self.expect(TokenKind.RPAREN)
        self.expect(TokenKind.LBRACE)
        cases: list[tuple[int, tuple[Stmt, ...]]] = []
        while self.at(TokenKind.CASE):
            self.advance()
            label = int(self.expect(TokenKind.INT).text)
            self.expect(TokenKind.COLON)
            cases.append((label, self.block()))
        default = None
        if self.at(TokenKind.DEFAULT):
            self.advance()
            self.expect(TokenKind.COLON)
            default = self.block()
        self.expect(TokenKind.RBRACE)
        return Switch(scrutinee, tuple(cases), default, line)

    def call_stmt(self) -> Call:
        line = self.expect(TokenKind.CALL).line
        name = self.expect(TokenKind.IDENT).text
        self.expect(TokenKind.LPAREN)
        args: list[Expr] = []
        if not self.at(TokenKind.RPAREN):
            args.append(self.expr())
            while self.at(TokenKind.COMMA):
                self.advance()
                args.append(self.expr())
        self.expect(TokenKind.RPAREN)
        self.expect(TokenKind.SEMI)
        return Call(name, tuple(args), line)

    # -- expressions, precedence climbing --

    def expr(self) -> Expr:
        return self.or_expr()

    def or_expr(self) -> Expr:
        left = self.and_expr()
        while self.at(TokenKind.OR):
            self.advance()
            left = Binary("||", left, self.and_expr())
        return left

    def and_expr(self) -> Expr:
        left = self.eq_expr()
        while self.at(TokenKind.AND):
            self.advance()
            left = Binary("&&", left, self.eq_expr())
        return left

    def eq_expr(self) -> Expr:
        left = self.rel_expr()
        while (tok := self.peek()) is not None and tok.kind in _EQ_OPS:
            self.advance()
            left = Binary(tok.text, left, self.rel_expr())
        return left

    def rel_expr(self) -> Expr:
        left = self.add_expr()
        while (tok := self.peek()) is not None and tok.kind in _CMP_OPS:
            self.advance()
            left = Binary(tok.text, left, self.add_expr())
        return left

    def add_expr(self) -> Expr:
        left = self.mul_expr()
        while (tok := self.peek()) is not None and tok.kind in _ADD_OPS:
            self.advance()
            left = Binary(tok.text, left, self.mul_expr())
        return left

    def mul_expr(self) -> Expr:
        left = self.unary_expr()
        while (tok := self.peek()) is not None and tok.kind in _MUL_OPS:
            self.advance()
            left = Binary(tok.text, left, self.unary_expr())
        return left

    def unary_expr(self) -> Expr:
        tok = self.peek()
        if tok is not None and tok.kind in (TokenKind.NOT, TokenKind.MINUS):
            self.advance()
            return Unary(tok.text, self.unary_expr())
        return self.primary()

    def primary(self) -> Expr:
        tok = self.peek()
        if tok is None:
            raise ParseError("an expression", None)
        if tok.kind == TokenKind.INT:
            self.advance()
            return IntLit(int(tok.text))
        if tok.kind == TokenKind.INPUT:
            self.advance()
            self.expect(TokenKind.LPAREN)
            self.expect(TokenKind.RPAREN)
            return Input()
        if tok.kind == TokenKind.IDENT:
            self.advance()
            if self.at(TokenKind.LBRACKET):
                self.advance()
                index = self.expr()
                self.expect(TokenKind.RBRACKET)
                return Index(tok.text, index)
            return Var(tok.text)
        if tok.kind == TokenKind.LPAREN:
            self.advance()
            inner = self.expr()
            self.expect(TokenKind.RPAREN)
            return inner
        raise ParseError("an expression", tok)


def expr_vars(expr: Expr) -> set[str]:
    """All variable names read by an expression (array base counts)."""
    if isinstance(expr, (IntLit, Input)):
        return set()
    if isinstance(expr, Var):
        return {expr.name}
    if isinstance(expr, Index):
        return {expr.name} | expr_vars(expr.index)
    if isinstance(expr, Unary):
        return expr_vars(expr.operand)
    if isinstance(expr, Binary):
        return expr_vars(expr.left) | expr_vars(expr.right)
    raise TypeError(f"not an expression: {expr!r}")


def _collect_warnings(method: Method) -> list[str]:
    """Flag identifier uses with no parameter or earlier assignment.

    The scan is advisory: statements are visited in source order and a
    definition on any earlier path suffices, so branch-local defs may
    suppress a warning for a sibling branch. Warnings, not errors.
    """
    defined = set(method.params)
    warnings: list[str] = []

    def check(expr: Expr, line: int) -> None:
        for name in sorted(expr_vars(expr)):
            if name not in defined:
                warnings.append(
                    f"line {line}: {name!r} may be used before assignment"
                )

    def visit(stmts: tuple[Stmt, ...]) -> None:
        for s in stmts:
            if isinstance(s, Assign):
                if s.index is not None:
                    check(s.index, s.line)
                    # indexed write reads the array it updates
                    if s.target not in defined:
                        warnings.append(
                            f"line {s.line}: {s.target!r} may be used before assignment"
                        )
                check(s.value, s.line)
                defined.add(s.target)
            elif isinstance(s, If):
                check(s.cond, s.line)
                visit(s.then)
                visit(s.orelse)
            elif isinstance(s, While):
                check(s.cond, s.line)
                visit(s.body)
            elif isinstance(s, For):
                visit((s.init,))
                check(s.cond, s.line)
                visit(s.body)
                visit((s.update,))
            elif isinstance(s, Switch):
                check(s.scrutinee, s.line)
                for _, blk in s.cases:
                    visit(blk)
                if s.default is not None:
                    visit(s.default)
            elif isinstance(s, Call):
                for arg in s.args:
                    check(arg, s.line)
            elif isinstance(s, Return):
                if s.value is not None:
                    check(s.value, s.line)
            elif isinstance(s, Throw):
                check(s.value, s.line)

    visit(method.body)
    return warnings


def parse(tokens: list[Token]) -> Method:
    """Parse a token sequence into a single-method Ast.

    Raises ParseError naming the expected construct and the offending
    token. Use-before-assignment issues are attached as warnings.
    """
    method = _Parser(tokens).method()
    warnings = _collect_warnings(method)
    if warnings:
        method = Method(
            method.name, method.params, method.body, method.line,
            tuple(warnings),
        )
    return method


def parse_source(source: str) -> Method:
    """Convenience: tokenize and parse in one step."""
    return parse(tokenize(source))
