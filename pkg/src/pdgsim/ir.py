"""Statement-typed IR and the Ast-to-IR lowering.

Statements carry one of 18 fixed kinds. The frontend only ever emits a
subset (Identity, Assignment, Goto, If, Invoke, LookupSwitch, Nop,
Return, ReturnVoid, Throw, TableSwitch); the rest are reachable through
hand-written IR text. The CFG uses a virtual exit node whose id is one
past the last statement; it owns no record in `statements`.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum, unique

from . import parser as ast
from .parser import expr_vars


class LowerError(Exception):
    pass


class IrFormatError(Exception):
    pass


@unique
class StatementKind(IntEnum):
    """Fixed-index statement vocabulary; the index doubles as the one-hot
    feature slot, so it must never be reordered."""

    IDENTITY = 0
    ASSIGNMENT = 1
    ABSTRACT = 2
    ABSTRACT_DEFINITION = 3
    BREAKPOINT = 4
    ENTER_MONITOR = 5
    EXIT_MONITOR = 6
    GOTO = 7
    IF = 8
    INVOKE = 9
    LOOKUP_SWITCH = 10
    NOP = 11
    RETURN = 12
    RETURN_VOID = 13
    THROW = 14
    TABLE_SWITCH = 15
    RESERVED16 = 16
    RESERVED17 = 17


NUM_KINDS = len(StatementKind)

_KIND_NAMES = {
    StatementKind.IDENTITY: "Identity",
    StatementKind.ASSIGNMENT: "Assignment",
    StatementKind.ABSTRACT: "Abstract",
    StatementKind.ABSTRACT_DEFINITION: "AbstractDefinition",
    StatementKind.BREAKPOINT: "Breakpoint",
    StatementKind.ENTER_MONITOR: "EnterMonitor",
    StatementKind.EXIT_MONITOR: "ExitMonitor",
    StatementKind.GOTO: "Goto",
    StatementKind.IF: "If",
    StatementKind.INVOKE: "Invoke",
    StatementKind.LOOKUP_SWITCH: "LookupSwitch",
    StatementKind.NOP: "Nop",
    StatementKind.RETURN: "Return",
    StatementKind.RETURN_VOID: "ReturnVoid",
    StatementKind.THROW: "Throw",
    StatementKind.TABLE_SWITCH: "TableSwitch",
    StatementKind.RESERVED16: "Reserved16",
    StatementKind.RESERVED17: "Reserved17",
}
_NAME_KINDS = {name: kind for kind, name in _KIND_NAMES.items()}


def kind_name(kind: StatementKind) -> str:
    return _KIND_NAMES[kind]


def kind_from_name(name: str) -> StatementKind:
    try:
        return _NAME_KINDS[name]
    except KeyError:
        raise IrFormatError(f"unknown statement kind {name!r}") from None


@dataclass(frozen=True)
class IrStatement:
    id: int
    kind: StatementKind
    defs: frozenset[str]
    uses: frozenset[str]
    line: int


@dataclass(frozen=True)
class IrMethod:
    """A lowered method body.

    `cfg_succ` maps statement id to an ordered successor tuple; for If
    the order is (true branch, false branch). `exit_id` is the virtual
    exit (== len(statements)); it has no successors and no record.
    """

    name: str
    statements: tuple[IrStatement, ...]
    cfg_succ: dict[int, tuple[int, ...]]
    entry_id: int
    exit_id: int

    def preds(self) -> dict[int, list[int]]:
        """Predecessor lists over statements plus the virtual exit."""
        result: dict[int, list[int]] = {s.id: [] for s in self.statements}
        result[self.exit_id] = []
        for src, succs in sorted(self.cfg_succ.items()):
            for dst in succs:
                result[dst].append(src)
        return result


def validate_ir(ir: IrMethod) -> None:
    """Check structural invariants; raise IrFormatError on violation."""
    n = len(ir.statements)
    if ir.exit_id != n:
        raise IrFormatError(f"exit id must be {n}, got {ir.exit_id}")
    for i, stmt in enumerate(ir.statements):
        if stmt.id != i:
            raise IrFormatError(f"ids must be dense 0..{n - 1}, found {stmt.id}")
        succs = ir.cfg_succ.get(stmt.id, ())
        if not succs:
            raise IrFormatError(f"statement {stmt.id} has no successor")
        if stmt.kind is StatementKind.IF and len(succs) != 2:
            raise IrFormatError(f"If statement {stmt.id} must have 2 successors")
        if stmt.kind is StatementKind.GOTO and len(succs) != 1:
            raise IrFormatError(f"Goto statement {stmt.id} must have 1 successor")
        for dst in succs:
            if not 0 <= dst <= n:
                raise IrFormatError(f"successor {dst} of {stmt.id} out of range")
    if n and not (0 <= ir.entry_id < n):
        raise IrFormatError(f"entry id {ir.entry_id} out of range")


def _check_reachability(ir: IrMethod) -> None:
    n = len(ir.statements)
    if n == 0:
        return
    seen = {ir.entry_id}
    work = [ir.entry_id]
    while work:
        node = work.pop()
        for succ in ir.cfg_succ.get(node, ()):
            if succ not in seen:
                seen.add(succ)
                work.append(succ)
    for stmt in ir.statements:
        if stmt.id not in seen:
            raise LowerError(
                f"line {stmt.line}: statement unreachable from method entry"
            )
    # reverse reachability from the virtual exit
    preds = ir.preds()
    seen = {ir.exit_id}
    work = [ir.exit_id]
    while work:
        node = work.pop()
        for pred in preds[node]:
            if pred not in seen:
                seen.add(pred)
                work.append(pred)
    for stmt in ir.statements:
        if stmt.id not in seen:
            raise LowerError(
                f"line {stmt.line}: exit unreachable from statement"
            )


def _const_value(expr: ast.Expr) -> int | None:
    """Fold an expression to an int if it has no variable or input reads."""
    if isinstance(expr, ast.IntLit):
        return expr.value
    if isinstance(expr, ast.Unary):
        v = _const_value(expr.operand)
        if v is None:
            return None
        return int(not v) if expr.op == "!" else -v
    if isinstance(expr, ast.Binary):
        lhs = _const_value(expr.left)
        rhs = _const_value(expr.right)
        if lhs is None or rhs is None:
            return None
        op = expr.op
        if op == "+":
            return lhs + rhs
        if op == "-":
            return lhs - rhs
        if op == "*":
            return lhs * rhs
        if op == "/":
            return None if rhs == 0 else int(lhs / rhs)
        if op == "%":
            return None if rhs == 0 else lhs - rhs * int(lhs / rhs)
        if op == "<":
            return int(lhs < rhs)
        if op == "<=":
            return int(lhs <= rhs)
        if op == ">":
            return int(lhs > rhs)
        if op == ">=":
            return int(lhs >= rhs)
        if op == "==":
            return int(lhs == rhs)
        if op == "!=":
            return int(lhs != rhs)
        if op == "&&":
            return int(bool(lhs) and bool(rhs))
        if op == "||":
            return int(bool(lhs) or bool(rhs))
    return None


def _contains_exit(stmts: tuple[ast.Stmt, ...]) -> bool:
    for s in stmts:
        if isinstance(s, (ast.Return, ast.Throw)):
            return True
        if isinstance(s, ast.If) and (
            _contains_exit(s.then) or _contains_exit(s.orelse)
        ):
            return True
        if isinstance(s, (ast.While, ast.For)) and _contains_exit(s.body):
            return True
        if isinstance(s, ast.Switch):
            if any(_contains_exit(blk) for _, blk in s.cases):
                return True
            if s.default is not None and _contains_exit(s.default):
                return True
    return False


class _Lowerer:
    """Emits statements in source order; forward edges are recorded as
    (stmt id, successor slot) patch points filled when the continuation
    appears."""

    def __init__(self) -> None:
        self.kinds: list[StatementKind] = []
        self.defs: list[frozenset[str]] = []
        self.uses: list[frozenset[str]] = []
        self.lines: list[int] = []
        self.succ: list[list[int | None]] = []

    def emit(self, kind: StatementKind, defs: frozenset[str],
             uses: frozenset[str], line: int, n_succ: int) -> int:
        sid = len(self.kinds)
        self.kinds.append(kind)
        self.defs.append(defs)
        self.uses.append(uses)
        self.lines.append(line)
        self.succ.append([None] * n_succ)
        return sid

    def lower_block(
        self, stmts: tuple[ast.Stmt, ...]
    ) -> tuple[int | None, list[tuple[int, int]]]:
        entry: int | None = None
        opens: list[tuple[int, int]] = []
        for s in stmts:
            s_entry, s_opens = self.lower_stmt(s)
            if entry is None:
                entry = s_entry
            for sid, slot in opens:
                self.succ[sid][slot] = s_entry
            opens = s_opens
        return entry, opens

    def lower_stmt(self, s: ast.Stmt) -> tuple[int, list[tuple[int, int]]]:
        if isinstance(s, ast.Assign):
            return self._lower_assign(s)
        if isinstance(s, ast.If):
            return self._lower_if(s)
        if isinstance(s, ast.While):
            return self._lower_loop(s.cond, s.body, None, None, s.line)
        if isinstance(s, ast.For):
            return self._lower_loop(s.cond, s.body, s.init, s.update, s.line)
        if isinstance(s, ast.Switch):
            return self._lower_switch(s)
        if isinstance(s, ast.Call):
            uses = frozenset().union(*(expr_vars(a) for a in s.args)) \
                if s.args else frozenset()
            sid = self.emit(StatementKind.INVOKE, frozenset(), uses, s.line, 1)
            return sid, [(sid, 0)]
        if isinstance(s, ast.Return):
            if s.value is None:
                sid = self.emit(StatementKind.RETURN_VOID, frozenset(),
                                frozenset(), s.line, 1)
            else:
                sid = self.emit(StatementKind.RETURN, frozenset(),
                                frozenset(expr_vars(s.value)), s.line, 1)
            return sid, []  # successor fixed to exit later
        if isinstance(s, ast.Throw):
            sid = self.emit(StatementKind.THROW, frozenset(),
                            frozenset(expr_vars(s.value)), s.line, 1)
            return sid, []
        if isinstance(s, ast.Skip):
            sid = self.emit(StatementKind.NOP, frozenset(), frozenset(),
                            s.line, 1)
            return sid, [(sid, 0)]
        raise TypeError(f"not a statement: {s!r}")

    def _lower_assign(self, s: ast.Assign) -> tuple[int, list[tuple[int, int]]]:
        uses = set(expr_vars(s.value))
        if s.index is not None:
            uses |= expr_vars(s.index)
        sid = self.emit(StatementKind.ASSIGNMENT, frozenset({s.target}),
                        frozenset(uses), s.line, 1)
        return sid, [(sid, 0)]

    def _lower_if(self, s: ast.If) -> tuple[int, list[tuple[int, int]]]:
        if_id = self.emit(StatementKind.IF, frozenset(),
                          frozenset(expr_vars(s.cond)), s.line, 2)
        t_entry, t_opens = self.lower_block(s.then)
        e_entry, e_opens = self.lower_block(s.orelse)
        opens = list(t_opens) + list(e_opens)
        if t_entry is None:
            opens.append((if_id, 0))
        else:
            self.succ[if_id][0] = t_entry
        if e_entry is None:
            opens.append((if_id, 1))
        else:
            self.succ[if_id][1] = e_entry
        return if_id, opens

    def _lower_loop(
        self,
        cond: ast.Expr,
        body: tuple[ast.Stmt, ...],
        init: ast.Assign | None,
        update: ast.Assign | None,
        line: int,
    ) -> tuple[int, list[tuple[int, int]]]:
        # for and while share one shape: [init;] If; body; [update;] Goto
        const = _const_value(cond)
        if const is not None and const != 0 and not _contains_exit(body):
            raise LowerError(
                f"line {line}: loop condition is always true and the body "
                "cannot reach the method exit"
            )
        entry: int | None = None
        if init is not None:
            init_id, _ = self._lower_assign(init)
            entry = init_id
        if_id = self.emit(StatementKind.IF, frozenset(),
                          frozenset(expr_vars(cond)), line, 2)
        if init is not None:
            self.succ[entry][0] = if_id
        else:
            entry = if_id
        b_entry, b_opens = self.lower_block(body)
        back_target: int | None = None
        if update is not None:
            upd_id, _ = self._lower_assign(update)
            back_target = upd_id
        goto_id = self.emit(StatementKind.GOTO, frozenset(), frozenset(),
                            line, 1)
        self.succ[goto_id][0] = if_id
        if update is not None:
            self.succ[back_target][0] = goto_id
        else:
            back_target = goto_id
        for sid, slot in b_opens:
            self.succ[sid][slot] = back_target
        self.succ[if_id][0] = b_entry if b_entry is not None else back_target
        return entry, [(if_id, 1)]

    def _lower_switch(self, s: ast.Switch) -> tuple[int, list[tuple[int, int]]]:
        labels = [label for label, _ in s.cases]
        dense = (
            len(labels) > 0
            and len(set(labels)) == len(labels)
            and max(labels) - min(labels) + 1 == len(labels)
        )
        kind = StatementKind.TABLE_SWITCH if dense else StatementKind.LOOKUP_SWITCH
        # one successor slot per case, plus a trailing default slot
        sw_id = self.emit(kind, frozenset(), frozenset(expr_vars(s.scrutinee)),
                          s.line, len(s.cases) + 1)
        opens: list[tuple[int, int]] = []
        for slot, (_, block) in enumerate(s.cases):
            c_entry, c_opens = self.lower_block(block)
            if c_entry is None:
                opens.append((sw_id, slot))
            else:
                self.succ[sw_id][slot] = c_entry
            opens.extend(c_opens)  # no fall-through between cases
        default_slot = len(s.cases)
        if s.default is None:
            opens.append((sw_id, default_slot))
        else:
            d_entry, d_opens = self.lower_block(s.default)
            if d_entry is None:
                opens.append((sw_id, default_slot))
            else:
                self.succ[sw_id][default_slot] = d_entry
            opens.extend(d_opens)
        return sw_id, opens


def lower_to_ir(method: ast.Method) -> IrMethod:
    """Lower a parsed method to IR, assigning dense ids in source order.

    Raises LowerError for statements unreachable from entry and for
    constant-true loops whose body cannot reach the exit.
    """
    low = _Lowerer()
    param_opens: list[tuple[int, int]] = []
    for name in method.params:
        sid = low.emit(StatementKind.IDENTITY, frozenset({name}), frozenset(),
                       method.line, 1)
        for pid, slot in param_opens:
            low.succ[pid][slot] = sid
        param_opens = [(sid, 0)]
    b_entry, b_opens = low.lower_block(method.body)
    if b_entry is not None:
        for pid, slot in param_opens:
            low.succ[pid][slot] = b_entry
    else:
        b_opens = b_opens + param_opens
    exit_id = len(low.kinds)
    for sid, slot in b_opens:
        low.succ[sid][slot] = exit_id
    # Return/ReturnVoid/Throw always jump straight to exit
    for sid, kind in enumerate(low.kinds):
        if kind in (StatementKind.RETURN, StatementKind.RETURN_VOID,
                    StatementKind.THROW):
            low.succ[sid][0] = exit_id
    statements = tuple(
        IrStatement(sid, low.kinds[sid], low.defs[sid], low.uses[sid],
                    low.lines[sid])
        for sid in range(len(low.kinds))
    )
    cfg_succ = {}
    for sid in range(len(low.kinds)):
        succs = low.succ[sid]
        if any(d is None for d in succs):
            raise LowerError(f"internal: unpatched successor on statement {sid}")
        cfg_succ[sid] = tuple(succs)
    ir = IrMethod(method.name, statements, cfg_succ,
                  0 if statements else exit_id, exit_id)
    validate_ir(ir)
    _check_reachability(ir)
    return ir


def lower_source(source: str, name: str | None = None) -> IrMethod:
    """Tokenize, parse and lower in one step."""
    method = ast.parse_source(source)
    ir = lower_to_ir(method)
    if name is not None:
        ir = IrMethod(name, ir.statements, ir.cfg_succ, ir.entry_id,
                      ir.exit_id)
    return ir


# --- debug text format -------------------------------------------------------

def format_ir(ir: IrMethod) -> str:
    """One statement per line: `<id> <KIND> defs=[..] uses=[..] succ=[..]`."""
    lines = []
    for stmt in ir.statements:
        defs = ",".join(sorted(stmt.defs))
        uses = ",".join(sorted(stmt.uses))
        succ = ",".join(str(d) for d in ir.cfg_succ[stmt.id])
        lines.append(
            f"{stmt.id} {kind_name(stmt.kind)} defs=[{defs}] uses=[{uses}] "
            f"succ=[{succ}]"
        )
    return "\n".join(lines) + ("\n" if lines else "")


def _split_bracket_list(text: str, what: str, lineno: int) -> list[str]:
    prefix = f"{what}=["
    if not text.startswith(prefix) or not text.endswith("]"):
        raise IrFormatError(f"line {lineno}: malformed {what} field {text!r}")
    inner = text[len(prefix):-1]
    return [p for p in inner.split(",") if p]


def parse_ir_text(text: str, name: str = "ingested") -> IrMethod:
    """Parse the debug text format back into an IrMethod.

    Statement lines must appear in id order starting at 0. Source line
    numbers are not part of the format; they are recorded as 0.
    """
    statements: list[IrStatement] = []
    cfg_succ: dict[int, tuple[int, ...]] = {}
    lineno = 0
    for raw in text.splitlines():
        lineno += 1
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 5:
            raise IrFormatError(f"line {lineno}: expected 5 fields, got {len(parts)}")
        sid_text, kind_text, defs_text, uses_text, succ_text = parts
        try:
            sid = int(sid_text)
        except ValueError:
            raise IrFormatError(f"line {lineno}: bad statement id {sid_text!r}") \
                from None
        if sid != len(statements):
            raise IrFormatError(
                f"line {lineno}: expected id {len(statements)}, got {sid}"
            )
        kind = kind_from_name(kind_text)
        defs = frozenset(_split_bracket_list(defs_text, "defs", lineno))
        uses = frozenset(_split_bracket_list(uses_text, "uses", lineno))
        try:
            succs = tuple(
                int(p) for p in _split_bracket_list(succ_text, "succ", lineno)
            )
        except ValueError:
            raise IrFormatError(f"line {lineno}: bad successor list") from None
        statements.append(IrStatement(sid, kind, defs, uses, 0))
        cfg_succ[sid] = succs
    ir = IrMethod(name, tuple(statements), cfg_succ,
                  0 if statements else 0, len(statements))
    validate_ir(ir)
    return ir
