"""Labeled clone / non-clone corpus generation.

Clone pairs come from semantics-preserving source transforms (rename,
reorder, loop_convert, dead_code, reassociate) chained 1 to 3 deep, or
from hand-written variant pairs inside one functionality group.
Non-clone pairs sample across groups. Everything is driven by one
seeded generator, so a corpus is a pure function of its seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import parser as ast
from .ir import LowerError, lower_source
from .parser import expr_vars
from .training import split_indices


class NotApplicable(Exception):
    pass


class InsufficientSeeds(Exception):
    pass


class CorpusError(Exception):
    pass


TRANSFORM_KINDS = ("rename", "reorder", "loop_convert", "dead_code",
                   "reassociate")


# --- unparser ----------------------------------------------------------------

_PREC = {"||": 1, "&&": 2, "==": 3, "!=": 3, "<": 4, "<=": 4, ">": 4,
         ">=": 4, "+": 5, "-": 5, "*": 6, "/": 6, "%": 6}
_UNARY_PREC = 7


def format_expr(e: ast.Expr, min_prec: int = 0) -> str:
    if isinstance(e, ast.IntLit):
        return str(e.value)
    if isinstance(e, ast.Var):
        return e.name
    if isinstance(e, ast.Index):
        return f"{e.name}[{format_expr(e.index)}]"
    if isinstance(e, ast.Input):
        return "input()"
    if isinstance(e, ast.Unary):
        text = e.op + format_expr(e.operand, _UNARY_PREC)
        return f"({text})" if _UNARY_PREC < min_prec else text
    if isinstance(e, ast.Binary):
        p = _PREC[e.op]
        text = (f"{format_expr(e.left, p)} {e.op} "
                f"{format_expr(e.right, p + 1)}")
        return f"({text})" if p < min_prec else text
    raise TypeError(f"not an expression: {e!r}")


def _format_simple(s: ast.Assign) -> str:
    if s.index is not None:
        return f"{s.target}[{format_expr(s.index)}] = {format_expr(s.value)}"
    return f"{s.target} = {format_expr(s.value)}"


def _format_block(stmts: tuple[ast.Stmt, ...], indent: int) -> list[str]:
    pad = "    " * indent
    lines: list[str] = []
    for s in stmts:
        if isinstance(s, ast.Assign):
            lines.append(f"{pad}{_format_simple(s)};")
        elif isinstance(s, ast.If):
            lines.append(f"{pad}if ({format_expr(s.cond)}) {{")
            lines.extend(_format_block(s.then, indent + 1))
            if s.orelse:
                lines.append(f"{pad}}} else {{")
                lines.extend(_format_block(s.orelse, indent + 1))
            lines.append(f"{pad}}}")
        elif isinstance(s, ast.While):
            lines.append(f"{pad}while ({format_expr(s.cond)}) {{")
            lines.extend(_format_block(s.body, indent + 1))
            lines.append(f"{pad}}}")
        elif isinstance(s, ast.For):
            head = (f"{_format_simple(s.init)}; {format_expr(s.cond)}; "
                    f"{_format_simple(s.update)}")
            lines.append(f"{pad}for ({head}) {{")
            lines.extend(_format_block(s.body, indent + 1))
            lines.append(f"{pad}}}")
        elif isinstance(s, ast.Switch):
            lines.append(f"{pad}switch ({format_expr(s.scrutinee)}) {{")
            for label, block in s.cases:
                lines.append(f"{pad}    case {label}: {{")
                lines.extend(_format_block(block, indent + 2))
                lines.append(f"{pad}    }}")
            if s.default is not None:
                lines.append(f"{pad}    default: {{")
                lines.extend(_format_block(s.default, indent + 2))
                lines.append(f"{pad}    }}")
            lines.append(f"{pad}}}")
        elif isinstance(s, ast.Call):
            args = ", ".join(format_expr(a) for a in s.args)
            lines.append(f"{pad}call {s.name}({args});")
        elif isinstance(s, ast.Return):
            if s.value is None:
                lines.append(f"{pad}return;")
            else:
                lines.append(f"{pad}return {format_expr(s.value)};")
        elif isinstance(s, ast.Throw):
            lines.append(f"{pad}throw {format_expr(s.value)};")
        elif isinstance(s, ast.Skip):
            lines.append(f"{pad}skip;")
        else:
            raise TypeError(f"not a statement: {s!r}")
    return lines


def format_method(m: ast.Method) -> str:
    header = f"def {m.name}({', '.join(m.params)}) {{"
    return "\n".join([header, *_format_block(m.body, 1), "}"]) + "\n"


# --- transform helpers -------------------------------------------------------

def _rename_expr(e: ast.Expr, m: dict[str, str]) -> ast.Expr:
    if isinstance(e, (ast.IntLit, ast.Input)):
        return e
    if isinstance(e, ast.Var):
        return ast.Var(m.get(e.name, e.name))
    if isinstance(e, ast.Index):
        return ast.Index(m.get(e.name, e.name), _rename_expr(e.index, m))
    if isinstance(e, ast.Unary):
        return ast.Unary(e.op, _rename_expr(e.operand, m))
    return ast.Binary(e.op, _rename_expr(e.left, m), _rename_expr(e.right, m))


def _rename_stmts(stmts: tuple[ast.Stmt, ...],
                  m: dict[str, str]) -> tuple[ast.Stmt, ...]:
    out: list[ast.Stmt] = []
    for s in stmts:
        if isinstance(s, ast.Assign):
            out.append(ast.Assign(
                m.get(s.target, s.target),
                None if s.index is None else _rename_expr(s.index, m),
                _rename_expr(s.value, m), s.line))
        elif isinstance(s, ast.If):
            out.append(ast.If(_rename_expr(s.cond, m),
                              _rename_stmts(s.then, m),
                              _rename_stmts(s.orelse, m), s.line))
        elif isinstance(s, ast.While):
            out.append(ast.While(_rename_expr(s.cond, m),
                                 _rename_stmts(s.body, m), s.line))
        elif isinstance(s, ast.For):
            init, = _rename_stmts((s.init,), m)
            update, = _rename_stmts((s.update,), m)
            out.append(ast.For(init, _rename_expr(s.cond, m), update,
                               _rename_stmts(s.body, m), s.line))
        elif isinstance(s, ast.Switch):
            cases = tuple((label, _rename_stmts(block, m))
                          for label, block in s.cases)
            default = None if s.default is None \
                else _rename_stmts(s.default, m)
            out.append(ast.Switch(_rename_expr(s.scrutinee, m), cases,
                                  default, s.line))
        elif isinstance(s, ast.Call):
            out.append(ast.Call(
                s.name, tuple(_rename_expr(a, m) for a in s.args), s.line))
        elif isinstance(s, ast.Return):
            value = None if s.value is None else _rename_expr(s.value, m)
            out.append(ast.Return(value, s.line))
        elif isinstance(s, ast.Throw):
            out.append(ast.Throw(_rename_expr(s.value, m), s.line))
        else:
            out.append(s)
    return tuple(out)


def _all_variables(method: ast.Method) -> list[str]:
    """Variable names in first-occurrence order (params first)."""
    seen: list[str] = list(method.params)

    def note(name: str) -> None:
        if name not in seen:
            seen.append(name)

    def visit_expr(e: ast.Expr) -> None:
        for name in sorted(expr_vars(e)):
            note(name)

    def visit(stmts: tuple[ast.Stmt, ...]) -> None:
        for s in stmts:
            if isinstance(s, ast.Assign):
                note(s.target)
                if s.index is not None:
                    visit_expr(s.index)
                visit_expr(s.value)
            elif isinstance(s, ast.If):
                visit_expr(s.cond)
                visit(s.then)
                visit(s.orelse)
            elif isinstance(s, ast.While):
                visit_expr(s.cond)
                visit(s.body)
            elif isinstance(s, ast.For):
                visit((s.init,))
                visit_expr(s.cond)
                visit(s.body)
                visit((s.update,))
            elif isinstance(s, ast.Switch):
                visit_expr(s.scrutinee)
                for _, block in s.cases:
                    visit(block)
                if s.default is not None:
                    visit(s.default)
            elif isinstance(s, ast.Call):
                for a in s.args:
                    visit_expr(a)
            elif isinstance(s, ast.Return) and s.value is not None:
                visit_expr(s.value)
            elif isinstance(s, ast.Throw):
                visit_expr(s.value)
    visit(method.body)
    return seen


def _map_blocks(stmts: tuple[ast.Stmt, ...], f) -> tuple[ast.Stmt, ...]:
    """Rebuild every block bottom-up, applying f to each block tuple
    (including empty else branches); the method body is mapped last by
    the caller."""
    out: list[ast.Stmt] = []
    for s in stmts:
        if isinstance(s, ast.If):
            s = ast.If(s.cond, _map_blocks(s.then, f),
                       _map_blocks(s.orelse, f), s.line)
        elif isinstance(s, ast.While):
            s = ast.While(s.cond, _map_blocks(s.body, f), s.line)
        elif isinstance(s, ast.For):
            s = ast.For(s.init, s.cond, s.update,
                        _map_blocks(s.body, f), s.line)
        elif isinstance(s, ast.Switch):
            cases = tuple((label, _map_blocks(block, f))
                          for label, block in s.cases)
            default = None if s.default is None \
                else _map_blocks(s.default, f)
            s = ast.Switch(s.scrutinee, cases, default, s.line)
        out.append(s)
    return f(tuple(out))


def _rewrite_blocks(method: ast.Method, f) -> ast.Method:
    body = _map_blocks(method.body, f)
    return ast.Method(method.name, method.params, body, method.line)


def _stmt_effects(s: ast.Stmt) -> tuple[set[str], set[str], bool] | None:
    """(defs, uses, has_side_effect) for flat statements; None for
    control structures, which never move."""
    if isinstance(s, ast.Assign):
        uses = set(expr_vars(s.value))
        if s.index is not None:
            # an indexed write reads the rest of the array it updates
            uses |= expr_vars(s.index) | {s.target}
        return {s.target}, uses, _contains_input_stmt(s)
    if isinstance(s, ast.Call):
        uses = set()
        for a in s.args:
            uses |= expr_vars(a)
        return set(), uses, True
    if isinstance(s, ast.Skip):
        return set(), set(), False
    return None


def _contains_input(e: ast.Expr) -> bool:
    if isinstance(e, ast.Input):
        return True
    if isinstance(e, ast.Index):
        return _contains_input(e.index)
    if isinstance(e, ast.Unary):
        return _contains_input(e.operand)
    if isinstance(e, ast.Binary):
        return _contains_input(e.left) or _contains_input(e.right)
    return False


def _contains_input_stmt(s: ast.Assign) -> bool:
    if s.index is not None and _contains_input(s.index):
        return True
    return _contains_input(s.value)


def _swappable(a: ast.Stmt, b: ast.Stmt) -> bool:
    ea = _stmt_effects(a)
    eb = _stmt_effects(b)
    if ea is None or eb is None:
        return False
    defs_a, uses_a, fx_a = ea
    defs_b, uses_b, fx_b = eb
    if fx_a and fx_b:
        return False
    return not (defs_a & defs_b or defs_a & uses_b or uses_a & defs_b)


def _fresh_name(method: ast.Method, prefix: str) -> str:
    taken = set(_all_variables(method))
    k = 0
    while f"{prefix}{k}" in taken:
        k += 1
    return f"{prefix}{k}"


def _dead_limit(block: tuple[ast.Stmt, ...]) -> int:
    """Insertion past a Return/Throw would be unreachable."""
    for i, s in enumerate(block):
        if isinstance(s, (ast.Return, ast.Throw)):
            return i
    return len(block)


# --- the five transforms -----------------------------------------------------

def _transform_rename(method: ast.Method, rng: np.random.Generator
                      ) -> ast.Method:
    names = _all_variables(method)
    if not names:
        raise NotApplicable("no variables to rename")
    perm = rng.permutation(len(names))
    mapping = {name: f"v{int(perm[i])}" for i, name in enumerate(names)}
    params = tuple(mapping[p] for p in method.params)
    return ast.Method(method.name, params,
                      _rename_stmts(method.body, mapping), method.line)


def _transform_reorder(method: ast.Method, rng: np.random.Generator
                       ) -> ast.Method:
    count = 0

    def count_sites(block: tuple[ast.Stmt, ...]) -> tuple[ast.Stmt, ...]:
        nonlocal count
        for i in range(len(block) - 1):
            if _swappable(block[i], block[i + 1]):
                count += 1
        return block

    _rewrite_blocks(method, count_sites)
    if count == 0:
        raise NotApplicable("no adjacent independent statements")
    target = int(rng.integers(count))
    seen = 0

    def swap_at(block: tuple[ast.Stmt, ...]) -> tuple[ast.Stmt, ...]:
        nonlocal seen
        items = list(block)
        for i in range(len(items) - 1):
            if _swappable(items[i], items[i + 1]):
                if seen == target:
                    items[i], items[i + 1] = items[i + 1], items[i]
                    seen += 1
                    return tuple(items)
                seen += 1
        return tuple(items)

    return _rewrite_blocks(method, swap_at)


def _loop_sites_in(block: tuple[ast.Stmt, ...]) -> list[int]:
    sites = []
    for i, s in enumerate(block):
        if isinstance(s, ast.For):
            sites.append(i)
        elif (isinstance(s, ast.While) and i >= 1
              and isinstance(block[i - 1], ast.Assign)
              and s.body and isinstance(s.body[-1], ast.Assign)):
            sites.append(i)
    return sites


def _transform_loop_convert(method: ast.Method, rng: np.random.Generator
                            ) -> ast.Method:
    count = 0

    def count_sites(block: tuple[ast.Stmt, ...]) -> tuple[ast.Stmt, ...]:
        nonlocal count
        count += len(_loop_sites_in(block))
        return block

    _rewrite_blocks(method, count_sites)
    if count == 0:
        raise NotApplicable("no convertible loop")
    target = int(rng.integers(count))
    seen = 0

    def convert_at(block: tuple[ast.Stmt, ...]) -> tuple[ast.Stmt, ...]:
        nonlocal seen
        for i in _loop_sites_in(block):
            if seen == target:
                seen += 1
                s = block[i]
                if isinstance(s, ast.For):
                    # for -> init; while with the update as last body stmt
                    loop = ast.While(s.cond, s.body + (s.update,), s.line)
                    return block[:i] + (s.init, loop) + block[i + 1:]
                init = block[i - 1]
                update = s.body[-1]
                loop = ast.For(init, s.cond, update, s.body[:-1], s.line)
                return block[:i - 1] + (loop,) + block[i + 1:]
            seen += 1
        return block

    return _rewrite_blocks(method, convert_at)


def _transform_dead_code(method: ast.Method, rng: np.random.Generator
                         ) -> ast.Method:
    count = 0

    def count_sites(block: tuple[ast.Stmt, ...]) -> tuple[ast.Stmt, ...]:
        nonlocal count
        count += _dead_limit(block) + 1
        return block

    _rewrite_blocks(method, count_sites)
    target = int(rng.integers(count))
    if int(rng.integers(2)) == 0:
        inserted: ast.Stmt = ast.Skip(0)
    else:
        name = _fresh_name(method, "d")
        inserted = ast.Assign(name, None, ast.IntLit(int(rng.integers(10))), 0)
    seen = 0

    def insert_at(block: tuple[ast.Stmt, ...]) -> tuple[ast.Stmt, ...]:
        nonlocal seen
        limit = _dead_limit(block)
        if seen <= target <= seen + limit:
            pos = target - seen
            seen += limit + 1
            return block[:pos] + (inserted,) + block[pos:]
        seen += limit + 1
        return block

    return _rewrite_blocks(method, insert_at)


_COMMUTATIVE = ("+", "*", "==", "!=", "&&", "||")


def _reassoc_walk(e: ast.Expr, visit) -> ast.Expr:
    """Post-order rebuild; visit may swap a Binary node's children."""
    if isinstance(e, (ast.IntLit, ast.Var, ast.Input)):
        return e
    if isinstance(e, ast.Index):
        return ast.Index(e.name, _reassoc_walk(e.index, visit))
    if isinstance(e, ast.Unary):
        return ast.Unary(e.op, _reassoc_walk(e.operand, visit))
    node = ast.Binary(e.op, _reassoc_walk(e.left, visit),
                      _reassoc_walk(e.right, visit))
    return visit(node)


def _map_stmt_exprs(stmts: tuple[ast.Stmt, ...], fe) -> tuple[ast.Stmt, ...]:
    out: list[ast.Stmt] = []
    for s in stmts:
        if isinstance(s, ast.Assign):
            index = None if s.index is None else fe(s.index)
            out.append(ast.Assign(s.target, index, fe(s.value), s.line))
        elif isinstance(s, ast.If):
            out.append(ast.If(fe(s.cond), _map_stmt_exprs(s.then, fe),
                              _map_stmt_exprs(s.orelse, fe), s.line))
        elif isinstance(s, ast.While):
            out.append(ast.While(fe(s.cond), _map_stmt_exprs(s.body, fe),
                                 s.line))
        elif isinstance(s, ast.For):
            init, = _map_stmt_exprs((s.init,), fe)
            update, = _map_stmt_exprs((s.update,), fe)
            out.append(ast.For(init, fe(s.cond), update,
                               _map_stmt_exprs(s.body, fe), s.line))
        elif isinstance(s, ast.Switch):
            cases = tuple((label, _map_stmt_exprs(block, fe))
                          for label, block in s.cases)
            default = None if s.default is None \
                else _map_stmt_exprs(s.default, fe)
            out.append(ast.Switch(fe(s.scrutinee), cases, default, s.line))
        elif isinstance(s, ast.Call):
            out.append(ast.Call(s.name, tuple(fe(a) for a in s.args), s.line))
        elif isinstance(s, ast.Return):
            value = None if s.value is None else fe(s.value)
            out.append(ast.Return(value, s.line))
        elif isinstance(s, ast.Throw):
            out.append(ast.Throw(fe(s.value), s.line))
        else:
            out.append(s)
    return tuple(out)


def _transform_reassociate(method: ast.Method, rng: np.random.Generator
                           ) -> ast.Method:
    def eligible(node: ast.Binary) -> bool:
        # commuting operand order around input() would reorder reads
        return (node.op in _COMMUTATIVE
                and not _contains_input(node.left)
                and not _contains_input(node.right))

    count = 0

    def count_visit(node: ast.Binary) -> ast.Binary:
        nonlocal count
        if eligible(node):
            count += 1
        return node

    _map_stmt_exprs(method.body,
                    lambda e: _reassoc_walk(e, count_visit))
    if count == 0:
        raise NotApplicable("no commutative operator")
    target = int(rng.integers(count))
    seen = 0

    def swap_visit(node: ast.Binary) -> ast.Binary:
        nonlocal seen
        if eligible(node):
            if seen == target:
                seen += 1
                return ast.Binary(node.op, node.right, node.left)
            seen += 1
        return node

    body = _map_stmt_exprs(method.body,
                           lambda e: _reassoc_walk(e, swap_visit))
    return ast.Method(method.name, method.params, body, method.line)


_TRANSFORMS = {
    "rename": _transform_rename,
    "reorder": _transform_reorder,
    "loop_convert": _transform_loop_convert,
    "dead_code": _transform_dead_code,
    "reassociate": _transform_reassociate,
}


def transform(program: str, kind: str, rng: np.random.Generator) -> str:
    """Apply one semantics-preserving transform; the result parses and
    lowers. Raises NotApplicable when the program has no legal site."""
    if kind not in _TRANSFORMS:
        raise ValueError(f"unknown transform {kind!r}")
    method = ast.parse_source(program)
    out = format_method(_TRANSFORMS[kind](method, rng))
    try:
        lower_source(out)
    except LowerError as exc:
        # e.g. dead code landing in a spot unreachable from entry
        raise NotApplicable(str(exc)) from None
    return out


def transform_chain(program: str, rng: np.random.Generator,
                    min_len: int = 1, max_len: int = 3
                    ) -> tuple[str, list[str]]:
    """Apply 1..3 transforms with uniformly sampled kinds, retrying a
    step with a different kind when one has no legal site."""
    length = int(rng.integers(min_len, max_len + 1))
    applied: list[str] = []
    current = program
    for _ in range(length):
        candidates = list(TRANSFORM_KINDS)
        while candidates:
            kind = candidates[int(rng.integers(len(candidates)))]
            try:
                current = transform(current, kind, rng)
                applied.append(kind)
                break
            except NotApplicable:
                candidates.remove(kind)
        else:
            raise NotApplicable("every transform kind failed")
    return current, applied


# --- built-in seed programs --------------------------------------------------

BUILT_IN_GROUPS: dict[str, tuple[str, ...]] = {
    "array_sum": (
        """def array_sum(a, n) {
    s = 0;
    i = 0;
    while (i < n) {
        s = s + a[i];
        i = i + 1;
    }
    return s;
}
""",
        """def array_sum(a, n) {
    t = 0;
    for (k = n - 1; k >= 0; k = k - 1) {
        t = t + a[k];
    }
    return t;
}
""",
    ),
    "max_scan": (
        """def max_scan(a, n) {
    m = a[0];
    i = 1;
    while (i < n) {
        if (a[i] > m) {
            m = a[i];
        }
        i = i + 1;
    }
    return m;
}
""",
        """def max_scan(a, n) {
    best = 0;
    for (j = 1; j < n; j = j + 1) {
        if (a[j] > a[best]) {
            best = j;
        }
    }
    return a[best];
}
""",
    ),
    "gcd_loop": (
        """def gcd_loop(a, b) {
    while (b != 0) {
        t = b;
        b = a % b;
        a = t;
    }
    return a;
}
""",
        """def gcd_loop(x, y) {
    while (x != y) {
        if (x > y) {
            x = x - y;
        } else {
            y = y - x;
        }
    }
    return x;
}
""",
    ),
    "linear_search": (
        """def linear_search(a, n, key) {
    i = 0;
    while (i < n) {
        if (a[i] == key) {
            return i;
        }
        i = i + 1;
    }
    return -1;
}
""",
        """def linear_search(a, n, key) {
    found = -1;
    for (p = 0; p < n; p = p + 1) {
        if (a[p] == key) {
            if (found < 0) {
                found = p;
            }
        }
    }
    return found;
}
""",
    ),
    "counting_loop": (
        """def counting_loop(a, n, limit) {
    c = 0;
    i = 0;
    while (i < n) {
        if (a[i] > limit) {
            c = c + 1;
        }
        i = i + 1;
    }
    return c;
}
""",
        """def counting_loop(a, n, limit) {
    total = 0;
    for (q = 0; q < n; q = q + 1) {
        flag = 0;
        if (a[q] > limit) {
            flag = 1;
        }
        total = total + flag;
    }
    return total;
}
""",
    ),
    "nested_accumulate": (
        """def nested_accumulate(n, m) {
    acc = 0;
    i = 0;
    while (i < n) {
        j = 0;
        while (j < m) {
            acc = acc + i * j;
            j = j + 1;
        }
        i = i + 1;
    }
    return acc;
}
""",
        """def nested_accumulate(n, m) {
    s = 0;
    for (r = 0; r < n; r = r + 1) {
        for (c = 0; c < m; c = c + 1) {
            s = s + r * c;
        }
    }
    return s;
}
""",
    ),
    "classify_switch": (
        """def classify_switch(code) {
    kind = 0;
    switch (code) {
        case 1: {
            kind = 10;
        }
        case 2: {
            kind = 20;
        }
        case 3: {
            kind = 30;
        }
        default: {
            kind = -1;
        }
    }
    return kind;
}
""",
        """def classify_switch(code) {
    out = -1;
    switch (code) {
        case 10: {
            out = 1;
        }
        case 20: {
            out = 2;
        }
        case 40: {
            out = 4;
        }
    }
    if (out < 0) {
        out = 0;
    }
    return out;
}
""",
    ),
    "checked_div": (
        """def checked_div(a, b) {
    if (b == 0) {
        throw 1;
    }
    q = a / b;
    return q;
}
""",
        """def checked_div(a, b) {
    if (b == 0) {
        call report_error(b);
        throw 2;
    }
    q = 0;
    r = a;
    while (r >= b) {
        r = r - b;
        q = q + 1;
    }
    return q;
}
""",
    ),
    "read_accumulate": (
        """def read_accumulate(k) {
    s = 0;
    i = 0;
    while (i < k) {
        x = input();
        s = s + x;
        i = i + 1;
    }
    return s;
}
""",
        """def read_accumulate(k) {
    total = 0;
    for (i = 0; i < k; i = i + 1) {
        total = total + input();
    }
    call log_value(total);
    return total;
}
""",
    ),
}


@dataclass(frozen=True)
class LabeledPair:
    source_a: str
    source_b: str
    label: int
    provenance: str


def generate_dataset(groups: dict[str, tuple[str, ...]], n_pairs: int,
                     rng: np.random.Generator) -> list[LabeledPair]:
    """Balanced corpus: ceil(n/2) clone pairs (within-group variants or
    transform chains) and floor(n/2) cross-group non-clone pairs."""
    names = list(groups)
    if len(names) < 2 or any(len(groups[g]) < 1 for g in names):
        raise InsufficientSeeds("need >= 2 groups, each with >= 1 seed")
    pairs: list[LabeledPair] = []
    n_clone = (n_pairs + 1) // 2
    for _ in range(n_clone):
        group = names[int(rng.integers(len(names)))]
        variants = groups[group]
        if len(variants) >= 2 and rng.random() < 0.5:
            i, j = rng.choice(len(variants), size=2, replace=False)
            pairs.append(LabeledPair(variants[int(i)], variants[int(j)], 1,
                                     f"variants({group})"))
        else:
            src = variants[int(rng.integers(len(variants)))]
            out, chain = transform_chain(src, rng)
            pairs.append(LabeledPair(src, out, 1,
                                     f"chain({group}):{'+'.join(chain)}"))
    for _ in range(n_pairs - n_clone):
        gi, gj = rng.choice(len(names), size=2, replace=False)
        ga, gb = names[int(gi)], names[int(gj)]
        src_a = groups[ga][int(rng.integers(len(groups[ga])))]
        src_b = groups[gb][int(rng.integers(len(groups[gb])))]
        if rng.random() < 0.5:
            src_a, _ = transform_chain(src_a, rng)
        if rng.random() < 0.5:
            src_b, _ = transform_chain(src_b, rng)
        pairs.append(LabeledPair(src_a, src_b, 0,
                                 f"distinct-functionality({ga} vs {gb})"))
    return pairs


# --- corpus directory layout -------------------------------------------------

def write_corpus(pairs: list[LabeledPair], outdir: str | Path,
                 seed: int) -> None:
    """pairs/<id>/{a.src, b.src, meta.json} plus index.json with the
    70/15/15 split assignment."""
    root = Path(outdir)
    (root / "pairs").mkdir(parents=True, exist_ok=True)
    ids = [f"{i:04d}" for i in range(len(pairs))]
    for pid, pair in zip(ids, pairs):
        pdir = root / "pairs" / pid
        pdir.mkdir(exist_ok=True)
        (pdir / "a.src").write_text(pair.source_a)
        (pdir / "b.src").write_text(pair.source_b)
        meta = {"label": pair.label, "provenance": pair.provenance}
        (pdir / "meta.json").write_text(
            json.dumps(meta, sort_keys=True, separators=(",", ":")) + "\n")
    train, val, test = split_indices(len(pairs), seed)
    split_of = {}
    for i in train:
        split_of[ids[i]] = "train"
    for i in val:
        split_of[ids[i]] = "val"
    for i in test:
        split_of[ids[i]] = "test"
    index = {"pairs": [{"id": pid, "split": split_of[pid]} for pid in ids]}
    (root / "index.json").write_text(
        json.dumps(index, sort_keys=True, separators=(",", ":")) + "\n")


def load_corpus(indir: str | Path
                ) -> tuple[list[LabeledPair],
                           tuple[list[int], list[int], list[int]]]:
    """Read a corpus directory back: pairs in index order plus the
    (train, val, test) position lists."""
    root = Path(indir)
    index_path = root / "index.json"
    if not index_path.is_file():
        raise CorpusError(f"{index_path}: missing index.json")
    try:
        index = json.loads(index_path.read_text())
    except json.JSONDecodeError as exc:
        raise CorpusError(f"{index_path}: {exc}") from None
    entries = index.get("pairs")
    if not isinstance(entries, list) or not entries:
        raise CorpusError(f"{index_path}: 'pairs' must be a nonempty array")
    pairs: list[LabeledPair] = []
    split: dict[str, list[int]] = {"train": [], "val": [], "test": []}
    for pos, entry in enumerate(entries):
        if not isinstance(entry, dict) or "id" not in entry \
                or entry.get("split") not in split:
            raise CorpusError(f"{index_path}: bad entry at position {pos}")
        pdir = root / "pairs" / entry["id"]
        try:
            source_a = (pdir / "a.src").read_text()
            source_b = (pdir / "b.src").read_text()
            meta = json.loads((pdir / "meta.json").read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise CorpusError(f"{pdir}: {exc}") from None
        if not isinstance(meta, dict) or meta.get("label") not in (0, 1):
            raise CorpusError(f"{pdir}/meta.json: label must be 0 or 1")
        pairs.append(LabeledPair(source_a, source_b, meta["label"],
                                 str(meta.get("provenance", ""))))
        split[entry["split"]].append(pos)
    return pairs, (split["train"], split["val"], split["test"])
