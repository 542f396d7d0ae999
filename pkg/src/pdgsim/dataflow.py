"""Dependence analyses over the IR and PDG assembly.

Post-dominators come from the standard iterative dominator algorithm run
on the reverse CFG. Control dependences are read off the post-dominator
tree by walking each CFG edge's target up the tree; data dependences
come from a reaching-definitions fixpoint.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from .ir import IrMethod, StatementKind


class UnreachableExit(Exception):
    pass


@dataclass(frozen=True)
class PostDomTree:
    """ipdom maps every statement id to its immediate post-dominator; the
    virtual exit is the root and has no entry."""

    ipdom: dict[int, int]
    exit_id: int


@dataclass(frozen=True)
class ReachInfo:
    """Per-statement reaching-definition sets of (variable, def id)."""

    in_defs: dict[int, frozenset[tuple[str, int]]]
    out_defs: dict[int, frozenset[tuple[str, int]]]


@dataclass(frozen=True)
class PdgNode:
    id: int
    kind: StatementKind
    line: int


@dataclass(frozen=True)
class Pdg:
    """Program dependence graph: statements plus control and data edges.

    Edges never include the virtual exit and never self-loop. A data
    edge (src, dst, v) records a def of v at src reaching a use at dst.
    The name is a debugging label; it is not serialized and does not
    participate in equality.
    """

    nodes: tuple[PdgNode, ...]
    control_edges: frozenset[tuple[int, int]]
    data_edges: frozenset[tuple[int, int, str]]
    name: str = field(default="", compare=False)

    def num_nodes(self) -> int:
        return len(self.nodes)


def _reverse_postorder_of_reverse_cfg(
    ir: IrMethod, preds: dict[int, list[int]]
) -> list[int]:
    """DFS from the virtual exit along reversed edges; raises
    UnreachableExit if some statement cannot reach the exit."""
    order: list[int] = []
    seen: set[int] = set()
    stack: list[tuple[int, int]] = [(ir.exit_id, 0)]
    seen.add(ir.exit_id)
    while stack:
        node, idx = stack[-1]
        succs = preds[node]
        if idx < len(succs):
            stack[-1] = (node, idx + 1)
            nxt = succs[idx]
            if nxt not in seen:
                seen.add(nxt)
                stack.append((nxt, 0))
        else:
            stack.pop()
            order.append(node)
    missing = [s.id for s in ir.statements if s.id not in seen]
    if missing:
        raise UnreachableExit(
            f"statements {missing} cannot reach the method exit"
        )
    order.reverse()
    return order


def compute_postdominators(ir: IrMethod) -> PostDomTree:
    """Immediate post-dominators via iterative dominance on the reverse
    CFG, processed in reverse post-order until fixpoint."""
    preds = ir.preds()
    rpo = _reverse_postorder_of_reverse_cfg(ir, preds)
    index = {node: i for i, node in enumerate(rpo)}
    ipdom: dict[int, int] = {ir.exit_id: ir.exit_id}

    def intersect(a: int, b: int) -> int:
        while a != b:
            while index[a] > index[b]:
                a = ipdom[a]
            while index[b] > index[a]:
                b = ipdom[b]
        return a

    changed = True
    while changed:
        changed = False
        for node in rpo:
            if node == ir.exit_id:
                continue
            # predecessors in the reverse CFG are the CFG successors
            candidates = [s for s in ir.cfg_succ[node] if s in ipdom]
            new = candidates[0]
            for other in candidates[1:]:
                new = intersect(new, other)
            if ipdom.get(node) != new:
                ipdom[node] = new
                changed = True
    del ipdom[ir.exit_id]
    return PostDomTree(ipdom, ir.exit_id)


def control_dependences(
    ir: IrMethod, pdom: PostDomTree
) -> set[tuple[int, int]]:
    """(a, b) iff some CFG successor s of a is post-dominated by b while
    b does not strictly post-dominate a. Loop headers may depend on
    themselves. Computed by walking each edge target up the tree."""
    result: set[tuple[int, int]] = set()
    for stmt in ir.statements:
        target = pdom.ipdom[stmt.id]
        for succ in ir.cfg_succ[stmt.id]:
            runner = succ
            while runner != target:
                result.add((stmt.id, runner))
                runner = pdom.ipdom[runner]
    return result


def reaching_definitions(ir: IrMethod) -> ReachInfo:
    """Forward may-analysis to fixpoint; the result is independent of
    the worklist order."""
    gen: dict[int, frozenset[tuple[str, int]]] = {}
    defs_of: dict[int, frozenset[str]] = {}
    for stmt in ir.statements:
        gen[stmt.id] = frozenset((v, stmt.id) for v in stmt.defs)
        defs_of[stmt.id] = stmt.defs
    preds = ir.preds()
    in_defs = {s.id: frozenset() for s in ir.statements}
    out_defs = {s.id: gen[s.id] for s in ir.statements}
    work = deque(s.id for s in ir.statements)
    queued = set(work)
    while work:
        sid = work.popleft()
        queued.discard(sid)
        new_in = frozenset().union(
            *(out_defs[p] for p in preds[sid])
        ) if preds[sid] else frozenset()
        survivors = frozenset(
            (v, d) for (v, d) in new_in if v not in defs_of[sid]
        )
        new_out = gen[sid] | survivors
        in_defs[sid] = new_in
        if new_out != out_defs[sid]:
            out_defs[sid] = new_out
            for succ in ir.cfg_succ[sid]:
                if succ != ir.exit_id and succ not in queued:
                    work.append(succ)
                    queued.add(succ)
    return ReachInfo(in_defs, out_defs)


def data_dependences(
    ir: IrMethod, reach: ReachInfo
) -> set[tuple[int, int, str]]:
    """(s1, s2, v) iff a def of v at s1 reaches s2 and s2 uses v, i.e. a
    def-clear path for v runs from s1 to s2."""
    result: set[tuple[int, int, str]] = set()
    for stmt in ir.statements:
        if not stmt.uses:
            continue
        for v, d in reach.in_defs[stmt.id]:
            if v in stmt.uses:
                result.add((d, stmt.id, v))
    return result


def build_pdg(ir: IrMethod) -> Pdg:
    """Assemble the PDG: all statements (never the virtual exit) plus
    control and data dependence edges, with self-dependences dropped."""
    pdom = compute_postdominators(ir)
    cd = control_dependences(ir, pdom)
    reach = reaching_definitions(ir)
    dd = data_dependences(ir, reach)
    nodes = tuple(PdgNode(s.id, s.kind, s.line) for s in ir.statements)
    control = frozenset((a, b) for (a, b) in cd if a != b)
    data = frozenset((a, b, v) for (a, b, v) in dd if a != b)
    return Pdg(nodes, control, data, ir.name)
