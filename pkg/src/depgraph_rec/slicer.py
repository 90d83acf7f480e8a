"""Interprocedural backward slicing from API callsites.

Local calls are inlined (with capture-avoiding renaming) up to a configurable
call depth; past the cap, or on recursion, the call is kept as an opaque
statement so its result still participates in def-use chains.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .errors import ValidationError
from .ir import (Function, MiniProgram, Statement, StatementKind,
                 parse_statement_line, serialize_statement)

DEFAULT_MAX_CALL_DEPTH = 10


@dataclass(frozen=True)
class SliceCriterion:
    function: str
    statement_index: int
    slice_vars: frozenset[str]

    def validate(self, program: MiniProgram) -> Statement:
        fn = program.functions.get(self.function)
        if fn is None:
            raise ValidationError(f"criterion names unknown function {self.function!r}")
        if not (0 <= self.statement_index < len(fn.body)):
            raise ValidationError(
                f"criterion index {self.statement_index} out of range in {self.function!r}")
        stmt = fn.body[self.statement_index]
        if stmt.kind is not StatementKind.API_CALL:
            raise ValidationError(
                f"criterion {self.function}[{self.statement_index}] is not an ApiCall")
        if not self.slice_vars <= stmt.uses:
            raise ValidationError("slice_vars must be a subset of the criterion's uses")
        return stmt


@dataclass(frozen=True)
class ProgramSlice:
    criterion: SliceCriterion
    statements: tuple[tuple[str, Statement], ...]  # (origin function, statement)
    inline_depth_reached: int

    @property
    def criterion_statement(self) -> Statement:
        return self.statements[-1][1]


def find_criteria(program: MiniProgram,
                  target_api_prefixes: list[str]) -> list[SliceCriterion]:
    """One criterion per ApiCall whose signature starts with any prefix."""
    if not target_api_prefixes:
        raise ValidationError("target_api_prefixes must be non-empty")
    out = []
    for name in sorted(program.functions):
        for stmt in program.functions[name].body:
            if stmt.kind is StatementKind.API_CALL and any(
                    stmt.api.startswith(p) for p in target_api_prefixes):
                out.append(SliceCriterion(name, stmt.index, frozenset(stmt.uses)))
    return out


class _Inliner:
    def __init__(self, program: MiniProgram, max_depth: int):
        self.program = program
        self.max_depth = max_depth
        self.depth_reached = 0
        self.flat: list[tuple[str, Statement, tuple[str, int]]] = []
        self._counter = 0

    def _rename(self, var: str, callee: str, depth: int, root: bool) -> str:
        return var if root else f"{callee}${depth}${var}"

    def inline(self, fn: Function, depth: int, stack: tuple[str, ...],
               control_dep: str, root: bool = True) -> str | None:
        """Append fn's statements to the flat list; returns renamed return var."""
        self.depth_reached = max(self.depth_reached, depth)
        rn = lambda v: self._rename(v, fn.name, depth, root)
        for stmt in fn.body:
            cd = rn(stmt.control_dep) if stmt.control_dep else control_dep
            renamed = replace(
                stmt,
                defs=frozenset(rn(v) for v in stmt.defs),
                uses=frozenset(rn(v) for v in stmt.uses),
                args=tuple(rn(v) for v in stmt.args),
                label=rn(stmt.label) if stmt.label else "",
                control_dep=cd,
            )
            if (stmt.kind is StatementKind.LOCAL_CALL
                    and depth < self.max_depth
                    and stmt.callee not in stack):
                callee = self.program.functions[stmt.callee]
                inner_rn = lambda v: self._rename(v, callee.name, depth + 1, False)
                # bind arguments to callee parameters
                for p, a in zip(callee.params, renamed.args):
                    self.flat.append((fn.name, Statement(
                        index=-1, kind=StatementKind.ASSIGN,
                        defs=frozenset([inner_rn(p)]), uses=frozenset([a]),
                        args=(a,), control_dep=cd), ("", -1)))
                ret = self.inline(callee, depth + 1, stack + (stmt.callee,), cd,
                                  root=False)
                if renamed.defs:
                    uses = frozenset([ret]) if ret else frozenset()
                    self.flat.append((fn.name, Statement(
                        index=-1, kind=StatementKind.ASSIGN, defs=renamed.defs,
                        uses=uses, args=tuple(sorted(uses)), control_dep=cd),
                        ("", -1)))
            else:
                self.flat.append((fn.name, renamed, (fn.name if root else "", stmt.index)))
        return rn(fn.returns) if fn.returns else None


def backward_slice(program: MiniProgram, criterion: SliceCriterion,
                   max_call_depth: int = DEFAULT_MAX_CALL_DEPTH) -> ProgramSlice:
    """Transitive backward data-dependence closure from the criterion's
    slice_vars, plus the branch chain the criterion is control-dependent on.
    """
    crit_stmt = criterion.validate(program)
    if max_call_depth < 0:
        raise ValidationError("max_call_depth must be >= 0")

    inliner = _Inliner(program, max_call_depth)
    inliner.inline(program.functions[criterion.function], 0, (criterion.function,), "")
    flat = inliner.flat

    ci = next(i for i, (_, _, origin) in enumerate(flat)
              if origin == (criterion.function, criterion.statement_index))

    # control-dependence closure of the criterion: the chain of branches
    branch_by_label = {s.label: i for i, (_, s, _) in enumerate(flat)
                       if s.kind is StatementKind.BRANCH}
    chain: set[int] = set()
    label = crit_stmt.control_dep
    while label:
        bi = branch_by_label.get(label)
        if bi is None or bi in chain:
            break
        chain.add(bi)
        label = flat[bi][1].control_dep

    included = {ci} | chain
    # positional demands: (statement index, variable needed before it)
    demands = [(ci, v) for v in sorted(criterion.slice_vars)]
    for bi in sorted(chain):
        demands.extend((bi, u) for u in sorted(flat[bi][1].uses))
    seen = set(demands)
    while demands:
        at, var = demands.pop()
        for j in range(at - 1, -1, -1):
            stmt = flat[j][1]
            if var in stmt.defs:  # nearest definition wins
                included.add(j)
                for u in sorted(stmt.uses):
                    if (j, u) not in seen:
                        seen.add((j, u))
                        demands.append((j, u))
                break

    stmts = tuple((flat[i][0], flat[i][1]) for i in sorted(included))
    return ProgramSlice(criterion=criterion, statements=stmts,
                        inline_depth_reached=inliner.depth_reached)


# --- slice file format ------------------------------------------------------
# slice <function> <index> <var,var,...> depth=<d>
#   <origin>\t<statement>
# end

def serialize_slice(s: ProgramSlice) -> str:
    vars_ = ",".join(sorted(s.criterion.slice_vars)) or "-"
    lines = [f"slice {s.criterion.function} {s.criterion.statement_index} "
             f"{vars_} depth={s.inline_depth_reached}"]
    for origin, stmt in s.statements:
        lines.append(f"  {origin}\t{serialize_statement(stmt)}")
    lines.append("end")
    return "\n".join(lines) + "\n"


def parse_slices(text: str) -> list[ProgramSlice]:
    slices = []
    header = None
    stmts: list[tuple[str, Statement]] = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("slice "):
            parts = line.split()
            vars_ = frozenset() if parts[3] == "-" else frozenset(parts[3].split(","))
            header = (parts[1], int(parts[2]), vars_, int(parts[4].split("=")[1]))
            stmts = []
        elif line == "end":
            fn, idx, vars_, depth = header
            slices.append(ProgramSlice(
                criterion=SliceCriterion(fn, idx, vars_),
                statements=tuple(stmts), inline_depth_reached=depth))
            header = None
        else:
            origin, stext = raw.strip().split("\t", 1)
            stmts.append((origin, parse_statement_line(stext, index=len(stmts))))
    return slices


def slice_tokens(s: ProgramSlice) -> tuple[list[str], str]:
    """Token view of a slice: API/constant tokens in order, criterion last
    as the label. Used for the slice-mode training corpus."""
    toks = []
    for _, stmt in s.statements[:-1]:
        if stmt.kind is StatementKind.API_CALL:
            toks.append(stmt.api)
        elif stmt.kind is StatementKind.CONST_LOAD:
            toks.append(stmt.constant)
    return toks, s.criterion_statement.api
