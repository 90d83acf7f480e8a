"""Minimal three-address IR with explicit def/use and control-dependence info.

File format (MiniIR), line oriented, UTF-8, `#` starts a comment:

    entry main                     # optional; defaults to "main", else first func
    func main(arg0, arg1) {
      const v = "AES"              # ConstLoad: defines v
      api c = Cipher.getInstance(String) v     # ApiCall, ordered args after sig
      call k = makeKey a b         # LocalCall to another func in this file
      assign x = a b               # generic computation: defines x, uses a b
      branch L0 x                  # opens control region L0, uses x
      api Cipher.init(int,Key) c k @L0         # @label = control dependence
      return c
    }

Statements may omit the defined variable (`api Sig a b`) when the result is
unused. The `@label` suffix attaches the statement to a control region opened
by a `branch` with that label.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field, replace

from .errors import FormatError, MiniIrSyntaxError, ValidationError

_RESERVED = ("\n", "\t")


@dataclass(frozen=True)
class ApiSignature:
    """Canonical API token (`Class.method(ArgType,...)`) or constant literal."""

    text: str
    is_constant: bool = False

    def __str__(self) -> str:
        return self.text


def canonicalize_signature(raw: str) -> ApiSignature:
    """Canonicalize an API signature or constant literal token.

    Constants are quoted strings (`"AES"`) or bare numeric literals; anything
    else is treated as an API signature and has all whitespace stripped.
    Idempotent: canonicalizing a canonical form is a no-op.
    """
    if not raw:
        raise FormatError("empty token")
    for ch in _RESERVED:
        if ch in raw:
            raise FormatError(f"token contains reserved separator: {raw!r}")
    stripped = raw.strip()
    if stripped.startswith('"') and stripped.endswith('"') and len(stripped) >= 2:
        # corpus and graph formats are space-separated; keep tokens atomic
        return ApiSignature(stripped.replace(" ", "_"), is_constant=True)
    if re.fullmatch(r"-?\d+(\.\d+)?", stripped):
        return ApiSignature(f'"{stripped}"', is_constant=True)
    return ApiSignature(re.sub(r"\s+", "", raw), is_constant=False)


class StatementKind(enum.Enum):
    ASSIGN = "assign"
    API_CALL = "api"
    LOCAL_CALL = "call"
    CONST_LOAD = "const"
    BRANCH = "branch"
    RETURN = "return"


@dataclass(frozen=True)
class Statement:
    index: int
    kind: StatementKind
    defs: frozenset[str] = frozenset()
    uses: frozenset[str] = frozenset()
    args: tuple[str, ...] = ()  # ordered call arguments; uses == set(args) for calls
    api: str = ""  # canonical signature, API_CALL only
    callee: str = ""  # LOCAL_CALL only
    constant: str = ""  # CONST_LOAD only, canonical literal
    label: str = ""  # BRANCH only: region this branch opens
    control_dep: str = ""  # enclosing control region ("" = top level)

    def def_var(self) -> str | None:
        return next(iter(self.defs)) if self.defs else None


@dataclass(frozen=True)
class Function:
    name: str
    params: tuple[str, ...]
    body: tuple[Statement, ...]
    returns: str | None = None


@dataclass(frozen=True)
class MiniProgram:
    functions: dict[str, Function]
    entry: str

    def __post_init__(self):
        validate_program(self)


_FUNC_RE = re.compile(r"func\s+([A-Za-z_][\w$]*)\s*\(([^)]*)\)\s*\{")
_IDENT_RE = re.compile(r"[A-Za-z_$][\w$.]*")


def _strip_comment(line: str) -> str:
    # respect quotes so '#' inside constants survives
    out = []
    in_str = False
    for ch in line:
        if ch == '"':
            in_str = not in_str
        if ch == "#" and not in_str:
            break
        out.append(ch)
    return "".join(out).strip()


def _split_control_dep(text: str) -> tuple[str, str]:
    m = re.search(r"\s@([\w$]+)\s*$", text)
    if m:
        return text[: m.start()].rstrip(), m.group(1)
    return text, ""


def _parse_statement(text: str, index: int, lineno: int) -> Statement:
    text, cd = _split_control_dep(text)
    parts = text.split(None, 1)
    head = parts[0]
    rest = parts[1] if len(parts) > 1 else ""

    def ident(name: str) -> str:
        if not _IDENT_RE.fullmatch(name):
            raise MiniIrSyntaxError(f"bad identifier {name!r}", lineno)
        return name

    if head == "const":
        m = re.fullmatch(r"([\w$]+)\s*=\s*(.+)", rest)
        if not m:
            raise MiniIrSyntaxError("expected: const <var> = <literal>", lineno)
        lit = canonicalize_signature(m.group(2))
        if not lit.is_constant:
            raise MiniIrSyntaxError(f"not a constant literal: {m.group(2)!r}", lineno)
        return Statement(index, StatementKind.CONST_LOAD,
                         defs=frozenset([ident(m.group(1))]),
                         constant=lit.text, control_dep=cd)
    if head in ("api", "call"):
        m = re.fullmatch(r"(?:([\w$]+)\s*=\s*)?(\S+)\s*(.*)", rest)
        if not m or not m.group(2):
            raise MiniIrSyntaxError(f"expected: {head} [<var> =] <target> [args]", lineno)
        dst, target, argstr = m.group(1), m.group(2), m.group(3)
        args = tuple(ident(a) for a in argstr.split())
        defs = frozenset([ident(dst)]) if dst else frozenset()
        if head == "api":
            sig = canonicalize_signature(target)
            if sig.is_constant:
                raise MiniIrSyntaxError(f"constant used as API signature: {target!r}", lineno)
            return Statement(index, StatementKind.API_CALL, defs=defs,
                             uses=frozenset(args), args=args, api=sig.text,
                             control_dep=cd)
        return Statement(index, StatementKind.LOCAL_CALL, defs=defs,
                         uses=frozenset(args), args=args, callee=ident(target),
                         control_dep=cd)
    if head == "assign":
        m = re.fullmatch(r"([\w$]+)\s*=\s*(.*)", rest)
        if not m:
            raise MiniIrSyntaxError("expected: assign <var> = [uses]", lineno)
        uses = tuple(ident(u) for u in m.group(2).split())
        return Statement(index, StatementKind.ASSIGN,
                         defs=frozenset([ident(m.group(1))]),
                         uses=frozenset(uses), args=uses, control_dep=cd)
    if head == "branch":
        toks = rest.split()
        if not toks:
            raise MiniIrSyntaxError("expected: branch <label> [uses]", lineno)
        uses = tuple(ident(u) for u in toks[1:])
        return Statement(index, StatementKind.BRANCH, uses=frozenset(uses),
                         args=uses, label=ident(toks[0]), control_dep=cd)
    if head == "return":
        toks = rest.split()
        if len(toks) != 1:
            raise MiniIrSyntaxError("expected: return <var>", lineno)
        return Statement(index, StatementKind.RETURN,
                         uses=frozenset([ident(toks[0])]), args=(toks[0],),
                         control_dep=cd)
    raise MiniIrSyntaxError(f"unknown statement kind {head!r}", lineno)


def parse_program(source: str) -> MiniProgram:
    """Parse a MiniIR document. Raises MiniIrSyntaxError / ValidationError."""
    functions: dict[str, Function] = {}
    entry: str | None = None
    current: str | None = None
    params: tuple[str, ...] = ()
    body: list[Statement] = []
    returns: str | None = None

    for lineno, raw in enumerate(source.splitlines(), start=1):
        line = _strip_comment(raw)
        if not line:
            continue
        if line.startswith("entry "):
            if current is not None:
                raise MiniIrSyntaxError("entry directive inside function body", lineno)
            entry = line.split()[1]
            continue
        if line.startswith("func"):
            if current is not None:
                raise MiniIrSyntaxError("nested func", lineno)
            m = _FUNC_RE.fullmatch(line)
            if not m:
                raise MiniIrSyntaxError("expected: func <name>(<params>) {", lineno)
            current = m.group(1)
            if current in functions:
                raise MiniIrSyntaxError(f"duplicate function {current!r}", lineno)
            params = tuple(p.strip() for p in m.group(2).split(",") if p.strip())
            body, returns = [], None
            continue
        if line == "}":
            if current is None:
                raise MiniIrSyntaxError("unmatched '}'", lineno)
            functions[current] = Function(current, params, tuple(body), returns)
            current = None
            continue
        if current is None:
            raise MiniIrSyntaxError("statement outside function", lineno)
        stmt = _parse_statement(line, len(body), lineno)
        if stmt.kind is StatementKind.RETURN:
            returns = stmt.args[0]
        body.append(stmt)

    if current is not None:
        raise MiniIrSyntaxError("unterminated function (missing '}')")
    if not functions:
        raise MiniIrSyntaxError("no functions in document")
    if entry is None:
        entry = "main" if "main" in functions else next(iter(functions))
    return MiniProgram(functions=functions, entry=entry)


def validate_program(program: MiniProgram) -> None:
    if program.entry not in program.functions:
        raise ValidationError(f"entry function {program.entry!r} not defined")
    for fn in program.functions.values():
        defined = set(fn.params)
        labels: set[str] = set()
        for stmt in fn.body:
            where = f"{fn.name}[{stmt.index}]"
            if stmt.kind is StatementKind.API_CALL:
                if not stmt.api or stmt.callee:
                    raise ValidationError(f"{where}: ApiCall must carry an api signature only")
            elif stmt.kind is StatementKind.LOCAL_CALL:
                if not stmt.callee or stmt.api:
                    raise ValidationError(f"{where}: LocalCall must carry a callee only")
                if stmt.callee not in program.functions:
                    raise ValidationError(f"{where}: undefined callee {stmt.callee!r}")
            elif stmt.kind is StatementKind.CONST_LOAD:
                if not stmt.constant or len(stmt.defs) != 1:
                    raise ValidationError(f"{where}: ConstLoad needs a literal and one def")
            elif stmt.kind is StatementKind.BRANCH:
                if stmt.defs:
                    raise ValidationError(f"{where}: Branch must not define variables")
                labels.add(stmt.label)
            if stmt.control_dep and stmt.control_dep not in labels:
                raise ValidationError(
                    f"{where}: control_dep {stmt.control_dep!r} has no preceding branch")
            for v in sorted(stmt.uses):
                if v not in defined:
                    raise ValidationError(f"{where}: use of undefined variable {v!r}")
            defined |= stmt.defs
        if fn.returns is not None and fn.returns not in defined:
            raise ValidationError(f"{fn.name}: returns undefined variable {fn.returns!r}")


def serialize_statement(stmt: Statement) -> str:
    cd = f" @{stmt.control_dep}" if stmt.control_dep else ""
    k = stmt.kind
    if k is StatementKind.CONST_LOAD:
        return f"const {stmt.def_var()} = {stmt.constant}{cd}"
    if k is StatementKind.API_CALL:
        dst = f"{stmt.def_var()} = " if stmt.defs else ""
        argstr = (" " + " ".join(stmt.args)) if stmt.args else ""
        return f"api {dst}{stmt.api}{argstr}{cd}"
    if k is StatementKind.LOCAL_CALL:
        dst = f"{stmt.def_var()} = " if stmt.defs else ""
        argstr = (" " + " ".join(stmt.args)) if stmt.args else ""
        return f"call {dst}{stmt.callee}{argstr}{cd}"
    if k is StatementKind.ASSIGN:
        return f"assign {stmt.def_var()} = {' '.join(stmt.args)}{cd}".rstrip()
    if k is StatementKind.BRANCH:
        tail = (" " + " ".join(stmt.args)) if stmt.args else ""
        return f"branch {stmt.label}{tail}{cd}"
    return f"return {stmt.args[0]}{cd}"


def serialize_program(program: MiniProgram) -> str:
    lines = [f"entry {program.entry}"]
    for name in program.functions:  # preserve insertion order
        fn = program.functions[name]
        lines.append(f"func {fn.name}({', '.join(fn.params)}) {{")
        for stmt in fn.body:
            lines.append("  " + serialize_statement(stmt))
        lines.append("}")
    return "\n".join(lines) + "\n"


def parse_statement_line(text: str, index: int = 0) -> Statement:
    """Parse a single serialized statement (used by the slice file format)."""
    stmt = _parse_statement(text.strip(), index, 0)
    return replace(stmt, index=index)
