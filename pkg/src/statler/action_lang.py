"""Restricted action language emitted by the world-model reader.

A program is a sequence of newline-separated statements. Each statement is a
comment (``# ...``), a blank line, or a single call whose arguments are
string, integer or decimal literals::

    put_first_on_second("cyan block", "yellow block")
    update_wm("Put the cyan block on the yellow block")

Anything richer (assignments, loops, conditionals, nested calls) is rejected
at parse time so that scoring never needs a general-purpose interpreter.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Any, Callable, Protocol, Union

from .errors import (
    ArityMismatch,
    ExecutionError,
    NonStringArgument,
    ParseFailure,
    UnknownFunction,
)

Literal = Union[str, int, float]

_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_NUMBER = re.compile(r"-?\d+(\.\d+)?([eE][+-]?\d+)?")


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple[Literal, ...] = ()


@dataclass(frozen=True)
class Comment:
    text: str


Statement = Union[Call, Comment]


@dataclass(frozen=True)
class Program:
    statements: tuple[Statement, ...] = ()

    @property
    def calls(self) -> list[Call]:
        return [s for s in self.statements if isinstance(s, Call)]

    def __len__(self) -> int:
        return len(self.statements)


@dataclass(frozen=True)
class Failure:
    index: int
    kind: str
    message: str


@dataclass
class ExecutionTrace:
    effects: list[tuple[str, tuple[Literal, ...], str]] = field(default_factory=list)
    say_outputs: list[str] = field(default_factory=list)
    wm_update_queries: list[str] = field(default_factory=list)
    failure: Failure | None = None

    @property
    def env_effects(self) -> list[tuple[str, tuple[Literal, ...], str]]:
        return [e for e in self.effects if e[0] == "put_first_on_second"]


class EnvHandle(Protocol):
    def put_first_on_second(self, src: str, dst: str) -> Any: ...


# --------------------------------------------------------------------------
# parsing

class _Line:
    def __init__(self, text: str, lineno: int, offset: int):
        self.text = text
        self.lineno = lineno
        self.pos = 0
        self.offset = offset

    def fail(self, reason: str) -> ParseFailure:
        return ParseFailure(reason, line=self.lineno, column=self.offset + self.pos + 1)

    def skip_ws(self) -> None:
        while self.pos < len(self.text) and self.text[self.pos] in " \t":
            self.pos += 1

    def literal(self) -> Literal:
        self.skip_ws()
        if self.text.startswith('"', self.pos):
            return self.string()
        m = _NUMBER.match(self.text, self.pos)
        if m:
            self.pos = m.end()
            tok = m.group(0)
            return float(tok) if (m.group(1) or m.group(2)) else int(tok)
        raise self.fail("expected a string or number literal")

    def string(self) -> str:
        start = self.pos
        self.pos += 1
        buf = []
        while self.pos < len(self.text):
            ch = self.text[self.pos]
            if ch == '"':
                self.pos += 1
                return "".join(buf)
            if ch == "\\":
                nxt = self.text[self.pos + 1:self.pos + 2]
                if nxt not in ('"', "\\"):
                    raise self.fail(f"unsupported escape \\{nxt}")
                buf.append(nxt)
                self.pos += 2
                continue
            buf.append(ch)
            self.pos += 1
        self.pos = start
        raise self.fail("unterminated string literal")


def parse_program(text: str) -> Program:
    """Parse reader output into a :class:`Program`.

    Raises :class:`ParseFailure` carrying ``line``/``column`` for any
    construct outside the straight-line call grammar.
    """
    statements: list[Statement] = []
    for lineno, raw in enumerate(text.replace("\r\n", "\n").split("\n"), start=1):
        stripped = raw.lstrip(" \t")
        indent = len(raw) - len(stripped)
        body = stripped.rstrip(" \t")
        if not body:
            continue
        if body.startswith("#"):
            statements.append(Comment(body[1:]))
            continue
        line = _Line(body, lineno, indent)
        m = _IDENT.match(body)
        if not m:
            raise line.fail("expected a function call")
        name = m.group(0)
        line.pos = m.end()
        line.skip_ws()
        if not body.startswith("(", line.pos):
            raise line.fail(f"expected '(' after {name!r}")
        line.pos += 1
        args: list[Literal] = []
        line.skip_ws()
        if body.startswith(")", line.pos):
            line.pos += 1
        else:
            while True:
                args.append(line.literal())
                line.skip_ws()
                if body.startswith(",", line.pos):
                    line.pos += 1
                    continue
                if body.startswith(")", line.pos):
                    line.pos += 1
                    break
                raise line.fail("expected ',' or ')'")
        line.skip_ws()
        if line.pos != len(body):
            raise line.fail("unexpected text after call")
        statements.append(Call(name, tuple(args)))
    return Program(tuple(statements))


def render_literal(value: Literal) -> str:
    if isinstance(value, bool):
        raise TypeError("booleans are not literals of the action language")
    if isinstance(value, str):
        return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        text = repr(value)
        if not _NUMBER.fullmatch(text):
            raise ValueError(f"non-finite decimal {value!r}")
        return text
    raise TypeError(f"unsupported literal {value!r}")


def render_program(program: Program) -> str:
    lines = []
    for stmt in program.statements:
        if isinstance(stmt, Comment):
            lines.append("#" + stmt.text)
        else:
            lines.append(f"{stmt.name}({', '.join(render_literal(a) for a in stmt.args)})")
    return "\n".join(lines)


# --------------------------------------------------------------------------
# execution

# name -> (arity, indices of parameters that must be strings)
BASE_FUNCTIONS: dict[str, tuple[int, tuple[int, ...]]] = {
    "put_first_on_second": (2, (0, 1)),
    "say": (1, (0,)),
    "noop": (0, ()),
}
STATLER_FUNCTIONS = {**BASE_FUNCTIONS, "update_wm": (1, (0,))}


def execute_program(program: Program, env: EnvHandle,
                    writer_hook: Callable[[str], Any] | None = None,
                    functions: dict[str, tuple[int, tuple[int, ...]]] | None = None) -> ExecutionTrace:
    """Run ``program`` statement by statement against ``env``.

    ``update_wm`` is only available when ``writer_hook`` is given (or an
    explicit ``functions`` table includes it); the hook runs synchronously
    at the point of the call. The first :class:`ExecutionError` aborts the
    run and is recorded in ``trace.failure``. Other exceptions (backend
    failures in particular) propagate.
    """
    if functions is None:
        functions = STATLER_FUNCTIONS if writer_hook is not None else BASE_FUNCTIONS
    trace = ExecutionTrace()
    for index, stmt in enumerate(program.statements):
        if isinstance(stmt, Comment):
            continue
        try:
            _run_call(stmt, env, writer_hook, functions, trace)
        except ExecutionError as err:
            trace.failure = Failure(index, err.kind, str(err))
            break
    return trace


def _run_call(call: Call, env: EnvHandle, writer_hook, functions, trace: ExecutionTrace) -> None:
    if call.name not in functions:
        raise UnknownFunction(f"{call.name} is not an available function")
    arity, string_params = functions[call.name]
    if len(call.args) != arity:
        raise ArityMismatch(f"{call.name} takes {arity} argument(s), got {len(call.args)}")
    for i in string_params:
        if not isinstance(call.args[i], str):
            raise NonStringArgument(f"{call.name} argument {i + 1} must be a string")

    if call.name == "put_first_on_second":
        env.put_first_on_second(*call.args)
        trace.effects.append((call.name, call.args, "ok"))
    elif call.name == "say":
        trace.say_outputs.append(call.args[0])
        trace.effects.append((call.name, call.args, "ok"))
    elif call.name == "noop":
        trace.effects.append((call.name, call.args, "ok"))
    elif call.name == "update_wm":
        trace.wm_update_queries.append(call.args[0])
        if writer_hook is not None:
            writer_hook(call.args[0])
        trace.effects.append((call.name, call.args, "ok"))
    else:
        raise UnknownFunction(f"{call.name} has no implementation")
