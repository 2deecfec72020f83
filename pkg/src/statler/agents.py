"""The reader/writer agent and the stateless history-prompted baseline.

Both agents turn a natural-language query into an action program via a
completion backend and run it against an environment handle. The Statler
agent additionally keeps an explicit :class:`WorldState`: every
``update_wm(...)`` call in the reader's program asks the writer for the next
state, which is parsed, validated and staged. Staged states are committed
only if the whole step succeeds, so a failed step never touches the stored
state.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Literal, Sequence

from .action_lang import (
    BASE_FUNCTIONS,
    ExecutionTrace,
    Failure,
    Program,
    STATLER_FUNCTIONS,
    EnvHandle,
    execute_program,
    parse_program,
)
from .errors import BudgetExceeded, ConfigError, ParseFailure, WriterFailure
from .llm_backends import DEFAULT_MODEL, Backend, CompletionRequest, complete, request_digest
from .world_model import WorldState, parse_state, render_state, validate_state

READER_STOPS = ("\n\n", "\n# query:", "\n# state")
WRITER_STOPS = ("\n\n", "\n# query:")
BASELINE_STOPS = ("\n\n", "\n# query:")
BANK_SEPARATOR = "---"


@dataclass(frozen=True)
class Example:
    """One demonstration: state (or context) text, query, and the desired completion."""

    context: str
    query: str
    completion: str

    def render(self) -> str:
        head = f"{self.context}\n" if self.context else ""
        return f"{head}# query: {self.query}\n{self.completion}"


@dataclass(frozen=True)
class AgentConfig:
    reader_preamble: str
    reader_examples: tuple[Example, ...]
    writer_preamble: str
    writer_examples: tuple[Example, ...]
    backend: Backend
    budget_chars: int = 60_000
    model_id: str = DEFAULT_MODEL
    max_tokens: int = 512
    temperature: float = 0.0
    on_invalid_state: Literal["reject", "warn"] = "reject"

    def __post_init__(self) -> None:
        object.__setattr__(self, "reader_examples", tuple(self.reader_examples))
        object.__setattr__(self, "writer_examples", tuple(self.writer_examples))
        if not self.reader_examples or not self.writer_examples:
            raise ConfigError("reader and writer demonstration lists must be non-empty")
        if self.budget_chars <= 0:
            raise ConfigError("prompt budget must be positive")
        if self.on_invalid_state not in ("reject", "warn"):
            raise ConfigError(f"on_invalid_state must be reject or warn, not {self.on_invalid_state!r}")


@dataclass(frozen=True)
class BaselineConfig:
    preamble: str
    examples: tuple[str, ...]
    backend: Backend
    budget_chars: int = 60_000
    model_id: str = DEFAULT_MODEL
    max_tokens: int = 512
    temperature: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "examples", tuple(self.examples))
        if not self.examples:
            raise ConfigError("baseline demonstration list must be non-empty")
        if self.budget_chars <= 0:
            raise ConfigError("prompt budget must be positive")


@dataclass
class StepOutcome:
    query: str
    program: Program | None
    trace: ExecutionTrace
    new_world_state: WorldState | None = None
    reader_text: str = ""
    writer_texts: list[str] = field(default_factory=list)
    digests: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def failure(self) -> Failure | None:
        return self.trace.failure

    @property
    def program_text(self) -> str:
        return self.reader_text


def _failed(kind: str, message: str) -> ExecutionTrace:
    return ExecutionTrace(failure=Failure(0, kind, message))


# --------------------------------------------------------------------------
# prompt construction

def _assemble(preamble: str, demos: Sequence[str], tail: str) -> str:
    parts = [preamble.rstrip("\n")] if preamble.strip() else []
    parts.extend(d.rstrip("\n") for d in demos)
    parts.append(tail)
    return "\n\n".join(parts)


def state_tail(state: WorldState, query: str) -> str:
    return f"{render_state(state)}\n# query: {query}\n"


def build_reader_prompt(cfg: AgentConfig, state: WorldState, query: str) -> str:
    prompt = _assemble(cfg.reader_preamble, [e.render() for e in cfg.reader_examples],
                       state_tail(state, query))
    if len(prompt) > cfg.budget_chars:
        raise BudgetExceeded(f"reader prompt has {len(prompt)} chars, budget {cfg.budget_chars}")
    return prompt


def build_writer_prompt(cfg: AgentConfig, state: WorldState, query: str) -> str:
    prompt = _assemble(cfg.writer_preamble, [e.render() for e in cfg.writer_examples],
                       state_tail(state, query))
    if len(prompt) > cfg.budget_chars:
        raise BudgetExceeded(f"writer prompt has {len(prompt)} chars, budget {cfg.budget_chars}")
    return prompt


def reader_request(cfg: AgentConfig, state: WorldState, query: str) -> CompletionRequest:
    return CompletionRequest(build_reader_prompt(cfg, state, query), READER_STOPS,
                             cfg.max_tokens, cfg.temperature, cfg.model_id)


def writer_request(cfg: AgentConfig, state: WorldState, query: str) -> CompletionRequest:
    return CompletionRequest(build_writer_prompt(cfg, state, query), WRITER_STOPS,
                             cfg.max_tokens, cfg.temperature, cfg.model_id)


def objects_line(objects: Sequence[str]) -> str:
    return "objects = [" + ", ".join(f'"{o}"' for o in objects) + "]"


def build_baseline_prompt(cfg: BaselineConfig, objects: Sequence[str],
                          history: Sequence[tuple[str, str]], query: str) -> str:
    """Preamble, demos, the scene's object list, the kept history, then the query.

    The oldest history entries are dropped until the prompt fits the budget.
    """
    head = objects_line(objects) + "\n"
    last = f"# query: {query}\n"
    kept = list(history)
    while True:
        body = "".join(f"# query: {q}\n{code.rstrip()}\n" for q, code in kept)
        prompt = _assemble(cfg.preamble, cfg.examples, head + body + last)
        if len(prompt) <= cfg.budget_chars:
            return prompt
        if not kept:
            raise BudgetExceeded(f"baseline prompt has {len(prompt)} chars, budget {cfg.budget_chars}")
        kept.pop(0)


def baseline_request(cfg: BaselineConfig, objects: Sequence[str],
                     history: Sequence[tuple[str, str]], query: str) -> CompletionRequest:
    return CompletionRequest(build_baseline_prompt(cfg, objects, history, query), BASELINE_STOPS,
                             cfg.max_tokens, cfg.temperature, cfg.model_id)


def extract_state_text(completion: str) -> str:
    """Writer output up to the first stop sequence, trailing blank lines removed."""
    cut = len(completion)
    for stop in WRITER_STOPS:
        i = completion.find(stop)
        if i >= 0:
            cut = min(cut, i)
    return completion[:cut].rstrip("\n").rstrip()


# --------------------------------------------------------------------------
# agents

class StatlerAgent:
    """Reader/writer agent holding the current world state in external memory."""

    kind = "statler"

    def __init__(self, cfg: AgentConfig, init_state: WorldState | str, env: EnvHandle):
        self.cfg = cfg
        self.env = env
        self.state = parse_state(init_state) if isinstance(init_state, str) else init_state

    def step(self, query: str) -> StepOutcome:
        return statler_step(self, query)


class BaselineAgent:
    """Stateless code generator that sees the full (query, program) history."""

    kind = "baseline"

    def __init__(self, cfg: BaselineConfig, objects: Sequence[str], env: EnvHandle):
        self.cfg = cfg
        self.env = env
        self.objects = list(objects)
        self.history: list[tuple[str, str]] = []

    def step(self, query: str) -> StepOutcome:
        return baseline_step(self, query)


Agent = StatlerAgent | BaselineAgent


def statler_step(agent: StatlerAgent, query: str) -> StepOutcome:
    cfg = agent.cfg
    outcome = StepOutcome(query, None, ExecutionTrace())
    try:
        req = reader_request(cfg, agent.state, query)
    except BudgetExceeded as err:
        outcome.trace = _failed("BudgetExceeded", str(err))
        return outcome
    result = complete(cfg.backend, req)
    outcome.digests.append(request_digest(req))
    outcome.reader_text = result.text
    try:
        outcome.program = parse_program(result.text)
    except ParseFailure as err:
        outcome.trace = _failed("ParseFailure", f"reader output: {err}")
        return outcome

    staged = agent.state

    def write(update: str) -> None:
        nonlocal staged
        try:
            wreq = writer_request(cfg, staged, update)
        except BudgetExceeded as err:
            raise WriterFailure(str(err)) from err
        wres = complete(cfg.backend, wreq)
        outcome.digests.append(request_digest(wreq))
        outcome.writer_texts.append(wres.text)
        try:
            new_state = parse_state(extract_state_text(wres.text))
        except ParseFailure as err:
            raise WriterFailure(f"writer output does not parse: {err}") from err
        problems = validate_state(new_state)
        if problems:
            if cfg.on_invalid_state == "reject":
                raise WriterFailure("writer state invalid: " + "; ".join(problems))
            outcome.warnings.extend(problems)
        staged = new_state

    outcome.trace = execute_program(outcome.program, agent.env, writer_hook=write,
                                    functions=STATLER_FUNCTIONS)
    if outcome.trace.failure is None:
        if outcome.writer_texts:
            outcome.new_world_state = staged
        agent.state = staged
    return outcome


def baseline_step(agent: BaselineAgent, query: str) -> StepOutcome:
    cfg = agent.cfg
    outcome = StepOutcome(query, None, ExecutionTrace())
    try:
        req = baseline_request(cfg, agent.objects, agent.history, query)
    except BudgetExceeded as err:
        outcome.trace = _failed("BudgetExceeded", str(err))
        return outcome
    result = complete(cfg.backend, req)
    outcome.digests.append(request_digest(req))
    outcome.reader_text = result.text
    agent.history.append((query, result.text))
    try:
        outcome.program = parse_program(result.text)
    except ParseFailure as err:
        outcome.trace = _failed("ParseFailure", f"reader output: {err}")
        return outcome
    outcome.trace = execute_program(outcome.program, agent.env, functions=BASE_FUNCTIONS)
    return outcome


# --------------------------------------------------------------------------
# prompt banks

def parse_bank(text: str) -> tuple[str, list[str]]:
    """Split a bank into its preamble and demonstration records."""
    records: list[list[str]] = [[]]
    for line in text.splitlines():
        if line.strip() == BANK_SEPARATOR:
            records.append([])
        else:
            records[-1].append(line)
    chunks = ["\n".join(r).strip("\n") for r in records]
    preamble, demos = chunks[0], [c for c in chunks[1:] if c.strip()]
    return preamble, demos


def dump_bank(preamble: str, records: Sequence[str]) -> str:
    sep = f"\n{BANK_SEPARATOR}\n"
    return sep.join([preamble.strip("\n"), *(r.strip("\n") for r in records)]) + "\n"


def split_example(record: str) -> Example:
    """``<state lines>\\n# query: q\\n<completion>`` -> :class:`Example`."""
    lines = record.split("\n")
    for i, line in enumerate(lines):
        if line.startswith("# query: "):
            return Example("\n".join(lines[:i]), line[len("# query: "):], "\n".join(lines[i + 1:]))
    raise ConfigError(f"demonstration record has no '# query:' line: {record[:60]!r}")


def load_examples(text: str) -> tuple[str, tuple[Example, ...]]:
    preamble, records = parse_bank(text)
    return preamble, tuple(split_example(r) for r in records)


def bundled_bank(name: str) -> str:
    return resources.files("statler.data.banks").joinpath(f"{name}.txt").read_text(encoding="utf-8")


def _read(source: str | Path | None, default_name: str) -> str:
    if source is None:
        return bundled_bank(default_name)
    return Path(source).read_text(encoding="utf-8")


def load_agent_config(domain: str, backend: Backend, *, reader_bank: str | Path | None = None,
                      writer_bank: str | Path | None = None, **overrides) -> AgentConfig:
    reader_pre, reader_ex = load_examples(_read(reader_bank, f"{domain}_reader"))
    writer_pre, writer_ex = load_examples(_read(writer_bank, f"{domain}_writer"))
    return AgentConfig(reader_pre, reader_ex, writer_pre, writer_ex, backend, **overrides)


def load_baseline_config(domain: str, backend: Backend, *, bank: str | Path | None = None,
                         **overrides) -> BaselineConfig:
    preamble, demos = parse_bank(_read(bank, f"{domain}_baseline"))
    return BaselineConfig(preamble, tuple(demos), backend, **overrides)
