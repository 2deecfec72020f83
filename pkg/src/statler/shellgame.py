"""Three cups and a ball: simulator, prompt layouts, agents and accuracy curves.

The ball starts under a known cup and the dealer swaps two cups per round.
After every swap the agent is asked where the ball is, and the episode stops
at the first wrong (or unparseable) answer. Three prompt layouts are
supported:

``vanilla``
    initial state and every swap so far, then a single ``cups = `` slot.
``cot``
    same context, but the completion writes one ``cups =`` line per swap;
    only the last line is scored.
``state``
    a ``cups =`` line after every swap, each filled with the agent's own
    earlier answer, so the agent only ever has to apply one swap.
"""

from __future__ import annotations

import csv
import io
import json
import random
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Literal, Sequence

from .errors import BackendError, StatlerError
from .llm_backends import DEFAULT_MODEL, Backend, CompletionRequest, ScriptedBackend, complete

AgentKind = Literal["vanilla", "cot", "state"]
AGENT_KINDS: tuple[str, ...] = ("vanilla", "cot", "state")
HEADER = "# Initial state"
_CUPS_RE = re.compile(r"^\s*(?:cups\s*=\s*)?\[\s*(True|False)\s*,\s*(True|False)\s*,\s*(True|False)\s*\]")
_SWAP_RE = re.compile(r"^Swapping cup (\d+) with cup (\d+)$")


class IndexOutOfRange(StatlerError, ValueError):
    pass


class EqualIndices(StatlerError, ValueError):
    pass


@dataclass(frozen=True)
class CupsState:
    cups: tuple[bool, bool, bool]

    def __post_init__(self) -> None:
        cups = tuple(bool(c) for c in self.cups)
        if len(cups) != 3 or sum(cups) != 1:
            raise ValueError(f"exactly one of three cups must hold the ball: {self.cups}")
        object.__setattr__(self, "cups", cups)

    @classmethod
    def with_ball(cls, index: int) -> "CupsState":
        return cls(tuple(i == index for i in range(3)))

    @property
    def ball(self) -> int:
        return self.cups.index(True)

    def render(self) -> str:
        return "[" + ", ".join(str(c) for c in self.cups) + "]"


@dataclass(frozen=True)
class SwapAction:
    i: int
    j: int

    def __post_init__(self) -> None:
        for k in (self.i, self.j):
            if not 0 <= k < 3:
                raise IndexOutOfRange(f"cup index {k} outside 0..2")
        if self.i == self.j:
            raise EqualIndices(f"cannot swap cup {self.i} with itself")

    def render(self) -> str:
        return f"Swapping cup {self.i} with cup {self.j}"


def apply_swap(state: CupsState, s: SwapAction) -> CupsState:
    cups = list(state.cups)
    cups[s.i], cups[s.j] = cups[s.j], cups[s.i]
    return CupsState(tuple(cups))


def random_swap(rng: random.Random) -> SwapAction:
    i, j = rng.sample(range(3), 2)
    return SwapAction(i, j)


def states_after(init: CupsState, swaps: Iterable[SwapAction]) -> list[CupsState]:
    out, cur = [], init
    for s in swaps:
        cur = apply_swap(cur, s)
        out.append(cur)
    return out


def parse_cups(line: str) -> CupsState | None:
    """Parse ``[True, False, False]`` (optionally prefixed by ``cups =``)."""
    m = _CUPS_RE.match(line)
    if not m:
        return None
    try:
        return CupsState(tuple(g == "True" for g in m.groups()))
    except ValueError:
        return None


def parse_answer(kind: str, completion: str) -> CupsState | None:
    """The scored answer: first line for vanilla/state, last cups line for CoT."""
    lines = [ln for ln in completion.split("\n") if ln.strip()]
    if not lines:
        return None
    if kind == "cot":
        parsed = [parse_cups(ln) for ln in lines]
        parsed = [p for p in parsed if p is not None]
        return parsed[-1] if parsed else None
    return parse_cups(lines[0])


# --------------------------------------------------------------------------
# prompts

@dataclass(frozen=True)
class Demo:
    init: CupsState
    swaps: tuple[SwapAction, ...]


@dataclass(frozen=True)
class EpisodePrefix:
    """The part of an episode the agent has seen; ``generated`` holds its earlier answers."""

    init: CupsState
    swaps: tuple[SwapAction, ...]
    generated: tuple[str, ...] = ()


def render_demo(kind: str, demo: Demo) -> str:
    truth = states_after(demo.init, demo.swaps)
    lines = [HEADER, f"cups = {demo.init.render()}"]
    if kind == "state":
        for s, st in zip(demo.swaps, truth):
            lines += [s.render(), f"cups = {st.render()}"]
    else:
        lines += [s.render() for s in demo.swaps]
        shown = truth if kind == "cot" else truth[-1:]
        lines += [f"cups = {st.render()}" for st in shown]
    return "\n".join(lines)


def generate_demos(count: int, seed: int, max_swaps: int = 7) -> list[Demo]:
    """Demonstrations with swap counts drawn uniformly from ``1..max_swaps``."""
    rng = random.Random(f"shellgame-demos:{seed}")
    out = []
    for _ in range(count):
        init = CupsState.with_ball(rng.randrange(3))
        n = rng.randint(1, max_swaps)
        out.append(Demo(init, tuple(random_swap(rng) for _ in range(n))))
    return out


def build_shell_prompt(kind: str, demos: Sequence[Demo], prefix: EpisodePrefix) -> str:
    if kind not in AGENT_KINDS:
        raise ValueError(f"unknown agent kind {kind!r}")
    lines = [HEADER, f"cups = {prefix.init.render()}"]
    if kind == "state":
        if len(prefix.generated) != len(prefix.swaps) - 1:
            raise ValueError("state prompts need one generated line per earlier swap")
        for s, g in zip(prefix.swaps, prefix.generated):
            lines += [s.render(), f"cups = {g}"]
        lines.append(prefix.swaps[-1].render())
    else:
        lines += [s.render() for s in prefix.swaps]
    tail = "\n".join(lines) + "\ncups = "
    return "\n\n".join([*(render_demo(kind, d) for d in demos), tail])


def stop_sequences(kind: str) -> tuple[str, ...]:
    return ("\n\n", "\n#") if kind == "cot" else ("\n",)


def parse_prompt_tail(prompt: str) -> tuple[str, EpisodePrefix]:
    """Recover the kind-independent prefix of the final episode in a prompt.

    Returns ``("state" | "plain", prefix)``: state-layout prompts interleave
    cups lines with swaps.
    """
    tail = prompt[prompt.rfind(HEADER):]
    lines = tail.split("\n")[1:]
    init = parse_cups(lines[0])
    if init is None:
        raise ValueError("prompt has no initial cups line")
    swaps, generated = [], []
    for ln in lines[1:]:
        m = _SWAP_RE.match(ln)
        if m:
            swaps.append(SwapAction(int(m.group(1)), int(m.group(2))))
        elif ln.startswith("cups = ") and ln != "cups = ":
            generated.append(ln[len("cups = "):])
    layout = "state" if generated else "plain"
    return layout, EpisodePrefix(init, tuple(swaps), tuple(generated))


# --------------------------------------------------------------------------
# oracle agents

def oracle_backend(kind: str, *, error_rate: float = 0.0, seed: int = 0) -> ScriptedBackend:
    """A scripted agent that answers correctly, except with probability ``error_rate`` per query.

    The state-kind oracle acts as a perfect writer: it applies the newest
    swap to its own previous answer rather than replaying the whole history.
    """
    rng = random.Random(f"shellgame-oracle:{kind}:{error_rate}:{seed}")

    def answer(req: CompletionRequest) -> str:
        layout, prefix = parse_prompt_tail(req.prompt)
        if layout == "state" and kind == "state":
            prev = parse_cups(prefix.generated[-1]) or prefix.init
            truth = [apply_swap(prev, prefix.swaps[-1])]
        else:
            truth = states_after(prefix.init, prefix.swaps)
        if rng.random() < error_rate:
            wrong = rng.choice([b for b in range(3) if b != truth[-1].ball])
            truth[-1] = CupsState.with_ball(wrong)
        if kind == "cot":
            return "\n".join(t.render() if i == 0 else f"cups = {t.render()}" for i, t in enumerate(truth))
        return truth[-1].render()

    return ScriptedBackend.from_function(answer)


# --------------------------------------------------------------------------
# episodes and curves

@dataclass(frozen=True)
class ShellRunConfig:
    num_episodes: int = 100
    max_swaps: int = 7
    demos: int = 30
    agent_kind: str = "state"
    seed: int = 0
    model_id: str = DEFAULT_MODEL
    max_tokens: int = 128

    def __post_init__(self) -> None:
        if self.agent_kind not in AGENT_KINDS:
            raise ValueError(f"unknown agent kind {self.agent_kind!r}")
        if min(self.num_episodes, self.max_swaps, self.demos) < 1:
            raise ValueError("num_episodes, max_swaps and demos must be positive")


@dataclass
class ShellEpisodeResult:
    episode_id: str
    init: CupsState
    swaps: list[SwapAction] = field(default_factory=list)
    per_swap_correct: list[bool] = field(default_factory=list)
    completions: list[str] = field(default_factory=list)
    aborted: str | None = None

    def to_json(self) -> dict:
        return {
            "episode_id": self.episode_id,
            "init": list(self.init.cups),
            "swap_sequence": [[s.i, s.j] for s in self.swaps],
            "per_swap_correct": self.per_swap_correct,
            "aborted": self.aborted,
        }


def run_shell_episode(cfg: ShellRunConfig, backend: Backend, rng: random.Random, *,
                      demos: Sequence[Demo] | None = None, episode_id: str = "") -> ShellEpisodeResult:
    demos = generate_demos(cfg.demos, cfg.seed) if demos is None else demos
    state = CupsState.with_ball(rng.randrange(3))
    result = ShellEpisodeResult(episode_id, state)
    generated: list[str] = []
    for _ in range(cfg.max_swaps):
        swap = random_swap(rng)
        result.swaps.append(swap)
        state = apply_swap(state, swap)
        prefix = EpisodePrefix(result.init, tuple(result.swaps), tuple(generated))
        req = CompletionRequest(build_shell_prompt(cfg.agent_kind, demos, prefix),
                                stop_sequences(cfg.agent_kind), cfg.max_tokens, 0.0, cfg.model_id)
        text = complete(backend, req).text
        result.completions.append(text)
        answer = parse_answer(cfg.agent_kind, text)
        correct = answer == state
        result.per_swap_correct.append(correct)
        if not correct:
            break
        first = text.split("\n")[0].strip()
        generated.append(first)
    return result


def run_shell_suite(cfg: ShellRunConfig, backend: Backend) -> list[ShellEpisodeResult]:
    """Run ``cfg.num_episodes`` episodes; backend failures abort only their episode."""
    demos = generate_demos(cfg.demos, cfg.seed)
    results = []
    for i in range(cfg.num_episodes):
        rng = random.Random(f"shellgame-episode:{cfg.seed}:{i}")
        eid = f"shell-{cfg.agent_kind}-{i:04d}"
        try:
            results.append(run_shell_episode(cfg, backend, rng, demos=demos, episode_id=eid))
        except BackendError as err:
            results.append(ShellEpisodeResult(eid, CupsState.with_ball(0), aborted=str(err)))
    return results


@dataclass(frozen=True)
class AccuracyCurve:
    """``a[n]``: share of episodes still correct after swap n; ``r[n] = a[n] / a[1]``."""

    a: dict[int, float]
    r: dict[int, float | None]
    attempts: dict[int, int]
    correct: dict[int, int]
    episodes: int
    aborted: int = 0


def accuracy_curve(results: Sequence[ShellEpisodeResult | Sequence[bool]],
                   max_swaps: int | None = None) -> AccuracyCurve:
    """Survival accuracy over all non-aborted episodes.

    ``attempts[n]`` counts episodes that reached an n-th query; since
    episodes stop at their first mistake, ``attempts[n + 1] == correct[n]``.
    """
    lists, aborted = [], 0
    for res in results:
        if isinstance(res, ShellEpisodeResult):
            if res.aborted is not None:
                aborted += 1
                continue
            lists.append(res.per_swap_correct)
        else:
            lists.append(list(res))
    if not lists:
        raise ValueError("no completed episodes")
    horizon = max_swaps or max(len(x) for x in lists)
    total = len(lists)
    a, r, attempts, correct = {}, {}, {}, {}
    for n in range(1, horizon + 1):
        attempts[n] = sum(1 for x in lists if len(x) >= n)
        correct[n] = sum(1 for x in lists if len(x) >= n and all(x[:n]))
        a[n] = correct[n] / total
    for n in a:
        r[n] = a[n] / a[1] if a[1] > 0 else None
    return AccuracyCurve(a, r, attempts, correct, total, aborted)


def curve_csv(curve: AccuracyCurve) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["n", "a", "r", "attempts"])
    for n in sorted(curve.a):
        r = curve.r[n]
        writer.writerow([n, f"{curve.a[n]:.4f}", "undefined" if r is None else f"{r:.4f}",
                         curve.attempts[n]])
    return buf.getvalue()


def write_results(results: Iterable[ShellEpisodeResult], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for res in results:
            fh.write(json.dumps(res.to_json()) + "\n")
