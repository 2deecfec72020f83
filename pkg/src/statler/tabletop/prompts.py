"""Instruction preambles and the deterministic builder for the shipped prompt banks.

Demonstrations are cut from generated episodes whose seeds are disjoint from
the evaluation seeds, so a gold-scripted run never sees its own answers in
the prompt.
"""

from __future__ import annotations

import re
from pathlib import Path

from ..action_lang import parse_program
from ..agents import Example, dump_bank, objects_line
from ..world_model import parse_state, render_state
from .episodes import DOMAINS, Episode, baseline_gold_code
from .generate import generate_episode

DEMO_SEED_BASE = 90_000
READER_DEMOS = 10
WRITER_DEMOS = 8
BASELINE_DEMOS = 2

_FUNCTIONS = """\
# Available functions:
#   put_first_on_second(obj, target)  pick up obj and place it on or in target ("table" is allowed)
#   say(text)                         answer the user
#   noop()                            do nothing"""

_DOMAIN_NOTES = {
    "pick_place": "# Blocks can be stacked on each other or placed in bowls.",
    "disinfection": ("# A clean block touching a dirty block becomes dirty. Anything placed in\n"
                     "# the disinfector becomes clean."),
    "weight": "# Block weights are given relative to each other.",
}

READER_PREAMBLE = """\
# You write robot code for a tabletop scene. The current world state is shown
# as a commented dictionary before each query.
{functions}
#   update_wm(text)                   report what changed so the world state can be updated
# Call update_wm after every action, and whenever the query states a new fact.
{notes}"""

WRITER_PREAMBLE = """\
# You maintain the world state of a tabletop scene. Given the current state and
# a description of what happened, write the complete next state.
{notes}"""

BASELINE_PREAMBLE = """\
# You write robot code for a tabletop scene. The objects in the scene are listed
# first, followed by every earlier query and the code that handled it.
{functions}
{notes}"""


def _preamble(template: str, domain: str) -> str:
    return template.format(functions=_FUNCTIONS, notes=_DOMAIN_NOTES[domain])


def _family(query: str) -> str:
    """Query template with object names abstracted away."""
    return re.sub(r"\b\w+ (block|bowl)\b", "X", query.lower())


def _demo_episodes(domain: str, count: int = 6) -> list[Episode]:
    return [generate_episode(domain, DEMO_SEED_BASE + i) for i in range(count)]


def reader_examples(domain: str) -> list[Example]:
    """A diverse set of (state, query, program) demonstrations."""
    pool: list[Example] = []
    for ep in _demo_episodes(domain):
        state = render_state(parse_state(ep.init_state_text))
        for step in ep.steps:
            pool.append(Example(state, step.query, step.gold_code))
            state = step.gold_state_text
    return _diverse(pool, READER_DEMOS)


def writer_examples(domain: str) -> list[Example]:
    pool: list[Example] = []
    for ep in _demo_episodes(domain):
        state = render_state(parse_state(ep.init_state_text))
        for step in ep.steps:
            for call in parse_program(step.gold_code).calls:
                if call.name == "update_wm":
                    pool.append(Example(state, call.args[0], step.gold_state_text))
            state = step.gold_state_text
    return _diverse(pool, WRITER_DEMOS)


def _diverse(pool: list[Example], limit: int) -> list[Example]:
    """First example of each query family, then fill up in order."""
    chosen: list[Example] = []
    seen: set[str] = set()
    for ex in pool:
        if _family(ex.query) not in seen:
            seen.add(_family(ex.query))
            chosen.append(ex)
    for ex in pool:
        if len(chosen) >= limit:
            break
        if ex not in chosen:
            chosen.append(ex)
    return chosen[:limit]


def baseline_examples(domain: str) -> list[str]:
    out = []
    for ep in _demo_episodes(domain, BASELINE_DEMOS):
        lines = [objects_line(ep.init_env.names)]
        for step in ep.steps:
            lines.append(f"# query: {step.query}")
            lines.append(baseline_gold_code(step.gold_code))
        out.append("\n".join(lines))
    return out


def build_banks(domain: str) -> dict[str, str]:
    """Bank name -> file contents for one domain."""
    return {
        f"{domain}_reader": dump_bank(_preamble(READER_PREAMBLE, domain),
                                      [e.render() for e in reader_examples(domain)]),
        f"{domain}_writer": dump_bank(_preamble(WRITER_PREAMBLE, domain),
                                      [e.render() for e in writer_examples(domain)]),
        f"{domain}_baseline": dump_bank(_preamble(BASELINE_PREAMBLE, domain),
                                        baseline_examples(domain)),
    }


def write_banks(directory: str | Path) -> list[Path]:
    written = []
    for domain in DOMAINS:
        for name, text in build_banks(domain).items():
            path = Path(directory) / f"{name}.txt"
            path.write_text(text, encoding="utf-8")
            written.append(path)
    return written
