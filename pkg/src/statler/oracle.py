"""Gold-scripted backends built from episode gold specs.

The oracle reconstructs every prompt the agent will send when it behaves
perfectly and maps each request digest to the gold completion. Because the
mapping is keyed by digest rather than consumed from a queue, one backend can
serve many episodes concurrently.
"""

from __future__ import annotations

from typing import Iterable

from .action_lang import parse_program
from .agents import AgentConfig, BaselineConfig, baseline_request, reader_request, writer_request
from .errors import ConfigError
from .llm_backends import ScriptedBackend, request_digest
from .tabletop.episodes import Episode, baseline_gold_code
from .world_model import parse_state


def _put(table: dict[str, str], digest: str, text: str) -> None:
    if table.setdefault(digest, text) != text:
        raise ConfigError(f"conflicting gold completions for request {digest[:12]}")


def statler_gold_table(episodes: Iterable[Episode], cfg: AgentConfig) -> dict[str, str]:
    table: dict[str, str] = {}
    for ep in episodes:
        state = parse_state(ep.init_state_text)
        for step in ep.steps:
            _put(table, request_digest(reader_request(cfg, state, step.query)), step.gold_code)
            for call in parse_program(step.gold_code).calls:
                if call.name != "update_wm":
                    continue
                if step.gold_state_text is None:
                    raise ConfigError(f"{ep.episode_id}: step {step.query!r} has no gold state")
                _put(table, request_digest(writer_request(cfg, state, call.args[0])),
                     step.gold_state_text)
                state = parse_state(step.gold_state_text)
    return table


def baseline_gold_table(episodes: Iterable[Episode], cfg: BaselineConfig) -> dict[str, str]:
    table: dict[str, str] = {}
    for ep in episodes:
        history: list[tuple[str, str]] = []
        for step in ep.steps:
            code = baseline_gold_code(step.gold_code)
            req = baseline_request(cfg, ep.init_env.names, history, step.query)
            _put(table, request_digest(req), code)
            history.append((step.query, code))
    return table


def gold_backend(episodes: Iterable[Episode], cfg: AgentConfig | BaselineConfig) -> ScriptedBackend:
    episodes = list(episodes)
    if isinstance(cfg, AgentConfig):
        return ScriptedBackend(by_digest=statler_gold_table(episodes, cfg))
    return ScriptedBackend(by_digest=baseline_gold_table(episodes, cfg))
