"""Evaluation episodes: file format, construction and gold self-consistency."""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Iterable, Mapping

from ..action_lang import Call, Program, execute_program, parse_program, render_program
from ..errors import StatlerError
from ..world_model import render_state
from .knowledge import Knowledge, status_changes, world_state_for
from .scoring import GoldSpec, check_step
from .sim import DIRTY, EnvState, TabletopEnv, env_from_json, env_to_json

DOMAINS = ("pick_place", "disinfection", "weight")
MIN_STEPS, MAX_STEPS = 5, 16


class EpisodeError(StatlerError):
    """An episode violates its invariants or its gold does not replay."""


@dataclass(frozen=True)
class Step:
    query: str
    temporal: bool
    gold: GoldSpec
    gold_code: str = ""
    gold_state_text: str | None = None


@dataclass(frozen=True)
class Episode:
    episode_id: str
    domain: str
    init_env: EnvState
    init_state_text: str
    steps: tuple[Step, ...]
    seed: int | None = None

    @property
    def dirty_list(self) -> list[str]:
        return [b for b in self.init_env.blocks if self.init_env.cleanliness.get(b) == DIRTY]

    @property
    def obj_name_to_weight(self) -> dict[str, float]:
        return {b: float(w) for b, w in self.init_env.weights.items()}

    def __len__(self) -> int:
        return len(self.steps)


def check_invariants(episode: Episode) -> list[str]:
    problems = []
    if episode.domain not in DOMAINS:
        problems.append(f"unknown domain {episode.domain!r}")
    if not MIN_STEPS <= len(episode.steps) <= MAX_STEPS:
        problems.append(f"{len(episode.steps)} steps, expected {MIN_STEPS}..{MAX_STEPS}")
    if not any(s.temporal for s in episode.steps):
        problems.append("no temporal step")
    problems.extend(episode.init_env.violations())
    return problems


def verify_gold(episode: Episode) -> None:
    """Replay every step's gold code through the simulator and check it passes."""
    env = TabletopEnv(episode.init_env)
    for i, step in enumerate(episode.steps):
        try:
            program = parse_program(step.gold_code)
        except StatlerError as err:
            raise EpisodeError(f"{episode.episode_id} step {i}: gold code does not parse: {err}")
        trace = execute_program(program, env, writer_hook=lambda q: None)
        verdict = check_step(step.gold, env.state, trace)
        if not verdict.passed:
            raise EpisodeError(f"{episode.episode_id} step {i}: gold does not replay: {verdict.reason}")
        for s in step.gold.expected_env.violations() if step.gold.expected_env else ():
            raise EpisodeError(f"{episode.episode_id} step {i}: expected env invalid: {s}")


def baseline_gold_code(code: str) -> str:
    """The gold program without world-model updates (``noop()`` if nothing is left)."""
    program = parse_program(code)
    calls = [c for c in program.calls if c.name != "update_wm"]
    if not calls:
        calls = [Call("noop")]
    return render_program(Program(tuple(calls)))


# --------------------------------------------------------------------------
# construction

class EpisodeBuilder:
    """Accumulates steps while simulating the gold effects and agent knowledge."""

    def __init__(self, domain: str, env: EnvState, *, episode_id: str,
                 seed: int | None = None, init_state_text: str | None = None):
        self.domain = domain
        self.env = env
        self.init_env = env
        self.episode_id = episode_id
        self.seed = seed
        self.knowledge = Knowledge()
        self.init_state_text = init_state_text or render_state(world_state_for(env))
        self.steps: list[Step] = []

    def add(self, query: str, code: str, *, temporal: bool = False,
            answer: str | None = None, noop: bool = False,
            learn_status: Iterable[str] = (), learn_weight: tuple[str, str] | None = None) -> EnvState:
        handle = TabletopEnv(self.env)
        trace = execute_program(parse_program(code), handle, writer_hook=lambda q: None)
        if trace.failure is not None:
            raise EpisodeError(f"{self.episode_id}: gold code for {query!r} fails: {trace.failure}")
        after = handle.state
        knowledge = self.knowledge.learn_status(learn_status)
        knowledge = knowledge.learn_status(b for b, _ in status_changes(self.env, after))
        if learn_weight is not None:
            knowledge = knowledge.learn_weight(*learn_weight)
        self.steps.append(Step(
            query=query,
            temporal=temporal,
            gold=GoldSpec(expected_env=after, expected_answer=answer, expected_noop=noop),
            gold_code=code,
            gold_state_text=render_state(world_state_for(after, knowledge)),
        ))
        self.env, self.knowledge = after, knowledge
        return after

    def build(self) -> Episode:
        episode = Episode(
            episode_id=self.episode_id,
            domain=self.domain,
            init_env=self.init_env,
            init_state_text=self.init_state_text,
            steps=tuple(self.steps),
            seed=self.seed,
        )
        problems = check_invariants(episode)
        if problems:
            raise EpisodeError(f"{self.episode_id}: " + "; ".join(problems))
        return episode


# --------------------------------------------------------------------------
# JSON

def episode_to_json(episode: Episode) -> dict[str, Any]:
    return {
        "episode_id": episode.episode_id,
        "domain": episode.domain,
        "seed": episode.seed,
        "init_env": env_to_json(episode.init_env),
        "init_state_text": episode.init_state_text,
        "dirty_list": episode.dirty_list,
        "obj_name_to_weight": episode.obj_name_to_weight,
        "steps": [
            {
                "query": s.query,
                "temporal": s.temporal,
                "gold": {
                    "expected_env": None if s.gold.expected_env is None else env_to_json(s.gold.expected_env),
                    "expected_answer": s.gold.expected_answer,
                    "expected_noop": s.gold.expected_noop,
                },
                "gold_code": s.gold_code,
                "gold_state_text": s.gold_state_text,
            }
            for s in episode.steps
        ],
    }


def episode_from_json(doc: Mapping[str, Any], *, verify: bool = True) -> Episode:
    steps = []
    for s in doc["steps"]:
        g = s["gold"]
        steps.append(Step(
            query=s["query"],
            temporal=bool(s["temporal"]),
            gold=GoldSpec(
                expected_env=None if g.get("expected_env") is None else env_from_json(g["expected_env"]),
                expected_answer=g.get("expected_answer"),
                expected_noop=bool(g.get("expected_noop", False)),
            ),
            gold_code=s.get("gold_code", ""),
            gold_state_text=s.get("gold_state_text"),
        ))
    episode = Episode(
        episode_id=doc.get("episode_id") or f"{doc['domain']}-{doc.get('seed')}",
        domain=doc["domain"],
        init_env=env_from_json(doc["init_env"]),
        init_state_text=doc["init_state_text"],
        steps=tuple(steps),
        seed=doc.get("seed"),
    )
    if verify:
        problems = check_invariants(episode)
        if problems:
            raise EpisodeError(f"{episode.episode_id}: " + "; ".join(problems))
        verify_gold(episode)
    return episode


def dump_episode(episode: Episode) -> str:
    return json.dumps(episode_to_json(episode), indent=2, ensure_ascii=False) + "\n"


def save_episodes(episodes: Iterable[Episode], path: str | Path) -> None:
    """One JSON document per line."""
    with open(path, "w", encoding="utf-8") as fh:
        for ep in episodes:
            fh.write(json.dumps(episode_to_json(ep), ensure_ascii=False) + "\n")


def load_episodes(path: str | Path, *, verify: bool = True) -> list[Episode]:
    """Load a ``.jsonl`` episode set or a single pretty-printed ``.json`` episode."""
    text = Path(path).read_text(encoding="utf-8")
    if Path(path).suffix == ".json":
        return [episode_from_json(json.loads(text), verify=verify)]
    out = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            doc = json.loads(line)
        except json.JSONDecodeError as err:
            raise EpisodeError(f"{path}:{lineno}: {err}") from err
        out.append(episode_from_json(doc, verify=verify))
    return out


BUNDLED = ("sample_disinfection", "sample_weight", "sample_pick_place")


def bundled_episodes(domain: str | None = None) -> list[Episode]:
    """Hand-built sample episodes shipped as package data."""
    out = []
    for name in BUNDLED:
        text = resources.files("statler.data.fixtures").joinpath(f"{name}.json").read_text(encoding="utf-8")
        ep = episode_from_json(json.loads(text))
        if domain is None or ep.domain == domain:
            out.append(ep)
    return out
