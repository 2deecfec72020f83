"""Simulated tabletop domains: physics, knowledge, scoring and episodes."""

from __future__ import annotations

from .episodes import DOMAINS, Episode, EpisodeBuilder, Step, bundled_episodes, load_episodes, save_episodes
from .generate import generate_episode, generate_episodes
from .scoring import GoldSpec, Verdict, check_step
from .sim import EnvState, TabletopEnv

__all__ = [
    "DOMAINS", "Episode", "EpisodeBuilder", "EnvState", "GoldSpec", "Step", "TabletopEnv",
    "Verdict", "bundled_episodes", "check_step", "generate_episode", "generate_episodes",
    "load_episodes", "save_episodes",
]
