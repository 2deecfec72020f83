"""Step through the bundled disinfection episode with the gold oracle.

For each query the script prints the reader's program and the change the
writer made to the stored world state. Run with::

    python demos/disinfection_walkthrough.py
"""

from __future__ import annotations

import dataclasses

from statler.agents import StatlerAgent, load_agent_config
from statler.llm_backends import ScriptedBackend
from statler.oracle import gold_backend
from statler.tabletop import TabletopEnv, bundled_episodes, check_step
from statler.world_model import diff_states


def describe(delta) -> list[str]:
    lines = [f"  + relation: {r}" for r in delta.relations_added]
    lines += [f"  - relation: {r}" for r in delta.relations_removed]
    lines += [f"  {obj}.{key}: {old!r} -> {new!r}" for obj, key, old, new in delta.attribute_changes]
    return lines or ["  (state unchanged)"]


def main() -> None:
    (episode,) = bundled_episodes("disinfection")
    cfg = load_agent_config("disinfection", ScriptedBackend())
    cfg = dataclasses.replace(cfg, backend=gold_backend([episode], cfg))
    agent = StatlerAgent(cfg, episode.init_state_text, TabletopEnv(episode.init_env))

    for i, step in enumerate(episode.steps):
        before = agent.state
        outcome = agent.step(step.query)
        verdict = check_step(step.gold, agent.env.state, outcome.trace)
        tag = "temporal" if step.temporal else "plain"
        print(f"[{i:2d}] ({tag}) {step.query}")
        for line in outcome.reader_text.splitlines():
            print(f"     | {line}")
        for said in outcome.trace.say_outputs:
            print(f"     robot: {said}")
        print("\n".join(describe(diff_states(before, agent.state))))
        print(f"     verdict: {verdict.label}\n")


if __name__ == "__main__":
    main()
