from __future__ import annotations

import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from statler.errors import DestinationOccupied, EnvRuleViolation, SelfPlacement, SourceCovered, UnknownObject
from statler.tabletop.generate import generate_episodes
from statler.tabletop.sim import (
    CLEAN,
    DIRTY,
    TABLE,
    UNKNOWN,
    EnvState,
    apply_pick_place,
    env_from_json,
    env_to_json,
    propagate_dirt,
    total_weight,
)


def _scene(**clean) -> EnvState:
    blocks = ["red block", "pink block", "blue block"]
    status = {b: CLEAN for b in blocks}
    status.update({k.replace("_", " "): v for k, v in clean.items()})
    return EnvState.initial(blocks, ["green bowl"], disinfector=True, cleanliness=status)


def test_dirty_on_clean_dirties_the_bottom():
    env = apply_pick_place(_scene(red_block=DIRTY), "red block", "pink block")
    assert env.cleanliness["pink block"] == DIRTY


def test_disinfector_cleans():
    env = apply_pick_place(_scene(pink_block=DIRTY), "pink block", "disinfector")
    assert env.cleanliness["pink block"] == CLEAN
    assert env.in_disinfector("pink block")


def test_clean_on_clean_unchanged():
    env = apply_pick_place(_scene(), "red block", "pink block")
    assert set(env.cleanliness.values()) == {CLEAN}


def test_tower_closure():
    env = apply_pick_place(_scene(), "pink block", "blue block")
    env = apply_pick_place(replace_status(env, "red block", DIRTY), "red block", "pink block")
    assert all(env.cleanliness[b] == DIRTY for b in env.blocks)


def replace_status(env: EnvState, block: str, status: str) -> EnvState:
    from dataclasses import replace
    return replace(env, cleanliness={**env.cleanliness, block: status})


@pytest.mark.parametrize("src, dst, error", [
    ("red block", "red block", SelfPlacement),
    ("ghost block", "table", UnknownObject),
    ("red block", "ghost bowl", UnknownObject),
    ("green bowl", "table", EnvRuleViolation),
])
def test_rule_violations(src, dst, error):
    with pytest.raises(error):
        apply_pick_place(_scene(), src, dst)


def test_covered_source_and_occupied_destination():
    env = apply_pick_place(_scene(), "red block", "pink block")
    with pytest.raises(SourceCovered):
        apply_pick_place(env, "pink block", "table")
    with pytest.raises(DestinationOccupied):
        apply_pick_place(env, "blue block", "pink block")


def test_total_weight():
    env = EnvState.initial(["orange block", "green block", "black block"], ["transparent bowl", "green bowl"],
                           weights={"orange block": 2, "green block": 4, "black block": 2})
    assert total_weight(env, "green bowl") == 0
    env = apply_pick_place(env, "orange block", "transparent bowl")
    assert total_weight(env, "transparent bowl") == 2
    env = apply_pick_place(env, "green block", "green bowl")
    env = apply_pick_place(env, "black block", "green bowl")
    assert total_weight(env, "green bowl") == 6
    with pytest.raises(UnknownObject):
        total_weight(env, "purple bowl")


def test_env_json_round_trip():
    env = EnvState.initial(["a block"], ["b bowl"], weights={"a block": Fraction(3, 2)})
    assert env_from_json(env_to_json(env)) == env


# --------------------------------------------------------------------------
# contact-graph closure oracle


def random_scene(rng: random.Random) -> EnvState:
    n = rng.randint(1, 8)
    blocks = [f"b{i} block" for i in range(n)]
    order = blocks[:]
    rng.shuffle(order)
    support, free_tops = {}, []
    for b in order:
        choice = rng.random()
        if free_tops and choice < 0.5:
            under = free_tops.pop(rng.randrange(len(free_tops)))
            support[b] = f"on:{under}"
        elif choice < 0.7:
            support[b] = "in:disinfector"
        elif choice < 0.85:
            support[b] = "in:bowl"
        else:
            support[b] = TABLE
        free_tops.append(b)
    status = {b: rng.choice([CLEAN, DIRTY, UNKNOWN]) for b in blocks}
    base = EnvState.initial(blocks, ["bowl"], disinfector=True, cleanliness=status)
    from dataclasses import replace
    return replace(base, support=support)


def closure_oracle(env: EnvState) -> dict[str, str]:
    """Union-find over contact edges; disinfector contents are sinks."""
    sink = {b for b in env.blocks if env.support[b] == "in:disinfector"}
    parent = {b: b for b in env.blocks}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for b in env.blocks:
        loc = env.support[b]
        if loc.startswith("on:") and b not in sink and loc[3:] not in sink:
            parent[find(b)] = find(loc[3:])
    dirty_roots = {find(b) for b in env.blocks if env.cleanliness[b] == DIRTY and b not in sink}
    out = {}
    for b in env.blocks:
        if b in sink:
            out[b] = CLEAN
        elif find(b) in dirty_roots:
            out[b] = DIRTY
        else:
            out[b] = env.cleanliness[b]
    return out


def test_dirt_propagation_matches_closure_oracle():
    rng = random.Random(20240601)
    mismatches = 0
    for _ in range(10_000):
        env = random_scene(rng)
        assert env.violations() == []
        if dict(propagate_dirt(env).cleanliness) != closure_oracle(env):
            mismatches += 1
    assert mismatches == 0


@settings(max_examples=200, deadline=None)
@given(st.randoms(use_true_random=False), st.lists(st.tuples(st.integers(0, 9), st.integers(0, 9)), max_size=25))
def test_random_move_sequences_keep_invariants(rnd, moves):
    env = propagate_dirt(random_scene(rnd))
    names = env.blocks + ["bowl", "disinfector", TABLE]
    for i, j in moves:
        src, dst = env.blocks[i % len(env.blocks)], names[j % len(names)]
        before_dirty = {b for b in env.blocks if env.cleanliness[b] == DIRTY}
        try:
            env = apply_pick_place(env, src, dst)
        except EnvRuleViolation:
            continue
        assert env.violations() == []
        assert not any(env.in_disinfector(b) and env.cleanliness[b] == DIRTY for b in env.blocks)
        if dst != "disinfector":
            assert before_dirty <= {b for b in env.blocks if env.cleanliness[b] == DIRTY}


def test_total_weight_matches_independent_sum_on_generated_episodes():
    from statler.action_lang import execute_program, parse_program
    from statler.tabletop.sim import TabletopEnv

    for ep in generate_episodes("weight", 50, seed=0):
        weights = ep.obj_name_to_weight
        env = TabletopEnv(ep.init_env)
        for step in ep.steps:
            execute_program(parse_program(step.gold_code), env, writer_hook=lambda q: None)
            for bowl in env.state.bowls:
                expected = sum(weights[b] for b, loc in env.state.support.items() if loc == f"in:{bowl}")
                assert float(total_weight(env.state, bowl)) == pytest.approx(expected)
