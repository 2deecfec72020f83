from __future__ import annotations

import pytest

from statler.action_lang import execute_program, parse_program
from statler.tabletop.episodes import bundled_episodes
from statler.tabletop.scoring import GoldSpec, answers_match, check_step, normalize_answer
from statler.tabletop.sim import EnvState, TabletopEnv


@pytest.mark.parametrize("expected, said", [
    ("three blocks", "3 blocks"),
    ("three blocks", "Three."),
    ("red", "red block"),
    ("Yes", "yes!"),
])
def test_answers_match_after_normalization(expected, said):
    assert answers_match(expected, said)


def test_answers_differ():
    assert not answers_match("two blocks", "three blocks")
    assert normalize_answer("Twenty blocks") == "20"


def _run(env_state, code):
    env = TabletopEnv(env_state)
    trace = execute_program(parse_program(code), env, writer_hook=lambda q: None)
    return env.state, trace


def test_weight_episode_final_step_passes_with_gold_move():
    ep = bundled_episodes("weight")[0]
    before = ep.steps[-2].gold.expected_env
    after, trace = _run(before, 'put_first_on_second("black block", "green bowl")')
    assert check_step(ep.steps[-1].gold, after, trace).passed


def test_noop_violation_fails():
    env = EnvState.initial(["a block"], ["b bowl"])
    after, trace = _run(env, 'put_first_on_second("a block", "b bowl")')
    verdict = check_step(GoldSpec(expected_noop=True), after, trace)
    assert not verdict.passed and "no environment effect" in verdict.reason


def test_answer_required():
    env = EnvState.initial(["a block"], [])
    after, trace = _run(env, "noop()")
    assert not check_step(GoldSpec(expected_answer="three blocks"), after, trace).passed
    after, trace = _run(env, 'say("3 blocks")')
    assert check_step(GoldSpec(expected_answer="three blocks"), after, trace).passed


def test_trace_failure_fails():
    env = EnvState.initial(["a block"], [])
    after, trace = _run(env, 'put_first_on_second("ghost", "table")')
    verdict = check_step(GoldSpec(expected_env=env), after, trace)
    assert not verdict.passed and "UnknownObject" in verdict.reason


def test_env_mismatch_reason_names_block():
    env = EnvState.initial(["a block"], ["b bowl"])
    after, trace = _run(env, 'put_first_on_second("a block", "b bowl")')
    verdict = check_step(GoldSpec(expected_env=env), after, trace)
    assert not verdict.passed and "a block" in verdict.reason


def test_order_insensitive_multi_move():
    env = EnvState.initial(["a block", "b block"], ["c bowl"])
    gold_after, _ = _run(env, 'put_first_on_second("a block", "c bowl")\nput_first_on_second("b block", "c bowl")')
    after, trace = _run(env, 'put_first_on_second("b block", "c bowl")\nput_first_on_second("a block", "c bowl")')
    assert check_step(GoldSpec(expected_env=gold_after), after, trace).passed
