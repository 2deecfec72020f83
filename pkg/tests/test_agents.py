from __future__ import annotations

from dataclasses import replace

import pytest

from conftest import fixture_text, split_reader_example, split_writer_example
from statler.agents import (
    AgentConfig,
    BaselineAgent,
    BaselineConfig,
    Example,
    StatlerAgent,
    baseline_step,
    build_baseline_prompt,
    build_reader_prompt,
    build_writer_prompt,
    dump_bank,
    extract_state_text,
    load_agent_config,
    load_examples,
    parse_bank,
    statler_step,
)
from statler.errors import BudgetExceeded, ConfigError
from statler.llm_backends import ScriptedBackend, ScriptEntry
from statler.tabletop.scoring import GoldSpec, check_step
from statler.tabletop.sim import EnvState, TabletopEnv
from statler.world_model import parse_state, render_state

READER_MARK = "You turn requests into robot programs."
WRITER_MARK = "You update the scene description."


def _example_env() -> TabletopEnv:
    blocks = ["cyan block", "yellow block", "brown block", "purple block", "blue block"]
    dirty = {"cyan block", "purple block"}
    return TabletopEnv(EnvState.initial(blocks, ["green bowl", "red bowl"], disinfector=True,
                                        cleanliness={b: "dirty" if b in dirty else "clean" for b in blocks}))


def _cfg(backend=None, **kw) -> AgentConfig:
    r_state, r_query, r_completion = split_reader_example(fixture_text("reader_example.txt"))
    w_state, w_query, w_output = split_writer_example(fixture_text("writer_example.txt"))
    return AgentConfig(
        READER_MARK, (Example(r_state, r_query, r_completion),),
        WRITER_MARK, (Example(w_state, w_query, w_output),),
        backend or ScriptedBackend(), **kw)


# --------------------------------------------------------------------------
# prompt construction


def test_reader_prompt_tail_matches_example(reader_example_text):
    state, query, _ = split_reader_example(reader_example_text)
    prompt = build_reader_prompt(_cfg(), parse_state(state), query)
    lines = reader_example_text.split("\n")
    assert prompt.endswith("\n".join(lines[:13]) + "\n")
    assert prompt.startswith(READER_MARK)


def test_writer_prompt_tail_matches_example(writer_example_text):
    state, query, _ = split_writer_example(writer_example_text)
    prompt = build_writer_prompt(_cfg(), parse_state(state), query)
    assert prompt.endswith("\n".join(writer_example_text.split("\n")[:13]) + "\n")
    assert query.endswith(".")


def test_prompts_are_deterministic_and_distinct(reader_example_text):
    state, query, _ = split_reader_example(reader_example_text)
    cfg, ws = _cfg(), parse_state(state)
    assert build_reader_prompt(cfg, ws, query) == build_reader_prompt(cfg, ws, query)
    assert build_reader_prompt(cfg, ws, query) != build_writer_prompt(cfg, ws, query)
    assert WRITER_MARK not in build_reader_prompt(cfg, ws, query)
    assert READER_MARK not in build_writer_prompt(cfg, ws, query)


def test_empty_demonstrations_rejected():
    cfg = _cfg()
    with pytest.raises(ConfigError):
        replace(cfg, reader_examples=())
    with pytest.raises(ConfigError):
        BaselineConfig("p", (), ScriptedBackend())
    with pytest.raises(ConfigError):
        replace(cfg, budget_chars=0)


def test_budget_exceeded(reader_example_text):
    state, query, _ = split_reader_example(reader_example_text)
    with pytest.raises(BudgetExceeded):
        build_reader_prompt(_cfg(budget_chars=100), parse_state(state), query)


def test_extract_state_text_trims():
    assert extract_state_text("# state = {}\n\n# query: x") == "# state = {}"
    assert extract_state_text("# state = {}\n   \n") == "# state = {}"


# --------------------------------------------------------------------------
# the reader/writer loop


def _scripted_pair(reader_text: str, writer_text: str) -> ScriptedBackend:
    return ScriptedBackend([ScriptEntry(reader_text, prefix=READER_MARK),
                            ScriptEntry(writer_text, prefix=WRITER_MARK)])


def test_reader_writer_example_step(reader_example_text, writer_example_text):
    state, query, completion = split_reader_example(reader_example_text)
    _, _, writer_out = split_writer_example(writer_example_text)
    agent = StatlerAgent(_cfg(_scripted_pair(completion, writer_out)), state, _example_env())
    outcome = statler_step(agent, query)
    assert outcome.failure is None
    assert outcome.reader_text == completion
    assert outcome.new_world_state == parse_state(writer_out)
    assert agent.state.relations == ("cyan block is on yellow block",)
    assert agent.state.attr("yellow block").is_tags == ("dirty",)
    assert len(outcome.digests) == 2
    assert agent.env.state.support["cyan block"] == "on:yellow block"


def test_read_only_query_keeps_state(reader_example_text):
    state, _, _ = split_reader_example(reader_example_text)
    agent = StatlerAgent(_cfg(ScriptedBackend(['say("three blocks")'])), state, _example_env())
    before = render_state(agent.state)
    outcome = statler_step(agent, "How many dirty blocks are there?")
    assert outcome.failure is None and outcome.new_world_state is None
    assert outcome.trace.say_outputs == ["three blocks"]
    assert render_state(agent.state) == before


@pytest.mark.parametrize("writer_text", [
    "# state = { \"objects\": [",
    '# state = {"objects": ["a"], "relations": [], "b": {"contains": ["ghost"]}}',
])
def test_bad_writer_output_leaves_state_untouched(reader_example_text, writer_text):
    state, query, completion = split_reader_example(reader_example_text)
    agent = StatlerAgent(_cfg(_scripted_pair(completion, writer_text)), state, _example_env())
    before = agent.state
    outcome = statler_step(agent, query)
    assert outcome.failure is not None and outcome.failure.kind == "WriterFailure"
    assert agent.state is before
    assert outcome.new_world_state is None


def test_invalid_writer_state_can_warn(reader_example_text):
    state, query, completion = split_reader_example(reader_example_text)
    bad = '# state = {"objects": ["a"], "relations": [], "a": {"contains": ["ghost"]}}'
    agent = StatlerAgent(_cfg(_scripted_pair(completion, bad), on_invalid_state="warn"), state, _example_env())
    outcome = statler_step(agent, query)
    assert outcome.failure is None and outcome.warnings
    assert agent.state.objects == ("a",)


def test_reader_parse_failure_is_captured(reader_example_text):
    state, query, _ = split_reader_example(reader_example_text)
    agent = StatlerAgent(_cfg(ScriptedBackend(["for b in blocks:"])), state, _example_env())
    outcome = statler_step(agent, query)
    assert outcome.failure.kind == "ParseFailure" and outcome.program is None


def test_chained_writer_calls_see_previous_output(reader_example_text):
    state, _, _ = split_reader_example(reader_example_text)
    base = parse_state(state)
    s1 = render_state(base.with_relations(("cyan block is on yellow block",)))
    s2 = render_state(base.with_relations(("cyan block is on yellow block", "blue block is on brown block")))
    reader = ('put_first_on_second("cyan block", "yellow block")\nupdate_wm("first")\n'
              'put_first_on_second("blue block", "brown block")\nupdate_wm("second")')
    backend = ScriptedBackend([ScriptEntry(reader, prefix=READER_MARK),
                               ScriptEntry(s1, prefix=WRITER_MARK, suffix="# query: first\n"),
                               ScriptEntry(s2, prefix=WRITER_MARK, contains=s1)])
    agent = StatlerAgent(_cfg(backend), base, _example_env())
    outcome = statler_step(agent, "two moves")
    assert outcome.failure is None
    assert render_state(agent.state) == s2


# --------------------------------------------------------------------------
# baseline


def _baseline(texts) -> BaselineAgent:
    cfg = BaselineConfig("Write robot code.", ("# query: demo\nnoop()",), ScriptedBackend(texts))
    return BaselineAgent(cfg, ["red block", "blue block"], TabletopEnv(EnvState.initial(["red block", "blue block"], [])))


def test_baseline_history_grows_in_order():
    agent = _baseline(["noop()"] * 4)
    assert build_baseline_prompt(agent.cfg, agent.objects, agent.history, "q0").count("# query: ") == 2
    for i in range(3):
        baseline_step(agent, f"q{i}")
    prompt = build_baseline_prompt(agent.cfg, agent.objects, agent.history, "q3")
    assert [q for q, _ in agent.history] == ["q0", "q1", "q2"]
    assert prompt.index("# query: q0") < prompt.index("# query: q1") < prompt.index("# query: q2")
    assert prompt.endswith('objects = ["red block", "blue block"]\n' + "".join(
        f"# query: q{i}\nnoop()\n" for i in range(3)) + "# query: q3\n")


def test_baseline_failures_still_enter_history():
    agent = _baseline(["for x in y:"])
    outcome = baseline_step(agent, "q")
    assert outcome.failure.kind == "ParseFailure" and agent.history == [("q", "for x in y:")]


def test_baseline_silent_answer_fails_the_step():
    agent = _baseline([""])
    query = "What is the color of the block right above the blue block?"
    outcome = baseline_step(agent, query)
    verdict = check_step(GoldSpec(expected_answer="red"), agent.env.state, outcome.trace)
    assert not verdict.passed


def test_baseline_budget_drops_oldest_history():
    agent = _baseline(["noop()"])
    history = [(f"query number {i}", "noop()") for i in range(50)]
    full = build_baseline_prompt(agent.cfg, agent.objects, history, "last")
    small = replace(agent.cfg, budget_chars=len(full) - 10)
    prompt = build_baseline_prompt(small, agent.objects, history, "last")
    assert "query number 0\n" not in prompt and "query number 49\n" in prompt
    with pytest.raises(BudgetExceeded):
        build_baseline_prompt(replace(agent.cfg, budget_chars=20), agent.objects, [], "last")


# --------------------------------------------------------------------------
# banks


def test_bank_round_trip():
    text = dump_bank("Preamble line.", ["# query: a\nnoop()", "# query: b\nsay(\"x\")"])
    assert parse_bank(text) == ("Preamble line.", ["# query: a\nnoop()", '# query: b\nsay("x")'])
    _, examples = load_examples(text)
    assert examples[1] == Example("", "b", 'say("x")')


def test_bundled_banks_load_for_every_domain():
    for domain in ("pick_place", "disinfection", "weight"):
        cfg = load_agent_config(domain, ScriptedBackend())
        assert cfg.reader_examples and cfg.writer_examples
        for ex in cfg.writer_examples:
            parse_state(ex.context)
            parse_state(ex.completion)
