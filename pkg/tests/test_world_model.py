from __future__ import annotations

import string

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import fixture_text, split_reader_example, split_writer_example
from statler.errors import ParseFailure
from statler.world_model import (
    ABSENT,
    AttributeSet,
    RawExpr,
    WorldState,
    apply_delta,
    diff_states,
    parse_relation,
    parse_state,
    render_state,
    state_from_json,
    state_to_json,
    validate_state,
)

REFERENCE_STATES = ["state_stacking.txt", "state_weight.txt", "state_disinfection.txt",
                   "state_real_robot.txt"]


# --------------------------------------------------------------------------
# rendering


def test_reader_example_state_renders_byte_exact(reader_example_text):
    block, _, _ = split_reader_example(reader_example_text)
    state = parse_state(block)
    assert render_state(state) == block
    assert len(block.split("\n")) == 12


def test_reader_example_state_structure(reader_example_text):
    state = parse_state(split_reader_example(reader_example_text)[0])
    assert len(state.objects) == 8
    assert state.relations == ()
    assert state.attr("cyan block").is_tags == ("dirty",)
    assert state.attr("purple block").is_tags == ("dirty",)
    assert state.attr("disinfector").contains == ()
    assert state.attribute_names[0] == "disinfector"


def test_empty_state_render():
    text = render_state(WorldState.build())
    assert text == '# state = {\n#     "objects": [],\n#     "relations": []\n# }'


def test_render_is_deterministic():
    s = WorldState.build(["a block"], [], {"a block": AttributeSet.build(is_tags=["clean"])})
    assert render_state(s) == render_state(s)


def test_render_keeps_insertion_order():
    s = WorldState.build(["b", "a"], [], [("b", AttributeSet()), ("a", AttributeSet())])
    text = render_state(s)
    assert text.index('"b": {}') < text.index('"a": {}')


def test_raw_expressions_render_unquoted():
    attrs = AttributeSet.build(weight_expr=RawExpr("green_block.weight * 2"))
    text = render_state(WorldState.build(["x block"], [], {"x block": attrs}))
    assert '"weight": green_block.weight * 2' in text


# --------------------------------------------------------------------------
# parsing


def test_writer_example_output_parses():
    _, _, output = split_writer_example(fixture_text("writer_example.txt"))
    state = parse_state(output)
    assert state.relations == ("cyan block is on yellow block",)
    assert state.attr("yellow block").is_tags == ("dirty",)
    assert validate_state(state) == []


def test_trailing_comma_accepted_and_never_emitted():
    state = parse_state('# state = {\n#     "objects": ["a"],\n#     "relations": [],\n#     "a": {},\n# }')
    assert state.attribute_names == ["a"]
    assert ",\n# }" not in render_state(state)


def test_unclosed_list_reports_position():
    with pytest.raises(ParseFailure) as info:
        parse_state('# state = { "objects": [ }')
    assert info.value.position is not None
    assert info.value.position >= len('state = { "objects": [ ')


def test_duplicate_keys_rejected():
    with pytest.raises(ParseFailure):
        parse_state('# state = {"objects": [], "objects": []}')


def test_single_quotes_and_tuples_accepted():
    state = parse_state("# state = {'objects': ('a',), 'relations': [], 'a': {'is': ('clean',)}}")
    assert state.objects == ("a",)
    assert state.attr("a").is_tags == ("clean",)


@pytest.mark.parametrize("name", REFERENCE_STATES)
def test_reference_states_parse_validate_and_round_trip(name):
    text = fixture_text(name)
    state = parse_state(text)
    assert validate_state(state) == []
    canonical = render_state(state)
    assert render_state(parse_state(canonical)) == canonical
    assert parse_state(canonical) == state


def test_weight_state_keeps_expressions():
    state = parse_state(fixture_text("state_weight.txt"))
    exprs = [a.weight_expr for _, a in state.attributes if a.weight_expr is not None]
    assert exprs and all(isinstance(e, RawExpr) for e in exprs)


def test_real_robot_state_uses_extra_keys():
    state = parse_state(fixture_text("state_real_robot.txt"))
    assert state.objects is None or state.extra


def test_json_form_round_trips():
    for name in REFERENCE_STATES:
        state = parse_state(fixture_text(name))
        assert state_from_json(state_to_json(state)) == state


# --------------------------------------------------------------------------
# validation


def test_contained_object_missing_from_objects():
    s = WorldState.build(["bowl"], [], {"bowl": AttributeSet.build(contains=["red block"])})
    problems = validate_state(s)
    assert len(problems) == 1 and "red block" in problems[0]


def test_clean_and_dirty_tags_conflict():
    s = WorldState.build(["a"], [], {"a": AttributeSet.build(is_tags=["clean", "dirty"])})
    assert len(validate_state(s)) == 1


def test_self_relation_and_double_containment():
    s = WorldState.build(
        ["a", "b1", "b2"], ["a is on a"],
        {"a": AttributeSet(), "b1": AttributeSet.build(contains=["a"]),
         "b2": AttributeSet.build(contains=["a"])})
    problems = validate_state(s)
    assert any("itself" in p for p in problems)
    assert any("contained in both" in p for p in problems)


def test_missing_attribute_entry():
    s = WorldState.build(["a", "b"], [], {"a": AttributeSet()})
    assert validate_state(s) == ["'b': no attribute entry"]


def test_noncanonical_relation_only_warns():
    s = WorldState.build(["a"], ["a is next to the wall"], {"a": AttributeSet()})
    assert validate_state(s) == []
    assert validate_state(s, include_warnings=True)[0].startswith("warning:")


def test_parse_relation():
    assert parse_relation("cyan block is on yellow block") == ("cyan block", "yellow block")
    assert parse_relation("nonsense") is None


# --------------------------------------------------------------------------
# diffing


def test_writer_example_delta():
    before, _, after = split_writer_example(fixture_text("writer_example.txt"))
    a, b = parse_state(before), parse_state(after)
    delta = diff_states(a, b)
    assert delta.relations_added == ("cyan block is on yellow block",)
    assert delta.relations_removed == ()
    assert delta.attribute_changes == (("yellow block", "is", ("clean",), ("dirty",)),)
    assert apply_delta(delta, a) == b


def test_null_value_is_not_absence():
    a = WorldState.build(extra={"task": 1})
    b = WorldState.build(extra={"task": None})
    delta = diff_states(a, b)
    assert delta.extra_changes == (("task", 1, None),)
    assert apply_delta(delta, a) == b
    assert diff_states(WorldState.build(), b).extra_changes == (("task", ABSENT, None),)


def test_self_diff_is_empty():
    s = parse_state(fixture_text("state_disinfection.txt"))
    assert diff_states(s, s).is_empty()


# --------------------------------------------------------------------------
# generated states

_name_chars = string.ascii_lowercase + " "
names = st.text(_name_chars, min_size=1, max_size=10).map(lambda s: s.strip() or "x").map(
    lambda s: s + " block")
scalars = st.one_of(
    st.none(), st.booleans(), st.integers(-10**6, 10**6),
    st.floats(allow_nan=False, allow_infinity=False, width=64),
    st.text(min_size=0, max_size=12),
)
values = st.recursive(scalars, lambda inner: st.lists(inner, max_size=3).map(tuple), max_leaves=6)
exprs = st.builds(lambda a, op, n: RawExpr(f"{a}.weight {op} {n}"),
                  st.from_regex(r"[a-z]{1,6}_block", fullmatch=True), st.sampled_from("*/+-"),
                  st.integers(1, 9))


@st.composite
def world_states(draw):
    objects = draw(st.lists(names, unique=True, max_size=6))
    relations = []
    if len(objects) >= 2:
        for _ in range(draw(st.integers(0, 3))):
            a, b = draw(st.sampled_from(objects)), draw(st.sampled_from(objects))
            if a != b:
                relations.append(f"{a} is on {b}")
    free = list(objects)
    attrs = []
    for obj in objects:
        kw = {}
        if draw(st.booleans()):
            kw["is_tags"] = [draw(st.sampled_from(["clean", "dirty", "heavy"]))]
        if free and draw(st.integers(0, 3)) == 0:
            taken = draw(st.lists(st.sampled_from(free), unique=True, max_size=2))
            kw["contains"] = taken
            free = [f for f in free if f not in taken]
        if draw(st.booleans()):
            kw["weight_expr"] = draw(exprs)
        extra = draw(st.lists(st.tuples(st.sampled_from(["color", "size", "note"]), values),
                              unique_by=lambda kv: kv[0], max_size=2))
        attrs.append((obj, AttributeSet.build(extra=extra, **kw)))
    extra_top = draw(st.lists(st.tuples(st.sampled_from(["task", "time", "robot"]), values),
                              unique_by=lambda kv: kv[0], max_size=2))
    return WorldState.build(objects, relations, attrs, extra_top)


@settings(max_examples=600, deadline=None)
@given(world_states())
def test_render_parse_round_trip(state):
    text = render_state(state)
    parsed = parse_state(text)
    assert parsed == state
    assert render_state(parsed) == text


@settings(max_examples=300, deadline=None)
@given(world_states(), world_states())
def test_delta_soundness(a, b):
    assert apply_delta(diff_states(a, b), a) == b


@st.composite
def mutations(draw):
    state = draw(world_states().filter(lambda s: len(s.objects) >= 2))
    obj = draw(st.sampled_from(state.objects))
    tag = draw(st.sampled_from(["clean", "dirty"]))
    before = state.attr(obj).get("is", ABSENT)
    mutated = state.with_attr(obj, state.attr(obj).set("is", (tag,)))
    other = draw(st.sampled_from([o for o in state.objects if o != obj]))
    rel = f"{obj} is on {other}"
    added = rel not in state.relations
    mutated = mutated.with_relations(state.relations + ((rel,) if added else ()))
    return state, mutated, obj, before, tag, rel if added else None


@settings(max_examples=300, deadline=None)
@given(mutations())
def test_diff_reports_exactly_the_mutation(case):
    state, mutated, obj, before, tag, rel = case
    delta = diff_states(state, mutated)
    expected_changes = () if before == (tag,) else ((obj, "is", before, (tag,)),)
    assert delta.attribute_changes == expected_changes
    assert delta.relations_added == ((rel,) if rel else ())
    assert delta.relations_removed == ()
    assert delta.objects_added == () and delta.objects_removed == ()


@settings(max_examples=400, deadline=None)
@given(world_states(), st.data())
def test_truncated_text_fails_cleanly(state, data):
    text = render_state(state)
    cut = data.draw(st.integers(0, len(text) - 1))
    try:
        parse_state(text[:cut])
    except ParseFailure:
        pass


@settings(max_examples=400, deadline=None)
@given(st.text(alphabet='#{}[]()"\',: \nabc1.-_=', max_size=60))
def test_arbitrary_text_only_raises_parse_failure(text):
    try:
        parse_state(text)
    except ParseFailure:
        pass
