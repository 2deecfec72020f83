"""Explicit world-state representation kept in external memory.

The state is rendered as a comment-prefixed, JSON-like block that is pasted
verbatim into reader and writer prompts::

    # state = {
    #     "objects": ["cyan block", "yellow block", "disinfector"],
    #     "relations": [],
    #     "disinfector": {"contains": []},
    #     "cyan block": {"is": ["dirty"]},
    #     "yellow block": {}
    # }

Rendering is byte-stable: keys keep insertion order and the output never
carries trailing commas. Parsing is lenient in the ways LLM output tends to
drift (trailing commas, single quotes, tuples, bare Python expressions such
as ``green_block.weight * 2``, singly nested relation lists).
"""

from __future__ import annotations

import dataclasses
import json
import re
from dataclasses import dataclass
from typing import Any, Iterable, Iterator, Mapping

from .errors import ParseFailure

__all__ = [
    "RawExpr",
    "Record",
    "AttributeSet",
    "WorldState",
    "StateDelta",
    "render_state",
    "parse_state",
    "diff_states",
    "apply_delta",
    "validate_state",
    "parse_relation",
    "state_to_json",
    "state_from_json",
]

TABLE = "table"
INDENT = "#     "
_RELATION_RE = re.compile(r"^\s*(?P<top>.+?)\s+is\s+on\s+(?P<bottom>.+?)\s*$")


class RawExpr(str):
    """A bare (unquoted) expression such as ``green_block.weight * 2``."""

    __slots__ = ()

    def __repr__(self) -> str:
        return f"RawExpr({str.__repr__(self)})"


class Record(tuple):
    """Immutable ordered mapping stored as ``(key, value)`` pairs."""

    __slots__ = ()

    def get(self, key: str, default: Any = None) -> Any:
        for k, v in self:
            if k == key:
                return v
        return default

    def keys(self) -> list[str]:
        return [k for k, _ in self]


def freeze(value: Any) -> Any:
    """Convert parsed/JSON values into hashable, order-preserving form."""
    if isinstance(value, RawExpr):
        return value
    if isinstance(value, Mapping):
        return Record((str(k), freeze(v)) for k, v in value.items())
    if isinstance(value, Record):
        return Record((k, freeze(v)) for k, v in value)
    if isinstance(value, (list, tuple)):
        return tuple(freeze(v) for v in value)
    return value


def thaw(value: Any) -> Any:
    """Inverse of :func:`freeze` for JSON export; bare expressions become ``{"$expr": ...}``."""
    if isinstance(value, RawExpr):
        return {"$expr": str(value)}
    if isinstance(value, Record):
        return {k: thaw(v) for k, v in value}
    if isinstance(value, tuple):
        return [thaw(v) for v in value]
    return value


def _unthaw(value: Any) -> Any:
    if isinstance(value, dict):
        if set(value) == {"$expr"}:
            return RawExpr(value["$expr"])
        return Record((k, _unthaw(v)) for k, v in value.items())
    if isinstance(value, list):
        return tuple(_unthaw(v) for v in value)
    return value


@dataclass(frozen=True)
class AttributeSet:
    """Per-object attributes; ``entries`` preserves the writer's key order."""

    entries: tuple[tuple[str, Any], ...] = ()

    @classmethod
    def build(cls, *, is_tags: Iterable[str] | None = None,
              contains: Iterable[str] | None = None,
              weight_expr: str | None = None,
              extra: Mapping[str, Any] | Iterable[tuple[str, Any]] = ()) -> "AttributeSet":
        entries: list[tuple[str, Any]] = []
        if is_tags is not None:
            entries.append(("is", tuple(is_tags)))
        if contains is not None:
            entries.append(("contains", tuple(contains)))
        if weight_expr is not None:
            entries.append(("weight", weight_expr))
        items = extra.items() if isinstance(extra, Mapping) else extra
        entries.extend((k, freeze(v)) for k, v in items)
        return cls(tuple(entries))

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, Any] | Record) -> "AttributeSet":
        items = mapping if isinstance(mapping, Record) else mapping.items()
        return cls(tuple((k, freeze(v)) for k, v in items))

    def get(self, key: str, default: Any = None) -> Any:
        for k, v in self.entries:
            if k == key:
                return v
        return default

    def keys(self) -> list[str]:
        return [k for k, _ in self.entries]

    def __contains__(self, key: object) -> bool:
        return any(k == key for k, _ in self.entries)

    def __bool__(self) -> bool:
        return bool(self.entries)

    @property
    def is_tags(self) -> tuple[str, ...] | None:
        return self.get("is")

    @property
    def contains(self) -> tuple[str, ...] | None:
        return self.get("contains")

    @property
    def weight_expr(self) -> str | None:
        return self.get("weight")

    @property
    def extra(self) -> tuple[tuple[str, Any], ...]:
        return tuple((k, v) for k, v in self.entries if k not in ("is", "contains", "weight"))

    def set(self, key: str, value: Any) -> "AttributeSet":
        """Replace ``key`` in place, or append it when absent."""
        value = freeze(value)
        if key in self:
            return AttributeSet(tuple((k, value if k == key else v) for k, v in self.entries))
        return AttributeSet(self.entries + ((key, value),))

    def remove(self, key: str) -> "AttributeSet":
        return AttributeSet(tuple((k, v) for k, v in self.entries if k != key))


@dataclass(frozen=True)
class WorldState:
    """The explicit state the writer maintains.

    ``objects``/``relations`` are ``None`` when the key is absent from the
    text (some hand-designed states use entirely different top-level keys;
    those land in ``extra``).
    """

    objects: tuple[str, ...] | None = ()
    relations: tuple[str, ...] | None = ()
    attributes: tuple[tuple[str, AttributeSet], ...] = ()
    extra: tuple[tuple[str, Any], ...] = ()

    @classmethod
    def build(cls, objects: Iterable[str] | None = (), relations: Iterable[str] | None = (),
              attributes: Mapping[str, AttributeSet] | Iterable[tuple[str, AttributeSet]] = (),
              extra: Mapping[str, Any] | Iterable[tuple[str, Any]] = ()) -> "WorldState":
        attrs = attributes.items() if isinstance(attributes, Mapping) else attributes
        ext = extra.items() if isinstance(extra, Mapping) else extra
        return cls(
            objects=None if objects is None else tuple(objects),
            relations=None if relations is None else tuple(relations),
            attributes=tuple((k, v) for k, v in attrs),
            extra=tuple((k, freeze(v)) for k, v in ext),
        )

    def attr(self, name: str) -> AttributeSet | None:
        for k, v in self.attributes:
            if k == name:
                return v
        return None

    @property
    def attribute_names(self) -> list[str]:
        return [k for k, _ in self.attributes]

    def with_attr(self, name: str, attrs: AttributeSet) -> "WorldState":
        if self.attr(name) is None:
            return _replace(self, attributes=self.attributes + ((name, attrs),))
        return _replace(self, attributes=tuple(
            (k, attrs if k == name else v) for k, v in self.attributes))

    def with_relations(self, relations: Iterable[str]) -> "WorldState":
        return _replace(self, relations=tuple(relations))


def _replace(state: WorldState, **changes: Any) -> WorldState:
    fields = {"objects": state.objects, "relations": state.relations,
              "attributes": state.attributes, "extra": state.extra}
    fields.update(changes)
    return WorldState(**fields)


def parse_relation(text: str) -> tuple[str, str] | None:
    """Split a canonical ``"<a> is on <b>"`` relation; ``None`` if not canonical."""
    m = _RELATION_RE.match(text)
    if not m:
        return None
    return m.group("top"), m.group("bottom")


# --------------------------------------------------------------------------
# rendering

def render_value(value: Any) -> str:
    if isinstance(value, RawExpr):
        return str(value)
    if isinstance(value, str):
        return json.dumps(value, ensure_ascii=False)
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, AttributeSet):
        value = Record(value.entries)
    if isinstance(value, (Record, Mapping)):
        items = value if isinstance(value, Record) else value.items()
        return "{" + ", ".join(f"{json.dumps(k, ensure_ascii=False)}: {render_value(v)}"
                               for k, v in items) + "}"
    if isinstance(value, (tuple, list)):
        return "[" + ", ".join(render_value(v) for v in value) + "]"
    raise TypeError(f"cannot render {type(value).__name__}")


def _top_level_items(state: WorldState) -> Iterator[tuple[str, Any]]:
    if state.objects is not None:
        yield "objects", state.objects
    if state.relations is not None:
        yield "relations", state.relations
    yield from state.attributes
    yield from state.extra


def render_state(state: WorldState) -> str:
    """Render the comment-prefixed state block (LF endings, no trailing newline)."""
    body = [f'{INDENT}{json.dumps(k, ensure_ascii=False)}: {render_value(v)}'
            for k, v in _top_level_items(state)]
    lines = ["# state = {"]
    if body:
        lines.append(",\n".join(body))
    lines.append("# }")
    return "\n".join(lines)


# --------------------------------------------------------------------------
# parsing

def _strip_comments(text: str) -> str:
    out = []
    for line in text.replace("\r\n", "\n").split("\n"):
        s = line.strip()
        if s.startswith("#"):
            s = s[1:].strip()
        out.append(s)
    return "\n".join(out)


class _Reader:
    _ESCAPES = {'"': '"', "'": "'", "\\": "\\", "/": "/", "n": "\n", "t": "\t",
                "r": "\r", "b": "\b", "f": "\f"}
    _NUMBER = re.compile(r"-?\d+(\.\d+)?([eE][+-]?\d+)?")
    _KEYWORDS = {"true": True, "True": True, "false": False, "False": False,
                 "null": None, "None": None}

    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def fail(self, reason: str, pos: int | None = None) -> ParseFailure:
        pos = self.pos if pos is None else pos
        line = self.text.count("\n", 0, pos) + 1
        col = pos - (self.text.rfind("\n", 0, pos) + 1) + 1
        return ParseFailure(reason, position=pos, line=line, column=col)

    def ws(self) -> None:
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self) -> str:
        self.ws()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def expect(self, ch: str) -> None:
        if self.peek() != ch:
            got = self.text[self.pos] if self.pos < len(self.text) else "end of input"
            raise self.fail(f"expected {ch!r}, found {got!r}")
        self.pos += 1

    def value(self) -> Any:
        ch = self.peek()
        if ch == "{":
            return self.mapping()
        if ch == "[":
            return self.sequence("[", "]")
        if ch == "(":
            start = self.pos
            try:
                return self.sequence("(", ")")
            except ParseFailure:
                self.pos = start
                return self.bare()
        if ch and ch in "\"'":
            return self.string()
        m = self._NUMBER.match(self.text, self.pos)
        if m:
            end = m.end()
            nxt = self.text[end:end + 1]
            if not nxt or nxt.isspace() or nxt in ",]})":
                self.pos = end
                tok = m.group(0)
                return float(tok) if (m.group(1) or m.group(2)) else int(tok)
        for word, val in self._KEYWORDS.items():
            if self.text.startswith(word, self.pos):
                end = self.pos + len(word)
                nxt = self.text[end:end + 1]
                if not nxt or not (nxt.isalnum() or nxt in "_."):
                    self.pos = end
                    return val
        return self.bare()

    def string(self) -> str:
        quote = self.text[self.pos]
        start = self.pos
        self.pos += 1
        buf = []
        while True:
            if self.pos >= len(self.text):
                raise self.fail("unterminated string", start)
            ch = self.text[self.pos]
            if ch == quote:
                self.pos += 1
                return "".join(buf)
            if ch == "\n":
                raise self.fail("newline inside string", start)
            if ch == "\\":
                esc = self.text[self.pos + 1:self.pos + 2]
                if esc == "u":
                    hexdigits = self.text[self.pos + 2:self.pos + 6]
                    if not re.fullmatch(r"[0-9a-fA-F]{4}", hexdigits):
                        raise self.fail("bad unicode escape")
                    buf.append(chr(int(hexdigits, 16)))
                    self.pos += 6
                    continue
                if esc not in self._ESCAPES:
                    raise self.fail(f"bad escape \\{esc}")
                buf.append(self._ESCAPES[esc])
                self.pos += 2
                continue
            buf.append(ch)
            self.pos += 1

    def bare(self) -> RawExpr:
        """Scan a bare expression up to a depth-0 ``,``, ``}`` or ``]``."""
        self.ws()
        start = self.pos
        if start >= len(self.text) or not (self.text[start].isalnum() or self.text[start] in "_(-"):
            got = self.text[start] if start < len(self.text) else "end of input"
            raise self.fail(f"expected a value, found {got!r}")
        depth = 0
        while self.pos < len(self.text):
            ch = self.text[self.pos]
            if ch in "\"'":
                raise self.fail("quote inside bare expression")
            if ch in "([{":
                depth += 1
            elif ch in ")]}":
                if depth == 0:
                    break
                depth -= 1
            elif ch in ",\n" and depth == 0:
                break
            self.pos += 1
        expr = self.text[start:self.pos].strip()
        if not expr or depth:
            raise self.fail("malformed bare expression", start)
        return RawExpr(expr)

    def sequence(self, open_: str, close: str) -> tuple:
        self.expect(open_)
        items = []
        while True:
            if self.peek() == close:
                self.pos += 1
                return tuple(items)
            items.append(self.value())
            ch = self.peek()
            if ch == ",":
                self.pos += 1
            elif ch == close:
                self.pos += 1
                return tuple(items)
            else:
                raise self.fail(f"expected ',' or {close!r} in list")

    def mapping(self) -> Record:
        self.expect("{")
        items: list[tuple[str, Any]] = []
        while True:
            ch = self.peek()
            if ch == "}":
                self.pos += 1
                return Record(items)
            if not ch or ch not in "\"'":
                raise self.fail("expected a quoted key or '}'")
            key = self.string()
            self.expect(":")
            items.append((key, self.value()))
            ch = self.peek()
            if ch == ",":
                self.pos += 1
            elif ch == "}":
                self.pos += 1
                return Record(items)
            else:
                raise self.fail("expected ',' or '}' in mapping")


def _flatten_relations(value: Any) -> Iterator[Any]:
    if isinstance(value, tuple) and not isinstance(value, Record):
        for item in value:
            yield from _flatten_relations(item)
    else:
        yield value


def parse_state(text: str) -> WorldState:
    """Parse writer output (or a rendered block) back into a :class:`WorldState`.

    Raises :class:`ParseFailure` with the offending position.
    """
    reader = _Reader(_strip_comments(text))
    reader.ws()
    m = re.compile(r"state\s*=").match(reader.text, reader.pos)
    if m:
        reader.pos = m.end()
    if reader.peek() != "{":
        raise reader.fail("expected '{' opening the state")
    top = reader.mapping()
    if reader.peek():
        raise reader.fail("unexpected text after the state block")

    keys = top.keys()
    dupes = {k for k in keys if keys.count(k) > 1}
    if dupes:
        raise ParseFailure(f"duplicate keys: {sorted(dupes)}")

    objects = top.get("objects") if "objects" in keys else None
    if objects is not None:
        if not isinstance(objects, tuple) or not all(isinstance(o, str) for o in objects):
            raise ParseFailure('"objects" must be a list of strings')
    relations = None
    if "relations" in keys:
        rel = top.get("relations")
        if not isinstance(rel, tuple) or isinstance(rel, Record):
            raise ParseFailure('"relations" must be a list')
        relations = tuple(_flatten_relations(rel))
        if not all(isinstance(r, str) for r in relations):
            raise ParseFailure('"relations" must contain strings')

    names = set(objects or ())
    attributes, extra = [], []
    for key, value in top:
        if key in ("objects", "relations"):
            continue
        if key in names and isinstance(value, Record):
            attributes.append((key, AttributeSet.from_mapping(value)))
        else:
            extra.append((key, value))
    return WorldState(objects=objects, relations=relations,
                      attributes=tuple(attributes), extra=tuple(extra))


# --------------------------------------------------------------------------
# JSON documents (episode files, logs)

def state_to_json(state: WorldState) -> dict[str, Any]:
    doc: dict[str, Any] = {}
    for key, value in _top_level_items(state):
        if isinstance(value, AttributeSet):
            value = Record(value.entries)
        doc[key] = thaw(value)
    return doc


def state_from_json(doc: Mapping[str, Any]) -> WorldState:
    objects = tuple(doc["objects"]) if "objects" in doc else None
    relations = tuple(_flatten_relations(_unthaw(doc["relations"]))) if "relations" in doc else None
    names = set(objects or ())
    attributes, extra = [], []
    for key, value in doc.items():
        if key in ("objects", "relations"):
            continue
        value = _unthaw(value)
        if key in names and isinstance(value, Record):
            attributes.append((key, AttributeSet.from_mapping(value)))
        else:
            extra.append((key, value))
    return WorldState(objects=objects, relations=relations,
                      attributes=tuple(attributes), extra=tuple(extra))


# --------------------------------------------------------------------------
# validation

def validate_state(state: WorldState, *, include_warnings: bool = False) -> list[str]:
    """Return invariant violations (empty iff the state is valid).

    With ``include_warnings`` non-canonical relation strings are reported too,
    prefixed ``"warning:"``; they never make a state invalid.
    """
    problems: list[str] = []
    objects = list(state.objects or ())
    known = set(objects)

    for rel in state.relations or ():
        parsed = parse_relation(rel)
        if parsed is None:
            if include_warnings:
                problems.append(f"warning: relation {rel!r} is not of the form '<a> is on <b>'")
            continue
        top, bottom = parsed
        if top == bottom:
            problems.append(f"{top!r}: relation places the object on itself")
        for name in (top, bottom):
            if name != TABLE and name not in known:
                problems.append(f"{name!r}: named in relation {rel!r} but missing from objects")

    seen_attr: dict[str, int] = {}
    for name, _ in state.attributes:
        seen_attr[name] = seen_attr.get(name, 0) + 1
    for name in objects:
        count = seen_attr.get(name, 0)
        if count == 0:
            problems.append(f"{name!r}: no attribute entry")
        elif count > 1:
            problems.append(f"{name!r}: {count} attribute entries")
    for name in seen_attr:
        if name not in known:
            problems.append(f"{name!r}: attribute entry for an object missing from objects")

    holder: dict[str, str] = {}
    for name, attrs in state.attributes:
        tags = attrs.is_tags
        if tags is not None:
            if isinstance(tags, str):
                tags = (tags,)
            if "clean" in tags and "dirty" in tags:
                problems.append(f"{name!r}: tagged both clean and dirty")
        contents = attrs.contains
        if contents is None:
            continue
        if not isinstance(contents, tuple):
            problems.append(f"{name!r}: contains is not a list")
            continue
        if len(set(contents)) != len(contents):
            problems.append(f"{name!r}: duplicate entries in contains")
        for item in dict.fromkeys(contents):
            if item not in known:
                problems.append(f"{item!r}: contained in {name!r} but missing from objects")
            if item in holder and holder[item] != name:
                problems.append(f"{item!r}: contained in both {holder[item]!r} and {name!r}")
            holder.setdefault(item, name)
    return problems


# --------------------------------------------------------------------------
# diffing

@dataclass(frozen=True)
class StateDelta:
    """Field-level difference between two states.

    ``attribute_changes`` entries are ``(object, key, before, after)`` where a
    side equal to :data:`ABSENT` means the key is missing. The ``*_order`` fields are only
    set when the target ordering cannot be recovered by "remove, then
    append"; they keep :func:`apply_delta` exact.
    """

    relations_added: tuple[str, ...] = ()
    relations_removed: tuple[str, ...] = ()
    attribute_changes: tuple[tuple[str, str, Any, Any], ...] = ()
    objects_added: tuple[str, ...] = ()
    objects_removed: tuple[str, ...] = ()
    extra_changes: tuple[tuple[str, Any, Any], ...] = ()
    objects_order: tuple[str, ...] | None = None
    relations_order: tuple[str, ...] | None = None
    attributes_order: tuple[str, ...] | None = None
    key_orders: tuple[tuple[str, tuple[str, ...]], ...] = ()
    extra_order: tuple[str, ...] | None = None
    presence: tuple[bool | None, bool | None] = (None, None)

    def is_empty(self) -> bool:
        return self == StateDelta()


def _seq_diff(a: Iterable[str], b: Iterable[str]) -> tuple[tuple, tuple, tuple | None]:
    a, b = list(a), list(b)
    removed = tuple(x for x in dict.fromkeys(a) if x not in b)
    added = tuple(x for x in dict.fromkeys(b) if x not in a)
    naive = [x for x in a if x not in removed] + list(added)
    return added, removed, (None if naive == b else tuple(b))


class _Absent:
    """Marks the missing side of an attribute change (distinct from a ``null`` value)."""

    _instance: "_Absent | None" = None

    def __new__(cls) -> "_Absent":
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "ABSENT"

    def __reduce__(self):
        return (_Absent, ())


ABSENT = _Absent()


def _pairs_diff(before: Iterable[tuple[str, Any]], after: Iterable[tuple[str, Any]]):
    """Changes between two ordered pair-lists plus an order hint."""
    before, after = list(before), list(after)
    bmap, amap = dict(before), dict(after)
    changes = []
    for key in dict.fromkeys([k for k, _ in before] + [k for k, _ in after]):
        old, new = bmap.get(key), amap.get(key)
        if (key in bmap) != (key in amap) or old != new or type(old) is not type(new):
            changes.append((key, old if key in bmap else ABSENT, new if key in amap else ABSENT))
    naive = _apply_pairs(before, changes)
    order = None if [k for k, _ in naive] == [k for k, _ in after] else tuple(k for k, _ in after)
    return changes, order


def _apply_pairs(pairs: list[tuple[str, Any]], changes) -> list[tuple[str, Any]]:
    out = list(pairs)
    for key, _old, new in changes:
        idx = next((i for i, (k, _) in enumerate(out) if k == key), None)
        if new is ABSENT:
            if idx is not None:
                out.pop(idx)
        elif idx is None:
            out.append((key, new))
        else:
            out[idx] = (key, new)
    return out


def _reorder(pairs: list[tuple[str, Any]], order: tuple[str, ...] | None) -> list[tuple[str, Any]]:
    if order is None:
        return pairs
    lookup = dict(pairs)
    return [(k, lookup[k]) for k in order]


def diff_states(a: WorldState, b: WorldState) -> StateDelta:
    """Minimal field-level delta taking ``a`` to ``b``; ``diff(a, a)`` is empty."""
    objects_added, objects_removed, objects_order = _seq_diff(a.objects or (), b.objects or ())
    relations_added, relations_removed, relations_order = _seq_diff(a.relations or (), b.relations or ())

    a_attrs = dict(a.attributes)
    b_attrs = dict(b.attributes)
    attribute_changes: list[tuple[str, str, Any, Any]] = []
    key_orders: list[tuple[str, tuple[str, ...]]] = []
    for name, after in b.attributes:
        before = a_attrs.get(name, AttributeSet())
        changes, order = _pairs_diff(before.entries, after.entries)
        attribute_changes.extend((name, k, old, new) for k, old, new in changes)
        if order is not None:
            key_orders.append((name, order))

    extra_changes, extra_order = _pairs_diff(a.extra, b.extra)
    presence = (None if (a.objects is None) == (b.objects is None) else b.objects is not None,
                None if (a.relations is None) == (b.relations is None) else b.relations is not None)
    delta = StateDelta(
        relations_added=relations_added,
        relations_removed=relations_removed,
        attribute_changes=tuple(attribute_changes),
        objects_added=objects_added,
        objects_removed=objects_removed,
        extra_changes=tuple(extra_changes),
        objects_order=objects_order,
        relations_order=relations_order,
        key_orders=tuple(key_orders),
        extra_order=extra_order,
        presence=presence,
    )
    if apply_delta(delta, a).attribute_names != list(b_attrs):
        delta = dataclasses.replace(delta, attributes_order=tuple(b_attrs))
    return delta


def apply_delta(delta: StateDelta, state: WorldState) -> WorldState:
    """Apply ``delta`` to its source state."""
    def seq(current, added, removed, order, present):
        if present is False:
            return None
        if current is None and present is None and not (added or removed or order):
            return None
        if order is not None:
            return tuple(order)
        return tuple(x for x in (current or ()) if x not in removed) + tuple(added)

    objects = seq(state.objects, delta.objects_added, delta.objects_removed,
                  delta.objects_order, delta.presence[0])
    relations = seq(state.relations, delta.relations_added, delta.relations_removed,
                    delta.relations_order, delta.presence[1])

    attrs = {n: list(s.entries) for n, s in state.attributes if n not in delta.objects_removed}
    for name, key, old, new in delta.attribute_changes:
        attrs.setdefault(name, [])
        attrs[name] = _apply_pairs(attrs[name], [(key, old, new)])
    for name in delta.objects_added:
        attrs.setdefault(name, [])
    orders = dict(delta.key_orders)
    names = list(delta.attributes_order) if delta.attributes_order is not None else list(attrs)
    attributes = tuple((n, AttributeSet(tuple(_reorder(attrs.get(n, []), orders.get(n)))))
                       for n in names)

    extra = _reorder(_apply_pairs(list(state.extra), delta.extra_changes), delta.extra_order)
    return WorldState(objects=objects, relations=relations, attributes=attributes, extra=tuple(extra))
