"""Ground-truth tabletop simulator: stacking, containers, dirt, weights."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Any, Iterable, Mapping

from ..errors import (
    DestinationOccupied,
    EnvRuleViolation,
    SelfPlacement,
    SourceCovered,
    UnknownObject,
)

TABLE = "table"
BLOCK, BOWL, DISINFECTOR = "block", "bowl", "disinfector"
CLEAN, DIRTY, UNKNOWN = "clean", "dirty", "unknown"


@dataclass(frozen=True)
class SimObject:
    name: str
    kind: str  # block | bowl | disinfector


@dataclass(frozen=True, eq=True)
class EnvState:
    """Hidden ground truth. Locations are ``table``, ``on:<block>`` or ``in:<container>``.

    Instances are treated as values; every operation returns a new one.
    """

    objects: tuple[SimObject, ...]
    support: Mapping[str, str] = field(default_factory=dict)
    cleanliness: Mapping[str, str] = field(default_factory=dict)
    weights: Mapping[str, Fraction] = field(default_factory=dict)

    __hash__ = None  # type: ignore[assignment]

    @classmethod
    def initial(cls, blocks: Iterable[str], containers: Iterable[str] = (),
                disinfector: bool = False, cleanliness: Mapping[str, str] | None = None,
                weights: Mapping[str, Any] | None = None) -> "EnvState":
        blocks = list(blocks)
        objs = [SimObject(b, BLOCK) for b in blocks]
        objs += [SimObject(c, BOWL) for c in containers]
        if disinfector:
            objs.append(SimObject("disinfector", DISINFECTOR))
        clean = {b: UNKNOWN for b in blocks}
        clean.update(cleanliness or {})
        return cls(
            objects=tuple(objs),
            support={b: TABLE for b in blocks},
            cleanliness=clean,
            weights={b: Fraction(w) for b, w in (weights or {}).items()},
        )

    # --- lookups -----------------------------------------------------------
    def kind(self, name: str) -> str | None:
        for obj in self.objects:
            if obj.name == name:
                return obj.kind
        return None

    @property
    def names(self) -> list[str]:
        return [o.name for o in self.objects]

    @property
    def blocks(self) -> list[str]:
        return [o.name for o in self.objects if o.kind == BLOCK]

    @property
    def containers(self) -> list[str]:
        return [o.name for o in self.objects if o.kind in (BOWL, DISINFECTOR)]

    @property
    def bowls(self) -> list[str]:
        return [o.name for o in self.objects if o.kind == BOWL]

    @property
    def disinfector(self) -> str | None:
        return next((o.name for o in self.objects if o.kind == DISINFECTOR), None)

    def block_on(self, block: str) -> str | None:
        """The block resting directly on ``block``, if any."""
        target = f"on:{block}"
        return next((b for b in self.blocks if self.support.get(b) == target), None)

    def below(self, block: str) -> str | None:
        loc = self.support.get(block, TABLE)
        return loc[3:] if loc.startswith("on:") else None

    def container_of(self, block: str) -> str | None:
        loc = self.support.get(block, TABLE)
        return loc[3:] if loc.startswith("in:") else None

    def contents(self, container: str) -> list[str]:
        target = f"in:{container}"
        return [b for b in self.blocks if self.support.get(b) == target]

    def contacts(self) -> list[tuple[str, str]]:
        """Directly touching block pairs ``(top, bottom)``."""
        return [(b, self.below(b)) for b in self.blocks if self.below(b) is not None]

    def in_disinfector(self, block: str) -> bool:
        d = self.disinfector
        return d is not None and self.support.get(block) == f"in:{d}"

    def violations(self) -> list[str]:
        """Support-forest invariants; empty when the state is well formed."""
        problems = []
        blocks = set(self.blocks)
        containers = set(self.containers)
        tops: dict[str, str] = {}
        for b in self.blocks:
            loc = self.support.get(b)
            if loc == TABLE:
                continue
            if loc is None:
                problems.append(f"{b} has no location")
            elif loc.startswith("on:"):
                under = loc[3:]
                if under not in blocks or under == b:
                    problems.append(f"{b} rests on invalid {under}")
                elif under in tops:
                    problems.append(f"{under} carries both {tops[under]} and {b}")
                else:
                    tops[under] = b
            elif loc.startswith("in:"):
                if loc[3:] not in containers:
                    problems.append(f"{b} is in non-container {loc[3:]}")
            else:
                problems.append(f"{b} has malformed location {loc}")
        for b in self.blocks:
            seen = {b}
            cur = self.below(b)
            while cur is not None:
                if cur in seen:
                    problems.append(f"support cycle through {b}")
                    break
                seen.add(cur)
                cur = self.below(cur)
        return problems


def _require_object(env: EnvState, name: str) -> str:
    kind = env.kind(name)
    if kind is None:
        raise UnknownObject(f"no object named {name!r}")
    return kind


def propagate_dirt(env: EnvState) -> EnvState:
    """Close dirtiness over direct contacts; disinfector contents stay clean."""
    clean = dict(env.cleanliness)
    for b in env.blocks:
        if env.in_disinfector(b):
            clean[b] = CLEAN
    pairs = env.contacts()
    changed = True
    while changed:
        changed = False
        for top, bottom in pairs:
            for a, b in ((top, bottom), (bottom, top)):
                if clean.get(a) == DIRTY and clean.get(b) != DIRTY and not env.in_disinfector(b):
                    clean[b] = DIRTY
                    changed = True
    if clean == dict(env.cleanliness):
        return env
    return replace(env, cleanliness=clean)


def apply_pick_place(env: EnvState, src: str, dst: str) -> EnvState:
    """Move block ``src`` onto a block, into a container, or onto the table."""
    if _require_object(env, src) != BLOCK:
        raise EnvRuleViolation(f"{src!r} is not a block and cannot be picked up")
    if dst != TABLE:
        dst_kind = _require_object(env, dst)
    else:
        dst_kind = TABLE
    if src == dst:
        raise SelfPlacement(f"cannot place {src!r} on itself")
    if env.block_on(src) is not None:
        raise SourceCovered(f"{src!r} is covered by {env.block_on(src)!r}")

    if dst_kind == BLOCK:
        occupant = env.block_on(dst)
        if occupant is not None and occupant != src:
            raise DestinationOccupied(f"{dst!r} already carries {occupant!r}")
        location = f"on:{dst}"
    elif dst_kind == TABLE:
        location = TABLE
    else:
        location = f"in:{dst}"

    support = dict(env.support)
    support[src] = location
    out = replace(env, support=support)
    if dst_kind == DISINFECTOR:
        clean = dict(out.cleanliness)
        clean[src] = CLEAN
        out = replace(out, cleanliness=clean)
    return propagate_dirt(out)


def total_weight(env: EnvState, container: str) -> Fraction:
    """Sum of ground-truth weights of the blocks directly inside ``container``."""
    if _require_object(env, container) == BLOCK:
        raise UnknownObject(f"{container!r} is not a container")
    total = Fraction(0)
    for b in env.contents(container):
        if b not in env.weights:
            raise ValueError(f"no ground-truth weight for {b!r}")
        total += env.weights[b]
    return total


class TabletopEnv:
    """Mutable handle around an :class:`EnvState` for the interpreter."""

    def __init__(self, state: EnvState):
        self.state = state

    def put_first_on_second(self, src: str, dst: str) -> EnvState:
        self.state = apply_pick_place(self.state, src, dst)
        return self.state

    def snapshot(self) -> EnvState:
        return self.state


# --------------------------------------------------------------------------
# JSON

def env_to_json(env: EnvState) -> dict[str, Any]:
    return {
        "objects": [{"name": o.name, "kind": o.kind} for o in env.objects],
        "support": {b: env.support[b] for b in env.blocks if b in env.support},
        "cleanliness": {b: env.cleanliness[b] for b in env.blocks if b in env.cleanliness},
        "weights": {b: str(env.weights[b]) for b in env.blocks if b in env.weights},
    }


def env_from_json(doc: Mapping[str, Any]) -> EnvState:
    return EnvState(
        objects=tuple(SimObject(o["name"], o["kind"]) for o in doc["objects"]),
        support=dict(doc.get("support", {})),
        cleanliness=dict(doc.get("cleanliness", {})),
        weights={k: Fraction(v) for k, v in doc.get("weights", {}).items()},
    )
