"""What a perfect world-model writer would know, rendered as a WorldState.

The simulator's :class:`EnvState` is hidden ground truth. Agents only learn
cleanliness and weights from utterances ("the red block is dirty.", "The
white block is twice the weight of the black block") and from the visible
consequences of their own actions. :class:`Knowledge` tracks exactly that.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable

from ..world_model import AttributeSet, RawExpr, WorldState
from .sim import BLOCK, DISINFECTOR, UNKNOWN, EnvState


@dataclass(frozen=True)
class Knowledge:
    known_status: frozenset[str] = frozenset()
    weight_exprs: tuple[tuple[str, str], ...] = ()

    def learn_status(self, blocks: Iterable[str]) -> "Knowledge":
        return replace(self, known_status=self.known_status | frozenset(blocks))

    def learn_weight(self, block: str, expr: str) -> "Knowledge":
        exprs = dict(self.weight_exprs)
        exprs[block] = expr
        return replace(self, weight_exprs=tuple(exprs.items()))


def identifier(name: str) -> str:
    """``"green block"`` -> ``"green_block"`` for symbolic weight expressions."""
    return "_".join(name.split())


def weight_expr(other: str, ratio: str) -> RawExpr:
    base = f"{identifier(other)}.weight"
    if ratio == "same":
        return RawExpr(base)
    if ratio == "twice":
        return RawExpr(f"{base} * 2")
    if ratio == "half":
        return RawExpr(f"{base} / 2")
    raise ValueError(ratio)


def world_state_for(env: EnvState, knowledge: Knowledge = Knowledge()) -> WorldState:
    """Render the agent-visible state: stacking, container contents, learned facts."""
    relations = [f"{top} is on {bottom}" for top, bottom in env.contacts()]
    weights = dict(knowledge.weight_exprs)

    def attrs_for(obj) -> AttributeSet:
        if obj.kind == BLOCK:
            attrs = AttributeSet()
            status = env.cleanliness.get(obj.name, UNKNOWN)
            if obj.name in knowledge.known_status and status != UNKNOWN:
                attrs = attrs.set("is", (status,))
            if obj.name in weights:
                attrs = attrs.set("weight", RawExpr(weights[obj.name]))
            return attrs
        contents = env.contents(obj.name)
        if contents or obj.kind == DISINFECTOR:
            return AttributeSet.build(contains=contents)
        return AttributeSet()

    ordered = [o for o in env.objects if o.kind == DISINFECTOR]
    ordered += [o for o in env.objects if o.kind != DISINFECTOR]
    return WorldState.build(
        objects=env.names,
        relations=relations,
        attributes=[(o.name, attrs_for(o)) for o in ordered],
    )


def status_changes(before: EnvState, after: EnvState) -> list[tuple[str, str]]:
    """Blocks whose cleanliness changed, in scene order."""
    return [(b, after.cleanliness[b]) for b in after.blocks
            if before.cleanliness.get(b) != after.cleanliness.get(b)]
