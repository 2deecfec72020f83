"""Procedural episode generator.

Query templates follow the utterance families of the three domains. Gold
effects are obtained by simulating the gold program on the ground-truth
environment, so every generated episode is self-consistent by construction.
"""

from __future__ import annotations

import itertools
import random
from fractions import Fraction
from typing import Callable

from .episodes import Episode, EpisodeBuilder, EpisodeError, MAX_STEPS
from .knowledge import status_changes, weight_expr
from .scoring import NUMBER_WORDS
from .sim import CLEAN, DIRTY, TABLE, UNKNOWN, EnvState, apply_pick_place, total_weight

BLOCK_COLORS = ["red", "green", "blue", "yellow", "purple", "pink", "orange",
                "white", "black", "brown", "cyan", "gray"]
BOWL_COLORS = ["golden", "silver", "green", "red", "blue", "transparent",
               "platinum", "purple", "gray", "orange"]
_WORDS = {v: k for k, v in NUMBER_WORDS.items()}


def color(name: str) -> str:
    return name.split()[0]


def count_phrase(n: int) -> str:
    return f"{_WORDS[n]} block" if n == 1 else f"{_WORDS[n]} blocks"


def join_names(names: list[str]) -> str:
    parts = [f"the {n}" for n in names]
    if len(parts) == 1:
        return parts[0]
    return ", ".join(parts[:-1]) + " and " + parts[-1]


def _quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _put(src: str, dst: str) -> str:
    return f"put_first_on_second({_quote(src)}, {_quote(dst)})"


def _preposition(env: EnvState, dst: str) -> str:
    if dst == TABLE:
        return "on the table"
    return f"on the {dst}" if env.kind(dst) == "block" else f"in the {dst}"


def _root_container(env: EnvState, block: str) -> str | None:
    cur = block
    while env.below(cur) is not None:
        cur = env.below(cur)
    return env.container_of(cur)


def _uncovered(env: EnvState) -> list[str]:
    return [b for b in env.blocks if env.block_on(b) is None]


class _Gen:
    def __init__(self, domain: str, rng: random.Random, builder: EpisodeBuilder):
        self.domain = domain
        self.rng = rng
        self.b = builder

    @property
    def env(self) -> EnvState:
        return self.b.env

    # --- helpers ------------------------------------------------------------
    def moves_step(self, query: str, moves: list[tuple[str, str]], *, temporal: bool,
                   summary: str | None = None) -> bool:
        env = self.env
        after = env
        for src, dst in moves:
            after = apply_pick_place(after, src, dst)
        if summary is None:
            src, dst = moves[0]
            summary = f"Put the {src} {_preposition(env, dst)}."
        changes = status_changes(env, after)
        for status in (DIRTY, CLEAN):
            names = [b for b, s in changes if s == status]
            if names:
                verb = "becomes" if len(names) == 1 else "become"
                summary += f" {join_names(names)} {verb} {status}."
        code = "\n".join(_put(s, d) for s, d in moves)
        code += f"\nupdate_wm({_quote(summary)})"
        self.b.add(query, code, temporal=temporal)
        return True

    def say_step(self, query: str, answer: str) -> bool:
        self.b.add(query, f"say({_quote(answer)})", temporal=True, answer=answer)
        return True

    def stack_targets(self, src: str) -> list[str]:
        env = self.env
        return [b for b in _uncovered(env)
                if b != src and env.below(src) != b and _root_container(env, b) is None]

    # --- families -------------------------------------------------------------
    def put_on_block(self) -> bool:
        pairs = [(a, b) for a in _uncovered(self.env) for b in self.stack_targets(a)]
        if not pairs:
            return False
        a, b = self.rng.choice(pairs)
        return self.moves_step(f"Put the {a} on the {b}", [(a, b)], temporal=False)

    def put_in_bowl(self) -> bool:
        env = self.env
        pairs = [(a, c) for a in _uncovered(env) for c in env.bowls if env.container_of(a) != c]
        if not pairs:
            return False
        a, c = self.rng.choice(pairs)
        return self.moves_step(f"Put the {a} in the {c}", [(a, c)], temporal=False)

    def put_on_table(self) -> bool:
        env = self.env
        cands = [a for a in _uncovered(env) if env.support[a] != TABLE]
        if not cands:
            return False
        a = self.rng.choice(cands)
        return self.moves_step(f"Put the {a} on the table", [(a, TABLE)], temporal=False)

    def ask_under(self) -> bool:
        env = self.env
        cands = [a for a in env.blocks if env.below(a) is not None]
        if not cands:
            return False
        a = self.rng.choice(cands)
        return self.say_step(f"What is the color of the block under the {a}?", color(env.below(a)))

    def ask_above(self) -> bool:
        env = self.env
        cands = [b for b in env.blocks if env.block_on(b) is not None]
        if not cands:
            return False
        b = self.rng.choice(cands)
        return self.say_step(f"What is the color of the block right above the {b}?",
                             color(env.block_on(b)))

    def ask_count(self) -> bool:
        c = self.rng.choice(self.env.bowls)
        return self.say_step(f"How many blocks are in the {c}?",
                             count_phrase(len(self.env.contents(c))))

    def ask_not_in_bowls(self) -> bool:
        env = self.env
        n = sum(1 for b in env.blocks if _root_container(env, b) is None)
        return self.say_step("How many blocks are not in the bowls?", count_phrase(n))

    def bowl_block_on_block(self) -> bool:
        env = self.env
        cands = []
        for c in env.bowls:
            inside = env.contents(c)
            if len(inside) == 1 and env.block_on(inside[0]) is None:
                cands += [(c, inside[0], t) for t in self.stack_targets(inside[0])]
        if not cands:
            return False
        c, x, y = self.rng.choice(cands)
        return self.moves_step(f"Put the block in the {c} on the {y}", [(x, y)], temporal=True)

    def disinfect(self) -> bool:
        env = self.env
        cands = [a for a in _uncovered(env) if not env.in_disinfector(a)]
        if not cands:
            return False
        a = self.rng.choice(cands)
        return self.moves_step(f"Put the {a} in the disinfector", [(a, "disinfector")], temporal=False)

    def all_with_status(self) -> bool:
        env = self.env
        status = self.rng.choice([DIRTY, CLEAN])
        dest = self.rng.choice([TABLE] + env.bowls)
        targets = [b for b in env.blocks if env.cleanliness.get(b) == status
                   and (env.support[b] != TABLE if dest == TABLE else env.container_of(b) != dest)]
        if not targets:
            return False
        order, sim, remaining = [], env, list(targets)
        while remaining:
            free = [b for b in remaining if sim.block_on(b) is None]
            if not free:
                return False
            b = free[0]
            sim = apply_pick_place(sim, b, dest)
            order.append((b, dest))
            remaining.remove(b)
        if any(sim.cleanliness[b] != env.cleanliness[b] for b in env.blocks):
            return False
        where = "on the table" if dest == TABLE else f"in the {dest}"
        summary = f"Put {join_names([b for b, _ in order])} {where}."
        return self.moves_step(f"Put all the {status} blocks {where}.", order,
                               temporal=True, summary=summary)

    def ask_status(self) -> bool:
        env = self.env
        known = [b for b in env.blocks if b in self.b.knowledge.known_status
                 and env.cleanliness.get(b) != UNKNOWN]
        if not known:
            return False
        a = self.rng.choice(known)
        probe = self.rng.choice([DIRTY, CLEAN])
        return self.say_step(f"Is the {a} {probe}?", "yes" if env.cleanliness[a] == probe else "no")

    def weight_match(self) -> bool:
        env = self.env
        options = []
        free = [b for b in env.blocks if env.support[b] == TABLE and env.block_on(b) is None]
        for target in env.bowls:
            goal = total_weight(env, target)
            if goal == 0:
                continue
            for bowl in env.bowls:
                if bowl == target:
                    continue
                need = goal - total_weight(env, bowl)
                subsets = [s for r in range(1, len(free) + 1)
                           for s in itertools.combinations(free, r)
                           if sum((env.weights[b] for b in s), Fraction(0)) == need]
                if len(subsets) == 1:
                    options.append((target, bowl, list(subsets[0])))
        if not options:
            return False
        target, bowl, chosen = self.rng.choice(options)
        query = (f"Put blocks in the {bowl} so that their total weight becomes identical "
                 f"to what is in the {target}")
        return self.moves_step(query, [(b, bowl) for b in chosen], temporal=True,
                               summary=f"Put {join_names(chosen)} in the {bowl}.")

    def ask_heavier(self) -> bool:
        env = self.env
        a, b = self.rng.sample(env.blocks, 2)
        return self.say_step(f"Is the {a} heavier than the {b}?",
                             "yes" if env.weights[a] > env.weights[b] else "no")


_FAMILIES: dict[str, list[tuple[str, int]]] = {
    "pick_place": [("put_on_block", 5), ("put_in_bowl", 4), ("put_on_table", 2),
                   ("ask_under", 2), ("ask_above", 1), ("ask_count", 1),
                   ("ask_not_in_bowls", 1), ("bowl_block_on_block", 2)],
    "disinfection": [("put_on_block", 5), ("put_in_bowl", 3), ("put_on_table", 1),
                     ("disinfect", 2), ("all_with_status", 3), ("ask_status", 1)],
    "weight": [("put_in_bowl", 5), ("put_on_table", 1), ("weight_match", 4),
               ("ask_heavier", 1)],
}
_FALLBACK = {"pick_place": "ask_count", "disinfection": "ask_status", "weight": "ask_heavier"}


def _initial_env(domain: str, rng: random.Random) -> tuple[EnvState, list[tuple]]:
    n_blocks = rng.randint(4, 6)
    blocks = [f"{c} block" for c in rng.sample(BLOCK_COLORS, n_blocks)]
    bowls = [f"{c} bowl" for c in rng.sample(BOWL_COLORS, 2)]
    declarations: list[tuple] = []
    if domain == "disinfection":
        dirty = rng.sample(blocks, rng.randint(1, 2))
        rest = [b for b in blocks if b not in dirty]
        clean = rng.sample(rest, rng.randint(1, 2))
        truth = {b: DIRTY for b in dirty} | {b: CLEAN for b in clean}
        declared = dirty + clean
        rng.shuffle(declared)
        declarations = [("status", b, truth[b]) for b in declared]
        return EnvState.initial(blocks, bowls, disinfector=True, cleanliness=truth), declarations
    if domain == "weight":
        order = list(blocks)
        rng.shuffle(order)
        weights = {order[0]: Fraction(rng.choice([1, 2, 4]))}
        for b in order[1:]:
            parent = rng.choice([p for p in order if p in weights])
            ratios = [(r, f) for r, f in (("same", 1), ("twice", 2), ("half", Fraction(1, 2)))
                      if 1 <= weights[parent] * f <= 8]
            ratio, factor = rng.choice(ratios)
            weights[b] = weights[parent] * factor
            declarations.append(("weight", b, parent, ratio))
        return EnvState.initial(blocks, bowls, weights=weights), declarations
    return EnvState.initial(blocks, bowls), declarations


def generate_episode(domain: str, seed: int, rng: random.Random | None = None) -> Episode:
    """Deterministic episode for ``(domain, seed)``."""
    if domain not in _FAMILIES:
        raise ValueError(f"unknown domain {domain!r}")
    rng = rng or random.Random(f"statler:{domain}:{seed}")
    env, declarations = _initial_env(domain, rng)
    builder = EpisodeBuilder(domain, env, episode_id=f"{domain}-{seed:04d}", seed=seed)
    gen = _Gen(domain, rng, builder)

    for decl in declarations:
        if decl[0] == "status":
            _, block, status = decl
            q = f"the {block} is {status}."
            builder.add(q, f"update_wm({_quote(q)})", noop=True, learn_status=[block])
        else:
            _, block, parent, ratio = decl
            q = {"same": f"The {block} has the same weight as the {parent}",
                 "twice": f"The {block} is twice the weight of the {parent}",
                 "half": f"The {block} is half the weight of the {parent}"}[ratio]
            builder.add(q, f"update_wm({_quote(q)})", noop=True,
                        learn_weight=(block, weight_expr(parent, ratio)))

    length = min(MAX_STEPS - 1, max(len(builder.steps) + 4, rng.randint(6, 14)))
    names, weights = zip(*_FAMILIES[domain])
    attempts = 0
    while len(builder.steps) < length:
        attempts += 1
        if attempts > 1000:
            raise EpisodeError(f"generator stalled for {domain} seed {seed}")
        family: Callable[[], bool] = getattr(gen, rng.choices(names, weights)[0])
        family()
    if domain == "disinfection":
        # every disinfection episode exercises an "all the clean/dirty blocks" query
        for _ in range(100):
            if any(s.query.startswith("Put all the ") for s in builder.steps):
                break
            gen.all_with_status()
    if not any(s.temporal for s in builder.steps):
        getattr(gen, _FALLBACK[domain])()
    return builder.build()


def generate_episodes(domain: str, count: int, seed: int) -> list[Episode]:
    return [generate_episode(domain, seed + i) for i in range(count)]


def episode_suite(domain: str, count: int = 20, seed: int = 0) -> list[Episode]:
    """The bundled sample episode(s) for ``domain`` topped up with generated ones."""
    from .episodes import bundled_episodes

    bundled = bundled_episodes(domain)[:count]
    return bundled + generate_episodes(domain, count - len(bundled), seed)
