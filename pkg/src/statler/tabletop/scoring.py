"""Behavioural step scoring: environment effects plus normalised answers."""

from __future__ import annotations

import re
from dataclasses import dataclass

from ..action_lang import ExecutionTrace
from .sim import EnvState

NUMBER_WORDS = {
    "zero": 0, "one": 1, "two": 2, "three": 3, "four": 4, "five": 5, "six": 6,
    "seven": 7, "eight": 8, "nine": 9, "ten": 10, "eleven": 11, "twelve": 12,
    "thirteen": 13, "fourteen": 14, "fifteen": 15, "sixteen": 16,
    "seventeen": 17, "eighteen": 18, "nineteen": 19, "twenty": 20,
}
_DROPPED = {"block", "blocks"}


def normalize_answer(text: str) -> str:
    """Lowercase, drop punctuation, numerals for number words, ignore "block(s)".

    >>> normalize_answer("Three blocks.")
    '3'
    >>> normalize_answer("red block")
    'red'
    """
    words = re.sub(r"[^\w\s]", " ", text.lower()).split()
    out = []
    for w in words:
        if w in _DROPPED:
            continue
        out.append(str(NUMBER_WORDS[w]) if w in NUMBER_WORDS else w)
    return " ".join(out)


def answers_match(expected: str, said: str) -> bool:
    return normalize_answer(expected) == normalize_answer(said)


@dataclass(frozen=True)
class GoldSpec:
    expected_env: EnvState | None = None
    expected_answer: str | None = None
    expected_noop: bool = False

    def __post_init__(self) -> None:
        if self.expected_env is None and self.expected_answer is None and not self.expected_noop:
            raise ValueError("a gold spec needs at least one expectation")


@dataclass(frozen=True)
class Verdict:
    passed: bool
    reason: str = ""

    @property
    def label(self) -> str:
        return "pass" if self.passed else "fail"


def check_step(gold: GoldSpec, env_after: EnvState, trace: ExecutionTrace) -> Verdict:
    """Score one executed step against its gold spec."""
    if trace.failure is not None:
        f = trace.failure
        return Verdict(False, f"{f.kind} at statement {f.index}: {f.message}")
    if gold.expected_noop and trace.env_effects:
        return Verdict(False, "expected no environment effect")
    if gold.expected_env is not None and env_after != gold.expected_env:
        return Verdict(False, _env_mismatch(gold.expected_env, env_after))
    if gold.expected_answer is not None:
        if not any(answers_match(gold.expected_answer, s) for s in trace.say_outputs):
            said = "; ".join(trace.say_outputs) or "nothing"
            return Verdict(False, f"expected answer {gold.expected_answer!r}, said {said}")
    return Verdict(True, "")


def _env_mismatch(expected: EnvState, actual: EnvState) -> str:
    diffs = []
    for b in expected.blocks:
        if expected.support.get(b) != actual.support.get(b):
            diffs.append(f"{b} at {actual.support.get(b)} (expected {expected.support.get(b)})")
        if expected.cleanliness.get(b) != actual.cleanliness.get(b):
            diffs.append(f"{b} {actual.cleanliness.get(b)} (expected {expected.cleanliness.get(b)})")
    return "environment mismatch: " + ("; ".join(diffs) or "objects differ")
