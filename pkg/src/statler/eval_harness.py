"""Suite runner, step records, metrics and report rendering.

An episode run stops at the first failed step (after recording it): later
queries usually presuppose a scene the agent never produced. Metrics are a
deterministic fold over records sorted by ``(agent, episode_id, step_index)``,
so parallel execution does not change any output byte.
"""

from __future__ import annotations

import contextvars
import csv
import io
import json
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Iterable, Literal, Mapping, Sequence

from .agents import (
    AgentConfig,
    BaselineAgent,
    BaselineConfig,
    StatlerAgent,
)
from .errors import BackendError, StatlerError
from .llm_backends import step_context
from .tabletop.episodes import Episode
from .tabletop.scoring import check_step
from .tabletop.sim import TabletopEnv, env_to_json
from .world_model import render_state

PASS, FAIL, ABORTED = "pass", "fail", "aborted"
TruncationMode = Literal["individual", "collective"]
MODES: tuple[str, ...] = ("individual", "collective")
AGENT_NAMES = {"baseline": "Code-as-Policies", "statler": "Statler"}
DOMAIN_NAMES = {"pick_place": "Simple Pick-and-Place", "disinfection": "Block Disinfection",
                "weight": "Relative Weight Reasoning"}


class MetricsError(StatlerError):
    pass


@dataclass(frozen=True)
class RunRecord:
    episode_id: str
    domain: str
    step_index: int
    episode_length: int
    query: str
    temporal: bool
    agent: str
    program: str
    verdict: str
    reason: str = ""
    world_state: str | None = None
    env: dict | None = None
    digests: tuple[str, ...] = ()

    @property
    def passed(self) -> bool:
        return self.verdict == PASS

    def to_json(self) -> dict[str, Any]:
        doc = asdict(self)
        doc["digests"] = list(self.digests)
        return doc

    @classmethod
    def from_json(cls, doc: Mapping[str, Any]) -> "RunRecord":
        return cls(**{**doc, "digests": tuple(doc.get("digests", ()))})


# --------------------------------------------------------------------------
# running

def make_agent(kind: str, cfg: AgentConfig | BaselineConfig, episode: Episode):
    env = TabletopEnv(episode.init_env)
    if kind == "statler":
        if not isinstance(cfg, AgentConfig):
            raise TypeError("the statler agent needs an AgentConfig")
        return StatlerAgent(cfg, episode.init_state_text, env)
    if kind == "baseline":
        if not isinstance(cfg, BaselineConfig):
            raise TypeError("the baseline agent needs a BaselineConfig")
        return BaselineAgent(cfg, episode.init_env.names, env)
    raise ValueError(f"unknown agent kind {kind!r}")


def run_episode(agent: StatlerAgent | BaselineAgent, episode: Episode) -> list[RunRecord]:
    records = []
    for i, step in enumerate(episode.steps):
        base = dict(episode_id=episode.episode_id, domain=episode.domain, step_index=i,
                    episode_length=len(episode.steps), query=step.query,
                    temporal=step.temporal, agent=agent.kind)
        try:
            with step_context(episode.episode_id, i):
                outcome = agent.step(step.query)
        except BackendError as err:
            records.append(RunRecord(**base, program="", verdict=ABORTED,
                                     reason=f"{type(err).__name__}: {err}"))
            break
        verdict = check_step(step.gold, agent.env.state, outcome.trace)
        world = render_state(agent.state) if isinstance(agent, StatlerAgent) else None
        records.append(RunRecord(**base, program=outcome.reader_text,
                                 verdict=verdict.label, reason=verdict.reason,
                                 world_state=world, env=env_to_json(agent.env.state),
                                 digests=tuple(outcome.digests)))
        if not verdict.passed:
            break
    return records


def run_suite(kind: str, cfg: AgentConfig | BaselineConfig, episodes: Sequence[Episode], *,
              workers: int = 1) -> list[RunRecord]:
    """Run every episode with a fresh agent; records come back sorted."""

    def one(ep: Episode) -> list[RunRecord]:
        return run_episode(make_agent(kind, cfg, ep), ep)

    if workers <= 1:
        batches = [one(ep) for ep in episodes]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(contextvars.copy_context().run, one, ep) for ep in episodes]
            batches = [f.result() for f in futures]
    return sort_records(r for batch in batches for r in batch)


def sort_records(records: Iterable[RunRecord]) -> list[RunRecord]:
    return sorted(records, key=lambda r: (r.agent, r.domain, r.episode_id, r.step_index))


def write_records(records: Iterable[RunRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps(r.to_json(), ensure_ascii=False, sort_keys=True) + "\n")


def read_records(path: str | Path) -> list[RunRecord]:
    out = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            out.append(RunRecord.from_json(json.loads(line)))
    return out


# --------------------------------------------------------------------------
# metrics

@dataclass(frozen=True)
class Rate:
    k: int
    n: int

    def __post_init__(self) -> None:
        if not 0 <= self.k <= self.n:
            raise ValueError(f"invalid rate {self.k}/{self.n}")

    @property
    def value(self) -> float | None:
        return self.k / self.n if self.n else None

    def __str__(self) -> str:
        v = self.value
        return f"{'n/a' if v is None else f'{v:.2f}'} ({self.k}/{self.n})"


@dataclass(frozen=True)
class DomainResult:
    normalized_steps: float
    success: Rate
    aborted: int = 0


@dataclass(frozen=True)
class SplitCell:
    non_temporal: Rate
    temporal: Rate


@dataclass(frozen=True)
class SuiteMetrics:
    """``results[agent][domain]`` and ``splits[mode][agent][domain]``."""

    agents: tuple[str, ...]
    domains: tuple[str, ...]
    results: Mapping[str, Mapping[str, DomainResult]]
    splits: Mapping[str, Mapping[str, Mapping[str, SplitCell]]] = field(default_factory=dict)

    def to_json(self) -> dict[str, Any]:
        def rate(r: Rate) -> dict[str, Any]:
            return {"k": r.k, "n": r.n, "value": None if r.value is None else round(r.value, 6)}

        return {
            "agents": list(self.agents),
            "domains": list(self.domains),
            "results": {a: {d: {"normalized_successful_steps": round(res.normalized_steps, 6),
                                "success_rate": rate(res.success), "aborted": res.aborted}
                            for d, res in self.results[a].items()} for a in self.agents},
            "splits": {m: {a: {d: {"non_temporal": rate(c.non_temporal), "temporal": rate(c.temporal)}
                               for d, c in per_a.items()} for a, per_a in per_m.items()}
                       for m, per_m in self.splits.items()},
        }


def group_by_episode(records: Iterable[RunRecord]) -> dict[str, list[RunRecord]]:
    groups: dict[str, list[RunRecord]] = defaultdict(list)
    for r in sorted(records, key=lambda r: (r.episode_id, r.step_index)):
        groups[r.episode_id].append(r)
    for eid, recs in groups.items():
        if [r.step_index for r in recs] != list(range(len(recs))):
            raise MetricsError(f"{eid}: step indices are not contiguous from 0")
    return dict(groups)


def _completed(groups: Mapping[str, list[RunRecord]]) -> dict[str, list[RunRecord]]:
    return {eid: recs for eid, recs in groups.items() if not any(r.verdict == ABORTED for r in recs)}


def _passes_before_failure(recs: Sequence[RunRecord]) -> int:
    n = 0
    for r in recs:
        if not r.passed:
            break
        n += 1
    return n


def normalized_successful_steps(groups: Mapping[str, list[RunRecord]]) -> float:
    groups = _completed(groups)
    if not groups:
        raise MetricsError("empty suite")
    total = sum(_passes_before_failure(recs) / recs[0].episode_length for recs in groups.values())
    return total / len(groups)


def success_rate(groups: Mapping[str, list[RunRecord]]) -> Rate:
    groups = _completed(groups)
    if not groups:
        raise MetricsError("empty suite")
    k = sum(1 for recs in groups.values()
            if len(recs) == recs[0].episode_length and all(r.passed for r in recs))
    return Rate(k, len(groups))


def _first_failure(recs: Sequence[RunRecord]) -> int:
    """Index of the last scored step: the first failure, else the final step."""
    for r in recs:
        if not r.passed:
            return r.step_index
    return recs[-1].episode_length - 1


def temporal_split(records_by_agent: Mapping[str, Iterable[RunRecord]],
                   mode: str = "individual") -> dict[str, SplitCell]:
    """Temporal / non-temporal success per agent under one truncation mode.

    ``individual`` counts each agent's steps up to and including its own
    first failure; ``collective`` cuts every agent at the earliest failure
    of any agent in that episode.
    """
    if mode not in MODES:
        raise ValueError(f"unknown truncation mode {mode!r}")
    groups = {a: group_by_episode(recs) for a, recs in records_by_agent.items()}
    ids = [set(g) for g in groups.values()]
    if any(s != ids[0] for s in ids):
        raise MetricsError("agents ran different episode sets")
    aborted = {eid for g in groups.values() for eid, recs in g.items()
               if any(r.verdict == ABORTED for r in recs)}
    counts = {a: {"t": [0, 0], "nt": [0, 0]} for a in groups}
    for eid in sorted(ids[0] - aborted if ids else ()):
        cuts = {a: _first_failure(g[eid]) for a, g in groups.items()}
        shared = min(cuts.values())
        for a, g in groups.items():
            cut = shared if mode == "collective" else cuts[a]
            for r in g[eid]:
                if r.step_index > cut:
                    break
                bucket = counts[a]["t" if r.temporal else "nt"]
                bucket[0] += r.passed
                bucket[1] += 1
    return {a: SplitCell(Rate(*c["nt"]), Rate(*c["t"])) for a, c in counts.items()}


def compute_metrics(records: Iterable[RunRecord], *, modes: Sequence[str] = MODES) -> SuiteMetrics:
    records = list(records)
    if not records:
        raise MetricsError("empty suite")
    agents = tuple(a for a in AGENT_NAMES if any(r.agent == a for r in records))
    agents += tuple(sorted({r.agent for r in records} - set(agents)))
    domains = tuple(d for d in DOMAIN_NAMES if any(r.domain == d for r in records))
    results: dict[str, dict[str, DomainResult]] = {}
    for a in agents:
        results[a] = {}
        for d in domains:
            groups = group_by_episode(r for r in records if r.agent == a and r.domain == d)
            if not groups:
                continue
            n_aborted = len(groups) - len(_completed(groups))
            results[a][d] = DomainResult(normalized_successful_steps(groups), success_rate(groups), n_aborted)
    splits: dict[str, dict[str, dict[str, SplitCell]]] = {}
    for mode in modes:
        splits[mode] = {a: {} for a in agents}
        for d in domains:
            per_agent = {a: [r for r in records if r.agent == a and r.domain == d] for a in agents}
            per_agent = {a: recs for a, recs in per_agent.items() if recs}
            for a, cell in temporal_split(per_agent, mode).items():
                splits[mode][a][d] = cell
    return SuiteMetrics(agents, domains, results, splits)


# --------------------------------------------------------------------------
# reports

def _md_table(header: Sequence[str], rows: Sequence[Sequence[str]]) -> list[str]:
    lines = ["| " + " | ".join(header) + " |", "|" + "|".join(["---"] * len(header)) + "|"]
    lines += ["| " + " | ".join(row) + " |" for row in rows]
    return lines


def _agent_label(a: str) -> str:
    return AGENT_NAMES.get(a, a)


def _table1(m: SuiteMetrics) -> tuple[list[str], list[list[str]]]:
    header = [""]
    for d in m.domains:
        header += [f"{DOMAIN_NAMES[d]}: successful steps", f"{DOMAIN_NAMES[d]}: success rate"]
    rows = []
    for a in m.agents:
        row = [_agent_label(a)]
        for d in m.domains:
            res = m.results[a].get(d)
            row += ["-", "-"] if res is None else [f"{res.normalized_steps:.2f}", str(res.success)]
        rows.append(row)
    return header, rows


def _split_table(m: SuiteMetrics, mode: str) -> tuple[list[str], list[list[str]]]:
    header = [""]
    header += [f"Non-temporal: {_agent_label(a)}" for a in m.agents]
    header += [f"Temporal: {_agent_label(a)}" for a in m.agents]
    rows = []
    for d in m.domains:
        cells = [m.splits[mode][a].get(d) for a in m.agents]
        row = [DOMAIN_NAMES[d]]
        row += ["-" if c is None else str(c.non_temporal) for c in cells]
        row += ["-" if c is None else str(c.temporal) for c in cells]
        rows.append(row)
    return header, rows


_SPLIT_TITLES = {
    "individual": "Temporal and non-temporal success, truncated at each agent's own first failure",
    "collective": "Temporal and non-temporal success, truncated at the first failure of any agent",
}


def emit_report(metrics: SuiteMetrics, fmt: str = "markdown") -> str:
    if not metrics.agents or not metrics.domains:
        raise MetricsError("empty suite")
    if fmt == "markdown":
        lines = ["## Successful steps (normalized by episode length) and success rate", ""]
        lines += _md_table(*_table1(metrics))
        for mode in MODES:
            if mode in metrics.splits:
                lines += ["", f"## {_SPLIT_TITLES[mode]}", ""]
                lines += _md_table(*_split_table(metrics, mode))
        return "\n".join(lines) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["table", "mode", "agent", "domain", "metric", "value", "k", "n"])
        for a in metrics.agents:
            for d in metrics.domains:
                res = metrics.results[a].get(d)
                if res is None:
                    continue
                w.writerow(["steps", "", a, d, "normalized_successful_steps",
                            f"{res.normalized_steps:.2f}", "", ""])
                w.writerow(["steps", "", a, d, "success_rate", _fmt(res.success),
                            res.success.k, res.success.n])
        for mode in MODES:
            for a in metrics.agents:
                for d in metrics.domains:
                    cell = metrics.splits.get(mode, {}).get(a, {}).get(d)
                    if cell is None:
                        continue
                    for name, rate in (("non_temporal", cell.non_temporal), ("temporal", cell.temporal)):
                        w.writerow(["split", mode, a, d, name, _fmt(rate), rate.k, rate.n])
        return buf.getvalue()
    raise ValueError(f"unknown report format {fmt!r}")


def _fmt(rate: Rate) -> str:
    return "" if rate.value is None else f"{rate.value:.2f}"


def metrics_json(metrics: SuiteMetrics) -> str:
    return json.dumps(metrics.to_json(), indent=2, sort_keys=True) + "\n"


def write_outputs(records: Sequence[RunRecord], out_dir: str | Path) -> SuiteMetrics:
    """records.jsonl, metrics.json, report.md and report.csv in ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    metrics = compute_metrics(records)
    write_records(records, out / "records.jsonl")
    (out / "metrics.json").write_text(metrics_json(metrics), encoding="utf-8")
    (out / "report.md").write_text(emit_report(metrics, "markdown"), encoding="utf-8")
    (out / "report.csv").write_text(emit_report(metrics, "csv"), encoding="utf-8")
    return metrics
