"""``statler`` command-line entry point.

Subcommands::

    statler tabletop run --domain disinfection --agent statler --backend scripted:gold --out runs/x
    statler shellgame run --agent state --backend scripted:gold --out runs/shell
    statler gen-episodes --domain weight --count 20 --seed 7 --out weight.jsonl
    statler report runs/x/records.jsonl --format markdown
    statler replay runs/x --out runs/x-replay
    statler repl --domain pick-place --backend live

Backend specs: ``scripted:gold``, ``scripted:noisy:<p>`` (shell game only),
``live``, ``replay:<path>`` and ``record:<path>:<inner spec>``.

A ``--config`` JSON file may provide any option (same names as the long
flags, with underscores); explicit flags win. Exit codes: 0 success, 1 run
failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path
from typing import Any, Callable, Sequence, TextIO

from .agents import StatlerAgent, load_agent_config, load_baseline_config
from .errors import BackendError, ConfigError, StatlerError
from .eval_harness import (
    ABORTED,
    compute_metrics,
    emit_report,
    read_records,
    run_suite,
    write_outputs,
    write_records,
)
from .llm_backends import (
    Backend,
    LiveBackend,
    ScriptedBackend,
    TranscriptStore,
    load_replay_cache,
    transcript_to,
)
from .oracle import gold_backend
from .shellgame import (
    AGENT_KINDS,
    ShellRunConfig,
    accuracy_curve,
    curve_csv,
    oracle_backend,
    run_shell_suite,
    write_results,
)
from .tabletop.episodes import (
    DOMAINS,
    Episode,
    bundled_episodes,
    episode_to_json,
    load_episodes,
    save_episodes,
)
from .tabletop.generate import episode_suite, generate_episodes
from .tabletop.sim import TabletopEnv
from .world_model import render_state

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2
DOMAIN_FLAGS = {"pick-place": "pick_place", "disinfection": "disinfection", "weight": "weight"}

TABLETOP_DEFAULTS: dict[str, Any] = {
    "agent": "statler", "backend": "scripted:gold", "count": 20, "seed": 0, "workers": 1,
    "episodes": None, "out": None, "reader_bank": None, "writer_bank": None,
    "baseline_bank": None, "budget_chars": 60_000, "model": None, "max_tokens": 512,
    "on_invalid_state": "reject",
}
SHELL_DEFAULTS: dict[str, Any] = {
    "agent": "state", "backend": "scripted:gold", "num_episodes": 100, "max_swaps": 7,
    "demos": 30, "seed": 0, "out": None, "model": None,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # usage errors exit 2 with usage text
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _domain(value: str) -> str:
    if value in DOMAIN_FLAGS:
        return DOMAIN_FLAGS[value]
    if value in DOMAINS:
        return value
    raise argparse.ArgumentTypeError(f"unknown domain {value!r} (choose pick-place, disinfection, weight)")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="statler", description="World-state-maintaining LLM agents and their evaluation.")
    p.add_argument("--config", help="JSON run configuration; flags override its fields")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    tt = sub.add_parser("tabletop", help="tabletop simulation suites").add_subparsers(
        dest="action", required=True, parser_class=_Parser)
    run = tt.add_parser("run", help="run an agent over an episode set")
    run.add_argument("--domain", type=_domain)
    run.add_argument("--agent", choices=["statler", "baseline", "both"])
    run.add_argument("--backend")
    run.add_argument("--episodes", help="episode .jsonl file (default: bundled + generated)")
    run.add_argument("--count", type=int, help="suite size when generating")
    run.add_argument("--seed", type=int)
    run.add_argument("--out", help="output directory")
    run.add_argument("--workers", type=int)
    run.add_argument("--reader-bank", dest="reader_bank")
    run.add_argument("--writer-bank", dest="writer_bank")
    run.add_argument("--baseline-bank", dest="baseline_bank")
    run.add_argument("--budget-chars", dest="budget_chars", type=int)
    run.add_argument("--model")
    run.add_argument("--max-tokens", dest="max_tokens", type=int)
    run.add_argument("--on-invalid-state", dest="on_invalid_state", choices=["reject", "warn"])

    sg = sub.add_parser("shellgame", help="three-cups-and-a-ball benchmark").add_subparsers(
        dest="action", required=True, parser_class=_Parser)
    srun = sg.add_parser("run", help="run shell-game episodes and export the accuracy curve")
    srun.add_argument("--agent", choices=list(AGENT_KINDS))
    srun.add_argument("--backend")
    srun.add_argument("--episodes", dest="num_episodes", type=int)
    srun.add_argument("--max-swaps", dest="max_swaps", type=int)
    srun.add_argument("--demos", type=int)
    srun.add_argument("--seed", type=int)
    srun.add_argument("--out")
    srun.add_argument("--model")

    gen = sub.add_parser("gen-episodes", help="generate a deterministic episode set")
    gen.add_argument("--domain", type=_domain, required=True)
    gen.add_argument("--count", type=int, required=True)
    gen.add_argument("--seed", type=int, required=True)
    gen.add_argument("--out", help="output .jsonl (default: stdout)")

    rep = sub.add_parser("report", help="render metrics from records.jsonl files")
    rep.add_argument("records", nargs="+")
    rep.add_argument("--format", choices=["markdown", "csv"], default="markdown")
    rep.add_argument("--out")

    rp = sub.add_parser("replay", help="re-run a recorded tabletop run from its transcript")
    rp.add_argument("run_dir")
    rp.add_argument("--out", help="output directory (default: <run_dir>/replay)")

    repl = sub.add_parser("repl", help="interactive step-by-step Statler session")
    repl.add_argument("--domain", type=_domain, default="disinfection")
    repl.add_argument("--backend", default="live")
    repl.add_argument("--episodes", help="take the initial scene from this episode file")
    repl.add_argument("--index", type=int, default=0)
    return p


# --------------------------------------------------------------------------
# config and backends

def _merge(args: argparse.Namespace, defaults: dict[str, Any], config: dict[str, Any]) -> dict[str, Any]:
    merged = dict(defaults)
    merged.update({k: v for k, v in config.items() if k in defaults or k == "domain"})
    merged.update({k: v for k, v in vars(args).items() if v is not None and (k in defaults or k == "domain")})
    return merged


def _load_config(path: str | None) -> dict[str, Any]:
    if path is None:
        return {}
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as err:
        raise ConfigError(f"cannot read config {path}: {err}") from err
    if not isinstance(doc, dict):
        raise ConfigError("config file must hold a JSON object")
    return doc


def parse_backend(spec: str, gold: Callable[[str], Backend] | None = None) -> Backend:
    """Build a backend from its spec string.

    ``gold`` receives the text after ``scripted:`` and returns the oracle.
    """
    kind, _, rest = spec.partition(":")
    if kind == "scripted":
        if gold is None:
            raise ConfigError(f"backend {spec!r} is not available here")
        return gold(rest)
    if kind == "live":
        return LiveBackend()
    if kind == "replay":
        if not rest:
            raise ConfigError("replay backend needs a path: replay:<path>")
        return load_replay_cache(rest)
    if kind == "record":
        path, _, inner = rest.partition(":")
        if not path or not inner:
            raise ConfigError("record backend needs record:<path>:<inner spec>")
        return load_replay_cache(path, inner=parse_backend(inner, gold), record_to=TranscriptStore(path))
    raise ConfigError(f"unknown backend spec {spec!r}")


def _tabletop_gold(episodes: list[Episode], cfg) -> Callable[[str], Backend]:
    def make(rest: str) -> Backend:
        if rest != "gold":
            raise ConfigError(f"unknown scripted tabletop backend 'scripted:{rest}'")
        return gold_backend(episodes, cfg)
    return make


# --------------------------------------------------------------------------
# tabletop

def _tabletop_episodes(opts: dict[str, Any]) -> list[Episode]:
    if opts.get("episodes"):
        return load_episodes(opts["episodes"])
    if opts.get("seed") is None:
        raise ConfigError("generated suites need a seed")
    return episode_suite(opts["domain"], count=opts["count"], seed=opts["seed"])


def _agent_configs(opts: dict[str, Any], episodes: list[Episode]) -> dict[str, Any]:
    domain = opts["domain"]
    common = {"budget_chars": opts["budget_chars"], "max_tokens": opts["max_tokens"]}
    if opts.get("model"):
        common["model_id"] = opts["model"]
    kinds = ["baseline", "statler"] if opts["agent"] == "both" else [opts["agent"]]
    placeholder = ScriptedBackend()
    configs = {}
    for kind in kinds:
        if kind == "statler":
            cfg = load_agent_config(domain, placeholder, reader_bank=opts["reader_bank"],
                                    writer_bank=opts["writer_bank"],
                                    on_invalid_state=opts["on_invalid_state"], **common)
        else:
            cfg = load_baseline_config(domain, placeholder, bank=opts["baseline_bank"], **common)
        backend = parse_backend(opts["backend"], gold=_tabletop_gold(episodes, cfg))
        configs[kind] = replace(cfg, backend=backend)
    return configs


def run_tabletop(opts: dict[str, Any], stdout: TextIO) -> int:
    if not opts.get("domain"):
        raise ConfigError("--domain is required")
    try:
        opts["domain"] = _domain(opts["domain"])
    except argparse.ArgumentTypeError as err:
        raise ConfigError(str(err)) from err
    if opts["agent"] not in ("statler", "baseline", "both"):
        raise ConfigError(f"unknown agent {opts['agent']!r}")
    if not opts.get("out"):
        raise ConfigError("--out is required")
    out = Path(opts["out"])
    out.mkdir(parents=True, exist_ok=True)
    episodes = _tabletop_episodes(opts)
    configs = _agent_configs(opts, episodes)
    (out / "run_config.json").write_text(json.dumps(opts, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    records = []
    with TranscriptStore(out / "transcripts.jsonl") as store, transcript_to(store):
        for kind, cfg in configs.items():
            records += run_suite(kind, cfg, episodes, workers=opts["workers"])
    aborted = {r.episode_id for r in records if r.verdict == ABORTED}
    if len(aborted) == len(episodes):
        write_records(records, out / "records.jsonl")
        stdout.write("every episode aborted by backend errors; no metrics written\n")
        return EXIT_FAIL
    metrics = write_outputs(records, out)
    stdout.write(emit_report(metrics, "markdown"))
    if aborted:
        stdout.write(f"{len(aborted)} episode(s) aborted by backend errors\n")
        return EXIT_FAIL
    return EXIT_OK


def run_replay(run_dir: str, out: str | None, stdout: TextIO) -> int:
    src = Path(run_dir)
    opts = _load_config(str(src / "run_config.json"))
    opts["backend"] = f"replay:{src / 'transcripts.jsonl'}"
    opts["out"] = out or str(src / "replay")
    opts = {**TABLETOP_DEFAULTS, **opts}
    code = run_tabletop(opts, stdout)
    same = all((src / name).read_bytes() == (Path(opts["out"]) / name).read_bytes()
               for name in ("records.jsonl", "metrics.json"))
    stdout.write("replay identical\n" if same else "replay DIFFERS from the recorded run\n")
    return code if same else EXIT_FAIL


# --------------------------------------------------------------------------
# shell game

def run_shellgame(opts: dict[str, Any], stdout: TextIO) -> int:
    if not opts.get("out"):
        raise ConfigError("--out is required")
    kwargs = {"model_id": opts["model"]} if opts.get("model") else {}
    try:
        cfg = ShellRunConfig(num_episodes=opts["num_episodes"], max_swaps=opts["max_swaps"],
                             demos=opts["demos"], agent_kind=opts["agent"], seed=opts["seed"], **kwargs)
    except ValueError as err:
        raise ConfigError(str(err)) from err

    def gold(rest: str) -> Backend:
        if rest == "gold":
            return oracle_backend(cfg.agent_kind, seed=cfg.seed)
        if rest.startswith("noisy:"):
            try:
                rate = float(rest[len("noisy:"):])
            except ValueError as err:
                raise ConfigError(f"bad error rate in scripted:{rest}") from err
            return oracle_backend(cfg.agent_kind, error_rate=rate, seed=cfg.seed)
        raise ConfigError(f"unknown scripted shell-game backend 'scripted:{rest}'")

    backend = parse_backend(opts["backend"], gold=gold)
    out = Path(opts["out"])
    out.mkdir(parents=True, exist_ok=True)
    (out / "run_config.json").write_text(json.dumps(opts, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    with TranscriptStore(out / "transcripts.jsonl") as store, transcript_to(store):
        results = run_shell_suite(cfg, backend)
    write_results(results, out / "results.jsonl")
    curve = accuracy_curve(results, cfg.max_swaps) if any(r.aborted is None for r in results) else None
    if curve is None:
        stdout.write("every episode aborted\n")
        return EXIT_FAIL
    text = curve_csv(curve)
    (out / "curve.csv").write_text(text, encoding="utf-8")
    stdout.write(text)
    return EXIT_FAIL if curve.aborted else EXIT_OK


# --------------------------------------------------------------------------
# other commands

def run_gen(args: argparse.Namespace, stdout: TextIO) -> int:
    if args.count < 1:
        raise ConfigError("--count must be positive")
    episodes = generate_episodes(args.domain, args.count, args.seed)
    if args.out:
        save_episodes(episodes, args.out)
        stdout.write(f"wrote {len(episodes)} episodes to {args.out}\n")
    else:
        for ep in episodes:
            stdout.write(json.dumps(episode_to_json(ep), ensure_ascii=False) + "\n")
    return EXIT_OK


def run_report(args: argparse.Namespace, stdout: TextIO) -> int:
    records = [r for path in args.records for r in read_records(path)]
    text = emit_report(compute_metrics(records), args.format)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        stdout.write(text)
    return EXIT_OK


def run_repl(args: argparse.Namespace, stdin: TextIO, stdout: TextIO) -> int:
    """Print the state, read a query, run one Statler step, repeat (``:quit`` exits)."""
    episodes = load_episodes(args.episodes) if args.episodes else bundled_episodes(args.domain)
    if not episodes:
        raise ConfigError(f"no episodes available for {args.domain}")
    episode = episodes[min(args.index, len(episodes) - 1)]
    cfg = load_agent_config(episode.domain, ScriptedBackend())
    cfg = replace(cfg, backend=parse_backend(args.backend, gold=_tabletop_gold([episode], cfg)))
    env = TabletopEnv(episode.init_env)
    agent = StatlerAgent(cfg, episode.init_state_text, env)
    stdout.write(render_state(agent.state) + "\n")
    while True:
        stdout.write("query> ")
        stdout.flush()
        line = stdin.readline()
        if not line or line.strip() in (":quit", ":q", "exit"):
            stdout.write("\n")
            return EXIT_OK
        query = line.strip()
        if not query:
            continue
        try:
            outcome = agent.step(query)
        except BackendError as err:
            stdout.write(f"backend error: {err}\n")
            continue
        stdout.write(outcome.reader_text.rstrip() + "\n")
        for said in outcome.trace.say_outputs:
            stdout.write(f"robot says: {said}\n")
        if outcome.failure is not None:
            stdout.write(f"step failed: {outcome.failure.kind}: {outcome.failure.message}\n")
        stdout.write(render_state(agent.state) + "\n")


def dispatch(argv: Sequence[str] | None = None, *, stdin: TextIO | None = None,
             stdout: TextIO | None = None) -> int:
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        config = _load_config(args.config)
        if args.command == "tabletop":
            return run_tabletop(_merge(args, TABLETOP_DEFAULTS, config), stdout)
        if args.command == "shellgame":
            return run_shellgame(_merge(args, SHELL_DEFAULTS, config), stdout)
        if args.command == "gen-episodes":
            return run_gen(args, stdout)
        if args.command == "report":
            return run_report(args, stdout)
        if args.command == "replay":
            return run_replay(args.run_dir, args.out, stdout)
        if args.command == "repl":
            return run_repl(args, stdin, stdout)
    except ConfigError as err:
        print(f"statler: error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except StatlerError as err:
        print(f"statler: run failed: {err}", file=sys.stderr)
        return EXIT_FAIL
    except OSError as err:
        print(f"statler: run failed: {err}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_CONFIG


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
