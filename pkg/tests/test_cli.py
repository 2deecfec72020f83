from __future__ import annotations

import io
import json

import pytest

from statler.cli import dispatch, parse_backend
from statler.errors import ConfigError
from statler.llm_backends import ReplayBackend
from statler.tabletop.episodes import bundled_episodes, load_episodes


def run(*argv: str, stdin: str = "") -> tuple[int, str]:
    out = io.StringIO()
    code = dispatch(list(argv), stdin=io.StringIO(stdin), stdout=out)
    return code, out.getvalue()


def test_gen_episodes_is_deterministic(tmp_path):
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    assert run("gen-episodes", "--domain", "disinfection", "--count", "20", "--seed", "7", "--out", str(a))[0] == 0
    assert run("gen-episodes", "--domain", "disinfection", "--count", "20", "--seed", "7", "--out", str(b))[0] == 0
    assert a.read_bytes() == b.read_bytes()
    assert len(load_episodes(a)) == 20


def test_gen_episodes_to_stdout():
    code, out = run("gen-episodes", "--domain", "weight", "--count", "2", "--seed", "0")
    assert code == 0 and len(out.splitlines()) == 2
    assert json.loads(out.splitlines()[0])["domain"] == "weight"


def test_tabletop_gold_run_reaches_full_success(tmp_path):
    out = tmp_path / "run"
    code, text = run("tabletop", "run", "--domain", "weight", "--agent", "both", "--backend", "scripted:gold",
                     "--count", "5", "--seed", "1", "--out", str(out))
    assert code == 0
    metrics = json.loads((out / "metrics.json").read_text())
    for agent in ("statler", "baseline"):
        assert metrics["results"][agent]["weight"]["success_rate"] == {"k": 5, "n": 5, "value": 1.0}
    assert {p.name for p in out.iterdir()} >= {"records.jsonl", "metrics.json", "report.md", "report.csv",
                                                "transcripts.jsonl", "run_config.json"}
    assert "| Statler |" in text


def test_identical_invocations_give_identical_outputs(tmp_path):
    args = ["tabletop", "run", "--domain", "pick-place", "--count", "3", "--seed", "4"]
    run(*args, "--out", str(tmp_path / "a"))
    run(*args, "--out", str(tmp_path / "b"))
    for name in ("records.jsonl", "metrics.json", "report.md", "report.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_record_then_replay(tmp_path):
    cache = tmp_path / "cache.jsonl"
    out = tmp_path / "rec"
    code, _ = run("tabletop", "run", "--domain", "disinfection", "--count", "4", "--seed", "2",
                  "--backend", f"record:{cache}:scripted:gold", "--out", str(out), "--workers", "3")
    assert code == 0 and cache.exists()
    code, text = run("replay", str(out), "--out", str(tmp_path / "again"))
    assert code == 0 and "replay identical" in text


def test_config_file_with_flag_override(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"domain": "weight", "count": 2, "seed": 3, "agent": "baseline"}))
    out = tmp_path / "o"
    assert run("--config", str(cfg), "tabletop", "run", "--agent", "statler", "--out", str(out))[0] == 0
    saved = json.loads((out / "run_config.json").read_text())
    assert saved["agent"] == "statler" and saved["count"] == 2


@pytest.mark.parametrize("argv", [
    ["tabletop", "run", "--domain", "kitchen", "--out", "x"],
    ["tabletop", "run", "--domain", "weight"],
    ["tabletop", "run", "--domain", "weight", "--backend", "carrier-pigeon", "--out", "{tmp}"],
    ["frobnicate"],
    ["shellgame", "run", "--backend", "scripted:psychic", "--out", "{tmp}"],
    ["--config", "{tmp}/missing.json", "report", "x"],
])
def test_configuration_errors_exit_2(tmp_path, argv):
    argv = [a.replace("{tmp}", str(tmp_path)) for a in argv]
    assert run(*argv)[0] == 2


def test_aborted_episodes_exit_1(tmp_path):
    empty = tmp_path / "empty.jsonl"
    empty.write_text("")
    code, text = run("tabletop", "run", "--domain", "weight", "--count", "2", "--backend", f"replay:{empty}",
                     "--out", str(tmp_path / "o"))
    assert code == 1 and "aborted" in text


def test_shellgame_run_writes_curve(tmp_path):
    out = tmp_path / "shell"
    code, text = run("shellgame", "run", "--agent", "state", "--episodes", "20", "--demos", "5", "--out", str(out))
    assert code == 0
    assert (out / "curve.csv").read_text() == text
    assert text.splitlines()[1] == "1,1.0000,1.0000,20"
    assert len((out / "results.jsonl").read_text().splitlines()) == 20


def test_shellgame_replay_from_recorded_cache(tmp_path):
    cache = tmp_path / "cache.jsonl"
    first = run("shellgame", "run", "--agent", "vanilla", "--episodes", "10", "--demos", "3",
                "--backend", f"record:{cache}:scripted:noisy:0.3", "--out", str(tmp_path / "a"))
    second = run("shellgame", "run", "--agent", "vanilla", "--episodes", "10", "--demos", "3",
                 "--backend", f"replay:{cache}", "--out", str(tmp_path / "b"))
    assert first == second and first[0] == 0


def test_report_command(tmp_path):
    out = tmp_path / "run"
    run("tabletop", "run", "--domain", "weight", "--count", "2", "--out", str(out))
    code, text = run("report", str(out / "records.jsonl"), "--format", "csv")
    assert code == 0 and text == (out / "report.csv").read_text()


def test_repl_session():
    steps = bundled_episodes("weight")[0].steps
    queries = "".join(f"{s.query}\n" for s in steps[:4])
    code, text = run("repl", "--domain", "weight", "--backend", "scripted:gold", stdin=queries + ":quit\n")
    assert code == 0
    assert text.startswith("# state = {")
    assert text.count("query> ") == 5
    assert steps[3].gold_code.splitlines()[0] in text
    assert "step failed" not in text
    assert text.count("# state = {") == 5


def test_repl_reports_backend_errors():
    code, text = run("repl", "--backend", "scripted:gold", stdin="Dance\n")
    assert code == 0 and "backend error" in text


def test_parse_backend_specs(tmp_path):
    with pytest.raises(ConfigError):
        parse_backend("scripted:gold")
    with pytest.raises(ConfigError):
        parse_backend("replay:")
    with pytest.raises(ConfigError):
        parse_backend("record:only-a-path")
    (tmp_path / "c.jsonl").write_text("")
    assert isinstance(parse_backend(f"replay:{tmp_path / 'c.jsonl'}"), ReplayBackend)
