import json
import subprocess
import sys

import pytest

from liquidrank import cli
from liquidrank import experiment_io as eio

FAST = ["--preset", "experiment1", "--days", "4"]


def snapshot(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


@pytest.fixture(scope="module")
def stored_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("runs")
    assert cli.main(["simulate", *FAST, "--seed", "1", "--out", str(out)]) == 0
    return out / "experiment1-seed1"


def write_jsonl(path, records):
    path.write_text("".join(json.dumps(r) + "\n" for r in records))
    return str(path)


# ---------------------------------------------------------------- simulate

def test_simulate_writes_artifacts(stored_run):
    names = {p.name for p in stored_run.iterdir()}
    assert {"config.resolved", "transactions.jsonl", "ranks.csv", "metrics.csv", "plots"} <= names
    assert len(list((stored_run / "plots").glob("good_*.svg"))) == 10


def test_simulate_is_byte_identical_on_rerun(stored_run, tmp_path):
    before = snapshot(stored_run)
    assert cli.main(["simulate", *FAST, "--seed", "1", "--out", str(stored_run.parent)]) == 0
    assert snapshot(stored_run) == before
    assert cli.main(["simulate", *FAST, "--seed", "1", "--out", str(tmp_path)]) == 0
    # config.resolved echoes --out; everything else is independent of it
    elsewhere = snapshot(tmp_path / "experiment1-seed1")
    assert elsewhere.pop("config.resolved") != before.pop("config.resolved")
    assert elsewhere == before


def test_simulate_from_config_file(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"run_id": "tiny", "market": {"n_agents": 100, "n_days": 3}}))
    assert cli.main(["simulate", "--config", str(cfg), "--out", str(tmp_path), "--no-plots"]) == 0
    assert (tmp_path / "tiny" / "metrics.csv").is_file()
    assert not (tmp_path / "tiny" / "plots").exists()


@pytest.mark.parametrize("content", [None, "{not json", '{"n_agents": 1}', '{"colour": "red"}'])
def test_simulate_bad_config_exits_2(tmp_path, content):
    cfg = tmp_path / "c.json"
    if content is not None:
        cfg.write_text(content)
    assert cli.main(["simulate", "--config", str(cfg), "--out", str(tmp_path)]) == 2


def test_simulate_io_failure_exits_3(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert cli.main(["simulate", *FAST, "--out", str(blocker / "sub")]) == 3


def test_unknown_flag_exits_2(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["simulate", "--sed", "3"])
    assert exc.value.code == 2


@pytest.mark.parametrize("command", ["simulate", "rank", "metrics", "plot", "compare"])
def test_help_lists_every_flag_with_default(command, capsys):
    parser = cli.build_parser()
    sub = parser._subparsers._group_actions[0].choices[command]
    with pytest.raises(SystemExit):
        cli.main([command, "--help"])
    text = capsys.readouterr().out
    for action in sub._actions:
        for flag in action.option_strings:
            assert flag in text
        if action.option_strings and action.dest != "help" and action.default is not None \
                and action.default is not False and not action.required:
            assert "default:" in text


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "liquidrank", "--help"], capture_output=True, text=True)
    assert out.returncode == 0 and "compare" in out.stdout


# ---------------------------------------------------------------- rank

def test_rank_empty_file(tmp_path, capsys):
    path = tmp_path / "t.jsonl"
    path.write_text("")
    assert cli.main(["rank", "--transactions", str(path)]) == 0
    assert capsys.readouterr().out == ""


def test_rank_matches_hand_example(tmp_path, capsys):
    path = write_jsonl(tmp_path / "t.jsonl", [
        {"day": 0, "rater": 1, "ratee": 100, "good": 0, "value": 10.0, "rating": 1.0},
        {"day": 0, "rater": 2, "ratee": 200, "good": 0, "value": 10.0, "rating": 0.5}])
    argv = ["rank", "--transactions", path, "--linear", "--conservatism", "0.5", "--decay-value", "0"]
    assert cli.main(argv) == 0
    first = capsys.readouterr().out
    assert first == "agent_id,rank\n100,1.000000000\n200,0.666666667\n"
    assert cli.main(argv) == 0
    assert capsys.readouterr().out == first


def test_rank_uses_previous_ranks_and_days(tmp_path, capsys):
    path = write_jsonl(tmp_path / "t.jsonl", [
        {"day": 0, "rater": 1, "ratee": 100, "good": 0, "value": 10.0, "rating": 1.0}])
    prev = tmp_path / "p.csv"
    prev.write_text("agent_id,rank\n200,1.0\n")
    assert cli.main(["rank", "--transactions", path, "--prev-ranks", str(prev), "--linear",
                     "--conservatism", "0.5", "--decay-value", "0", "--days", "2"]) == 0
    # day 0: 100 -> 0.5*0.5+0.5 = 0.75, 200 -> 0.5 => (1, 2/3); day 1 both decay by half
    assert capsys.readouterr().out == "agent_id,rank\n100,1.000000000\n200,0.666666667\n"


def test_rank_malformed_record_names_line(tmp_path, capsys):
    path = tmp_path / "t.jsonl"
    path.write_text('{"day": 0, "rater": 1, "ratee": 2, "good": 0, "value": 1.0, "rating": 0.5}\n{oops\n')
    assert cli.main(["rank", "--transactions", str(path)]) == 2
    assert ":2:" in capsys.readouterr().err


def test_rank_missing_file_exits_3(tmp_path):
    assert cli.main(["rank", "--transactions", str(tmp_path / "none.jsonl")]) == 3


# ---------------------------------------------------------------- metrics / plot

def test_metrics_recompute_is_byte_identical(stored_run, tmp_path, capsys):
    assert cli.main(["metrics", "--run", str(stored_run)]) == 0
    assert capsys.readouterr().out.encode() == (stored_run / "metrics.csv").read_bytes()
    out = tmp_path / "m.csv"
    assert cli.main(["metrics", "--run", str(stored_run), "--output", str(out)]) == 0
    assert out.read_bytes() == (stored_run / "metrics.csv").read_bytes()


def test_plot_recompute_is_byte_identical(stored_run, tmp_path):
    assert cli.main(["plot", "--run", str(stored_run), "--output", str(tmp_path / "p")]) == 0
    redrawn = snapshot(tmp_path / "p")
    assert len(redrawn) == 10
    assert redrawn == snapshot(stored_run / "plots")


@pytest.mark.parametrize("command", ["metrics", "plot"])
def test_missing_run_dir_exits_2(command, tmp_path):
    assert cli.main([command, "--run", str(tmp_path / "missing")]) == 2
    assert cli.main([command, "--run", str(tmp_path)]) == 2


# ---------------------------------------------------------------- compare

def test_compare_needs_two_runs(tmp_path):
    assert cli.main(["compare", "--runs", "1", "--out", str(tmp_path)]) == 2


def test_compare_identical_presets_not_significant(tmp_path, monkeypatch):
    import dataclasses
    from liquidrank import presets

    small = {name: dataclasses.replace(cfg, n_agents=150, n_days=10, scam_rater_count=10)
             for name, cfg in presets.PRESETS.items()}
    monkeypatch.setattr(presets, "PRESETS", small)
    root, rows, verdicts = cli.run_comparison("experiment2-wta", "experiment2-wta", 3, 1, tmp_path,
                                              plots=False)
    assert len(rows) == 3
    assert all(v["p_value"] > 0.99 and not v["significant_99"] for v in verdicts)
    assert {p.name for p in root.iterdir()} >= {"runs.csv", "summary.csv", "significance.csv"}
    sig = (root / "significance.csv").read_text().splitlines()
    assert sig[0] == "metric,preset_a,preset_b,mean_a,mean_b,p_value,significant_99"
    assert all(line.endswith(",false") for line in sig[1:])
    assert len(eio.read_metrics(root / "runs.csv")) == 3
