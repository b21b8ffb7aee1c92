import dataclasses
import re

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from liquidrank import experiment_io as eio
from liquidrank import preset, run_simulation
from liquidrank.ledger import Ledger
from liquidrank.metrics import MetricsReport
from liquidrank.reputation import RatedTransaction, ReputationParams
from liquidrank.simulator import AgentSpec, MarketConfig


@pytest.fixture(scope="module")
def small_run():
    cfg = MarketConfig(n_agents=80, n_goods=4, n_days=15, supplier_share=0.3, scam_supplier_count=2,
                       scam_rater_count=6, price=(5.0, 7.5, 10.0, 12.25), seed=4)
    return run_simulation(cfg)


# ---------------------------------------------------------------- transactions

def test_empty_ledger_writes_empty_file(tmp_path):
    path = tmp_path / "t.jsonl"
    eio.write_transactions(path, Ledger())
    assert path.read_bytes() == b""
    assert len(eio.read_transactions(path)) == 0


def test_single_transaction_round_trip(tmp_path):
    t = RatedTransaction(3, 1, 2, 0, 10.0, 0.123456789012345)
    path = tmp_path / "t.jsonl"
    eio.write_transactions(path, Ledger.from_transactions([t]))
    assert len(path.read_text().splitlines()) == 1
    assert list(eio.read_transactions(path)) == [t]


def test_field_order_is_fixed():
    line = eio.render_transactions(Ledger.from_transactions([RatedTransaction(0, 1, 2, 0, 1.5, 0.5)]))
    assert re.findall(r'"(\w+)":', line) == ["day", "rater", "ratee", "good", "value", "rating",
                                             "rater_honest", "ratee_honest"]


def test_honesty_flags_written(small_run, tmp_path):
    honest = np.array([a.honest for a in small_run.agents])
    text = eio.render_transactions(small_run.ledger, honest)
    assert '"rater_honest": false, "ratee_honest": false' in text
    assert '"rater_honest": true' in text


def test_run_transactions_round_trip_and_determinism(small_run, tmp_path):
    honest = np.array([a.honest for a in small_run.agents])
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    eio.write_transactions(a, small_run.ledger, honest)
    eio.write_transactions(b, run_simulation(small_run.config).ledger, honest)
    assert a.read_bytes() == b.read_bytes()
    back = eio.read_transactions(a)
    for col in ("day", "rater", "ratee", "good", "value", "rating"):
        assert np.array_equal(getattr(back, col), getattr(small_run.ledger, col))


def test_large_run_written_twice_is_identical(tmp_path):
    result = run_simulation(dataclasses.replace(preset("experiment1", seed=1), n_days=20))
    assert len(result.ledger) >= 10_000
    honest = np.array([a.honest for a in result.agents])
    eio.write_transactions(tmp_path / "a.jsonl", result.ledger, honest)
    eio.write_transactions(tmp_path / "b.jsonl", result.ledger, honest)
    assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()


@pytest.mark.parametrize("line", ['{"day": 0}', "not json", '{"day": 0, "rater": 1, "ratee": 1, '
                                  '"good": 0, "value": 1.0, "rating": 0.5}',
                                  '{"day": 0, "rater": 1, "ratee": 2, "good": 0, "value": 1.0, "rating": 2}'])
def test_malformed_transactions_name_the_line(line):
    good = '{"day": 0, "rater": 1, "ratee": 2, "good": 0, "value": 1.0, "rating": 0.5}'
    with pytest.raises(eio.ArtifactFormatError, match=r"f\.jsonl:2"):
        eio.parse_transactions(good + "\n" + line + "\n", "f.jsonl")


def test_missing_file_is_an_artifact_error(tmp_path):
    with pytest.raises(eio.ArtifactError, match="nope"):
        eio.read_transactions(tmp_path / "nope.jsonl")


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 5), st.integers(0, 50), st.integers(51, 99), st.integers(0, 9),
                          st.floats(1e-6, 1e6), st.floats(0, 1)), max_size=20))
def test_transactions_round_trip_losslessly(rows):
    rows.sort(key=lambda r: r[0])
    ledger = Ledger.from_transactions([RatedTransaction(*r) for r in rows])
    assert list(eio.parse_transactions(eio.render_transactions(ledger))) == list(ledger)


# ---------------------------------------------------------------- ranks

def test_empty_rank_history_is_header_only(tmp_path):
    path = tmp_path / "r.csv"
    eio.write_rank_history(path, [])
    assert path.read_text() == "day,agent_id,rank\n"
    assert eio.read_rank_history(path) == []


@settings(max_examples=100, deadline=None)
@given(st.lists(st.dictionaries(st.integers(0, 30), st.floats(0, 1), min_size=1), max_size=5))
def test_rank_history_round_trip(history):
    back = eio.parse_rank_history(eio.render_rank_history(history))
    assert len(back) == len(history)
    for a, b in zip(history, back):
        assert a.keys() == b.keys()
        assert all(abs(a[k] - b[k]) <= 1e-9 for k in a)


def test_rank_history_written_twice_is_identical(small_run, tmp_path):
    eio.write_rank_history(tmp_path / "a.csv", small_run.rank_history)
    eio.write_rank_history(tmp_path / "b.csv", run_simulation(small_run.config).rank_history)
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_rank_snapshot_formats():
    assert eio.parse_rank_snapshot("agent_id,rank\n3,0.5\n") == {3: 0.5}
    assert eio.parse_rank_snapshot("day,agent_id,rank\n0,3,0.5\n1,3,0.25\n") == {3: 0.25}
    with pytest.raises(eio.ArtifactFormatError):
        eio.parse_rank_snapshot("who,what\n")


# ---------------------------------------------------------------- metrics

REPORT = MetricsReport(utility=0.5, inequity=0.25, pccw_overall=0.9, pccw_low_weighted=0.8,
                       pccw_high_weighted=0.85, pearson_by_good_avg=0.95, loss_to_scam=120.0)


def test_metrics_header_only(tmp_path):
    eio.write_metrics(tmp_path / "m.csv", [])
    assert (tmp_path / "m.csv").read_text().splitlines() == [",".join(eio.METRIC_COLUMNS)]
    assert eio.read_metrics(tmp_path / "m.csv") == []


def test_metrics_one_row_per_run(tmp_path):
    rows = [eio.metrics_row(f"r{s}", MarketConfig(seed=s), REPORT) for s in range(3)]
    eio.write_metrics(tmp_path / "m.csv", rows)
    lines = (tmp_path / "m.csv").read_text().splitlines()
    assert len(eio.METRIC_COLUMNS) == 11
    assert len(lines) == 4 and all(len(l.split(",")) == 11 for l in lines)
    back = eio.read_metrics(tmp_path / "m.csv")
    assert [r["seed"] for r in back] == [0, 1, 2]
    assert back[0]["pccw_low"] == 0.8 and back[0]["strategy"] == "roulette"


# ---------------------------------------------------------------- configs

def test_config_round_trip():
    market = MarketConfig(n_agents=100, price=(1.0,) * 10, strategy="winner_take_all",
                          reputation_params=ReputationParams(conservatism=0.7), seed=9)
    cfg = eio.ExperimentConfigFile(market, run_id="x", repetitions=3, out_dir="o")
    assert eio.parse_config(eio.render_config(cfg)) == cfg


def test_bare_market_config_and_unknown_keys():
    assert eio.parse_config('{"n_agents": 100}').market.n_agents == 100
    with pytest.raises(ValueError):
        eio.parse_config('{"n_agentz": 50}')
    with pytest.raises(ValueError):
        eio.parse_config('{"market": {"reputation_params": {"speed": 1}}}')


# ---------------------------------------------------------------- plots

def test_single_supplier_sits_top_right():
    agents = [AgentSpec(0, True, False), AgentSpec(1, False, True, quality={0: 1.0})]
    svg = eio.plot_reputation_vs_quality(np.array([0.0, 1.0]), agents, 0)
    m = re.search(r'<circle [^>]*cx="([\d.]+)" cy="([\d.]+)"', svg)
    x0, y0, w, h = map(float, re.search(r'<rect x="(\d+)" y="(\d+)" width="(\d+)" height="(\d+)" fill="none"',
                                        svg).groups())
    assert (float(m.group(1)), float(m.group(2))) == (x0 + w, y0)
    assert svg.startswith("<svg") and svg.rstrip().endswith("</svg>")


def test_plot_is_deterministic_and_marks_scams(small_run):
    a = eio.plot_reputation_vs_quality(small_run.final_ranks, small_run.agents, 0)
    b = eio.plot_reputation_vs_quality(small_run.final_ranks, small_run.agents, 0)
    assert a == b
    n_sup = sum(0 in ag.quality for ag in small_run.agents)
    assert a.count("<circle") + a.count('class="scam"') == n_sup
    assert 'class="scam"' in a and "Pearson" in a


def test_plot_without_suppliers():
    with pytest.raises(ValueError):
        eio.plot_reputation_vs_quality(np.zeros(2), [AgentSpec(0, True, False)], 0)


def test_experiment1_run_writes_ten_plots(tmp_path):
    result = run_simulation(dataclasses.replace(preset("experiment1", seed=1), n_days=5))
    run_dir = eio.write_run(tmp_path / "run", result, "run")
    assert sorted(p.name for p in (run_dir / "plots").iterdir()) == [f"good_{g}.svg" for g in range(10)]
    assert {p.name for p in run_dir.iterdir()} == {"config.resolved", "transactions.jsonl", "ranks.csv",
                                                   "agents.csv", "metrics.csv", "plots"}
    assert eio.load_config(run_dir / "config.resolved").market == result.config
