"""Run artifacts on disk.

Layout of one run directory::

    <out_dir>/<run_id>/
        config.resolved      fully-defaulted experiment config (JSON)
        transactions.jsonl   one purchase per line
        ranks.csv            day,agent_id,rank for every ranked agent and day
        agents.csv           roles and per-good qualities
        metrics.csv          one row of market metrics
        plots/good_<k>.svg   reputation vs quality, one file per good

Every writer is deterministic: same inputs, same bytes.
"""
import csv
import dataclasses
import io
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence

import numpy as np

from .ledger import Ledger
from .metrics import MetricsReport, UndefinedCorrelation, WeightedSample, weighted_pearson
from .reputation import RankMap, ReputationParams
from .simulator import AgentSpec, MarketConfig

METRIC_COLUMNS = ("run_id", "seed", "strategy", "overlap", "utility", "inequity", "pccw_overall",
                  "pccw_low", "pccw_high", "pearson_by_good_avg", "loss_to_scam")


class ArtifactError(OSError):
    """An artifact could not be read or written; the message names the path."""


class ArtifactFormatError(ValueError):
    """An artifact exists but its content is malformed."""


# --------------------------------------------------------------------------
# experiment config files


@dataclass(frozen=True)
class ExperimentConfigFile:
    market: MarketConfig
    run_id: str = "run"
    repetitions: int = 1
    out_dir: str = "runs"


def market_to_dict(config: MarketConfig) -> dict:
    d = dataclasses.asdict(config)
    if isinstance(config.price, tuple):
        d["price"] = list(config.price)
    return d


def market_from_dict(d: Mapping) -> MarketConfig:
    d = dict(d)
    known = {f.name for f in dataclasses.fields(MarketConfig)}
    unknown = set(d) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    rp = d.get("reputation_params")
    if isinstance(rp, Mapping):
        rp_known = {f.name for f in dataclasses.fields(ReputationParams)}
        if set(rp) - rp_known:
            raise ValueError(f"unknown reputation_params keys: {sorted(set(rp) - rp_known)}")
        d["reputation_params"] = ReputationParams(**rp)
    return MarketConfig(**d)


def render_config(cfg: ExperimentConfigFile) -> str:
    doc = {"run_id": cfg.run_id, "repetitions": cfg.repetitions, "out_dir": cfg.out_dir,
           "market": market_to_dict(cfg.market)}
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def parse_config(text: str) -> ExperimentConfigFile:
    """Parse a config document.  Missing keys take their defaults; a bare
    market mapping without the ``market`` wrapper is accepted too."""
    doc = json.loads(text)
    if not isinstance(doc, dict):
        raise ValueError("config must be a JSON object")
    if "market" not in doc:
        doc = {"market": doc}
    extra = set(doc) - {"market", "run_id", "repetitions", "out_dir"}
    if extra:
        raise ValueError(f"unknown config keys: {sorted(extra)}")
    return ExperimentConfigFile(
        market=market_from_dict(doc["market"]),
        run_id=str(doc.get("run_id", "run")),
        repetitions=int(doc.get("repetitions", 1)),
        out_dir=str(doc.get("out_dir", "runs")),
    )


def load_config(path) -> ExperimentConfigFile:
    return parse_config(_read_text(path))


# --------------------------------------------------------------------------
# low-level helpers


def _read_text(path) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise ArtifactError(f"cannot read {path}: {exc.strerror or exc}") from exc


def _write_text(path, text: str):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise ArtifactError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return path


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _json_bool(b) -> str:
    return "true" if b else "false"


# --------------------------------------------------------------------------
# transactions


def render_transactions(ledger: Ledger, honest: Optional[np.ndarray] = None) -> str:
    if honest is None:
        honest = np.ones(int(max(ledger.rater.max(initial=-1), ledger.ratee.max(initial=-1))) + 1, bool)
    out = io.StringIO()
    for d, a, b, g, v, r in zip(ledger.day.tolist(), ledger.rater.tolist(), ledger.ratee.tolist(),
                                ledger.good.tolist(), ledger.value.tolist(), ledger.rating.tolist()):
        out.write(f'{{"day": {d}, "rater": {a}, "ratee": {b}, "good": {g}, "value": {v!r}, '
                  f'"rating": {r!r}, "rater_honest": {_json_bool(honest[a])}, '
                  f'"ratee_honest": {_json_bool(honest[b])}}}\n')
    return out.getvalue()


def write_transactions(path, ledger: Ledger, honest: Optional[np.ndarray] = None):
    return _write_text(path, render_transactions(ledger, honest))


def parse_transactions(text: str, source: str = "<transactions>") -> Ledger:
    cols = {k: [] for k in ("day", "rater", "ratee", "good", "value", "rating")}
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            vals = {k: rec[k] for k in cols}
            for k in ("day", "rater", "ratee", "good"):
                if isinstance(vals[k], bool) or not isinstance(vals[k], int):
                    raise TypeError(f"{k} must be an integer")
            for k in ("value", "rating"):
                if isinstance(vals[k], bool) or not isinstance(vals[k], (int, float)):
                    raise TypeError(f"{k} must be a number")
            if not vals["value"] > 0 or not 0.0 <= vals["rating"] <= 1.0:
                raise ValueError("value must be > 0 and rating in [0, 1]")
            if vals["rater"] == vals["ratee"] or vals["day"] < 0:
                raise ValueError("rater equals ratee or negative day")
        except (ValueError, KeyError, TypeError) as exc:
            raise ArtifactFormatError(f"{source}:{lineno}: malformed transaction ({exc})") from None
        for k in cols:
            cols[k].append(vals[k])
    ledger = Ledger(**cols)
    if len(ledger) and np.any(np.diff(ledger.day) < 0):
        raise ArtifactFormatError(f"{source}: transactions are not ordered by day")
    return ledger


def read_transactions(path) -> Ledger:
    return parse_transactions(_read_text(path), str(path))


# --------------------------------------------------------------------------
# rank history


def render_rank_history(history: Sequence[RankMap]) -> str:
    lines = ["day,agent_id,rank"]
    for day, ranks in enumerate(history):
        for agent in sorted(ranks):
            lines.append(f"{day},{agent},{ranks[agent]:.9f}")
    return "\n".join(lines) + "\n"


def write_rank_history(path, history: Sequence[RankMap]):
    return _write_text(path, render_rank_history(history))


def parse_rank_history(text: str, source: str = "<ranks>") -> List[RankMap]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header != ["day", "agent_id", "rank"]:
        raise ArtifactFormatError(f"{source}:1: expected header day,agent_id,rank")
    history: List[RankMap] = []
    for lineno, row in enumerate(reader, 2):
        try:
            day, agent, rank = int(row[0]), int(row[1]), float(row[2])
        except (ValueError, IndexError):
            raise ArtifactFormatError(f"{source}:{lineno}: malformed rank row") from None
        while len(history) <= day:
            history.append({})
        history[day][agent] = rank
    return history


def read_rank_history(path) -> List[RankMap]:
    return parse_rank_history(_read_text(path), str(path))


def parse_rank_snapshot(text: str, source: str = "<ranks>") -> RankMap:
    """Ranks from either ``agent_id,rank`` or a full ``day,agent_id,rank``
    history (the last day is used)."""
    first = text.split("\n", 1)[0].strip()
    if first == "day,agent_id,rank":
        history = parse_rank_history(text, source)
        return dict(history[-1]) if history else {}
    if first != "agent_id,rank":
        raise ArtifactFormatError(f"{source}:1: expected header agent_id,rank")
    ranks = {}
    for lineno, row in enumerate(csv.reader(io.StringIO(text)), 1):
        if lineno == 1 or not row:
            continue
        try:
            ranks[int(row[0])] = float(row[1])
        except (ValueError, IndexError):
            raise ArtifactFormatError(f"{source}:{lineno}: malformed rank row") from None
    return ranks


def render_rank_snapshot(ranks: RankMap) -> str:
    return "agent_id,rank\n" + "".join(f"{a},{ranks[a]:.9f}\n" for a in sorted(ranks))


# --------------------------------------------------------------------------
# agents


def render_agents(agents: Sequence[AgentSpec]) -> str:
    lines = ["agent_id,consumer,supplier,honest,good,quality"]
    for a in agents:
        flags = f"{a.id},{int(a.is_consumer)},{int(a.is_supplier)},{int(a.honest)}"
        if a.quality:
            lines.extend(f"{flags},{g},{q!r}" for g, q in sorted(a.quality.items()))
        else:
            lines.append(f"{flags},,")
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# metrics


def metrics_row(run_id: str, config: MarketConfig, report: MetricsReport) -> Dict[str, object]:
    return {
        "run_id": run_id, "seed": config.seed, "strategy": config.strategy,
        "overlap": config.overlap_fraction, "utility": report.utility,
        "inequity": report.inequity, "pccw_overall": report.pccw_overall,
        "pccw_low": report.pccw_low_weighted, "pccw_high": report.pccw_high_weighted,
        "pearson_by_good_avg": report.pearson_by_good_avg, "loss_to_scam": report.loss_to_scam,
    }


def render_metrics(rows: Iterable[Mapping[str, object]]) -> str:
    lines = [",".join(METRIC_COLUMNS)]
    for row in rows:
        lines.append(",".join(_fmt(row[c]) for c in METRIC_COLUMNS))
    return "\n".join(lines) + "\n"


def write_metrics(path, rows: Iterable[Mapping[str, object]]):
    return _write_text(path, render_metrics(rows))


def read_metrics(path) -> List[Dict[str, object]]:
    rows = []
    for rec in csv.DictReader(io.StringIO(_read_text(path))):
        row = dict(rec)
        for k in METRIC_COLUMNS[4:] + ("overlap",):
            row[k] = float(row[k])
        row["seed"] = int(row["seed"])
        rows.append(row)
    return rows


# --------------------------------------------------------------------------
# plots

_W, _H, _PAD = 360, 360, 48


def plot_reputation_vs_quality(final_ranks, agents: Sequence[AgentSpec], good: int) -> str:
    """SVG scatter of reputation (x) against true quality (y) for the
    suppliers of one good.  Scam suppliers are drawn as red crosses."""
    points = [(float(final_ranks[a.id]), a.quality[good], a.honest, a.id)
              for a in agents if good in a.quality]
    if not points:
        raise ValueError(f"no suppliers of good {good} to plot")
    title = f"good {good}"
    if len(points) >= 2:
        try:
            r = weighted_pearson(WeightedSample([p[0] for p in points], [p[1] for p in points]))
            title += f": Pearson {r:.3f}"
        except UndefinedCorrelation:
            pass
    span_x, span_y = _W - 2 * _PAD, _H - 2 * _PAD

    def sx(v):
        return _PAD + v * span_x

    def sy(v):
        return _H - _PAD - v * span_y

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}" font-family="sans-serif" font-size="11">',
        f'<title>{title}</title>',
        f'<rect x="0" y="0" width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_W / 2:.1f}" y="20" text-anchor="middle" font-size="13">{title}</text>',
        f'<rect x="{_PAD}" y="{_PAD}" width="{span_x}" height="{span_y}" fill="none" stroke="black"/>',
    ]
    for t in (0.0, 0.25, 0.5, 0.75, 1.0):
        out.append(f'<text x="{sx(t):.1f}" y="{_H - _PAD + 14}" text-anchor="middle">{t:g}</text>')
        out.append(f'<text x="{_PAD - 6}" y="{sy(t) + 4:.1f}" text-anchor="end">{t:g}</text>')
    out.append(f'<text x="{_W / 2:.1f}" y="{_H - 10}" text-anchor="middle">reputation</text>')
    out.append(f'<text x="14" y="{_H / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 14 {_H / 2:.1f})">quality</text>')
    for x, y, honest, agent in sorted(points, key=lambda p: p[3]):
        cx, cy = sx(x), sy(y)
        if honest:
            out.append(f'<circle class="honest" data-agent="{agent}" cx="{cx:.2f}" cy="{cy:.2f}" '
                       f'r="3.5" fill="steelblue" fill-opacity="0.8"/>')
        else:
            out.append(f'<path class="scam" data-agent="{agent}" d="M{cx - 4:.2f},{cy - 4:.2f} '
                       f'L{cx + 4:.2f},{cy + 4:.2f} M{cx - 4:.2f},{cy + 4:.2f} L{cx + 4:.2f},{cy - 4:.2f}" '
                       f'stroke="crimson" stroke-width="2"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_plots(plot_dir, final_ranks, agents: Sequence[AgentSpec], n_goods: int) -> List[Path]:
    paths = []
    for g in range(n_goods):
        if any(g in a.quality for a in agents):
            paths.append(_write_text(Path(plot_dir) / f"good_{g}.svg",
                                     plot_reputation_vs_quality(final_ranks, agents, g)))
    return paths


# --------------------------------------------------------------------------
# whole run


def write_run(run_dir, result, run_id: str, out_dir: str = "runs", plots: bool = True,
              transactions: bool = True) -> Path:
    """Write every artifact of a finished ``SimulationResult``."""
    run_dir = Path(run_dir)
    honest = np.array([a.honest for a in result.agents], dtype=bool)
    _write_text(run_dir / "config.resolved",
                render_config(ExperimentConfigFile(result.config, run_id=run_id, out_dir=out_dir)))
    if transactions:
        write_transactions(run_dir / "transactions.jsonl", result.ledger, honest)
        write_rank_history(run_dir / "ranks.csv", result.rank_history)
        _write_text(run_dir / "agents.csv", render_agents(result.agents))
    write_metrics(run_dir / "metrics.csv", [metrics_row(run_id, result.config, result.metrics)])
    if plots:
        write_plots(run_dir / "plots", result.final_ranks, result.agents, result.config.n_goods)
    return run_dir
