"""Command-line entry point.

    liquidrank simulate --preset experiment1 --seed 1
    liquidrank rank --transactions tx.jsonl
    liquidrank metrics --run runs/experiment1-seed1
    liquidrank plot --run runs/experiment1-seed1
    liquidrank compare --preset-a experiment2-wta --preset-b experiment2-roulette

Exit codes: 0 success, 2 usage or configuration error, 3 I/O error.
"""
import argparse
import dataclasses
import json
import os
import statistics
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import experiment_io as eio
from .metrics import market_report, significance_test
from .presets import PRESETS, preset
from .reputation import ReputationParams, update_ranks
from .simulator import (STRATEGIES, ConfigError, init_population, make_rngs, replay_ranks,
                        run_simulation)

OUT_ENV = "LIQUIDRANK_OUT"
EXIT_USAGE = 2
EXIT_IO = 3


class UsageError(Exception):
    pass


def _default_out():
    return os.environ.get(OUT_ENV, "runs")


# --------------------------------------------------------------------------
# simulate


def _resolve_config(args):
    if args.config and args.preset:
        raise UsageError("give either --config or --preset, not both")
    if args.config:
        if not Path(args.config).is_file():
            raise UsageError(f"config file {args.config} not found")
        cfg = eio.load_config(args.config)
        market, run_id = cfg.market, cfg.run_id
    else:
        name = args.preset or "experiment1"
        market, run_id = preset(name), None
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.strategy is not None:
        changes["strategy"] = args.strategy
    if args.days is not None:
        changes["n_days"] = args.days
    if changes:
        market = dataclasses.replace(market, **changes)
    if run_id is None or args.seed is not None:
        run_id = f"{args.preset or (run_id or 'run')}-seed{market.seed}"
    if args.strategy is not None:
        run_id += f"-{args.strategy}"
    return market, run_id


def cmd_simulate(args) -> int:
    market, run_id = _resolve_config(args)
    t0 = time.perf_counter()
    result = run_simulation(market)
    run_dir = Path(args.out) / run_id
    eio.write_run(run_dir, result, run_id, out_dir=args.out, plots=not args.no_plots)
    m = result.metrics
    print(f"{run_id}: {len(result.ledger)} transactions in {time.perf_counter() - t0:.1f}s -> {run_dir}")
    print(f"  utility={m.utility:.4f} inequity={m.inequity:.4f} "
          f"pearson_by_good_avg={m.pearson_by_good_avg:.4f} pccw_low={m.pccw_low_weighted:.4f} "
          f"pccw_high={m.pccw_high_weighted:.4f} loss_to_scam={m.loss_to_scam:g}")
    return 0


# --------------------------------------------------------------------------
# rank


def _params_from_args(args) -> ReputationParams:
    return ReputationParams(default_rank=args.default_rank, conservatism=args.conservatism,
                            logarithmic_ratings=not args.linear, decay_value=args.decay_value,
                            normalization=args.normalization)


def cmd_rank(args) -> int:
    params = _params_from_args(args)
    ledger = eio.read_transactions(args.transactions)
    ranks = {}
    if args.prev_ranks:
        ranks = eio.parse_rank_snapshot(eio._read_text(args.prev_ranks), args.prev_ranks)
    if len(ledger):
        first, last = int(ledger.day[0]), int(ledger.day[-1])
        if args.days is not None:
            last = max(last, first + args.days - 1)
        records = list(ledger)
        bounds = np.searchsorted(ledger.day, np.arange(first, last + 2), side="left")
        for k in range(last - first + 1):
            ranks = update_ranks(records[bounds[k]:bounds[k + 1]], ranks, params)
    sys.stdout.write(eio.render_rank_snapshot(ranks) if ranks or args.prev_ranks or len(ledger) else "")
    return 0


# --------------------------------------------------------------------------
# metrics / plot from stored artifacts


def _load_run(run_dir):
    run_dir = Path(run_dir)
    if not run_dir.is_dir():
        raise UsageError(f"run directory {run_dir} does not exist")
    for name in ("config.resolved", "transactions.jsonl"):
        if not (run_dir / name).is_file():
            raise UsageError(f"{run_dir} lacks {name}")
    cfg = eio.load_config(run_dir / "config.resolved")
    market = cfg.market
    agents = init_population(market, make_rngs(market.seed)[0])
    ledger = eio.read_transactions(run_dir / "transactions.jsonl")
    _, prev, known = replay_ranks(ledger, market.n_agents, market.n_days, market.reputation_params)
    final = np.where(known, prev, market.reputation_params.default_rank)
    return cfg, agents, ledger, final


def cmd_metrics(args) -> int:
    cfg, agents, ledger, final = _load_run(args.run)
    report = market_report(ledger, agents, final)
    text = eio.render_metrics([eio.metrics_row(cfg.run_id, cfg.market, report)])
    if args.output:
        eio._write_text(args.output, text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_plot(args) -> int:
    cfg, agents, _, final = _load_run(args.run)
    out = Path(args.output) if args.output else Path(args.run) / "plots"
    paths = eio.write_plots(out, final, agents, cfg.market.n_goods)
    print(f"wrote {len(paths)} plots to {out}")
    return 0


# --------------------------------------------------------------------------
# compare


def _one_run(job):
    name, seed, run_dir, plots = job
    result = run_simulation(preset(name, seed=seed))
    run_id = f"{name}-seed{seed}"
    eio.write_run(run_dir, result, run_id, out_dir=str(Path(run_dir).parent), plots=plots,
                  transactions=False)
    return eio.metrics_row(run_id, result.config, result.metrics)


def run_comparison(preset_a, preset_b, runs, seed_base, out_dir, jobs=1, plots=True):
    """Run ``runs`` seeds of each preset, write the comparison tables and
    return ``(root, rows, verdicts)``."""
    for name in (preset_a, preset_b):
        if name not in PRESETS:
            raise UsageError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    if runs < 2:
        raise UsageError("--runs must be at least 2")
    root = Path(out_dir) / f"compare-{preset_a}-vs-{preset_b}"
    labels = [("a", preset_a), ("b", preset_b)] if preset_a != preset_b else [("a", preset_a)]
    jobs_list = [(name, seed, root / f"{label}-{name}" / f"seed-{seed}", plots)
                 for label, name in labels for seed in range(seed_base, seed_base + runs)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_one_run, jobs_list))
    else:
        rows = [_one_run(j) for j in jobs_list]
    by_preset = {}
    for (name, seed, _, _), row in zip(jobs_list, rows):
        by_preset.setdefault(name, []).append(row)
    rows_a = by_preset[preset_a]
    rows_b = by_preset[preset_b]

    eio.write_metrics(root / "runs.csv", rows)
    summary = ["preset,metric,mean,sd,n"]
    for name in dict.fromkeys([preset_a, preset_b]):
        for metric in eio.METRIC_COLUMNS[4:]:
            vals = [r[metric] for r in by_preset[name]]
            summary.append(f"{name},{metric},{statistics.fmean(vals)!r},{statistics.stdev(vals)!r},{len(vals)}")
    eio._write_text(root / "summary.csv", "\n".join(summary) + "\n")

    verdicts = []
    for metric in ("utility", "inequity"):
        a = [r[metric] for r in rows_a]
        b = [r[metric] for r in rows_b]
        try:
            p, sig = significance_test(a, b)
        except ValueError:
            p, sig = 1.0, False
        verdicts.append({"metric": metric, "mean_a": statistics.fmean(a), "mean_b": statistics.fmean(b),
                         "p_value": p, "significant_99": sig})
    lines = ["metric,preset_a,preset_b,mean_a,mean_b,p_value,significant_99"]
    for v in verdicts:
        lines.append(f"{v['metric']},{preset_a},{preset_b},{v['mean_a']!r},{v['mean_b']!r},"
                     f"{v['p_value']!r},{str(v['significant_99']).lower()}")
    eio._write_text(root / "significance.csv", "\n".join(lines) + "\n")
    return root, rows, verdicts


def cmd_compare(args) -> int:
    t0 = time.perf_counter()
    root, rows, verdicts = run_comparison(args.preset_a, args.preset_b, args.runs, args.seed_base,
                                          args.out, jobs=args.jobs, plots=not args.no_plots)
    print(f"{len(rows)} runs in {time.perf_counter() - t0:.1f}s -> {root}")
    for v in verdicts:
        word = "significant" if v["significant_99"] else "not significant"
        print(f"  {v['metric']}: {args.preset_a} {v['mean_a']:.4f} vs {args.preset_b} "
              f"{v['mean_b']:.4f}, Welch p={v['p_value']:.3g} ({word} at 99%)")
    return 0


# --------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = argparse.ArgumentParser(prog="liquidrank", description=__doc__.split("\n")[0],
                                     formatter_class=fmt)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one market simulation and write its artifacts",
                       formatter_class=fmt)
    p.add_argument("--config", help="experiment config file (JSON)")
    p.add_argument("--preset", choices=sorted(PRESETS), help="built-in experiment (default experiment1)")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--strategy", choices=sorted(STRATEGIES), default=None,
                   help="override the supplier-selection strategy")
    p.add_argument("--days", type=int, default=None, help="override the number of simulated days")
    p.add_argument("--out", default=_default_out(), help=f"output directory (env {OUT_ENV})")
    p.add_argument("--no-plots", action="store_true", help="skip the per-good SVG plots")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("rank", help="compute ranks from a transaction file", formatter_class=fmt)
    p.add_argument("--transactions", required=True, help="JSON Lines transaction file")
    p.add_argument("--prev-ranks", default=None, help="CSV of ranks at the start (agent_id,rank)")
    p.add_argument("--days", type=int, default=None,
                   help="number of days to process from the first transaction day")
    defaults = ReputationParams()
    p.add_argument("--default-rank", type=float, default=defaults.default_rank)
    p.add_argument("--conservatism", type=float, default=defaults.conservatism)
    p.add_argument("--decay-value", type=float, default=defaults.decay_value)
    p.add_argument("--linear", action="store_true", help="use raw values instead of log10(1 + value)")
    p.add_argument("--normalization", choices=["max", "minmax"], default=defaults.normalization)
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("metrics", help="recompute metrics from a stored run", formatter_class=fmt)
    p.add_argument("--run", required=True, help="run directory")
    p.add_argument("--output", default=None, help="write the CSV here instead of stdout")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("plot", help="redraw the per-good plots of a stored run", formatter_class=fmt)
    p.add_argument("--run", required=True, help="run directory")
    p.add_argument("--output", default=None, help="plot directory (default <run>/plots)")
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("compare", help="multi-seed comparison of two presets", formatter_class=fmt)
    p.add_argument("--preset-a", choices=sorted(PRESETS), default="experiment2-wta")
    p.add_argument("--preset-b", choices=sorted(PRESETS), default="experiment2-roulette")
    p.add_argument("--runs", type=int, default=20, help="seeded repetitions per preset")
    p.add_argument("--seed-base", type=int, default=1, help="first seed; runs use consecutive seeds")
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    p.add_argument("--out", default=_default_out(), help=f"output directory (env {OUT_ENV})")
    p.add_argument("--no-plots", action="store_true", help="skip the per-good SVG plots")
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ConfigError, eio.ArtifactFormatError, json.JSONDecodeError,
            KeyError, ValueError, TypeError) as exc:
        print(f"liquidrank {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"liquidrank {args.command}: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
