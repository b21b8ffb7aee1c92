"""Compare the numba and numpy backends.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--preset experiment2-roulette]

Kernel timings use one batch shaped like a busy market day.  Full-run
timings launch a fresh interpreter per backend with LIQUIDRANK_BACKEND set,
so import and JIT cost are included once and then excluded via a warm-up run.
"""
import argparse
import json
import os
import subprocess
import sys
import timeit

import numpy as np

from liquidrank import _kernels as k

FULL_RUN = """
import json, time, sys
from liquidrank import preset, run_simulation, BACKEND
cfg = preset(sys.argv[1], seed=1)
run_simulation(cfg)
times = []
for _ in range(int(sys.argv[2])):
    t0 = time.perf_counter()
    run_simulation(cfg)
    times.append(time.perf_counter() - t0)
print(json.dumps({"backend": BACKEND, "best": min(times)}))
"""


def day_batch(seed=0, n_agents=1000, n_goods=10, n_req=3000):
    rng = np.random.default_rng(seed)
    owner = rng.integers(0, n_goods, n_agents)
    per_good = [np.flatnonzero(owner == g) for g in range(n_goods)]
    ptr = np.zeros(n_goods + 1, dtype=np.int64)
    ptr[1:] = np.cumsum([p.size for p in per_good])
    ids = np.concatenate(per_good).astype(np.int64)
    return dict(cand_ptr=ptr, cand_ids=ids, ranks=rng.random(n_agents),
                req_good=rng.integers(0, n_goods, n_req).astype(np.int64),
                req_self=rng.integers(0, n_agents, n_req).astype(np.int64),
                req_row=np.arange(n_req, dtype=np.int64), u=rng.random(n_req), threshold=0.3,
                avoid=rng.random((n_req, n_agents)) < 0.05)


def bench_kernels(repeat):
    batch = day_batch()
    idx = np.random.default_rng(1).integers(0, 1000, 20_000)
    vals = np.random.default_rng(2).random(20_000)
    names = {k.WTA: "winner_take_all", k.ROULETTE: "roulette", k.THRESHOLDED: "thresholded_random",
             k.RANDOM: "none"}
    print(f"{'kernel':<34}{'numpy ms':>10}{'numba ms':>10}{'speedup':>9}")
    for code, name in names.items():
        fns = [k.select_batch_numpy] + ([k.select_batch_numba] if k.HAVE_NUMBA else [])
        ms = [min(timeit.repeat(lambda f=f: f(code, **batch), number=10, repeat=repeat)) * 100 for f in fns]
        _row(f"select_batch[{name}]", ms)
    fns = [k.scatter_add_numpy] + ([k.scatter_add_numba] if k.HAVE_NUMBA else [])
    _row("scatter_add", [min(timeit.repeat(lambda f=f: f(idx, vals, 1000), number=100, repeat=repeat)) * 10
                         for f in fns])


def _row(label, ms):
    if len(ms) == 2:
        print(f"{label:<34}{ms[0]:>10.3f}{ms[1]:>10.3f}{ms[0] / ms[1]:>8.1f}x")
    else:
        print(f"{label:<34}{ms[0]:>10.3f}{'n/a':>10}")


def bench_full_runs(preset, repeat):
    print(f"\nfull {preset} run, best of {repeat}:")
    for backend in ("numpy", "numba"):
        env = dict(os.environ, LIQUIDRANK_BACKEND=backend)
        out = subprocess.run([sys.executable, "-c", FULL_RUN, preset, str(repeat)], env=env,
                             capture_output=True, text=True)
        if out.returncode:
            print(f"  {backend}: unavailable ({out.stderr.strip().splitlines()[-1]})")
            continue
        res = json.loads(out.stdout)
        print(f"  {res['backend']:<6} {res['best']:.3f}s")


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--preset", default="experiment2-roulette")
    args = ap.parse_args()
    if k.HAVE_NUMBA:
        k.select_batch_numba(0, **day_batch(n_req=10))  # compile outside the timings
        k.scatter_add_numba(np.zeros(1, np.int64), np.zeros(1), 1)
    bench_kernels(args.repeat)
    bench_full_runs(args.preset, args.repeat)


if __name__ == "__main__":
    main()
