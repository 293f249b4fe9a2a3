"""Benchmark: compiled vs pure-Python forward-replay kernel.

Usage:
    python benchmarks/bench_forward.py [--radius 20] [--burnin 50] [--reps 20]

Runs identical event workloads through both kernel backends on each builtin
model family and reports events/second plus the speedup ratio.  The two
backends are also checked for exact agreement on every workload.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from latticecftp import _fwd_py
from latticecftp.models import (independent_sites, noisy_voter,
                                asymmetric_polling, rn_ypr)
from latticecftp.oracle import ForwardPlan

try:
    from latticecftp import _fwdkernel
except ImportError:
    _fwdkernel = None


MODELS = {
    "independent": lambda: independent_sites({"A": 2.0, "B": 1.0}),
    "noisy_voter": lambda: noisy_voter({1: 0.5, -1: 0.5},
                                       {"+": 0.5, "-": 0.5}),
    "polling": lambda: asymmetric_polling([[-1, 0, 1]], [1.0], 0.5, 0.5),
    "rnypr": lambda: rn_ypr(rate_overrides={"right:C,G->T": 2.0,
                                            "left:C,G->A": 2.0}),
}


def workload(model, radius, burnin, seed):
    plan = ForwardPlan(model, radius)
    rng = np.random.default_rng(seed)
    n_events = int(plan.site_rate * len(plan.box_sites) * burnin)
    state = rng.integers(0, len(model.states), plan.n_cells).astype(np.int8)
    sites = plan.interior_flat[rng.integers(0, len(plan.box_sites), n_events)]
    rules = np.searchsorted(plan.cum, rng.random(n_events),
                            side="right").astype(np.int64)
    return plan, state, sites, rules


def run(kernel, plan, state, sites, rules, reps):
    best = float("inf")
    out = None
    for _ in range(reps):
        s = state.copy()
        t0 = time.perf_counter()
        kernel(s, sites, rules, plan.nb_offsets, plan.nb_weights,
               plan.nb_counts, plan.tables, plan.table_starts)
        best = min(best, time.perf_counter() - t0)
        out = s
    return best, out


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--radius", type=int, default=20)
    parser.add_argument("--burnin", type=float, default=50.0)
    parser.add_argument("--reps", type=int, default=10)
    args = parser.parse_args()

    print(f"{'model':<14} {'events':>9} {'python ev/s':>12} "
          f"{'cython ev/s':>12} {'speedup':>8}")
    for name, builder in MODELS.items():
        model = builder()
        plan, state, sites, rules = workload(model, args.radius, args.burnin,
                                             seed=1234)
        n = len(sites)
        t_py, out_py = run(_fwd_py.apply_events, plan, state, sites, rules,
                           max(1, args.reps // 5))
        if _fwdkernel is None:
            print(f"{name:<14} {n:>9} {n / t_py:>12.3g} "
                  f"{'n/a':>12} {'n/a':>8}")
            continue
        t_cy, out_cy = run(_fwdkernel.apply_events, plan, state, sites, rules,
                           args.reps)
        assert np.array_equal(out_py, out_cy), f"{name}: backends disagree"
        print(f"{name:<14} {n:>9} {n / t_py:>12.3g} "
              f"{n / t_cy:>12.3g} {t_py / t_cy:>8.1f}")


if __name__ == "__main__":
    main()
