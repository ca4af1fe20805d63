"""Worst-case regret bound on random Bernoulli instances (reduced scale).

The full check uses T=5000 and 50 seeds per instance; this demo uses a
smaller batch and writes traces, summaries and plot data to ``demo_out/``.
"""
# %%
from pathlib import Path

from oids import AlgorithmSpec, make_random_bernoulli
from oids.harness import BatchConfig, read_curves, run_batch, write_csv, write_summary

out = Path("demo_out/bound_suite")
env = make_random_bernoulli(5, 20, seed=0)
for kind in ("voids", "roids", "uniform"):
    report, traces = run_batch(BatchConfig(env, AlgorithmSpec(kind), T=1000, reps=10, base_seed=1,
                                           bounds=("worst_case",)))
    write_csv(out / f"{kind}.csv", traces)
    write_summary(out / f"{kind}.summary.json", report)
    b = report.bounds[0]
    print(f"{kind:>8}: R(1000) = {report.mean_final_regret:8.2f} ± {report.stderr:.2f}   "
          f"bound {b.value:.1f}  satisfied={b.satisfied}")

# %%
curve = read_curves(out / "voids.csv")
for t in (10, 100, 1000):
    print(f"VOIDS mean cumulative regret at t={t}: {curve['mean'][t - 1]:.2f}")
