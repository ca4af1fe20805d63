"""Bandit with a revelatory zero: a loss of exactly 0 identifies the optimal arm.

Compares VOIDS/ROIDS regret with the uniform policy, then shows the
post-identification DEC game, where E2D keeps exploring even though the
parameter is already known.
"""
# %%
from oids import AlgorithmSpec, make_revelatory_zero, simulate
from oids.catalog import e2d_equalizer, revelatory_zero_post_identification
from oids.harness import AggregateReport, derive_seeds
from oids.policies import e2d_solve

K, delta, T, R = 4, 0.1, 500, 200
env = make_revelatory_zero(K, delta)
for kind in ("voids", "roids", "uniform"):
    rep = AggregateReport.from_traces(simulate(env, AlgorithmSpec(kind), T, derive_seeds(0, R)), kind, env.meta)
    print(f"{kind:>8}: mean regret {rep.mean_final_regret:7.3f} ± {rep.stderr:.3f}")

# %%
regret, div = revelatory_zero_post_identification(3, delta, theta0=0)
for gamma in (0.0, 0.05, 0.1):
    pi, value, gap = e2d_solve(regret, div, gamma)
    print(f"gamma={gamma:.2f}: E2D policy {pi.round(4)}  value {value:.4f}  "
          f"closed form {e2d_equalizer(3, delta, gamma, theta0=0).round(4)}")
