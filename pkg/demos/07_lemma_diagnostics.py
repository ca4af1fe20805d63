"""Per-round diagnostics: surrogate vs true information gain, UE and OG.

The oracle-side quantities need the true parameter and are only computed
when diagnostics are enabled.
"""
# %%
import numpy as np

from oids import AlgorithmSpec, make_random_bernoulli, run_episode

env = make_random_bernoulli(4, 8, seed=3)
tr = run_episode(env, AlgorithmSpec("voids"), 300, seed=0, diagnostics=True)
d = tr.diagnostics
print("max sig / tig:           ", np.max(d["sig"] / np.maximum(d["tig"], 1e-300)).round(4), "(<= 4)")
print("max |UE| - (1/2 + tig):  ", np.max(np.abs(d["ue"]) - (0.5 + d["tig"])).round(4), "(<= 0, gamma = 1)")
print("posterior entropy t=1, 10, 100, 300:", d["posterior_entropy"][[0, 9, 99, 299]].round(4))
print("final regret:", round(tr.final_regret, 3))
