"""Sparse linear model: VOIDS halves the candidate set every round.

Actions are normalised subsets of the d coordinates; the loss is
``1 - <a, theta>`` with theta a coordinate vector.
"""
# %%
import numpy as np

from oids import AlgorithmSpec, make_sparse_linear, simulate
from oids.catalog import sparse_linear_actions

d = 8
A = sparse_linear_actions(d)
for i in range(d):
    tr = simulate(make_sparse_linear(d, theta0=i), AlgorithmSpec("voids"), 10, [0])[0]
    played = [int(np.count_nonzero(A[a])) for a in tr.actions[:4]]
    print(f"theta=e{i}: support sizes {tr.support[:4].tolist()}  subset sizes played {played}"
          f"  identified at round {tr.identification_round}  regret {tr.final_regret:.3f}")
