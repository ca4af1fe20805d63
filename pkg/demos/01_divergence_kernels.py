"""Divergence kernels: closed-form squared Hellinger distances per likelihood family.

Run with ``python3 demos/01_divergence_kernels.py``.
"""
# %%
import numpy as np

from oids.divergences import Bernoulli, Discrete, Gaussian, ZeroInflatedUniform, hellinger_sq, kl, mixture, total_variation

# %% [markdown]
# Squared Hellinger distance, normalised so that it lies in [0, 1].

# %%
pairs = [
    (Bernoulli(0.25), Bernoulli(0.75)),
    (ZeroInflatedUniform(0.4), ZeroInflatedUniform(0.1)),
    (Gaussian(0.0), Gaussian(1.0)),
    (Discrete([0.0, 0.5, 1.0], [0.2, 0.3, 0.5]), Discrete([0.0, 1.0], [0.6, 0.4])),
]
for P, Q in pairs:
    print(f"{P!r:>50} vs {Q!r:<50} H^2={hellinger_sq(P, Q):.6f}  TV={total_variation(P, Q):.4f}  KL={kl(P, Q):.4f}")

# %% [markdown]
# The squared-loss gap between Bernoulli means never exceeds four times their
# Hellinger distance (a triangular-discrimination bound).

# %%
grid = np.linspace(0, 1, 101)
worst = max(
    (p - q) ** 2 / (p + q) / hellinger_sq(Bernoulli(p), Bernoulli(q))
    for p in grid for q in grid if p != q
)
print(f"max (p-q)^2/(p+q) / H^2 over the grid: {worst:.4f}  (<= 4)")

# %% [markdown]
# Mixtures are how posterior predictives are formed.

# %%
pred = mixture([Bernoulli(0.1), Bernoulli(0.9)], [0.5, 0.5])
print("predictive of two Bernoullis:", pred)
