"""Benchmark instances: three structured examples and random synthetic tables.

Each ``make_*`` function returns an :class:`~oids.models.Environment`.
``theta0`` is a parameter *index* (``0..N-1``); ``None`` means every episode
draws its own theta_0 uniformly from its random stream.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .models import Environment, ModelClass, binarize

MAX_SPARSE_DIM = 12
RECIPE_KINDS = ("revealing_action", "sparse_linear", "revelatory_zero", "random_bernoulli")


def make_revealing_action(K: int, theta0: Optional[int] = None) -> Environment:
    """Actions ``0..K``, parameters ``1..K``; action 0 reveals theta at a price.

    Losses are deterministic: ``l(theta, a) = 1{a > 0, a != theta}`` and
    ``l(theta, 0) = 1 - 2**-theta``.
    """
    if K < 2:
        raise ValueError("revealing action needs K >= 2")
    table = np.ones((K, 1, K + 1))
    for i, theta in enumerate(range(1, K + 1)):
        table[i, 0, 0] = 1.0 - 2.0 ** (-theta)
        table[i, 0, theta] = 0.0
    model = ModelClass(tuple(range(1, K + 1)), ("x0",), K + 1, table, family="discrete")
    return Environment(model, theta0, name=f"revealing_action(K={K})", meta={"kind": "revealing_action", "K": K})


def sparse_linear_actions(d: int) -> np.ndarray:
    """Normalised nonzero 0/1 vectors, ordered by their bitmask ``1..2^d - 1``."""
    masks = np.arange(1, 2**d)
    bits = (masks[:, None] >> np.arange(d)) & 1
    return bits / bits.sum(axis=1, keepdims=True)


def make_sparse_linear(d: int, theta0: Optional[int] = None) -> Environment:
    """1-sparse linear bandit: ``l(e_i, a) = 1 - a_i`` over all normalised 0/1 actions."""
    if not 2 <= d <= MAX_SPARSE_DIM:
        raise ValueError(f"sparse linear needs 2 <= d <= {MAX_SPARSE_DIM}")
    actions = sparse_linear_actions(d)
    table = (1.0 - actions.T)[:, None, :]
    params = tuple(f"e{i}" for i in range(d))
    model = ModelClass(params, ("x0",), actions.shape[0], table, family="discrete")
    return Environment(model, theta0, name=f"sparse_linear(d={d})", meta={"kind": "sparse_linear", "d": d})


def make_revelatory_zero(K: int, delta: float, theta0: Optional[int] = None) -> Environment:
    """Every action's loss is uniform on [0, 1] except action ``theta``.

    That one is zero with probability ``2 delta`` and uniform otherwise, so
    its mean is ``1/2 - delta``; a single zero identifies theta exactly.
    """
    if K < 2:
        raise ValueError("revelatory zero needs K >= 2")
    if not 0.0 < delta <= 0.5:
        raise ValueError("delta must lie in (0, 1/2]")
    table = np.full((K, 1, K), 0.5)
    table[np.arange(K), 0, np.arange(K)] = 0.5 - delta
    model = ModelClass(tuple(range(K)), ("x0",), K, table, family="ziu")
    return Environment(
        model, theta0, name=f"revelatory_zero(K={K},delta={delta})",
        meta={"kind": "revelatory_zero", "K": K, "delta": delta},
    )


def make_random_bernoulli(
    K: int, N: int, contexts: int = 1, seed: int = 0, family: str = "bernoulli",
    theta0: Optional[int] = None,
) -> Environment:
    """Loss means i.i.d. uniform on [0, 1]; theta_0 uniform, both from ``seed``."""
    rng = np.random.Generator(np.random.PCG64(seed))
    table = rng.random((N, contexts, K))
    drawn = int(rng.integers(N))
    model = ModelClass(
        tuple(range(N)), tuple(range(contexts)), K, table, family=family
    )
    return Environment(
        model, drawn if theta0 is None else theta0,
        name=f"random_{family}(K={K},N={N},seed={seed})",
        meta={"kind": "random_bernoulli", "K": K, "N": N, "contexts": contexts, "seed": seed, "family": family},
    )


def revelatory_zero_post_identification(K: int, delta: float, theta0: int = 0):
    """Regret and idealised estimation-error matrices after theta_0 is identified.

    Once a zero has been observed the predictive law equals theta_0's, and
    every alternative is treated as maximally distant:
    ``div[theta, a] = 1{theta != theta0}``.  Feed the pair to
    :func:`oids.policies.e2d_solve` or :func:`oids.objectives.dec_value`.
    """
    env = make_revelatory_zero(K, delta)
    regret = env.model.loss_table[:, 0, :] - env.model.opt_loss[:, 0, None]
    div = np.ones((K, K))
    div[theta0] = 0.0
    return regret, div


def e2d_equalizer(K: int, delta: float, gamma: float, theta0: int = 0) -> np.ndarray:
    """Closed-form E2D policy on the post-identification state.

    For ``gamma < delta`` the max player is kept indifferent between theta_0
    and every alternative, giving ``pi(theta0) = 1 - (K-1) p`` with
    ``p = (delta - gamma) / (delta K)``; for ``gamma >= delta`` it is the point mass on theta_0.
    """
    pi = np.zeros(K)
    if gamma >= delta:
        pi[theta0] = 1.0
        return pi
    p = (delta - gamma) / (delta * K)
    pi[:] = p
    pi[theta0] = 1.0 - (K - 1) * p
    return pi


@dataclass(frozen=True)
class InstanceRecipe:
    """Serializable instance description, as found under ``env`` in a config."""

    kind: str
    params: dict = field(default_factory=dict)
    theta0: Optional[int] = None
    binarize: bool = False

    _ALLOWED = {
        "revealing_action": {"K"},
        "sparse_linear": {"d"},
        "revelatory_zero": {"K", "delta"},
        "random_bernoulli": {"K", "N", "contexts", "seed", "family"},
    }
    _REQUIRED = {
        "revealing_action": {"K"},
        "sparse_linear": {"d"},
        "revelatory_zero": {"K", "delta"},
        "random_bernoulli": {"K", "N"},
    }

    def __post_init__(self):
        if self.kind not in RECIPE_KINDS:
            raise ValueError(f"unknown instance kind {self.kind!r}")
        unknown = set(self.params) - self._ALLOWED[self.kind]
        if unknown:
            raise ValueError(f"unknown {self.kind} parameters: {sorted(unknown)}")
        missing = self._REQUIRED[self.kind] - set(self.params)
        if missing:
            raise ValueError(f"missing {self.kind} parameters: {sorted(missing)}")

    @classmethod
    def from_dict(cls, doc: dict) -> "InstanceRecipe":
        doc = dict(doc)
        kind = doc.pop("kind")
        theta0 = doc.pop("theta0", None)
        binar = doc.pop("binarize", False)
        return cls(kind, doc, theta0, binar)

    def to_dict(self) -> dict:
        doc = {"kind": self.kind, **self.params}
        if self.theta0 is not None:
            doc["theta0"] = self.theta0
        if self.binarize:
            doc["binarize"] = True
        return doc

    def build(self) -> Environment:
        p = self.params
        if self.kind == "revealing_action":
            env = make_revealing_action(p["K"], self.theta0)
        elif self.kind == "sparse_linear":
            env = make_sparse_linear(p["d"], self.theta0)
        elif self.kind == "revelatory_zero":
            env = make_revelatory_zero(p["K"], p["delta"], self.theta0)
        else:
            env = make_random_bernoulli(
                p["K"], p["N"], p.get("contexts", 1), p.get("seed", 0),
                p.get("family", "bernoulli"), self.theta0,
            )
        return binarize(env) if self.binarize else env


def build_environment(doc: dict) -> Environment:
    return InstanceRecipe.from_dict(doc).build()
