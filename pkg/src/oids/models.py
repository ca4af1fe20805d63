"""Finite parametric contextual-bandit model classes and simulation environments."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .divergences import (
    Bernoulli,
    Discrete,
    Gaussian,
    LossDistribution,
    ZeroInflatedUniform,
    sample as _sample,
)

FAMILIES = ("bernoulli", "discrete", "ziu", "gaussian")
_REALIZABILITY_TOL = 1e-12
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


class ModelInconsistencyError(RuntimeError):
    """An observation has zero likelihood under every parameter."""


def lowest_argmin(values, tol: float = 1e-12, axis: int = -1):
    """Index of the minimum along ``axis``; near-ties go to the lowest index."""
    values = np.asarray(values, dtype=float)
    vmin = values.min(axis=axis, keepdims=True)
    slack = tol * np.maximum(1.0, np.abs(vmin))
    return np.argmax(values <= vmin + slack, axis=axis)


@dataclass(frozen=True, eq=False)
class ModelClass:
    """Finite parameter set, contexts, K actions and a loss table ``l[theta, x, a]``.

    For the ``discrete`` family ``probs[theta, x, a, s]`` gives the mass of
    ``support[s]``; when omitted every loss is a point mass at the table value.
    The ``ziu`` family derives the zero atom from the mean, ``q = 1 - 2 l``.
    """

    params: tuple
    contexts: tuple
    num_actions: int
    loss_table: np.ndarray
    family: str = "bernoulli"
    support: Optional[np.ndarray] = None
    probs: Optional[np.ndarray] = None
    opt_loss: np.ndarray = field(init=False, repr=False)
    best: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        table = np.array(self.loss_table, dtype=float)
        params, contexts = tuple(self.params), tuple(self.contexts)
        K = int(self.num_actions)
        if self.family not in FAMILIES:
            raise ValueError(f"unknown likelihood family {self.family!r}")
        if len(params) < 2 or K < 2 or len(contexts) < 1:
            raise ValueError("need at least two parameters, two actions and one context")
        if table.shape != (len(params), len(contexts), K):
            raise ValueError(
                f"loss_table shape {table.shape} != (N, contexts, K) = "
                f"{(len(params), len(contexts), K)}"
            )
        if np.any(~np.isfinite(table)) or np.any((table < 0) | (table > 1)):
            raise ValueError("loss table entries must lie in [0, 1]")
        if self.family == "ziu" and np.any(table > 0.5 + _REALIZABILITY_TOL):
            raise ValueError("zero-inflated uniform losses have mean at most 1/2")
        support = probs = None
        if self.family == "discrete":
            if self.probs is None:
                support = np.unique(table)
                probs = (table[..., None] == support).astype(float)
            else:
                support = np.asarray(self.support, dtype=float)
                probs = np.asarray(self.probs, dtype=float)
                if probs.shape != table.shape + (support.size,):
                    raise ValueError("probs must have shape (N, contexts, K, len(support))")
                if np.unique(support).size != support.size:
                    raise ValueError("support values must be distinct")
                if np.any(probs < 0) or np.any(np.abs(probs.sum(-1) - 1) > _REALIZABILITY_TOL):
                    raise ValueError("each discrete law must be a probability vector")
                order = np.argsort(support)
                support, probs = support[order], probs[..., order]
                if np.any(np.abs(probs @ support - table) > _REALIZABILITY_TOL):
                    raise ValueError("discrete laws do not reproduce the loss table means")
        table.setflags(write=False)
        object.__setattr__(self, "params", params)
        object.__setattr__(self, "contexts", contexts)
        object.__setattr__(self, "num_actions", K)
        object.__setattr__(self, "loss_table", table)
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "opt_loss", table.min(axis=2))
        object.__setattr__(self, "best", lowest_argmin(table, tol=0.0, axis=2))

    @property
    def N(self) -> int:
        return len(self.params)

    @property
    def K(self) -> int:
        return self.num_actions

    @property
    def num_contexts(self) -> int:
        return len(self.contexts)

    def optimal_loss(self, theta: int, x: int) -> float:
        return float(self.opt_loss[theta, x])

    def best_action(self, theta: int, x: int) -> int:
        return int(self.best[theta, x])

    def loss_distribution(self, theta: int, x: int, a: int) -> LossDistribution:
        mean = float(self.loss_table[theta, x, a])
        if self.family == "bernoulli":
            return Bernoulli(mean)
        if self.family == "gaussian":
            return Gaussian(mean)
        if self.family == "ziu":
            return ZeroInflatedUniform(min(1.0, max(0.0, 1.0 - 2.0 * mean)))
        return Discrete(tuple(self.support.tolist()), tuple(self.probs[theta, x, a].tolist()))

    def with_family(self, family: str) -> "ModelClass":
        return ModelClass(self.params, self.contexts, self.num_actions, self.loss_table, family)

    # -- array views used by the vectorised engine ----------------------------

    def atoms(self) -> np.ndarray:
        """Two-point parameter of each law: Bernoulli mean or ZIU zero atom."""
        if self.family == "bernoulli":
            return self.loss_table
        if self.family == "ziu":
            return np.clip(1.0 - 2.0 * self.loss_table, 0.0, 1.0)
        raise ValueError(f"{self.family} laws have no two-point parametrisation")

    def log_likelihood(self, ctx, actions, losses) -> np.ndarray:
        """``log p(L_r | theta, x_r, a_r)`` for every parameter, shape (R, N)."""
        ctx = np.asarray(ctx, dtype=int)
        actions = np.asarray(actions, dtype=int)
        L = np.asarray(losses, dtype=float)[:, None]
        means = self.loss_table[:, ctx, actions].T
        with np.errstate(divide="ignore"):
            if self.family == "gaussian":
                return -((L - means) ** 2) / 2.0 - _LOG_SQRT_2PI
            if self.family == "bernoulli":
                mass = np.where(L == 1.0, means, np.where(L == 0.0, 1.0 - means, 0.0))
            elif self.family == "ziu":
                q = np.clip(1.0 - 2.0 * means, 0.0, 1.0)
                inside = (L > 0.0) & (L <= 1.0)
                mass = np.where(L == 0.0, q, np.where(inside, 1.0 - q, 0.0))
            else:
                flat = np.asarray(losses, dtype=float)
                idx = np.clip(np.searchsorted(self.support, flat), 0, self.support.size - 1)
                hit = self.support[idx] == flat
                mass = self.probs[:, ctx, actions, idx].T * hit[:, None]
            return np.log(mass)

    def to_dict(self) -> dict:
        doc = {
            "params": list(self.params),
            "contexts": list(self.contexts),
            "K": self.num_actions,
            "family": self.family,
            "loss_table": self.loss_table.tolist(),
        }
        if self.family == "discrete":
            doc["support"] = self.support.tolist()
            doc["probs"] = self.probs.tolist()
        return doc


def load_model(source) -> ModelClass:
    """Build a model class from a JSON document, a dict, or a path to one."""
    if isinstance(source, str) and source.lstrip().startswith("{"):
        doc = json.loads(source)
    elif isinstance(source, (str, Path)):
        doc = json.loads(Path(source).read_text())
    else:
        doc = dict(source)
    allowed = {"params", "contexts", "K", "family", "loss_table", "support", "probs"}
    unknown = set(doc) - allowed
    if unknown:
        raise ValueError(f"unknown model fields: {sorted(unknown)}")
    missing = {"params", "contexts", "K", "family", "loss_table"} - set(doc)
    if missing:
        raise ValueError(f"missing model fields: {sorted(missing)}")
    return ModelClass(
        params=tuple(doc["params"]),
        contexts=tuple(doc["contexts"]),
        num_actions=int(doc["K"]),
        loss_table=np.asarray(doc["loss_table"], dtype=float),
        family=doc["family"],
        support=doc.get("support"),
        probs=doc.get("probs"),
    )


def optimal_loss(model: ModelClass, theta: int, x: int) -> float:
    return model.optimal_loss(theta, x)


def best_action(model: ModelClass, theta: int, x: int) -> int:
    return model.best_action(theta, x)


def loss_distribution(model: ModelClass, theta: int, x: int, a: int) -> LossDistribution:
    return model.loss_distribution(theta, x, a)


@dataclass(frozen=True, eq=False)
class Environment:
    """The true instance: a model class plus theta_0 and a context law.

    ``true_param=None`` means theta_0 is drawn afresh by every episode from
    its own random stream.  ``source`` is the model that actually generates
    losses; it differs from ``model`` only for binarized environments.
    """

    model: ModelClass
    true_param: Optional[int] = None
    context_probs: Optional[np.ndarray] = None
    source: Optional[ModelClass] = None
    name: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.true_param is not None and not 0 <= self.true_param < self.model.N:
            raise ValueError("true_param must index a member of the model class")
        if self.context_probs is not None:
            probs = np.asarray(self.context_probs, dtype=float)
            if probs.shape != (self.model.num_contexts,) or abs(probs.sum() - 1) > 1e-10:
                raise ValueError("context_probs must be a distribution over contexts")
            object.__setattr__(self, "context_probs", probs)
        if self.source is not None:
            if not np.array_equal(self.source.loss_table, self.model.loss_table):
                raise ValueError("source and learner model must share the loss table")

    @property
    def generator(self) -> ModelClass:
        return self.source if self.source is not None else self.model

    @property
    def binarized(self) -> bool:
        return self.source is not None

    def with_true_param(self, theta0: Optional[int]) -> "Environment":
        return replace(self, true_param=theta0)

    def context_from_uniform(self, u):
        u = np.asarray(u, dtype=float)
        C = self.model.num_contexts
        if self.context_probs is None:
            return np.minimum((u * C).astype(int), C - 1)
        cum = np.cumsum(self.context_probs)
        cum /= cum[-1]
        return np.minimum(np.searchsorted(cum, u, side="right"), C - 1)

    def losses_from_uniforms(self, theta0, ctx, actions, u_loss, u_aux, z):
        """Map per-episode uniforms / normals to observed losses (vectorised)."""
        gen = self.generator
        theta0 = np.asarray(theta0, dtype=int)
        ctx, actions = np.asarray(ctx, dtype=int), np.asarray(actions, dtype=int)
        u_loss, u_aux, z = (np.asarray(v, dtype=float) for v in (u_loss, u_aux, z))
        means = gen.loss_table[theta0, ctx, actions]
        if gen.family == "gaussian":
            L = means + z
        elif gen.family == "bernoulli":
            L = (u_loss < means).astype(float)
        elif gen.family == "ziu":
            q = np.clip(1.0 - 2.0 * means, 0.0, 1.0)
            with np.errstate(divide="ignore", invalid="ignore"):
                cont = np.where(q < 1.0, (u_loss - q) / (1.0 - q), 0.0)
            L = np.where(u_loss < q, 0.0, cont)
        else:
            cum = np.cumsum(gen.probs[theta0, ctx, actions], axis=-1)
            cum /= cum[..., -1:]
            idx = np.minimum((u_loss[:, None] >= cum).sum(-1), gen.support.size - 1)
            L = gen.support[idx]
        if self.binarized:
            L = (u_aux < L).astype(float)
        return L

    def sample_loss(self, x: int, a: int, rng: np.random.Generator, theta0: Optional[int] = None) -> float:
        theta0 = self.true_param if theta0 is None else theta0
        if theta0 is None:
            raise ValueError("environment has no fixed true parameter")
        L = _sample(self.generator.loss_distribution(theta0, x, a), rng)
        if self.binarized:
            L = 1.0 if rng.random() < L else 0.0
        return L


def sample_loss(env: Environment, x: int, a: int, rng: np.random.Generator) -> float:
    return env.sample_loss(x, a, rng)


def binarize(env: Environment) -> Environment:
    """Round [0, 1] losses to Bernoulli draws so a Bernoulli likelihood is well specified."""
    gen = env.generator
    if gen.family == "gaussian":
        raise ValueError("cannot binarize unbounded Gaussian losses")
    return replace(
        env,
        model=gen.with_family("bernoulli"),
        source=gen,
        name=f"{env.name}+binarized" if env.name else "binarized",
    )
