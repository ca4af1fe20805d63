"""Optimistic posterior over a finite parameter set, kept in log space.

One round of the update multiplies the weight of ``theta`` by the
``eta``-tempered likelihood of the observed loss and by
``exp(-lam * l*(theta, x))``, which favours parameters that promise a low
optimal loss.  ``eta = 1, lam = 0`` is the plain Bayesian posterior.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.special import logsumexp

from .divergences import LossDistribution, mixture
from .models import ModelClass, ModelInconsistencyError


def normalize_log_weights(logw: np.ndarray) -> np.ndarray:
    """Shift log weights so that each row's log-sum-exp is zero."""
    logw = np.asarray(logw, dtype=float)
    lse = logsumexp(logw, axis=-1, keepdims=True)
    if np.any(~np.isfinite(lse)):
        raise ModelInconsistencyError("all posterior weights vanished")
    return logw - lse


def update_log_weights(logw, loglik, opt_loss, eta: float, lam: float) -> np.ndarray:
    """Unnormalised update ``logw + eta * loglik - lam * opt_loss``, then normalised.

    Parameters with zero likelihood end at ``-inf``; zero weights stay zero.
    """
    logw = np.asarray(logw, dtype=float)
    loglik = np.asarray(loglik, dtype=float)
    with np.errstate(invalid="ignore"):
        step = eta * loglik - lam * np.asarray(opt_loss, dtype=float)
    new = np.where(np.isneginf(logw) | np.isneginf(loglik), -np.inf, logw + step)
    return normalize_log_weights(new)


def entropy(weights: np.ndarray) -> np.ndarray:
    w = np.asarray(weights, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(w > 0, -w * np.log(w), 0.0)
    return terms.sum(axis=-1)


@dataclass(frozen=True, eq=False)
class OptimisticPosterior:
    model: ModelClass
    log_weights: np.ndarray
    eta: float = 0.25
    lam: float = 0.0

    def __post_init__(self):
        if self.eta <= 0:
            raise ValueError("eta must be positive")
        if self.lam < 0:
            raise ValueError("lam must be nonnegative")
        logw = np.asarray(self.log_weights, dtype=float)
        if logw.shape != (self.model.N,):
            raise ValueError("need one log weight per parameter")
        logw = normalize_log_weights(logw)
        logw.setflags(write=False)
        object.__setattr__(self, "log_weights", logw)

    @classmethod
    def uniform(cls, model: ModelClass, eta: float = 0.25, lam: float = 0.0):
        return cls(model, np.zeros(model.N), eta, lam)

    @classmethod
    def from_weights(cls, model: ModelClass, weights, eta: float = 0.25, lam: float = 0.0):
        w = np.asarray(weights, dtype=float)
        with np.errstate(divide="ignore"):
            return cls(model, np.log(w), eta, lam)

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.log_weights)

    @property
    def support_size(self) -> int:
        return int(np.count_nonzero(np.isfinite(self.log_weights)))

    def entropy(self) -> float:
        return float(entropy(self.weights))

    def update(self, x: int, a: int, L: float) -> "OptimisticPosterior":
        loglik = self.model.log_likelihood([x], [a], [L])[0]
        try:
            logw = update_log_weights(
                self.log_weights, loglik, self.model.opt_loss[:, x], self.eta, self.lam
            )
        except ModelInconsistencyError:
            raise ModelInconsistencyError(
                f"loss {L} on action {a} in context {x} is impossible under every parameter"
            ) from None
        return OptimisticPosterior(self.model, logw, self.eta, self.lam)

    def predictive(self, x: int, a: int) -> LossDistribution:
        dists = [self.model.loss_distribution(th, x, a) for th in range(self.model.N)]
        return mixture(dists, self.weights)

    def surrogate_losses(self, x: int) -> np.ndarray:
        return self.weights @ self.model.loss_table[:, x, :]

    def surrogate_loss(self, x: int, a: int) -> float:
        return float(self.surrogate_losses(x)[a])

    def surrogate_optimal_loss(self, x: int) -> float:
        return float(self.weights @ self.model.opt_loss[:, x])

    def to_dict(self) -> dict:
        return {str(p): float(w) for p, w in zip(self.model.params, self.weights)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def potential_phi(
    prior: OptimisticPosterior,
    trace: Sequence[tuple],
    eta: Optional[float] = None,
    lam: Optional[float] = None,
):
    """Exponential-weights potential evaluated two ways over a trace of (x, a, L).

    ``direct`` is ``(1/lam) log E_{Q_1} exp(sum_t (eta log p_t - lam l*_t))``;
    ``telescoped`` sums the per-round log normalisers of the sequential update.
    The two agree exactly; the gap is a numerical diagnostic.
    """
    eta = prior.eta if eta is None else eta
    lam = prior.lam if lam is None else lam
    if lam <= 0:
        raise ValueError("the potential needs lam > 0")
    model = prior.model
    logq1 = prior.log_weights
    total = np.zeros(model.N)
    logw = logq1.copy()
    telescoped = 0.0
    for x, a, L in trace:
        loglik = model.log_likelihood([x], [a], [L])[0]
        with np.errstate(invalid="ignore"):
            step = np.where(np.isneginf(loglik), -np.inf, eta * loglik - lam * model.opt_loss[:, x])
        total = total + step
        telescoped += logsumexp(logw + step) / lam
        logw = update_log_weights(logw, loglik, model.opt_loss[:, x], eta, lam)
    direct = logsumexp(logq1 + total) / lam if len(trace) else 0.0
    return float(direct), float(telescoped)
