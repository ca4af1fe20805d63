"""Per-round decision objectives computed from a posterior over the model class.

Array functions take posterior weights of shape (R, N) and one context
index per row, and return per-action vectors of shape (R, K).  The
object-level wrappers (``surrogate_gain(post, x)`` and friends) are thin
shims for single posteriors.

Anything that needs the true parameter goes through :class:`Oracle`, so
policy code never sees theta_0.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .divergences import (
    LossDistribution,
    discrete_hellinger,
    discrete_kl,
    hellinger_sq,
    two_point_hellinger,
    two_point_kl,
)
from .models import Environment, ModelClass
from .posterior import OptimisticPosterior

ZERO_INFO = 1e-12
METRICS = ("hellinger", "squared_loss")


class NoInformationError(ArithmeticError):
    """The information-gain denominator is numerically zero."""


def default_metric(model: ModelClass) -> str:
    return "squared_loss" if model.family == "gaussian" else "hellinger"


def _slice(table: np.ndarray, ctx) -> np.ndarray:
    """``table[:, ctx, ...]`` moved to batch-major order (R, N, ...)."""
    return np.swapaxes(table[:, np.asarray(ctx, dtype=int)], 0, 1)


def batch_losses(model: ModelClass, ctx):
    """Loss table rows (R, N, K) and optimal losses (R, N) for each context."""
    return _slice(model.loss_table, ctx), _slice(model.opt_loss, ctx)


def surrogate_losses(model: ModelClass, w, ctx):
    """Posterior-averaged losses (R, K) and optimal losses (R,)."""
    L, opt = batch_losses(model, ctx)
    return np.einsum("rn,rnk->rk", w, L), np.einsum("rn,rn->r", w, opt)


def surrogate_regrets(model: ModelClass, w, ctx) -> np.ndarray:
    """Per-action surrogate regret ``sum_theta w (l(theta,a) - l*(theta))`` (R, K)."""
    L, opt = batch_losses(model, ctx)
    return np.einsum("rn,rnk->rk", w, L - opt[..., None])


def predictive_divergences(model: ModelClass, w, ctx, metric: str = "hellinger") -> np.ndarray:
    """Distance from each parameter's law to the posterior predictive, (R, N, K).

    ``hellinger`` uses the squared Hellinger distance to the predictive
    mixture; ``squared_loss`` uses ``(l(theta, a) - lbar(a))^2``.
    """
    w = np.asarray(w, dtype=float)
    if metric == "squared_loss":
        L = _slice(model.loss_table, ctx)
        lbar = np.einsum("rn,rnk->rk", w, L)
        return (L - lbar[:, None, :]) ** 2
    if metric != "hellinger":
        raise ValueError(f"unknown gain metric {metric!r}")
    if model.family == "gaussian":
        raise ValueError(
            "Gaussian predictive mixtures are not Gaussian; use the squared_loss metric"
        )
    if model.family == "discrete":
        P = _slice(model.probs, ctx)
        Pbar = np.einsum("rn,rnks->rks", w, P)
        return discrete_hellinger(P, Pbar[:, None])
    p = _slice(model.atoms(), ctx)
    pbar = np.einsum("rn,rnk->rk", w, p)
    return two_point_hellinger(p, pbar[:, None, :])


def surrogate_gains(model: ModelClass, w, ctx, metric: str = "hellinger") -> np.ndarray:
    return np.einsum("rn,rnk->rk", w, predictive_divergences(model, w, ctx, metric))


def kl_gains(model: ModelClass, w, ctx) -> np.ndarray:
    """Mutual-information gain ``sum_theta w KL(p(theta, a) || pbar(a))`` (R, K)."""
    w = np.asarray(w, dtype=float)
    if model.family == "gaussian":
        raise ValueError("the KL information gain needs a non-Gaussian family")
    if model.family == "discrete":
        P = _slice(model.probs, ctx)
        Pbar = np.einsum("rn,rnks->rks", w, P)
        div = discrete_kl(P, Pbar[:, None])
    else:
        p = _slice(model.atoms(), ctx)
        pbar = np.einsum("rn,rnk->rk", w, p)
        div = two_point_kl(p, pbar[:, None, :])
    # zero-weight parameters contribute nothing, even where their KL is infinite
    return np.einsum("rn,rnk->rk", w, np.where(w[..., None] > 0, div, 0.0))


def true_divergences(model: ModelClass, theta0, ctx, metric: str = "hellinger") -> np.ndarray:
    """Distance between theta_0's law and every parameter's law, (R, N, K)."""
    theta0 = np.asarray(theta0, dtype=int)
    rows = np.arange(theta0.size)
    if metric == "squared_loss":
        L = _slice(model.loss_table, ctx)
        return (L - L[rows, theta0][:, None, :]) ** 2
    if model.family == "gaussian":
        L = _slice(model.loss_table, ctx)
        return -np.expm1(-((L - L[rows, theta0][:, None, :]) ** 2) / 8.0)
    if model.family == "discrete":
        P = _slice(model.probs, ctx)
        return discrete_hellinger(P, P[rows, theta0][:, None])
    p = _slice(model.atoms(), ctx)
    return two_point_hellinger(p, p[rows, theta0][:, None, :])


def ratio(numer, denom):
    """``numer^2 / denom`` with 0 for zero numerators and inf for zero denominators.

    Only an exactly-zero denominator counts as empty here: gains shrink with the
    posterior's spread, so an absolute cutoff would misjudge concentrated rounds.
    """
    numer = np.asarray(numer, dtype=float)
    denom = np.asarray(denom, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(denom > 0.0, numer**2 / denom, np.inf)
    return np.where(numer == 0.0, 0.0, out)


# -- scalar objective functions ---------------------------------------------

def information_ratio(delta_bar, gain_bar, pi) -> float:
    """Squared surrogate regret of ``pi`` over its surrogate information gain."""
    pi = np.asarray(pi, dtype=float)
    num = float(pi @ np.asarray(delta_bar, dtype=float))
    den = float(pi @ np.asarray(gain_bar, dtype=float))
    if num == 0.0:
        return 0.0
    if den <= 0.0:
        raise NoInformationError("policy collects no surrogate information")
    return num * num / den


def adec(delta_bar, gain_bar, pi, mu: float) -> float:
    """Averaged decision-estimation coefficient: regret minus ``mu`` times gain."""
    pi = np.asarray(pi, dtype=float)
    return float(pi @ np.asarray(delta_bar) - mu * (pi @ np.asarray(gain_bar)))


def dec_matrices(model: ModelClass, x: int, reference: Sequence[LossDistribution]):
    """Regret and estimation-error matrices (N, K) against a reference law per action.

    Gaussian models use the squared distance between means as the estimation
    error instead of the Hellinger distance.
    """
    if len(reference) != model.K:
        raise ValueError("need one reference law per action")
    regret = model.loss_table[:, x, :] - model.opt_loss[:, x, None]
    div = np.empty((model.N, model.K))
    for th in range(model.N):
        for a in range(model.K):
            p = model.loss_distribution(th, x, a)
            if model.family == "gaussian":
                div[th, a] = (p.mean - reference[a].mean) ** 2
            else:
                div[th, a] = hellinger_sq(p, reference[a])
    return regret, div


def dec_value(regret, div, pi, gamma: float) -> float:
    """``max_theta sum_a pi(a) (regret[theta, a] - gamma * div[theta, a])``."""
    return float(np.max((np.asarray(regret) - gamma * np.asarray(div)) @ np.asarray(pi, dtype=float)))


def worst_case_dec(model: ModelClass, x: int, pi, gamma: float, reference) -> float:
    regret, div = dec_matrices(model, x, reference)
    return dec_value(regret, div, pi, gamma)


# -- object-level wrappers ---------------------------------------------------

def _w(post: OptimisticPosterior) -> np.ndarray:
    return post.weights[None, :]


def surrogate_gain(post: OptimisticPosterior, x: int) -> np.ndarray:
    if post.model.family == "gaussian":
        raise ValueError("Gaussian family: use gaussian_surrogate_gain")
    return surrogate_gains(post.model, _w(post), [x], "hellinger")[0]


def gaussian_surrogate_gain(post: OptimisticPosterior, x: int) -> np.ndarray:
    """Posterior variance of each action's mean loss."""
    return surrogate_gains(post.model, _w(post), [x], "squared_loss")[0]


def bayes_info_gain(post: OptimisticPosterior, x: int) -> np.ndarray:
    return kl_gains(post.model, _w(post), [x])[0]


@dataclass(frozen=True)
class Oracle:
    """Access to theta_0, reserved for diagnostics."""

    model: ModelClass
    theta0: int

    @classmethod
    def from_env(cls, env: Environment, theta0: Optional[int] = None) -> "Oracle":
        theta0 = env.true_param if theta0 is None else theta0
        if theta0 is None:
            raise ValueError("the environment draws theta_0 per episode; pass theta0")
        return cls(env.model, int(theta0))

    def true_gain(self, post: OptimisticPosterior, x: int, metric: Optional[str] = None) -> np.ndarray:
        metric = metric or default_metric(self.model)
        div = true_divergences(self.model, [self.theta0], [x], metric)
        return np.einsum("rn,rnk->rk", _w(post), div)[0]

    def ue_og(self, post: OptimisticPosterior, x: int, pi) -> tuple:
        """Underestimation error of ``pi`` and the optimality gap of the surrogate."""
        pi = np.asarray(pi, dtype=float)
        true_losses = self.model.loss_table[self.theta0, x, :]
        ue = float(pi @ (true_losses - post.surrogate_losses(x)))
        og = post.surrogate_optimal_loss(x) - self.model.optimal_loss(self.theta0, x)
        return ue, float(og)


def true_gain(post: OptimisticPosterior, oracle: Oracle, x: int, metric: Optional[str] = None):
    return oracle.true_gain(post, x, metric)


def diagnostics_ue_og(post: OptimisticPosterior, oracle: Oracle, x: int, pi) -> tuple:
    return oracle.ue_og(post, x, pi)


@dataclass(frozen=True, eq=False)
class RoundObjectives:
    delta_bar: np.ndarray
    gain_bar: np.ndarray
    gain_metric: str
    lbar: np.ndarray
    lstar_bar: float
    true_gain: Optional[np.ndarray] = None

    @classmethod
    def compute(
        cls,
        post: OptimisticPosterior,
        x: int,
        metric: Optional[str] = None,
        oracle: Optional[Oracle] = None,
    ) -> "RoundObjectives":
        model = post.model
        metric = metric or default_metric(model)
        w = _w(post)
        lbar, lstar = surrogate_losses(model, w, [x])
        tg = oracle.true_gain(post, x, metric) if oracle is not None else None
        return cls(
            delta_bar=surrogate_regrets(model, w, [x])[0],
            gain_bar=surrogate_gains(model, w, [x], metric)[0],
            gain_metric=metric,
            lbar=lbar[0],
            lstar_bar=float(lstar[0]),
            true_gain=tg,
        )

    def regret(self, pi) -> float:
        return float(np.asarray(pi) @ self.delta_bar)

    def gain(self, pi) -> float:
        return float(np.asarray(pi) @ self.gain_bar)

    def ir(self, pi) -> float:
        return information_ratio(self.delta_bar, self.gain_bar, pi)

    def adec(self, pi, mu: float) -> float:
        return adec(self.delta_bar, self.gain_bar, pi, mu)
