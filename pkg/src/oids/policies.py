"""Round policies for every supported algorithm plus the hyperparameter schedules."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from typing import Optional, Union

import numpy as np
from scipy.optimize import linprog

from .models import ModelClass, lowest_argmin
from .objectives import ZERO_INFO, NoInformationError

_TIE_REL = 1e-10
_PAIR_CHUNK = 200_000


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class PolicyDistribution:
    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if p.ndim != 1 or p.size < 1:
            raise ValueError("policy must be a non-empty vector")
        if np.any(p < -1e-15) or abs(p.sum() - 1.0) > 1e-10:
            raise ValueError("policy must be a probability vector")
        p = np.clip(p, 0.0, None)
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @classmethod
    def delta(cls, K: int, a: int) -> "PolicyDistribution":
        p = np.zeros(K)
        p[a] = 1.0
        return cls(p)

    @property
    def K(self) -> int:
        return self.probs.size

    def __array__(self, dtype=None, copy=None):
        return self.probs if dtype is None else self.probs.astype(dtype)

    def sample(self, u: float) -> int:
        return int(sample_actions(self.probs[None, :], np.array([u]))[0])


def sample_actions(pi: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Inverse-CDF action draw for each row of ``pi`` given uniforms ``u``."""
    cum = np.cumsum(pi, axis=-1)
    cum /= cum[:, -1:]
    return np.minimum((u[:, None] >= cum).sum(-1), pi.shape[-1] - 1)


def _with_ties(values: np.ndarray) -> np.ndarray:
    vmin = np.min(values, axis=-1, keepdims=True)
    return values <= vmin + _TIE_REL * np.maximum(1.0, np.abs(vmin))


# -- VOIDS: exact information-ratio minimisation ------------------------------

def _ratio_values(n, d):
    # Per candidate only a zero gain is "no information"; the ZERO_INFO cutoff
    # applies to whole rows (posterior collapse), since every gain scales with
    # the posterior's remaining spread.
    with np.errstate(divide="ignore", invalid="ignore"):
        v = np.where(d > 0.0, n * n / d, np.inf)
    return np.where(n == 0.0, 0.0, v)


@lru_cache(maxsize=32)
def _pairs(K: int):
    i, j = np.triu_indices(K, k=1)
    return i, j


def _best_on_pairs(delta, gain, I, J):
    """Best mixing weight q (mass on I) and value for each pair, shape (R, P)."""
    di, dj = delta[:, I], delta[:, J]
    gi, gj = gain[:, I], gain[:, J]
    n0, n1 = dj, di - dj
    d0, d1 = gj, gi - gj
    with np.errstate(divide="ignore", invalid="ignore"):
        root_zero = np.where(n1 != 0, -n0 / n1, np.nan)
        root_stat = np.where((n1 != 0) & (d1 != 0), (n0 * d1 - 2 * n1 * d0) / (n1 * d1), np.nan)
    qs = np.stack(
        [np.zeros_like(n0), root_zero, root_stat, np.ones_like(n0)], axis=-1
    )
    valid = np.isfinite(qs) & (qs >= 0.0) & (qs <= 1.0)
    qs = np.where(valid, qs, 0.0)
    n = n0[..., None] + qs * n1[..., None]
    d = d0[..., None] + qs * d1[..., None]
    vals = np.where(valid, _ratio_values(np.maximum(n, 0.0), d), np.inf)
    tied = _with_ties(vals)
    q = np.where(tied, qs, np.inf).min(axis=-1)
    return vals.min(axis=-1), q


def voids_batch(delta: np.ndarray, gain: np.ndarray, fallback_losses: Optional[np.ndarray] = None):
    """Minimise ``(pi . delta)^2 / (pi . gain)`` over the simplex, row by row.

    A minimiser supported on at most two actions always exists, so every
    singleton and every pair is searched; per pair the optimum is at an
    endpoint, at the root of the numerator, or at the stationary point of the
    rational function.  Near-ties resolve to the lexicographically smallest
    (i, j, q), where a singleton i sorts as (i, i, 1).

    Rows whose largest gain is below the zero-information threshold get the
    greedy policy on ``fallback_losses`` (or raise when none is given).
    Returns ``(pi, ir_value, collapsed)``.
    """
    delta = np.atleast_2d(np.asarray(delta, dtype=float))
    gain = np.atleast_2d(np.asarray(gain, dtype=float))
    R, K = delta.shape
    collapsed = gain.max(axis=1) <= ZERO_INFO
    if np.any(collapsed) and fallback_losses is None:
        raise NoInformationError("posterior has collapsed; use the greedy fallback")

    best_val = _ratio_values(delta, gain)  # singletons
    best_key = np.tile(np.arange(K, dtype=float), (R, 1))
    cand_val = [best_val]
    cand_i = [np.tile(np.arange(K), (R, 1))]
    cand_j = [np.tile(np.arange(K), (R, 1))]
    cand_q = [np.ones((R, K))]
    I, J = _pairs(K)
    for start in range(0, I.size, max(1, _PAIR_CHUNK // max(R, 1))):
        sl = slice(start, start + max(1, _PAIR_CHUNK // max(R, 1)))
        v, q = _best_on_pairs(delta, gain, I[sl], J[sl])
        cand_val.append(v)
        cand_i.append(np.broadcast_to(I[sl], v.shape))
        cand_j.append(np.broadcast_to(J[sl], v.shape))
        cand_q.append(q)
        # keep memory flat for very large action sets
        if len(cand_val) > 8:
            cand_val, cand_i, cand_j, cand_q = _reduce(cand_val, cand_i, cand_j, cand_q)
    cand_val, cand_i, cand_j, cand_q = _reduce(cand_val, cand_i, cand_j, cand_q)
    vals, ii, jj, qq = (c[0][:, 0] for c in (cand_val, cand_i, cand_j, cand_q))

    pi = np.zeros((R, K))
    rows = np.arange(R)
    pi[rows, ii] += qq
    pi[rows, jj] += 1.0 - qq
    # singleton (i, i, 1) puts all the mass on i
    single = ii == jj
    pi[rows[single], ii[single]] = 1.0
    if np.any(collapsed):
        greedy = lowest_argmin(np.asarray(fallback_losses, dtype=float)[collapsed])
        pi[collapsed] = 0.0
        pi[np.flatnonzero(collapsed), greedy] = 1.0
        vals = np.where(collapsed, np.nan, vals)
    return pi, vals, collapsed


def _reduce(vals, ii, jj, qq):
    """Collapse candidate blocks to the single best candidate per row."""
    V = np.concatenate(vals, axis=1)
    Ii = np.concatenate(ii, axis=1)
    Jj = np.concatenate(jj, axis=1)
    Q = np.concatenate(qq, axis=1)
    tied = _with_ties(V)
    # lexicographic order on (i, j, q) among the tied candidates
    i_key = np.where(tied, Ii, np.iinfo(np.int64).max)
    i_min = i_key.min(axis=1, keepdims=True)
    tied &= Ii == i_min
    j_key = np.where(tied, Jj, np.iinfo(np.int64).max)
    tied &= Jj == j_key.min(axis=1, keepdims=True)
    q_key = np.where(tied, Q, np.inf)
    pick = np.argmin(q_key, axis=1)
    rows = np.arange(V.shape[0])
    return (
        [V[rows, pick][:, None]],
        [Ii[rows, pick][:, None]],
        [Jj[rows, pick][:, None]],
        [Q[rows, pick][:, None]],
    )


def voids(delta_bar, gain_bar, fallback_losses=None) -> PolicyDistribution:
    pi, _, _ = voids_batch(
        np.asarray(delta_bar)[None, :],
        np.asarray(gain_bar)[None, :],
        None if fallback_losses is None else np.asarray(fallback_losses)[None, :],
    )
    return PolicyDistribution(pi[0])


# -- other policies -------------------------------------------------------------

def roids_batch(delta: np.ndarray, gain: np.ndarray, mu: float) -> np.ndarray:
    """The averaged DEC is affine in pi, so its minimiser is a vertex."""
    delta = np.atleast_2d(delta)
    scores = delta - mu * np.atleast_2d(gain)
    a = lowest_argmin(scores)
    pi = np.zeros_like(delta, dtype=float)
    pi[np.arange(pi.shape[0]), a] = 1.0
    return pi


def roids(delta_bar, gain_bar, mu: float) -> PolicyDistribution:
    return PolicyDistribution(roids_batch(np.asarray(delta_bar)[None], np.asarray(gain_bar)[None], mu)[0])


def greedy_batch(losses: np.ndarray) -> np.ndarray:
    losses = np.atleast_2d(losses)
    pi = np.zeros_like(losses, dtype=float)
    pi[np.arange(pi.shape[0]), lowest_argmin(losses)] = 1.0
    return pi


def induced_batch(w: np.ndarray, best: np.ndarray, K: int) -> np.ndarray:
    """Distribution of ``a*(theta)`` for theta drawn from each row of ``w``."""
    onehot = best[..., None] == np.arange(K)
    return np.einsum("rn,rnk->rk", w, onehot)


def fgts_policy(post, x: int) -> PolicyDistribution:
    """Action law induced by sampling theta from the posterior and acting greedily."""
    model = post.model
    return PolicyDistribution(induced_batch(post.weights[None], model.best[:, x][None], model.K)[0])


def igw_batch(lbar: np.ndarray, gamma: float) -> np.ndarray:
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")
    lbar = np.atleast_2d(np.asarray(lbar, dtype=float))
    R, K = lbar.shape
    rows = np.arange(R)
    b = lowest_argmin(lbar, tol=0.0)
    lb = lbar[rows, b][:, None]
    gap = lbar - lb
    with np.errstate(divide="ignore", invalid="ignore"):
        pi = np.where(lb > 0, lb / (K * lb + gamma * gap), 0.0)
    pi[rows, b] = 0.0
    pi[rows, b] = 1.0 - pi.sum(axis=1)
    return pi


def igw_policy(lbar, gamma: float) -> PolicyDistribution:
    """Inverse-gap weighting around the lowest-index minimiser ``b`` of ``lbar``.

    Off-optimal actions get ``l(b) / (K l(b) + gamma (l(a) - l(b)))``.
    """
    return PolicyDistribution(igw_batch(np.asarray(lbar)[None], gamma)[0])


def e2d_solve(regret: np.ndarray, div: np.ndarray, gamma: float, tol: float = 1e-4):
    """Minimise ``max_theta (regret - gamma div)[theta] . pi`` over the simplex.

    Solved as a linear program; the dual prices give a certified duality gap.
    Returns ``(pi, value, gap)``.
    """
    A = np.asarray(regret, dtype=float) - gamma * np.asarray(div, dtype=float)
    N, K = A.shape
    # variables: pi (K) and t; minimise t s.t. A pi - t <= 0, sum pi = 1
    c = np.zeros(K + 1)
    c[-1] = 1.0
    A_ub = np.hstack([A, -np.ones((N, 1))])
    A_eq = np.concatenate([np.ones(K), [0.0]])[None, :]
    res = linprog(
        c, A_ub=A_ub, b_ub=np.zeros(N), A_eq=A_eq, b_eq=[1.0],
        bounds=[(0, None)] * K + [(None, None)], method="highs",
    )
    if res.status != 0:
        raise SolverError(f"E2D linear program failed: {res.message}")
    pi = np.clip(res.x[:K], 0.0, None)
    pi /= pi.sum()
    primal = float(np.max(A @ pi))
    y = np.clip(-res.ineqlin.marginals, 0.0, None)
    y = y / y.sum() if y.sum() > 0 else np.full(N, 1.0 / N)
    dual = float(np.min(y @ A))
    gap = primal - dual
    if gap > tol:
        raise SolverError(f"E2D did not reach duality gap {tol}: achieved {gap:.3g}")
    return pi, primal, gap


def e2d_policy(regret, div, gamma: float) -> PolicyDistribution:
    pi, _, _ = e2d_solve(regret, div, gamma)
    return PolicyDistribution(pi)


# -- schedules ---------------------------------------------------------------

def lambda_worst_case(K: int, N: int, T: int) -> float:
    return math.sqrt(math.log(N) / ((80 * K + 21 / 4) * T))


def lambda_first_order(K: int, N: int, L_star: float) -> float:
    cap = 1.0 / (250 * K + 54)
    if L_star <= 0:
        return cap
    return min(math.sqrt(5 * math.log(N) / ((500 * K + 108) * L_star)), cap)


def lambda_subgaussian(K: int, N: int, T: int, v: float) -> float:
    return math.sqrt(math.log(N) / ((0.25 + 20 * max(v, 1.0) * (1 + K)) * T))


def eta_subgaussian(v: float) -> float:
    return (1 + math.sqrt(1 - min(v, 1.0))) / (2 * v)


def mu_from_lambda(lam: float, variant: str = "worst_case", v: float = 1.0, sg_variant: str = "proof") -> float:
    """Trade-off ``mu`` paired with a schedule.

    For the sub-Gaussian schedule ``mu = 1 / (80 lam s)`` where ``s = max(v, 1)``
    for ``sg_variant="proof"`` (the default) and ``s = min(v, 1)`` for
    ``"theorem"``; the two coincide at ``v = 1``.
    """
    if lam <= 0:
        raise ValueError("mu is tied to a positive lambda")
    if variant in ("worst_case", "first_order"):
        return 1.0 / (10 * lam)
    if variant == "subgaussian":
        scale = max(v, 1.0) if sg_variant == "proof" else min(v, 1.0)
        return 1.0 / (80 * lam * scale)
    raise ValueError(f"unknown schedule variant {variant!r}")


# -- algorithm specifications --------------------------------------------------

KINDS = (
    "voids", "roids", "fgts", "thompson", "bayes_ids", "igw", "e2d",
    "uniform", "greedy", "voids_sg", "roids_sg",
)
LAMBDA_TAGS = ("auto-worst-case", "auto-first-order", "auto-subgaussian")
_OPTIMISTIC = ("voids", "roids", "fgts", "igw", "e2d")
_PLAIN = ("thompson", "bayes_ids", "greedy")
_SG = ("voids_sg", "roids_sg")


@dataclass(frozen=True)
class AlgorithmSpec:
    """Algorithm choice and its hyperparameters as written in a config.

    ``lam`` may be a number or one of the ``auto-*`` schedule tags; ``mu`` and
    ``gamma`` may be numbers or ``"auto"`` (derived from ``lam``).
    """

    kind: str
    eta: Optional[float] = None
    lam: Union[float, str, None] = None
    mu: Union[float, str, None] = None
    gamma: Union[float, str, None] = None
    v: float = 1.0
    L_star: Optional[float] = None
    sg_variant: str = "proof"
    label: Optional[str] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown algorithm kind {self.kind!r}")
        if isinstance(self.lam, str) and self.lam not in LAMBDA_TAGS:
            raise ValueError(f"lam must be a number or one of {LAMBDA_TAGS}")
        for name in ("mu", "gamma"):
            val = getattr(self, name)
            if isinstance(val, str) and val != "auto":
                raise ValueError(f"{name} must be a number or 'auto'")
        if self.sg_variant not in ("proof", "theorem"):
            raise ValueError("sg_variant must be 'proof' or 'theorem'")
        if self.eta is not None and self.eta <= 0:
            raise ValueError("eta must be positive")
        if self.kind in _OPTIMISTIC and self.eta is not None and not self.eta < 0.5:
            raise ValueError("optimistic Hellinger variants need eta in (0, 1/2)")
        if self.lam == "auto-first-order" and self.L_star is None:
            raise ValueError("the first-order schedule needs L_star")
        if self.v <= 0:
            raise ValueError("v must be positive")

    @property
    def name(self) -> str:
        return self.label or self.kind

    def to_dict(self) -> dict:
        return {k: v for k, v in asdict(self).items() if v is not None}

    @classmethod
    def from_dict(cls, doc: dict) -> "AlgorithmSpec":
        return cls(**doc)

    def resolve(self, model: ModelClass, T: int) -> "ResolvedAlgorithm":
        K, N = model.K, model.N
        kind = self.kind
        if kind in _SG and model.family != "gaussian":
            pass  # squared-loss gains are defined for every family
        if kind in ("voids", "roids", "bayes_ids") and model.family == "gaussian":
            raise ValueError(f"{kind} needs a bounded family; use {kind.split('_')[0]}_sg for Gaussian losses")
        if kind in _PLAIN:
            eta, lam = (1.0 if self.eta is None else self.eta), (self.lam or 0.0)
        elif kind == "uniform":
            eta, lam = 1.0, 0.0
        elif kind in _SG:
            eta = eta_subgaussian(self.v) if self.eta is None else self.eta
            lam = "auto-subgaussian" if self.lam is None else self.lam
        else:
            eta = 0.25 if self.eta is None else self.eta
            lam = "auto-worst-case" if self.lam is None else self.lam
        schedule = "worst_case"
        if lam == "auto-worst-case":
            lam = lambda_worst_case(K, N, T)
        elif lam == "auto-first-order":
            lam, schedule = lambda_first_order(K, N, self.L_star), "first_order"
        elif lam == "auto-subgaussian":
            lam, schedule = lambda_subgaussian(K, N, T, self.v), "subgaussian"
        lam = float(lam)
        if kind in _SG:
            schedule = "subgaussian"
        mu_default = mu_from_lambda(lam, schedule, self.v, self.sg_variant) if lam > 0 else None
        mu = mu_default if self.mu in (None, "auto") else float(self.mu)
        if kind in ("roids", "roids_sg") and mu is None:
            raise ValueError(f"{kind} needs mu (or a positive lambda to derive it)")
        gamma = self.gamma
        if kind in ("igw", "e2d"):
            if gamma in (None, "auto"):
                if mu_default is None:
                    raise ValueError(f"{kind} needs gamma (or a positive lambda to derive it)")
                gamma = mu_default / 8 if kind == "igw" else mu_default
            gamma = float(gamma)
        metric = "squared_loss" if (kind in _SG or model.family == "gaussian") else "hellinger"
        return ResolvedAlgorithm(self, kind, float(eta), lam, mu, gamma, metric)


@dataclass(frozen=True)
class ResolvedAlgorithm:
    spec: AlgorithmSpec
    kind: str
    eta: float
    lam: float
    mu: Optional[float]
    gamma: Optional[float]
    metric: str

    @property
    def uses_posterior(self) -> bool:
        return self.kind != "uniform"
