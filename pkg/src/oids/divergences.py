"""Loss distributions from four closed families and their exact divergences.

Every family has a fixed reference measure:

* ``Bernoulli`` / ``Discrete``: counting measure on the support,
* ``ZeroInflatedUniform``: a unit atom at 0 plus Lebesgue measure on (0, 1],
* ``Gaussian`` (unit variance): Lebesgue measure on the real line.

The squared Hellinger distance uses the 1/2-normalised convention, so it lies
in [0, 1].  Bernoulli is the only family that may be mixed with another one
(it is promoted to a Discrete law on {0, 1}).

The bottom of the module holds array kernels used by the simulation engine.
They take parameter arrays with arbitrary leading batch dimensions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

_SUM_TOL = 1e-12
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


class FamilyMismatchError(ValueError):
    """Raised when two distributions cannot be compared or mixed."""


@dataclass(frozen=True)
class Bernoulli:
    p: float

    family = "bernoulli"

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"Bernoulli mean must lie in [0, 1], got {self.p}")

    @property
    def mean(self) -> float:
        return float(self.p)

    def quantile(self, u: float) -> float:
        return 1.0 if u < self.p else 0.0

    def as_discrete(self) -> "Discrete":
        return Discrete((0.0, 1.0), (1.0 - self.p, self.p))


@dataclass(frozen=True)
class Discrete:
    """Finite law on distinct points of [0, 1]; zero-mass points are dropped."""

    support: tuple
    probs: tuple

    family = "discrete"

    def __post_init__(self):
        support = np.asarray(self.support, dtype=float).ravel()
        probs = np.asarray(self.probs, dtype=float).ravel()
        if support.shape != probs.shape or support.size == 0:
            raise ValueError("support and probs must be non-empty and of equal length")
        if np.any(probs < 0) or abs(probs.sum() - 1.0) > _SUM_TOL:
            raise ValueError("probs must be nonnegative and sum to 1")
        if np.any((support < 0) | (support > 1)):
            raise ValueError("support values must lie in [0, 1]")
        if np.unique(support).size != support.size:
            raise ValueError("support values must be distinct")
        order = np.argsort(support)
        support, probs = support[order], probs[order]
        keep = probs > 0
        object.__setattr__(self, "support", tuple(support[keep].tolist()))
        object.__setattr__(self, "probs", tuple(probs[keep].tolist()))

    @classmethod
    def point(cls, value: float) -> "Discrete":
        return cls((float(value),), (1.0,))

    @property
    def mean(self) -> float:
        return float(np.dot(self.support, self.probs))

    def prob_of(self, value: float) -> float:
        for v, p in zip(self.support, self.probs):
            if v == value:
                return p
        return 0.0

    def quantile(self, u: float) -> float:
        cum = np.cumsum(self.probs)
        cum /= cum[-1]
        idx = int(np.searchsorted(cum, u, side="right"))
        return self.support[min(idx, len(self.support) - 1)]


@dataclass(frozen=True)
class ZeroInflatedUniform:
    """Mass ``q`` at zero, the remaining ``1 - q`` spread uniformly on (0, 1]."""

    q: float

    family = "ziu"

    def __post_init__(self):
        if not 0.0 <= self.q <= 1.0:
            raise ValueError(f"atom mass must lie in [0, 1], got {self.q}")

    @property
    def mean(self) -> float:
        return (1.0 - self.q) / 2.0

    def quantile(self, u: float) -> float:
        if u < self.q:
            return 0.0
        return (u - self.q) / (1.0 - self.q)


@dataclass(frozen=True)
class Gaussian:
    """Unit-variance Gaussian."""

    m: float

    family = "gaussian"

    @property
    def mean(self) -> float:
        return float(self.m)


LossDistribution = Union[Bernoulli, Discrete, ZeroInflatedUniform, Gaussian]


def _pair(P, Q):
    """Bring two laws to a common family, promoting Bernoulli when needed."""
    if P.family == Q.family:
        return P, Q
    if {P.family, Q.family} == {"bernoulli", "discrete"}:
        P = P.as_discrete() if P.family == "bernoulli" else P
        Q = Q.as_discrete() if Q.family == "bernoulli" else Q
        return P, Q
    raise FamilyMismatchError(f"cannot compare {P.family} with {Q.family}")


def _aligned(P: Discrete, Q: Discrete):
    grid = sorted(set(P.support) | set(Q.support))
    p = np.array([P.prob_of(v) for v in grid])
    q = np.array([Q.prob_of(v) for v in grid])
    return p, q


def _two_point_hellinger(a: float, b: float) -> float:
    return float(two_point_hellinger(a, b))


def hellinger_sq(P: LossDistribution, Q: LossDistribution) -> float:
    """Squared Hellinger distance, ``1/2 * int (sqrt(dP) - sqrt(dQ))^2``."""
    P, Q = _pair(P, Q)
    if P.family == "bernoulli":
        return _two_point_hellinger(P.p, Q.p)
    if P.family == "ziu":
        # the continuous parts are constant densities on (0, 1], so only the atom matters
        return _two_point_hellinger(P.q, Q.q)
    if P.family == "gaussian":
        return -math.expm1(-((P.m - Q.m) ** 2) / 8.0)
    p, q = _aligned(P, Q)
    return float(discrete_hellinger(p, q))


def _xlogy_ratio(a: float, b: float) -> float:
    if a == 0.0:
        return 0.0
    if b == 0.0:
        return math.inf
    return a * math.log(a / b)


def kl(P: LossDistribution, Q: LossDistribution) -> float:
    """Relative entropy KL(P || Q); ``math.inf`` when Q does not dominate P."""
    P, Q = _pair(P, Q)
    if P.family == "bernoulli":
        return _xlogy_ratio(P.p, Q.p) + _xlogy_ratio(1.0 - P.p, 1.0 - Q.p)
    if P.family == "ziu":
        return _xlogy_ratio(P.q, Q.q) + _xlogy_ratio(1.0 - P.q, 1.0 - Q.q)
    if P.family == "gaussian":
        return (P.m - Q.m) ** 2 / 2.0
    p, q = _aligned(P, Q)
    return float(sum(_xlogy_ratio(a, b) for a, b in zip(p, q)))


def total_variation(P: LossDistribution, Q: LossDistribution) -> float:
    P, Q = _pair(P, Q)
    if P.family == "bernoulli":
        return abs(P.p - Q.p)
    if P.family == "ziu":
        # 1/2 (|q1 - q2| on the atom + |q1 - q2| over the unit interval)
        return abs(P.q - Q.q)
    if P.family == "gaussian":
        return math.erf(abs(P.m - Q.m) / (2.0 * math.sqrt(2.0)))
    p, q = _aligned(P, Q)
    return 0.5 * float(np.abs(p - q).sum())


def mixture(dists: Sequence[LossDistribution], weights) -> LossDistribution:
    """Mixture of same-family laws; the result stays in the family."""
    weights = np.asarray(weights, dtype=float)
    if len(dists) == 0 or len(dists) != weights.size:
        raise ValueError("need one weight per distribution")
    if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-10:
        raise ValueError("weights must form a probability vector")
    families = {d.family for d in dists}
    if "gaussian" in families:
        raise FamilyMismatchError(
            "Gaussian mixtures leave the family; use squared-loss gains "
            "(gaussian_surrogate_gain) instead of predictive mixtures"
        )
    if families == {"bernoulli"}:
        return Bernoulli(float(np.clip(np.dot(weights, [d.p for d in dists]), 0.0, 1.0)))
    if families == {"ziu"}:
        return ZeroInflatedUniform(float(np.clip(np.dot(weights, [d.q for d in dists]), 0.0, 1.0)))
    if families <= {"bernoulli", "discrete"}:
        dists = [d.as_discrete() if d.family == "bernoulli" else d for d in dists]
        grid = sorted(set().union(*(d.support for d in dists)))
        probs = np.zeros(len(grid))
        for w, d in zip(weights, dists):
            probs += w * np.array([d.prob_of(v) for v in grid])
        probs /= probs.sum()
        return Discrete(tuple(grid), tuple(probs.tolist()))
    raise FamilyMismatchError(f"cannot mix families {sorted(families)}")


def log_density(P: LossDistribution, L: float) -> float:
    """Log density of ``L`` under the family's reference measure (``-inf`` if zero)."""
    if P.family != "gaussian" and not 0.0 <= L <= 1.0:
        raise ValueError(f"loss {L} outside [0, 1]")
    if P.family == "bernoulli":
        mass = P.p if L == 1.0 else (1.0 - P.p if L == 0.0 else 0.0)
    elif P.family == "discrete":
        mass = P.prob_of(L)
    elif P.family == "ziu":
        mass = P.q if L == 0.0 else 1.0 - P.q
    else:
        return -((L - P.m) ** 2) / 2.0 - _LOG_SQRT_2PI
    return math.log(mass) if mass > 0 else -math.inf


def sample(P: LossDistribution, rng: np.random.Generator) -> float:
    if P.family == "gaussian":
        return P.m + float(rng.standard_normal())
    return P.quantile(float(rng.random()))


# ---------------------------------------------------------------------------
# Array kernels.  ``p`` arrays hold Bernoulli means or ZIU atoms; ``probs``
# arrays hold Discrete masses over a shared support grid on the last axis.
# ---------------------------------------------------------------------------

def _root_gap_sq(a, b):
    """``(sqrt(a) - sqrt(b))^2`` evaluated as ``(a - b)^2 / (sqrt(a) + sqrt(b))^2``.

    The rationalised form keeps full relative accuracy when ``a`` and ``b``
    nearly coincide, where ``1 - sqrt(ab) - ...`` cancels catastrophically.
    That matters once a posterior concentrates and the gains become tiny.
    """
    s = np.sqrt(a) + np.sqrt(b)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(s > 0, ((a - b) / np.where(s > 0, s, 1.0)) ** 2, 0.0)


def two_point_hellinger(a, b):
    """Elementwise ``1 - sqrt(ab) - sqrt((1-a)(1-b))`` for two-point laws."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return 0.5 * (_root_gap_sq(a, b) + _root_gap_sq(1.0 - a, 1.0 - b))


def discrete_hellinger(P, Q):
    """Hellinger between Discrete laws on a shared grid (last axis)."""
    P = np.asarray(P, dtype=float)
    Q = np.asarray(Q, dtype=float)
    return 0.5 * _root_gap_sq(P, Q).sum(axis=-1)


def _xlogy_over(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(a > 0, a * (np.log(a) - np.log(b)), 0.0)
    return np.where((a > 0) & (b == 0), np.inf, out)


def two_point_kl(a, b):
    return _xlogy_over(a, b) + _xlogy_over(1.0 - np.asarray(a), 1.0 - np.asarray(b))


def discrete_kl(P, Q):
    return _xlogy_over(P, Q).sum(axis=-1)
