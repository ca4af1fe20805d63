"""Shared fixtures, independent oracles and the acceptance summary hook."""
import math

import numpy as np
import pytest
from scipy import integrate

from oids.models import ModelClass

# -- acceptance summary ------------------------------------------------------------

ACCEPTANCE_RESULTS = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_RESULTS):
        passed, detail = ACCEPTANCE_RESULTS[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if passed else 'FAIL'}  {detail}")


# -- independent oracles ---------------------------------------------------------


def hellinger_by_integration(P, Q):
    """Squared Hellinger distance by direct integration against the family's reference measure."""
    fam = P.family
    if fam in ("bernoulli", "discrete"):
        def mass(D, v):
            if D.family == "bernoulli":
                return D.p if v == 1.0 else (1 - D.p if v == 0.0 else 0.0)
            return dict(zip(D.support, D.probs)).get(v, 0.0)

        pts = {0.0, 1.0} if fam == "bernoulli" else set(P.support) | set(Q.support)
        return 0.5 * sum((math.sqrt(mass(P, v)) - math.sqrt(mass(Q, v))) ** 2 for v in pts)
    if fam == "ziu":
        atom = 0.5 * (math.sqrt(P.q) - math.sqrt(Q.q)) ** 2
        cont, _ = integrate.quad(
            lambda x: 0.5 * (math.sqrt(1 - P.q) - math.sqrt(1 - Q.q)) ** 2, 0.0, 1.0
        )
        return atom + cont
    phi = lambda x, m: math.exp(-((x - m) ** 2) / 2) / math.sqrt(2 * math.pi)  # noqa: E731
    lo, hi = min(P.m, Q.m) - 40, max(P.m, Q.m) + 40
    val, _ = integrate.quad(
        lambda x: 0.5 * (math.sqrt(phi(x, P.m)) - math.sqrt(phi(x, Q.m))) ** 2,
        lo, hi, points=[P.m, Q.m], epsabs=1e-13, epsrel=1e-12, limit=200,
    )
    return val


def two_action_grid_ir(delta, gain, step=1e-3):
    """Smallest information ratio over singletons and two-action mixtures on a q-grid."""
    delta = np.asarray(delta, float)
    gain = np.asarray(gain, float)
    K = delta.size
    q = np.linspace(0.0, 1.0, int(round(1 / step)) + 1)
    best = math.inf
    for i in range(K):
        for j in range(i, K):
            n = q * delta[i] + (1 - q) * delta[j]
            d = q * gain[i] + (1 - q) * gain[j]
            with np.errstate(divide="ignore", invalid="ignore"):
                v = np.where(d > 0, n * n / d, np.inf)
            v = np.where(n == 0, 0.0, v)
            best = min(best, float(v.min()))
    return best


def simplex_grid(K, step):
    m = int(round(1 / step))
    pts = [c for c in _compositions(m, K)]
    return np.array(pts, dtype=float) / m


def _compositions(m, K):
    if K == 1:
        yield (m,)
        return
    for first in range(m + 1):
        for rest in _compositions(m - first, K - 1):
            yield (first,) + rest


def random_model(rng, family="bernoulli", N=None, K=None, C=1):
    N = N or int(rng.integers(2, 8))
    K = K or int(rng.integers(2, 7))
    table = rng.random((N, C, K))
    if family == "ziu":
        table *= 0.5
    return ModelClass(tuple(range(N)), tuple(range(C)), K, table, family=family)


def random_weights(rng, N, sparse=True):
    w = rng.dirichlet(np.full(N, 0.5))
    if sparse and N > 2 and rng.random() < 0.3:
        w[rng.integers(N)] = 0.0
        w /= w.sum()
    return w


@pytest.fixture
def rng():
    return np.random.Generator(np.random.PCG64(20240601))
