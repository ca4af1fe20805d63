import math

import numpy as np
import pytest

from oids.catalog import make_revealing_action, make_sparse_linear, revelatory_zero_post_identification
from oids.models import ModelClass
from oids.objectives import (
    NoInformationError,
    Oracle,
    RoundObjectives,
    adec,
    bayes_info_gain,
    dec_matrices,
    dec_value,
    diagnostics_ue_og,
    gaussian_surrogate_gain,
    information_ratio,
    surrogate_gain,
    surrogate_gains,
    true_gain,
    worst_case_dec,
)
from oids.posterior import OptimisticPosterior

from conftest import random_model, random_weights


def two_param(rows, family="bernoulli", weights=(0.5, 0.5)):
    table = np.asarray(rows, dtype=float)[:, None, :]
    model = ModelClass(tuple(range(table.shape[0])), ("x",), table.shape[2], table, family)
    return OptimisticPosterior.from_weights(model, weights)


class TestSurrogateGain:
    def test_revealing_action(self):
        post = OptimisticPosterior.uniform(make_revealing_action(4).model)
        g = surrogate_gain(post, 0)
        assert g[0] == pytest.approx(0.5, abs=1e-12)
        other = 0.25 * (1 - math.sqrt(0.25)) + 0.75 * (1 - math.sqrt(0.75))
        assert g[1:] == pytest.approx(np.full(4, other), abs=1e-12)
        assert other == pytest.approx(0.225481, abs=1e-6)

    def test_revealing_action_general_k(self):
        for K in (2, 5, 8):
            g = surrogate_gain(OptimisticPosterior.uniform(make_revealing_action(K).model), 0)
            assert g[0] == pytest.approx(1 - math.sqrt(1 / K), abs=1e-12)

    def test_sparse_linear(self):
        env = make_sparse_linear(4)
        g = surrogate_gain(OptimisticPosterior.uniform(env.model), 0)
        sizes = np.array([bin(m).count("1") for m in range(1, 16)])
        f = sizes / 4
        assert g == pytest.approx(1 - f**1.5 - (1 - f) ** 1.5, abs=1e-12)
        assert g[sizes == 2] == pytest.approx(0.292893, abs=1e-6)

    def test_point_mass_has_no_information(self):
        post = two_param([[0.2, 0.3], [0.6, 0.1]], weights=(1.0, 0.0))
        assert surrogate_gain(post, 0) == pytest.approx([0.0, 0.0], abs=1e-15)

    def test_gaussian_rejected(self):
        post = two_param([[0.2, 0.3], [0.6, 0.1]], "gaussian")
        with pytest.raises(ValueError):
            surrogate_gain(post, 0)


class TestGaussianGain:
    def test_values(self):
        assert gaussian_surrogate_gain(two_param([[0.0, 0.2], [1.0, 0.6]], "gaussian"), 0)[0] == pytest.approx(0.25)
        post = two_param([[0.2, 0.0], [0.6, 0.0]], "gaussian", weights=(0.25, 0.75))
        assert gaussian_surrogate_gain(post, 0)[0] == pytest.approx(0.03)

    def test_point_mass(self):
        post = two_param([[0.2, 0.0], [0.6, 0.0]], "gaussian", weights=(1.0, 0.0))
        assert gaussian_surrogate_gain(post, 0) == pytest.approx([0.0, 0.0])


class TestTrueGain:
    def test_half_hellinger(self):
        post = two_param([[0.25, 0.5], [0.75, 0.5]])
        oracle = Oracle(post.model, 0)
        assert true_gain(post, oracle, 0)[0] == pytest.approx(0.0669873, abs=1e-7)

    def test_point_mass_on_truth(self):
        post = two_param([[0.25, 0.5], [0.75, 0.5]], weights=(1.0, 0.0))
        assert Oracle(post.model, 0).true_gain(post, 0) == pytest.approx([0.0, 0.0])

    def test_disjoint_point_masses(self):
        model = make_revealing_action(3).model
        post = OptimisticPosterior.from_weights(model, [0.0, 0.5, 0.5])
        assert Oracle(model, 0).true_gain(post, 0)[0] == pytest.approx(1.0)

    def test_oracle_from_env(self):
        env = make_revealing_action(3)
        with pytest.raises(ValueError):
            Oracle.from_env(env)
        assert Oracle.from_env(env, 2).theta0 == 2


class TestRatioAndAdec:
    def test_information_ratio(self):
        assert information_ratio([1, 2], [1, 4], [1, 0]) == pytest.approx(1.0)
        assert information_ratio([1, 2], [1, 4], [2 / 3, 1 / 3]) == pytest.approx(8 / 9)
        assert information_ratio([0, 2], [0, 4], [1, 0]) == 0.0

    def test_no_information(self):
        with pytest.raises(NoInformationError):
            information_ratio([1, 2], [0, 0], [0.5, 0.5])

    def test_adec(self):
        assert adec([1, 2], [1, 4], [0, 1], 0.5) == pytest.approx(0.0)
        assert adec([1, 2], [1, 4], [0.3, 0.7], 0.0) == pytest.approx(1.7)

    def test_vir_recovers_ir(self, rng):
        for _ in range(20):
            d, g = rng.random(4), rng.random(4) + 0.05
            pi = rng.dirichlet(np.ones(4))
            ir = information_ratio(d, g, pi)
            mus = np.logspace(-3, 3, 4001)
            c = max(4 * mu * adec(d, g, pi, mu) for mu in mus)
            assert c <= ir + 1e-12
            assert c == pytest.approx(ir, rel=0.01)


class TestDec:
    def test_revelatory_zero_closed_form(self):
        regret, div = revelatory_zero_post_identification(3, 0.1, theta0=0)
        assert dec_value(regret, div, [2 / 3, 1 / 6, 1 / 6], 0.05) == pytest.approx(1 / 30, abs=1e-12)
        assert dec_value(regret, div, [1, 0, 0], 0.05) == pytest.approx(0.05, abs=1e-12)

    def test_closed_form_matches_on_random_policies(self, rng):
        K, delta, gamma = 4, 0.1, 0.03
        regret, div = revelatory_zero_post_identification(K, delta, theta0=1)
        for _ in range(50):
            pi = rng.dirichlet(np.ones(K))
            others = np.delete(pi, 1)
            closed = max(delta * (1 - others.min()) - gamma, delta * (1 - pi[1]))
            assert dec_value(regret, div, pi, gamma) == pytest.approx(closed, abs=1e-12)

    def test_singleton_like_class(self):
        model = ModelClass((0, 1), ("x",), 2, [[[0.1, 0.5]], [[0.1, 0.5]]])
        post = OptimisticPosterior.uniform(model)
        ref = [post.predictive(0, a) for a in range(2)]
        assert worst_case_dec(model, 0, [1, 0], 0.0, ref) == 0.0

    def test_gaussian_uses_squared_distance(self):
        model = ModelClass((0, 1), ("x",), 2, [[[0.1, 0.5]], [[0.3, 0.5]]], "gaussian")
        from oids.divergences import Gaussian

        regret, div = dec_matrices(model, 0, [Gaussian(0.2), Gaussian(0.5)])
        assert div[:, 0] == pytest.approx([0.01, 0.01])

    def test_adec_below_dec(self, rng):
        for _ in range(100):
            model = random_model(rng)
            post = OptimisticPosterior.from_weights(model, random_weights(rng, model.N))
            ro = RoundObjectives.compute(post, 0)
            ref = [post.predictive(0, a) for a in range(model.K)]
            pi = rng.dirichlet(np.ones(model.K))
            mu = float(rng.uniform(0.01, 10))
            assert ro.adec(pi, mu) <= worst_case_dec(model, 0, pi, mu, ref) + 1e-9


class TestBayesInfoGain:
    def test_point_mass(self):
        assert bayes_info_gain(two_param([[0.3, 0.2], [0.6, 0.1]], weights=(1, 0)), 0) == pytest.approx([0, 0])

    def test_disjoint_points_give_log2(self):
        model = make_revealing_action(2).model
        post = OptimisticPosterior.uniform(model)
        assert bayes_info_gain(post, 0) == pytest.approx([math.log(2)] * 3)

    def test_identical_components(self):
        assert bayes_info_gain(two_param([[0.5, 0.2], [0.5, 0.1]]), 0)[0] == pytest.approx(0.0)


class TestUeOg:
    def test_point_mass(self):
        post = two_param([[0.3, 0.2], [0.6, 0.1]], weights=(1, 0))
        assert diagnostics_ue_og(post, Oracle(post.model, 0), 0, [0.5, 0.5]) == pytest.approx((0.0, 0.0))

    def test_two_parameters(self):
        post = two_param([[0.8, 0.8], [0.2, 0.2]])
        ue, og = Oracle(post.model, 0).ue_og(post, 0, [1.0, 0.0])
        assert ue == pytest.approx(0.3) and og == pytest.approx(-0.3)


class TestRoundObjectives:
    def test_linearity_identities(self, rng):
        for _ in range(50):
            model = random_model(rng)
            post = OptimisticPosterior.from_weights(model, random_weights(rng, model.N))
            ro = RoundObjectives.compute(post, 0)
            assert np.all(ro.delta_bar >= -1e-15) and np.all(ro.gain_bar >= 0)
            pi = rng.dirichlet(np.ones(model.K))
            assert ro.regret(pi) == pytest.approx(pi @ ro.lbar - ro.lstar_bar, abs=1e-10)
            p2 = rng.dirichlet(np.ones(model.K))
            t = rng.random()
            assert ro.gain(t * pi + (1 - t) * p2) == pytest.approx(t * ro.gain(pi) + (1 - t) * ro.gain(p2))

    @pytest.mark.parametrize("family", ["bernoulli", "ziu", "discrete"])
    def test_surrogate_vs_true_gain(self, rng, family):
        for _ in range(100):
            model = random_model(rng, family)
            post = OptimisticPosterior.from_weights(model, random_weights(rng, model.N))
            oracle = Oracle(model, int(rng.integers(model.N)))
            ro = RoundObjectives.compute(post, 0, oracle=oracle)
            pi = rng.dirichlet(np.ones(model.K))
            assert ro.gain(pi) <= 4 * (pi @ ro.true_gain) + 1e-10

    def test_squared_loss_pair(self, rng):
        for _ in range(100):
            model = random_model(rng, "gaussian")
            post = OptimisticPosterior.from_weights(model, random_weights(rng, model.N))
            ro = RoundObjectives.compute(post, 0, oracle=Oracle(model, int(rng.integers(model.N))))
            assert ro.gain_metric == "squared_loss"
            assert np.all(ro.gain_bar <= 4 * ro.true_gain + 1e-10)

    def test_batch_gains_match_object_api(self, rng):
        model = random_model(rng, C=3)
        W = np.array([random_weights(rng, model.N) for _ in range(4)])
        ctx = [0, 2, 1, 2]
        batch = surrogate_gains(model, W, ctx)
        for r in range(4):
            post = OptimisticPosterior.from_weights(model, W[r])
            assert batch[r] == pytest.approx(surrogate_gain(post, ctx[r]), abs=1e-14)
