import numpy as np
import pandas as pd
import pytest

from iblab import gaussian_core as gc
from iblab.dvib_linear import (
    ConstantColumn,
    LinearDvibParams,
    NonFiniteInput,
    copula_transform,
    dvib_curve,
    dvib_gradient,
    dvib_objective,
    dvib_train,
)
from iblab.gaussian_ib import gib_analytic, projected_joint
from iblab.optim import central_difference


def random_params(seed, x_dim=2, y_dim=2, t_dim=2):
    rng = np.random.default_rng(seed)
    return LinearDvibParams(
        rng.normal(size=(t_dim, x_dim)),
        rng.normal(scale=0.3, size=t_dim),
        rng.normal(size=(y_dim, t_dim)),
        rng.normal(scale=0.3, size=y_dim),
    )


class TestParams:
    def test_vector_round_trip(self):
        params = random_params(0, x_dim=3, y_dim=1, t_dim=2)
        restored = LinearDvibParams.from_vector(params.to_vector(), 3, 1, 2)
        np.testing.assert_array_equal(restored.to_vector(), params.to_vector())

    def test_dims(self):
        params = random_params(0, x_dim=3, y_dim=1, t_dim=2)
        assert (params.x_dim, params.y_dim, params.t_dim) == (3, 1, 2)

    @pytest.mark.parametrize(
        "args",
        [
            ([[1.0]], [0.0, 0.0], [[1.0]], [0.0]),
            ([[1.0]], [0.0], [[1.0, 1.0]], [0.0]),
            ([[1.0]], [0.0], [[1.0]], [0.0, 0.0]),
            ([[1.0]], [np.inf], [[1.0]], [0.0]),
        ],
        ids=["enc_logvar", "dec_weight", "dec_logvar", "non_finite"],
    )
    def test_invalid(self, args):
        with pytest.raises(ValueError):
            LinearDvibParams(*args)

    def test_initial(self):
        params = LinearDvibParams.initial(2, 1, 2, seed=0, y_var=[3.0])
        np.testing.assert_array_equal(params.enc_logvar, 0.0)
        np.testing.assert_allclose(params.dec_logvar, np.log(3.0))

    def test_variances_are_clipped(self):
        params = LinearDvibParams([[1.0]], [40.0], [[1.0]], [-40.0])
        assert params.enc_cov[0, 0] == pytest.approx(1e8)
        assert params.dec_cov[0, 0] == pytest.approx(1e-8)


class TestObjective:
    def test_terms(self, rho05):
        params = LinearDvibParams([[1.0]], [0.0], [[0.5]], [0.0])
        terms = dvib_objective(params, rho05, beta=2.0)
        assert terms.i_xt == pytest.approx(0.5 * np.log(2))
        assert terms.value == pytest.approx(terms.i_xt - 2.0 * terms.i_ty_bound)

    def test_optimal_decoder_attains_mi(self, rho05):
        # With T = X + ξ the Bayes decoder of Y is 0.25·T with variance 0.875.
        params = LinearDvibParams([[1.0]], [0.0], [[0.25]], [np.log(0.875)])
        full = gc.GaussianJoint.from_blocks(
            ["X", "Y", "T"], [[1.0, 0.5, 1.0], [0.5, 1.0, 0.5], [1.0, 0.5, 2.0]]
        )
        terms = dvib_objective(params, rho05, beta=1.0)
        assert terms.i_ty_bound == pytest.approx(gc.mutual_information(full, "T", "Y"))

    def test_bound_never_exceeds_mi(self, two_pairs):
        for seed in range(5):
            params = random_params(seed)
            full = projected_joint(two_pairs, params.enc_weight, noise_cov=params.enc_cov)
            terms = dvib_objective(params, two_pairs, beta=1.0)
            assert terms.i_ty_bound <= gc.mutual_information(full, "T", "Y") + 1e-12

    def test_drop_hy(self, rho05):
        params = random_params(1, 1, 1, 1)
        with_hy = dvib_objective(params, rho05, beta=1.0)
        without = dvib_objective(params, rho05, beta=1.0, drop_hy=True)
        assert with_hy.i_ty_bound - without.i_ty_bound == pytest.approx(gc.entropy(rho05, "Y"))

    def test_standard_prior_is_an_upper_bound(self, two_pairs):
        params = random_params(2)
        marginal = dvib_objective(params, two_pairs, beta=1.0, prior="marginal")
        standard = dvib_objective(params, two_pairs, beta=1.0, prior="standard")
        assert standard.i_xt >= marginal.i_xt

    def test_unknown_prior(self, rho05):
        with pytest.raises(ValueError):
            dvib_objective(random_params(0, 1, 1, 1), rho05, 1.0, prior="flat")

    def test_dimension_mismatch(self, rho05):
        with pytest.raises(ValueError):
            dvib_objective(random_params(0), rho05, 1.0)



class TestGradient:
    @pytest.mark.parametrize("prior", ["marginal", "standard"])
    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_matches_finite_differences(self, two_pairs, prior, seed):
        params = random_params(seed)

        def value(theta):
            p = LinearDvibParams.from_vector(theta, 2, 2, 2)
            return dvib_objective(p, two_pairs, 3.0, prior).value

        numeric = central_difference(value, params.to_vector())
        analytic = dvib_gradient(params, two_pairs, 3.0, prior)
        np.testing.assert_allclose(analytic, numeric, atol=1e-6)

    def test_clipped_logvar_has_zero_gradient(self, rho05):
        params = LinearDvibParams([[1.0]], [30.0], [[0.5]], [0.0])
        grad = dvib_gradient(params, rho05, 2.0)
        assert grad[1] == 0.0


class TestTrain:
    def test_reaches_gib_optimum(self, rho05):
        result = dvib_train(rho05, 8.0, seed=0)
        assert result.converged
        assert result.gradient_ok
        assert result.value == pytest.approx(gib_analytic(rho05, 8.0).objective, abs=1e-4)

    def test_trace_is_non_increasing(self, rho05):
        result = dvib_train(rho05, 8.0, seed=3, max_iter=200)
        assert np.all(np.diff(result.trace) <= 1e-12)

    def test_deterministic(self, two_pairs):
        first = dvib_train(two_pairs, 5.0, seed=1, max_iter=100)
        second = dvib_train(two_pairs, 5.0, seed=1, max_iter=100)
        np.testing.assert_array_equal(first.params.to_vector(), second.params.to_vector())

    def test_t_dim(self, two_pairs):
        result = dvib_train(two_pairs, 5.0, t_dim=1, max_iter=50)
        assert result.params.enc_weight.shape == (1, 2)

    @pytest.mark.parametrize(
        "kwargs",
        [{"lr": 0.0}, {"t_dim": 0}, {"prior": "flat"}],
        ids=["lr", "t_dim", "prior"],
    )
    def test_invalid(self, rho05, kwargs):
        with pytest.raises(ValueError):
            dvib_train(rho05, 1.0, **kwargs)


class TestAgreesWithGib:
    @pytest.mark.parametrize("beta", [5.0, 6.0, 8.0, 10.0, 20.0])
    def test_information_coordinates(self, rho05, beta):
        result = dvib_train(rho05, beta, seed=0)
        analytic = gib_analytic(rho05, beta)
        assert result.i_xt == pytest.approx(analytic.i_xt, abs=1e-3)
        assert result.i_ty_bound == pytest.approx(analytic.i_ty, abs=1e-3)

    def test_rate_at_beta8(self, rho05):
        assert dvib_train(rho05, 8.0, seed=0).i_xt == pytest.approx(0.4236, abs=1e-3)

    def test_collapse_below_critical_beta(self, rho05):
        assert dvib_train(rho05, 0.5, seed=0).i_xt < 1e-4

    def test_seed_independent(self, rho05):
        first = dvib_train(rho05, 8.0, seed=0)
        second = dvib_train(rho05, 8.0, seed=7)
        assert first.i_xt == pytest.approx(second.i_xt, abs=1e-5)
        assert first.i_ty_bound == pytest.approx(second.i_ty_bound, abs=1e-5)


def test_dvib_curve(rho05):
    df = dvib_curve(rho05, [1.0, 8.0], seed=0, max_iter=500)
    assert list(df.columns) == ["beta", "i_xt", "i_ty_bound", "converged"]
    assert df["beta"].tolist() == [1.0, 8.0]


class TestCopula:
    def test_ranks_to_quantiles(self):
        result = copula_transform(np.array([2.0, -1.0, 0.5]))
        np.testing.assert_allclose(result[:, 0], [0.6744897502, -0.6744897502, 0.0], atol=1e-9)

    def test_invariant_to_monotone_maps(self):
        rng = np.random.default_rng(0)
        data = rng.normal(size=(50, 2))
        np.testing.assert_array_equal(copula_transform(data), copula_transform(np.exp(data)))

    def test_ties_share_average_rank(self):
        result = copula_transform([1.0, 1.0, 2.0])
        assert result[0, 0] == result[1, 0]

    def test_dataframe(self):
        df = pd.DataFrame({"X1": [1.0, 2.0, 3.0], "Y1": [3.0, 1.0, 2.0]})
        assert copula_transform(df).shape == (3, 2)

    @pytest.mark.parametrize(
        "data, error",
        [
            ([[1.0, 2.0], [np.nan, 3.0]], NonFiniteInput),
            ([[1.0, 2.0], [1.0, 3.0]], ConstantColumn),
            ([[1.0, 2.0]], ValueError),
        ],
        ids=["nan", "constant", "one_row"],
    )
    def test_invalid(self, data, error):
        with pytest.raises(error):
            copula_transform(data)
