import numpy as np
import pytest

from iblab import gaussian_core as gc
from iblab.gaussian_core import DegenerateCovariance, GaussianJoint
from iblab.gaussian_ib import (
    canonical_correlations,
    gib_analytic,
    gib_curve,
    gib_eigen,
    gib_gradient,
    gib_numeric,
    gib_objective,
    logdet_identity_gap,
    projected_joint,
    sparse_gib,
    sparse_objective,
)
from iblab.optim import central_difference


class TestProjectedJoint:
    def test_blocks(self, rho05):
        full = projected_joint(rho05, [[2.0]])
        assert full.names == ("X", "Y", "T")
        assert full.sub_cov("T")[0, 0] == pytest.approx(5.0)
        assert full.sub_cov("T", "Y")[0, 0] == pytest.approx(1.0)

    def test_noise_cov(self, rho05):
        full = projected_joint(rho05, [[1.0]], noise_cov=[[0.25]])
        assert full.sub_cov("T")[0, 0] == pytest.approx(1.25)

    def test_markov_chain_holds(self, two_pairs):
        full = projected_joint(two_pairs, np.ones((1, 2)))
        assert gc.conditional_mutual_information(full, "T", "Y", "X") == pytest.approx(0.0, abs=1e-10)

    def test_shape_mismatch(self, rho05):
        with pytest.raises(ValueError):
            projected_joint(rho05, np.ones((1, 2)))


class TestEigen:
    def test_rho05(self, rho05):
        lam, vecs = gib_eigen(rho05)
        np.testing.assert_allclose(lam, [0.75])
        assert abs(vecs[0, 0]) == pytest.approx(1.0)

    def test_two_pairs(self, two_pairs):
        lam, vecs = gib_eigen(two_pairs)
        np.testing.assert_allclose(lam, [0.36, 0.91])
        sigma_x = two_pairs.sub_cov("X")
        np.testing.assert_allclose(vecs.T @ sigma_x @ vecs, np.eye(2), atol=1e-12)

    def test_canonical_correlations(self, two_pairs):
        np.testing.assert_allclose(canonical_correlations(two_pairs), [0.8, 0.3])

    def test_deterministic_x(self):
        joint = GaussianJoint.from_json_file("tests/data/degenerate.json")
        with pytest.raises(DegenerateCovariance):
            gib_eigen(joint)


class TestAnalytic:
    def test_rho05_beta8(self, rho05):
        sol = gib_analytic(rho05, 8.0)
        assert sol.a[0, 0] ** 2 == pytest.approx(4.0 / 3.0)
        assert sol.i_xt == pytest.approx(0.5 * np.log(7 / 3))
        assert sol.i_ty == pytest.approx(0.5 * np.log(7 / 6))
        assert sol.critical_betas == pytest.approx([4.0])
        assert sol.objective == pytest.approx(sol.i_xt - 8.0 * sol.i_ty)

    @pytest.mark.parametrize("beta", [0.5, 2.0, 4.0], ids=["small", "below", "critical"])
    def test_trivial_below_critical(self, rho05, beta):
        sol = gib_analytic(rho05, beta)
        assert sol.rank == 0
        assert sol.i_xt == pytest.approx(0.0)
        assert sol.i_ty == pytest.approx(0.0)

    def test_rank_switches_on(self, two_pairs):
        assert gib_analytic(two_pairs, 5.0).rank == 1
        assert gib_analytic(two_pairs, 20.0).rank == 2

    def test_independent_never_switches_on(self):
        joint = GaussianJoint.from_blocks(["X", "Y"], np.eye(2))
        sol = gib_analytic(joint, 100.0)
        assert sol.critical_betas == [float("inf")]
        assert sol.rank == 0

    def test_relevance_bounded_by_mi(self, rho05):
        sol = gib_analytic(rho05, 1e6)
        assert sol.i_ty < gc.mutual_information(rho05, "X", "Y")
        assert sol.i_ty == pytest.approx(gc.mutual_information(rho05, "X", "Y"), abs=1e-5)

    def test_stationary(self, two_pairs):
        sol = gib_analytic(two_pairs, 20.0)
        np.testing.assert_allclose(gib_gradient(two_pairs, sol.a, 20.0), 0.0, atol=1e-8)


class TestObjective:
    def test_matches_logdet_form(self, two_pairs):
        a = np.array([[0.5, -1.0], [2.0, 0.3]])
        sigma_x = two_pairs.sub_cov("X")
        sigma_x_y = gc.conditional(two_pairs, "X", "Y").cov
        beta = 3.0
        expected = 0.5 * (1 - beta) * gc.logdet(a @ sigma_x @ a.T + np.eye(2)) + 0.5 * beta * gc.logdet(
            a @ sigma_x_y @ a.T + np.eye(2)
        )
        assert gib_objective(two_pairs, a, beta) == pytest.approx(expected)

    def test_gradient(self, two_pairs):
        a = np.array([[0.5, -1.0], [2.0, 0.3]])
        numeric = central_difference(
            lambda v: gib_objective(two_pairs, v.reshape(2, 2), 3.0), a.ravel()
        ).reshape(2, 2)
        np.testing.assert_allclose(gib_gradient(two_pairs, a, 3.0), numeric, atol=1e-6)


class TestNumeric:
    def test_agrees_with_analytic(self, rho05):
        numeric = gib_numeric(rho05, 8.0, seed=0, n_starts=4)
        analytic = gib_analytic(rho05, 8.0)
        assert numeric.objective == pytest.approx(analytic.objective, abs=1e-7)
        assert numeric.gradient_error < 1e-5

    def test_agrees_on_two_pairs(self, two_pairs):
        numeric = gib_numeric(two_pairs, 20.0, seed=1, n_starts=4)
        analytic = gib_analytic(two_pairs, 20.0)
        assert numeric.objective == pytest.approx(analytic.objective, abs=1e-6)

    def test_invalid_t_dim(self, rho05):
        with pytest.raises(ValueError):
            gib_numeric(rho05, 8.0, t_dim=0)


def test_gib_curve(rho05):
    df = gib_curve(rho05, [2.0, 8.0])
    assert list(df.columns) == ["beta", "i_xt", "i_ty", "rank"]
    assert df["rank"].tolist() == [0, 1]
    assert df.loc[1, "i_xt"] == pytest.approx(0.4236489, abs=1e-7)


class TestSparse:
    def test_matches_analytic_on_diagonal_problem(self, two_pairs):
        sol = sparse_gib(two_pairs, 5.0, seed=0, n_starts=2)
        analytic = gib_analytic(two_pairs, 5.0)
        assert sol.objective == pytest.approx(analytic.objective, abs=1e-6)
        assert sol.rank == 1
        assert sol.d[0] == pytest.approx((5.0 * 0.64 - 1) / 0.36, rel=1e-4)
        assert sol.kkt_residual < 1e-6

    def test_objective_at_zero(self, two_pairs):
        assert sparse_objective(two_pairs, np.zeros(2), 5.0) == pytest.approx(0.0)

    def test_rate_and_relevance(self, two_pairs):
        sol = sparse_gib(two_pairs, 20.0, seed=0, n_starts=2)
        assert sol.objective == pytest.approx(sol.i_xt - 20.0 * sol.i_ty, abs=1e-8)

    def test_x_larger_than_y(self):
        cov = np.eye(3)
        cov[0, 2] = cov[2, 0] = 0.5
        joint = GaussianJoint([("X", 2), ("Y", 1)], cov)
        sol = sparse_gib(joint, 10.0, n_starts=1)
        assert sol.d.shape == (2,)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_logdet_identity(seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(2, 3))
    m = rng.normal(size=(3, 3))
    assert logdet_identity_gap(a, m @ m.T + np.eye(3)) < 1e-10


def random_xy(seed):
    """A random positive definite joint over 2-D X and 2-D Y."""
    rng = np.random.default_rng(seed)
    m = rng.normal(size=(4, 4))
    return GaussianJoint([("X", 2), ("Y", 2)], m @ m.T + 0.5 * np.eye(4))


class TestAnalyticAgainstNumeric:
    @pytest.mark.parametrize("seed", range(5))
    def test_objectives_agree_on_grid(self, seed):
        joint = random_xy(seed)
        top = max(c for c in gib_analytic(joint, 1.0).critical_betas if np.isfinite(c))
        for beta in np.linspace(1.0, 2.0 * top, 10):
            analytic = gib_analytic(joint, beta)
            numeric = gib_numeric(joint, beta, seed=seed, n_starts=4)
            assert numeric.objective == pytest.approx(analytic.objective, abs=1e-6)

    @pytest.mark.parametrize("seed", range(5))
    def test_collapse_below_first_critical_beta(self, seed):
        joint = random_xy(seed)
        beta = 0.9 * gib_analytic(joint, 1.0).critical_betas[0]
        assert not np.any(gib_analytic(joint, beta).a)
        assert np.linalg.norm(gib_numeric(joint, beta, seed=seed, n_starts=4).a) < 1e-4

    def test_invariant_to_scaling_x(self, two_pairs):
        scale = np.diag([3.0, 0.2, 1.0, 1.0])
        scaled = GaussianJoint(two_pairs.blocks, scale @ two_pairs.cov @ scale)
        for beta in (2.0, 5.0, 20.0):
            original = gib_analytic(two_pairs, beta)
            rescaled = gib_analytic(scaled, beta)
            assert rescaled.i_xt == pytest.approx(original.i_xt, abs=1e-10)
            assert rescaled.i_ty == pytest.approx(original.i_ty, abs=1e-10)
            np.testing.assert_allclose(rescaled.critical_betas, original.critical_betas)

    def test_relevance_grows_with_beta(self, two_pairs):
        df = gib_curve(two_pairs, np.linspace(1.0, 40.0, 40))
        assert np.all(np.diff(df["i_ty"]) >= -1e-12)
        assert np.all(np.diff(df["i_xt"]) >= -1e-12)


class TestSparseAccuracy:
    """Block-independent pairs with λ = 0.36 and 0.91 decouple per coordinate."""

    @staticmethod
    def expected_d(beta):
        lam = np.array([0.36, 0.91])
        return np.maximum((beta * (1 - lam) - 1) / lam, 0.0)

    @pytest.mark.parametrize("beta", [10.0, 20.0, 50.0])
    def test_matches_per_coordinate_solution(self, two_pairs, beta):
        sol = sparse_gib(two_pairs, beta, seed=0, n_starts=2)
        assert sol.converged
        assert sol.kkt_residual < 1e-6
        np.testing.assert_allclose(sol.d, self.expected_d(beta), rtol=0, atol=1e-5)

    def test_inactive_coordinate_is_exactly_zero(self, two_pairs):
        sol = sparse_gib(two_pairs, 10.0, seed=0, n_starts=2)
        assert sol.d[1] == 0.0
        assert sol.rank == 1


@pytest.mark.parametrize("seed", range(50))
def test_logdet_identity_on_symmetric_projections(seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(3, 3))
    m = rng.normal(size=(3, 3))
    assert logdet_identity_gap(a + a.T, m @ m.T + 0.1 * np.eye(3)) < 1e-9
