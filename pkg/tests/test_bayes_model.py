import numpy as np
import pytest
from scipy.special import log_expit

from bayesxg import dists
from bayesxg.bayes.model import (
    EPL_PLAYERS,
    PRIOR_SETS,
    DimensionMismatch,
    ModelSpec,
    Posterior,
    default_group_alpha,
    grad_log_posterior,
    informative_prior,
    log_posterior,
    name_matches,
    prior_for,
    resolve_players,
)
from bayesxg.features import build_design_matrix, outcomes
from bayesxg.glm import fit_logistic
from bayesxg.synth import REALISTIC_BETA, TruthConfig, generate_shots

PLAYERS = ("player_ST", "player_AM")


def fd_grad(f, x, h=1e-5):
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (-f(x + 2 * e) + 8 * f(x + e) - 8 * f(x - e) + f(x - 2 * e)) / (12 * h)
    return g


@pytest.fixture(scope="module")
def shots200():
    rows, _ = generate_shots(TruthConfig(beta=REALISTIC_BETA, n=200, seed=4, group_offsets={"ST": 0.4, "AM": 0.2, "M": 0.0, "D": -0.4}))
    return rows


def posterior(rows, predictors, grouping, prior_set="existing"):
    players = PLAYERS if grouping == "player" else ()
    spec = ModelSpec(predictors=predictors, grouping=grouping, players=players, prior_set=prior_set)
    dm = build_design_matrix(rows, predictors, grouping, players, drop_constant=True)
    return Posterior(spec, dm, outcomes(rows))


SPECS = [("baseline", "position"), ("extended", "position"), ("extended", "player")]


def random_theta(post, rng):
    theta = rng.normal(0, 0.7, post.dim)
    for i, pr in enumerate(post.priors):
        if pr.kind == "uniform":
            theta[i] = rng.uniform(pr.low, pr.high)
    if post.K:
        theta[-1] = rng.uniform(-2, 1)
    return theta


class TestGradients:
    @pytest.mark.parametrize("predictors, grouping", SPECS)
    def test_centred_matches_finite_differences(self, shots200, predictors, grouping):
        post = posterior(shots200, predictors, grouping)
        rng = np.random.default_rng(0)
        worst = 0.0
        for _ in range(100):
            th = random_theta(post, rng)
            a = post.grad_log_posterior(th)
            n = fd_grad(post.log_posterior, th)
            worst = max(worst, float(np.max(np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), 1e-3))))
        assert worst < 1e-5

    @pytest.mark.parametrize("predictors, grouping", SPECS)
    @pytest.mark.parametrize("prior_set", ["existing", "tight_uniform"])
    def test_sampling_coordinates_match_finite_differences(self, shots200, predictors, grouping, prior_set):
        post = posterior(shots200, predictors, grouping, prior_set)
        rng = np.random.default_rng(1)
        f = lambda phi: post.sampling_logp_and_grad(phi)[0]
        for _ in range(20):
            phi = rng.normal(0, 0.7, post.dim)
            a = post.sampling_logp_and_grad(phi)[1]
            n = fd_grad(f, phi)
            assert np.max(np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), 1e-3)) < 1e-5

    def test_module_level_functions(self, shots200):
        post = posterior(shots200, "baseline", "position")
        th = random_theta(post, np.random.default_rng(2))
        assert log_posterior(post.spec, build_design_matrix(shots200, "baseline", "position"), outcomes(shots200), th) == pytest.approx(post.log_posterior(th))
        np.testing.assert_allclose(grad_log_posterior(post.spec, build_design_matrix(shots200, "baseline", "position"), outcomes(shots200), th), post.grad_log_posterior(th))


class TestDensity:
    def test_change_of_variables(self, shots200):
        # sampling density = centred density + log |d theta / d phi|
        post = posterior(shots200, "extended", "position", "tight_uniform")
        rng = np.random.default_rng(3)
        for _ in range(10):
            phi = rng.normal(0, 0.7, post.dim)
            theta = post.to_reported(phi)
            log_jac = post.K * phi[-1]
            for i in post._bounded:
                lo, hi = post.priors[i].low, post.priors[i].high
                log_jac += np.log(hi - lo) + log_expit(phi[i]) + log_expit(-phi[i])
            assert post.sampling_logp_and_grad(phi)[0] == pytest.approx(post.log_posterior(theta) + log_jac, rel=1e-12)
            np.testing.assert_allclose(post.to_unconstrained(theta), phi, atol=1e-9)

    def test_flat_priors_at_mle(self, shots200):
        dm = build_design_matrix(shots200, "baseline")
        y = outcomes(shots200)
        mle = fit_logistic(dm, y)
        post = Posterior(ModelSpec(prior_set="wide_uniform"), dm, y)
        const = post.dim * -np.log(200.0)
        assert post.log_posterior(mle.params) == pytest.approx(mle.log_likelihood + const, abs=0.5)
        assert np.max(np.abs(post.grad_log_posterior(mle.params))) < 1e-5

    def test_group_prior_plug_in(self, shots200):
        post = posterior(shots200, "baseline", "position")
        th = random_theta(post, np.random.default_rng(4))
        th[post.p : post.p + post.K] = 0.0
        sigma = np.exp(th[-1])
        group = sum(dists.log_pdf(dists.skew_normal(0, sigma, a), 0.0) for a in post.alpha)
        rest = post.log_likelihood(th) + sum(dists.log_pdf(p, b) for p, b in zip(post.priors, th[: post.p]))
        hyper = dists.log_pdf(dists.half_normal(5), sigma) + th[-1]
        assert post.log_posterior(th) == pytest.approx(rest + group + hyper, rel=1e-12)

    def test_single_observation(self, shots200):
        dm = build_design_matrix(shots200[:1] * 1, "baseline", drop_constant=True)
        post = Posterior(ModelSpec(), dm, np.array([1.0]))
        assert post.log_likelihood(np.zeros(post.dim)) == pytest.approx(np.log(0.5))

    def test_zero_design_gradient_is_prior_gradient(self, shots200):
        dm = build_design_matrix(shots200, "baseline")
        dm.X[:] = 0.0
        post = Posterior(ModelSpec(), dm, outcomes(shots200))
        th = np.array([0.1, -0.4, 0.3, 0.2])
        g = post.grad_log_posterior(th)
        prior_g = [dists.grad_log_pdf(p, t) for p, t in zip(post.priors, th)]
        assert g[1:] == pytest.approx(prior_g[1:], abs=0)

    def test_dimension_mismatch(self, shots200):
        post = posterior(shots200, "baseline", "none")
        with pytest.raises(DimensionMismatch):
            post.log_posterior(np.zeros(post.dim + 1))
        with pytest.raises(DimensionMismatch):
            Posterior(ModelSpec(), build_design_matrix(shots200, "baseline"), np.zeros(5))

    def test_parameter_names(self, shots200):
        post = posterior(shots200, "baseline", "position")
        assert post.param_names == ["intercept", "distance_to_goal", "shot_angle", "distance_angle_interaction", "u[ST]", "u[AM]", "u[M]", "u[D]", "log_sigma_g"]
        assert post.dim == 9


class TestPriors:
    def test_informative_entries(self):
        assert informative_prior("intercept") == dists.normal(0, 5)
        assert informative_prior("distance_to_goal") == dists.skew_normal(-1, 5, -1)
        assert informative_prior("players_in_shot_triangle[1]").alpha == 4
        assert informative_prior("players_in_shot_triangle[10]").alpha == -5
        assert informative_prior("shot_open_goal") == dists.skew_normal(0, 5, 4)

    def test_prior_sets(self):
        assert prior_for("shot_angle", "wide_uniform") == dists.uniform(-100, 100)
        assert prior_for("shot_angle", "tight_uniform") == dists.uniform(-1, 1)
        assert prior_for("shot_angle", "wide_normal") == dists.normal(0, 10)
        assert prior_for("shot_angle", "tight_normal") == dists.normal(0, 0.25)
        ill = prior_for("players_in_shot_triangle[1]", "ill_suited")
        assert ill.sigma == 0.25 and ill.alpha == -informative_prior("players_in_shot_triangle[1]").alpha
        assert len(PRIOR_SETS) == 6

    def test_every_column_has_one_prior(self, shots200):
        dm = build_design_matrix(shots200, "extended", drop_constant=True)
        for ps in PRIOR_SETS:
            assert len(ModelSpec(predictors="extended", prior_set=ps).column_priors(dm.columns)) == len(dm.columns) + 1

    def test_overrides(self):
        spec = ModelSpec(priors={"shot_angle": dists.normal(0, 1)})
        assert spec.column_priors(["shot_angle"])[1] == dists.normal(0, 1)

    def test_group_alphas(self):
        assert default_group_alpha("position", ["ST", "AM", "M", "D"]) == {"ST": 2.0, "AM": 1.0, "M": 0.0, "D": -2.0}
        alphas = default_group_alpha("player", [*EPL_PLAYERS, "other"])
        assert [alphas[p] for p in EPL_PLAYERS] == [2.0, 2.0, 2.0, 2.0, 0.0, 0.0]
        assert alphas["other"] == 0.0

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            ModelSpec(grouping="player")
        with pytest.raises(ValueError):
            ModelSpec(prior_set="vague")


class TestNames:
    @pytest.mark.parametrize(
        "query, full",
        [("Aguero", "Sergio Leonel Agüero del Castillo"), ("Pires", "Robert Pirès"), ("Robert Pirès", "Robert Pirès"), ("Phillippe Coutinho", "Philippe Coutinho Correia")],
    )
    def test_matches(self, query, full):
        assert name_matches(query, full)

    def test_non_match(self):
        assert not name_matches("Vardy", "Jamie Carragher")

    def test_resolve(self):
        avail = ["Sergio Leonel Agüero del Castillo", "Robert Pirès", "Jonjo Shelvey"]
        assert resolve_players(["Sergio Agüero", "Pires"], avail) == ["Sergio Leonel Agüero del Castillo", "Robert Pirès"]
        with pytest.raises(KeyError):
            resolve_players(["Nobody"], avail)
