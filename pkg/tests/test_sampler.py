import csv
import json
import warnings

import numpy as np
import pytest
from scipy import integrate
from scipy.special import log_expit

from bayesxg.bayes.diagnostics import InsufficientDraws, ess, mcse, rhat, summary
from bayesxg.bayes.fit import PosteriorSamples, SamplerConfig, posterior_predict, run_hmc
from bayesxg.bayes.hmc import DualAveraging, Sampler, adaptation_windows, chain_rng
from bayesxg.bayes.model import ModelSpec
from bayesxg.features import ColumnMismatch, build_design_matrix, outcomes
from bayesxg.synth import TruthConfig, generate_shots


def gaussian(scales):
    prec = 1.0 / np.asarray(scales) ** 2

    def logp_grad(q):
        return -0.5 * float(np.sum(prec * q * q)), -prec * q

    return logp_grad


def intercept_logp(goals, n, sd=5.0):
    def logp_grad(q):
        b = q[0]
        lp = goals * log_expit(b) + (n - goals) * log_expit(-b) - 0.5 * (b / sd) ** 2
        g = goals - n / (1 + np.exp(-b)) - b / sd**2
        return float(lp), np.array([g])

    return logp_grad


def chains(logp_grad, dim, n_chains=4, n_iter=1500, n_warmup=250, seed=0, **kw):
    out = []
    for c in range(n_chains):
        s = Sampler(logp_grad, dim, chain_rng(seed, c), **kw)
        out.append(s.run(np.zeros(dim), n_iter, n_warmup))
    return out


class TestAdaptation:
    def test_windows_cover_middle_of_warmup(self):
        w = adaptation_windows(250)
        assert w[0][0] == 75 and w[-1][1] == 200
        assert all(a[1] == b[0] for a, b in zip(w, w[1:]))

    def test_dual_averaging_moves_towards_target(self):
        da = DualAveraging.start(1.0, 0.8)
        for _ in range(50):
            eps = da.update(1.0)
        assert eps > 1.0
        da = DualAveraging.start(1.0, 0.8)
        for _ in range(50):
            eps = da.update(0.0)
        assert eps < 1.0


class TestSampler:
    def test_standard_normal_20d(self):
        scales = np.linspace(0.5, 3.0, 20)
        res = chains(gaussian(scales), 20, n_iter=1250, n_warmup=250)
        draws = np.stack([r.draws for r in res])
        flat = draws.reshape(-1, 20)
        for i in range(20):
            se = scales[i] / np.sqrt(ess(draws[:, :, i]))
            assert abs(flat[:, i].mean()) < 4 * se
            assert rhat(draws[:, :, i]) < 1.01
        np.testing.assert_allclose(flat.std(axis=0) / scales, 1.0, atol=0.1)
        # the adapted metric should track the variances
        np.testing.assert_allclose(res[0].inv_metric / scales**2, 1.0, atol=0.5)

    def test_intercept_posterior_matches_quadrature(self):
        f = intercept_logp(30, 100)
        dens = lambda b: np.exp(f(np.array([b]))[0] - f(np.array([np.log(30 / 70)]))[0])
        z = integrate.quad(dens, -10, 10)[0]
        mean = integrate.quad(lambda b: b * dens(b), -10, 10)[0] / z
        res = chains(f, 1, target_accept=0.95)
        draws = np.concatenate([r.draws[:, 0] for r in res])
        assert abs(draws.mean() - mean) < 0.02
        acc = np.mean([r.accept_stat.mean() for r in res])
        assert 0.9 <= acc <= 0.99

    def test_static_hmc(self):
        res = chains(gaussian(np.ones(5)), 5, n_chains=2, n_iter=1200, n_warmup=200, algorithm="hmc", n_leapfrog=8)
        flat = np.concatenate([r.draws for r in res])
        np.testing.assert_allclose(flat.mean(axis=0), 0, atol=0.15)
        np.testing.assert_allclose(flat.std(axis=0), 1, atol=0.1)

    def test_energy_conserved_on_small_steps(self):
        s = Sampler(gaussian(np.ones(3)), 3, np.random.default_rng(0))
        s.inv_metric = np.ones(3)
        st = s.evaluate(np.array([1.0, -0.5, 0.3]))
        p = np.array([0.2, 0.4, -1.0])
        h0 = s.hamiltonian(st, p)
        for _ in range(100):
            st, p = s.leapfrog(st, p, 0.01)
        assert abs(s.hamiltonian(st, p) - h0) < 1e-4

    def test_deterministic(self):
        a = chains(gaussian(np.ones(3)), 3, n_chains=1, n_iter=300, n_warmup=100, seed=9)[0]
        b = chains(gaussian(np.ones(3)), 3, n_chains=1, n_iter=300, n_warmup=100, seed=9)[0]
        np.testing.assert_array_equal(a.draws, b.draws)

    def test_unknown_algorithm(self):
        with pytest.raises(ValueError):
            Sampler(gaussian([1.0]), 1, np.random.default_rng(0), algorithm="mala")

    def test_zero_density_start(self):
        s = Sampler(lambda q: (-np.inf, np.zeros(1)), 1, np.random.default_rng(0))
        with pytest.raises(ValueError):
            s.run(np.zeros(1), 10, 5)


class TestDiagnostics:
    def test_constant_chains_are_nan(self):
        with pytest.warns(RuntimeWarning):
            assert np.isnan(rhat(np.ones((4, 200))))

    def test_iid_rhat_near_one(self):
        x = np.random.default_rng(0).normal(size=(4, 1000))
        assert 0.99 <= rhat(x) <= 1.02
        assert ess(x) == pytest.approx(4000, rel=0.15)

    def test_trending_chains(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=(4, 500)) + np.linspace(0, 5, 500)
        assert rhat(x) > 1.1

    def test_shifted_chains(self):
        x = np.random.default_rng(2).normal(size=(4, 500)) + np.arange(4)[:, None]
        assert rhat(x) > 1.1

    def test_ar1_ess(self):
        # AR(1) with coefficient phi has integrated autocorrelation time (1 + phi) / (1 - phi)
        rng = np.random.default_rng(3)
        phi, n = 0.8, 20_000
        x = np.zeros((4, n))
        for t in range(1, n):
            x[:, t] = phi * x[:, t - 1] + rng.normal(size=4)
        assert ess(x) == pytest.approx(4 * n * (1 - phi) / (1 + phi), rel=0.15)

    def test_insufficient_draws(self):
        with pytest.raises(InsufficientDraws):
            rhat(np.zeros((1, 500)))
        with pytest.raises(InsufficientDraws):
            ess(np.zeros((4, 50)))

    def test_mcse(self):
        x = np.random.default_rng(4).normal(size=(4, 1000))
        assert mcse(x) == pytest.approx(1 / np.sqrt(4000), rel=0.15)


@pytest.fixture(scope="module")
def offset_fit():
    truth = TruthConfig(beta={"intercept": -1.0, "distance_to_goal": -0.1}, group_offsets={"ST": 0.8, "AM": 0.3, "M": 0.0, "D": -0.8}, n=3000, seed=5)
    rows, _ = generate_shots(truth)
    dm = build_design_matrix(rows, "baseline", "position")
    cfg = SamplerConfig(chains=2, draws=600, warmup=200, seed=3)
    spec = ModelSpec(predictors="baseline", grouping="position")
    return rows, dm, spec, cfg, run_hmc(spec, dm, outcomes(rows), cfg)


class TestFit:
    def test_offsets_recovered_in_sign(self, offset_fit):
        *_, samples = offset_fit
        means = {k: v.mean() for k, v in samples.group_offsets().items()}
        assert means["ST"] > means["M"] > means["D"]
        assert means["ST"] - means["D"] > 0.8

    def test_draw_shape(self, offset_fit):
        *_, samples = offset_fit
        assert samples.draws.shape == (2, 400, 4 + 4 + 1)
        assert samples.param_names[-1] == "log_sigma_g"
        assert np.all(np.isfinite(samples.param("log_sigma_g")))

    def test_workers_do_not_change_draws(self, offset_fit):
        rows, dm, spec, cfg, samples = offset_fit
        cfg2 = SamplerConfig(**{**cfg.to_dict(), "workers": 2})
        again = run_hmc(spec, dm, outcomes(rows), cfg2)
        np.testing.assert_array_equal(again.draws, samples.draws)

    def test_diagnostics(self, offset_fit):
        *_, samples = offset_fit
        d = samples.diagnostics()
        assert d["intercept"]["rhat"] < 1.05
        rows = summary(samples)
        assert [r["param"] for r in rows] == samples.param_names

    def test_persistence(self, offset_fit, tmp_path):
        *_, samples = offset_fit
        samples.write_csv(tmp_path / "draws.csv")
        with open(tmp_path / "draws.csv") as fh:
            body = list(csv.reader(fh))
        assert body[0] == ["chain", "draw", *samples.param_names]
        assert len(body) == 1 + 2 * 400
        assert float(body[1][2]) == samples.draws[0, 0, 0]
        samples.write_manifest(tmp_path / "m.json")
        m = json.loads((tmp_path / "m.json").read_text())
        assert m["seeds"] == [3, 3] and m["warmup"] == 200 and m["draws_per_chain"] == 400
        assert len(m["divergences"]) == 2

    def test_config_validation(self):
        with pytest.raises(ValueError):
            SamplerConfig(draws=100, warmup=100)
        with pytest.raises(ValueError):
            SamplerConfig(target_accept=1.0)
        with pytest.raises(ValueError):
            SamplerConfig(chains=0)


def fake_samples(beta_draws, levels=(), columns=("x",)):
    beta_draws = np.asarray(beta_draws, dtype=float)
    s, d = beta_draws.shape
    names = ["intercept", *columns, *(f"u[{l}]" for l in levels)][:d]
    z = np.zeros((1, s))
    return PosteriorSamples(
        draws=beta_draws[None],
        param_names=names,
        warmup=0,
        seeds=[0],
        accept_stat=z,
        n_leapfrog=z,
        tree_depth=z,
        divergent=z.astype(bool),
        lp=z,
        step_size=np.ones(1),
        inv_metric=np.ones((1, d)),
        n_beta=1 + len(columns),
        group_levels=list(levels),
        columns=list(columns),
    )


class TestPredict:
    def _design(self, n=3, levels=()):
        rows, _ = generate_shots(TruthConfig(n=50, seed=0))
        dm = build_design_matrix(rows, ["distance_to_goal"], "position" if levels else "none")
        return dm.subset(np.arange(n))

    def test_single_draw_is_deterministic(self):
        dm = self._design()
        s = fake_samples([[0.3, 0.0]], columns=dm.columns)
        pred = posterior_predict(s, dm)
        np.testing.assert_allclose(pred.mean, 1 / (1 + np.exp(-0.3)))
        np.testing.assert_allclose(pred.lower, pred.upper)

    def test_mean_of_probabilities(self):
        dm = self._design()
        lo, hi = np.log(0.2 / 0.8), np.log(0.4 / 0.6)
        s = fake_samples([[lo, 0.0], [hi, 0.0]], columns=dm.columns)
        np.testing.assert_allclose(posterior_predict(s, dm).mean, 0.3)

    def test_unseen_level_gets_no_offset(self):
        dm = self._design(levels=True)
        s = fake_samples([[0.0, 0.0, 1.0, 1.0, 1.0, 1.0]], levels=dm.group_levels, columns=dm.columns)
        gi = np.array([0, -1, 2])
        pred = posterior_predict(s, dm, group_index=gi)
        np.testing.assert_allclose(pred.mean, 1 / (1 + np.exp(-np.array([1.0, 0.0, 1.0]))))

    def test_column_mismatch(self):
        dm = self._design()
        s = fake_samples([[0.0, 0.0]], columns=["shot_angle"])
        with pytest.raises(ColumnMismatch):
            posterior_predict(s, dm)

    def test_chunking_does_not_matter(self):
        rows, _ = generate_shots(TruthConfig(n=100, seed=1))
        dm = build_design_matrix(rows, ["distance_to_goal"])
        rng = np.random.default_rng(0)
        s = fake_samples(rng.normal(size=(40, 2)), columns=dm.columns)
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            a = posterior_predict(s, dm, chunk=7)
        b = posterior_predict(s, dm, chunk=1000)
        np.testing.assert_allclose(a.mean, b.mean, rtol=1e-14)
        np.testing.assert_allclose(a.upper, b.upper, rtol=1e-14)
