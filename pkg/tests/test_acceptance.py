"""Acceptance gate: one test per criterion, each recording a pass/fail line.

Criteria 5 to 8 need a StatsBomb open-data snapshot; point
``BAYESXG_OPEN_DATA`` at its root (the directory holding
``competitions.json``). Without it they are reported as BLOCKED and skipped.
"""

import os
import time
from pathlib import Path

import numpy as np
import pytest
from scipy import integrate
from scipy.special import log_expit

from bayesxg.analysis import (
    brier,
    fit_bayes,
    fit_frequentist,
    positional_validation,
    prior_sensitivity,
    regression_metrics,
    totals_report,
    xg_adjustments,
)
from bayesxg.bayes.diagnostics import ess, rhat
from bayesxg.bayes.fit import SamplerConfig
from bayesxg.bayes.hmc import Sampler, chain_rng
from bayesxg.bayes.model import EPL_PLAYERS, PRIOR_SETS, ModelSpec, resolve_players
from bayesxg.cli import run as cli_run
from bayesxg.features import build_design_matrix, engineer, outcomes, point_in_shot_triangle, shot_angle
from bayesxg.glm import fit_logistic
from bayesxg.synth import REALISTIC_BETA, TruthConfig, generate_shots

from test_dists import KINDS, density_integral, gradient_rel_error, interior_points, random_prior
from test_features import barycentric_inside
from test_glm import RECOVERY_BETA, RECOVERY_BLOCKS

pytestmark = pytest.mark.acceptance

OPEN_DATA = os.environ.get("BAYESXG_OPEN_DATA")
EPL = int(os.environ.get("BAYESXG_EPL_COMPETITION", "2"))
FULL = SamplerConfig()  # 4 chains x 1500 draws, 250 warmup, target 0.95


def blocked(criterion, number, name):
    if OPEN_DATA and Path(OPEN_DATA, "competitions.json").is_file():
        return
    criterion(number, name, False, "no open-data snapshot (set BAYESXG_OPEN_DATA)", status="BLOCKED")
    pytest.skip("open-data snapshot not available")


@pytest.fixture(scope="module")
def men_rows():
    from bayesxg.ingest import ingest

    return [engineer(s) for s in ingest(OPEN_DATA)]


@pytest.fixture(scope="module")
def epl_rows(men_rows):
    return [r for r in men_rows if r.competition_id == EPL]


@pytest.fixture(scope="module")
def epl_validation(epl_rows):
    t = time.perf_counter()
    res = positional_validation(epl_rows, FULL, "baseline", "freq")
    return res, time.perf_counter() - t


def test_criterion_01_geometry(criterion):
    t = time.perf_counter()
    rng = np.random.default_rng(0)
    shots = np.column_stack([rng.uniform(60, 119.5, 10_000), rng.uniform(0, 80, 10_000)])
    pts = np.column_stack([rng.uniform(60, 120, 10_000), rng.uniform(20, 60, 10_000)])
    agree = sum(point_in_shot_triangle(tuple(p), tuple(s)) == barycentric_inside(p, s, (120, 36), (120, 44)) for p, s in zip(pts, shots))
    angle = shot_angle((108, 40))
    elapsed = time.perf_counter() - t
    # 36.870 is the three-decimal rounding; the exact value is twice atan(4 / 12)
    exact = np.degrees(2 * np.arctan(4 / 12))
    ok = agree == 10_000 and abs(angle - exact) <= 1e-6 and round(angle, 3) == 36.870
    status = criterion(1, "geometry oracle", ok, f"{agree}/10000 triangle agreements, angle {angle:.7f} deg", elapsed, 1.0)
    assert status == "PASS"


def test_criterion_02_distribution_kernels(criterion):
    t = time.perf_counter()
    worst_mass, worst_grad = 0.0, 0.0
    for k, kind in enumerate(KINDS):
        rng = np.random.default_rng(1000 + k)
        for _ in range(100):
            d = random_prior(kind, rng)
            worst_mass = max(worst_mass, abs(density_integral(d) - 1.0))
            for x in interior_points(d, rng):
                worst_grad = max(worst_grad, gradient_rel_error(d, float(x)))
    elapsed = time.perf_counter() - t
    ok = worst_mass <= 1e-6 and worst_grad < 1e-6
    status = criterion(2, "distribution kernels", ok, f"max |mass - 1| {worst_mass:.1e}, max gradient rel. error {worst_grad:.1e}", elapsed, 10.0)
    assert status == "PASS"


def test_criterion_03_frequentist_recovery(criterion):
    t = time.perf_counter()
    y = np.zeros(100)
    y[:25] = 1
    closed = abs(fit_logistic(np.zeros((100, 0)), y).intercept - np.log(25 / 75))
    rows, _ = generate_shots(TruthConfig(beta=RECOVERY_BETA, n=50_000, seed=0))
    est = fit_logistic(build_design_matrix(rows, RECOVERY_BLOCKS), outcomes(rows)).raw_scale()
    worst = max(abs(v - RECOVERY_BETA.get(k, 0.0)) for k, v in est.items())
    elapsed = time.perf_counter() - t
    ok = closed <= 1e-6 and worst <= 0.1
    status = criterion(3, "frequentist recovery", ok, f"closed-form error {closed:.1e}, max |beta error| {worst:.3f} at n=50000", elapsed, 30.0)
    assert status == "PASS"


def _sample(logp_grad, dim, cfg=FULL):
    out = []
    for c in range(cfg.chains):
        s = Sampler(logp_grad, dim, chain_rng(cfg.seed, c), target_accept=cfg.target_accept)
        out.append(s.run(np.zeros(dim), cfg.draws, cfg.warmup))
    return out


def test_criterion_04_sampler_calibration(criterion):
    t = time.perf_counter()
    res = _sample(lambda q: (-0.5 * float(q @ q), -q), 20)
    draws = np.stack([r.draws for r in res])
    z = []
    rh = []
    for i in range(20):
        x = draws[:, :, i]
        z.append(abs(x.mean()) / (x.std(ddof=1) / np.sqrt(ess(x))))
        rh.append(rhat(x))
    acc = float(np.mean([r.accept_stat.mean() for r in res]))

    def logp(q):
        b = q[0]
        lp = 30 * log_expit(b) + 70 * log_expit(-b) - 0.5 * (b / 5.0) ** 2
        return float(lp), np.array([30 - 100 / (1 + np.exp(-b)) - b / 25.0])

    grid = np.linspace(-6, 4, 20_001)
    dens = np.exp([logp(np.array([b]))[0] - logp(np.array([np.log(30 / 70)]))[0] for b in grid])
    exact = integrate.trapezoid(grid * dens, grid) / integrate.trapezoid(dens, grid)
    post = np.concatenate([r.draws[:, 0] for r in _sample(logp, 1)])
    gap = abs(post.mean() - exact)
    elapsed = time.perf_counter() - t
    ok = max(z) < 3 and max(rh) < 1.01 and 0.90 <= acc <= 0.99 and gap < 0.02
    detail = f"max |mean|/MCSE {max(z):.2f}, max R-hat {max(rh):.4f}, acceptance {acc:.3f}, intercept gap {gap:.4f}"
    status = criterion(4, "sampler calibration", ok, detail, elapsed, 300.0)
    assert status == "PASS"


def test_criterion_05_frequentist_metrics(criterion, request):
    blocked(criterion, 5, "frequentist table")
    rows = request.getfixturevalue("men_rows")
    y = outcomes(rows)
    ref = np.array([r.statsbomb_xg for r in rows])
    t = time.perf_counter()
    _, pb = fit_frequentist(rows, "baseline")
    _, pe = fit_frequentist(rows, "extended")
    elapsed = time.perf_counter() - t
    bb, be, bs = brier(pb, y), brier(pe, y), brier(ref, y)
    rb, re = regression_metrics(pb, ref)[2], regression_metrics(pe, ref)[2]
    exact = abs(bb - 0.086) <= 0.005 and abs(be - 0.076) <= 0.005 and abs(bs - 0.075) <= 0.005 and re >= 0.75 and abs(rb - 0.428) <= 0.05
    ordering = be < bb and re > rb
    # on a drifted snapshot the ordering alone is required
    ok = exact or ordering
    which = "values within tolerance" if exact else ("ordering only (snapshot drift)" if ordering else "neither values nor ordering")
    detail = f"n={len(rows)} Brier base {bb:.4f} ext {be:.4f} sb {bs:.4f}; R2 base {rb:.3f} ext {re:.3f}; {which}"
    status = criterion(5, "frequentist table", ok, detail, elapsed, 60.0)
    assert status == "PASS"


POSITION_TARGETS = {"ST": 0.009, "AM": 0.019, "M": -0.006, "D": -0.042}


def test_criterion_06_position_adjustments(criterion, request):
    blocked(criterion, 6, "positional adjustments")
    res, elapsed = request.getfixturevalue("epl_validation")
    means = res.model.group_means()
    theory = res.theoretical.adjustment
    vs_paper = max(abs(means[k] - v) for k, v in POSITION_TARGETS.items())
    vs_theory = max(abs(means[k] - theory[k]) for k in POSITION_TARGETS)
    ordered = means["AM"] > means["ST"] > means["M"] > means["D"]
    ok = vs_paper <= 0.005 and vs_theory <= 0.005 and ordered
    detail = " ".join(f"{k} {means[k]:+.4f} (theory {theory[k]:+.4f})" for k in POSITION_TARGETS) + f"; ordering {'ok' if ordered else 'broken'}"
    status = criterion(6, "positional adjustments", ok, detail, elapsed, 1800.0)
    assert status == "PASS"


def test_criterion_07_shrinkage(criterion, request):
    blocked(criterion, 7, "extended shrinkage")
    rows = request.getfixturevalue("epl_rows")
    first, _ = request.getfixturevalue("epl_validation")
    t = time.perf_counter()
    second = positional_validation(rows, FULL, "extended", "freq")
    elapsed = time.perf_counter() - t

    def mean_abs(report):
        labels = np.asarray(report.groups, dtype=object)
        return {k: float(np.abs(report.adjustments[labels == k]).mean()) for k in POSITION_TARGETS}

    a, b = mean_abs(first.model), mean_abs(second.model)
    ok = all(b[k] < a[k] for k in POSITION_TARGETS)
    detail = " ".join(f"{k} {a[k]:.4f}->{b[k]:.4f}" for k in POSITION_TARGETS)
    status = criterion(7, "extended shrinkage", ok, detail, elapsed)
    assert status == "PASS"


def test_criterion_08_player_signs(criterion, request):
    blocked(criterion, 8, "player adjustments")
    rows = request.getfixturevalue("epl_rows")
    t = time.perf_counter()
    players = resolve_players(EPL_PLAYERS, sorted({r.player for r in rows}))
    spec = ModelSpec(predictors="extended", grouping="player", players=tuple(players))
    samples, hier = fit_bayes(rows, spec, FULL)
    _, base = fit_frequentist(rows, "extended")
    labels = [r.player if r.player in set(players) else "other" for r in rows]
    means = xg_adjustments(hier, base, labels).group_means()
    pick = dict(zip(EPL_PLAYERS, players))
    pires, aguero, shelvey = pick["Robert Pirès"], pick["Sergio Agüero"], pick["Jonjo Shelvey"]
    totals = {t.player: t for t in totals_report(samples, rows, base, [pires, aguero, shelvey], adjusted_pred=hier)}
    elapsed = time.perf_counter() - t
    ok = means[pires] > 0 and means[aguero] > 0 and means[shelvey] < 0 and abs(means["other"]) <= 0.003
    ok = ok and all(totals[p].closer for p in (pires, aguero, shelvey))
    detail = f"Pires {means[pires]:+.4f} Aguero {means[aguero]:+.4f} Shelvey {means[shelvey]:+.4f} other {means['other']:+.4f}; closer " + ",".join(
        str(totals[p].closer) for p in (pires, aguero, shelvey)
    )
    status = criterion(8, "player adjustments", ok, detail, elapsed)
    assert status == "PASS"


def _sensitivity_rows():
    if OPEN_DATA and Path(OPEN_DATA, "competitions.json").is_file():
        from bayesxg.ingest import ingest

        rows = [engineer(s) for s in ingest(OPEN_DATA)]
        idx = np.sort(np.random.default_rng(0).choice(len(rows), 5000, replace=False))
        return [rows[i] for i in idx], "open-data subsample"
    rows, _ = generate_shots(TruthConfig(beta=REALISTIC_BETA, n=5000, seed=0, realistic=True))
    return rows, "synthetic realistic shots"


def test_criterion_09_prior_sensitivity(criterion):
    rows, source = _sensitivity_rows()
    t = time.perf_counter()
    rep = prior_sensitivity(rows, FULL)
    elapsed = time.perf_counter() - t
    failed = [r.prior_set for r in rep.results if not r.ok]
    if failed:
        status = criterion(9, "prior sensitivity", False, f"prior sets failed: {failed}", elapsed, 2700.0)
        assert status == "PASS"
    spread = {ps: rep.get(ps).spread for ps in PRIOR_SETS}
    iqr = {ps: rep.get(ps).msd_summary()["iqr"] for ps in PRIOR_SETS}
    shot_iqr = {ps: rep.get(ps).deviation_summary()["iqr"] for ps in ("existing", "wide_normal")}
    widest = max(spread, key=spread.get)
    ratio = iqr["wide_normal"] / iqr["existing"]
    checks = {
        "wide uniform widest": widest == "wide_uniform",
        "ill-suited narrower": spread["ill_suited"] < spread["existing"],
        "MSD IQR ratio": 1 / 1.5 <= ratio <= 1.5,
    }
    ok = all(checks.values())
    detail = (
        f"{source}; sd " + " ".join(f"{k} {v:.4f}" for k, v in spread.items())
        + f"; MSD IQR over draws wide_normal/existing {iqr['wide_normal']:.5f}/{iqr['existing']:.5f} = {ratio:.2f}"
        + f" (per-shot deviation IQR ratio {shot_iqr['wide_normal'] / shot_iqr['existing']:.2f}); failing: "
        + (", ".join(k for k, v in checks.items() if not v) or "none")
    )
    status = criterion(9, "prior sensitivity", ok, detail, elapsed, 2700.0)
    assert status == "PASS"


def test_criterion_10_determinism(criterion, tmp_path):
    t = time.perf_counter()
    cfg = tmp_path / "synth.json"
    cfg.write_text('{"grouping": "player", "group_offsets": {"Star": 0.8, "Squad": 0.0, "Bench": -0.6}}')
    assert cli_run(["synth", "--config", str(cfg), "--n", "800", "--seed", "2", "--realistic", "--out", str(tmp_path / "data")]) == 0
    shots = str(tmp_path / "data" / "features.csv")
    runs = {
        "extended/player": ["--model", "extended", "--grouping", "player", "--players", "Star,Bench"],
        "baseline/position": ["--model", "baseline", "--grouping", "position"],
    }
    same = {}
    for name, extra in runs.items():
        args = ["fit", "--shots", shots, "--method", "bayes", "--seed", "7", "--chains", "4", "--draws", "400", "--warmup", "150", *extra]
        outs = []
        for rep in range(2):
            out = tmp_path / f"{name.replace('/', '_')}"
            assert cli_run([*args, "--out", str(out)]) == 0
            outs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
        same[name] = outs[0] == outs[1]
    elapsed = time.perf_counter() - t
    ok = all(same.values())
    status = criterion(10, "determinism", ok, ", ".join(f"{k} {'identical' if v else 'DIFFERENT'}" for k, v in same.items()), elapsed)
    assert status == "PASS"
