"""Evaluation and experiments built on fitted xG models.

Metrics compare prediction vectors with outcomes or with a reference
column. Adjustments are hierarchical predictions minus single-level
predictions for the same shots, summarised per group and along distance
and angle bins. The remaining helpers drive the positional validation,
player tables, goal totals and the prior-sensitivity comparison.
"""

from __future__ import annotations

import json
import logging
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .bayes.fit import PosteriorSamples, Prediction, SamplerConfig, posterior_predict, run_hmc
from .bayes.model import PRIOR_SETS, ModelSpec, name_matches
from .features import BLOCK_ORDER, POSITIONS, DesignLayout, FeatureRow, build_design_matrix, outcomes
from .glm import Coefficients, fit_logistic, predict_proba
from .tables import write_csv

log = logging.getLogger(__name__)

QUANTILES = (0.05, 0.25, 0.5, 0.75, 0.95)
DISTANCE_BIN = 5.0
ANGLE_BIN = 10.0


class LengthMismatch(ValueError):
    pass


class GroupMismatch(ValueError):
    pass


class EmptyGroup(ValueError):
    pass


class MissingPlayer(KeyError):
    pass


def _pair(a, b, what="vectors"):
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.shape != b.shape:
        raise LengthMismatch(f"{what} differ in length: {a.size} vs {b.size}")
    return a, b


# -- metrics -----------------------------------------------------------------


def brier(p, y) -> float:
    p, y = _pair(p, y)
    return float(np.mean((p - y) ** 2))


def regression_metrics(pred, reference) -> tuple[float, float, float]:
    """RMSE, MAE and R^2 of ``pred`` against ``reference``.

    R^2 is ``1 - SSE/SST`` with SST taken about the reference mean, so a
    constant reference gives NaN.
    """
    pred, ref = _pair(pred, reference)
    err = pred - ref
    rmse = float(np.sqrt(np.mean(err**2)))
    mae = float(np.mean(np.abs(err)))
    sst = float(np.sum((ref - ref.mean()) ** 2))
    r2 = 1.0 - float(np.sum(err**2)) / sst if sst > 0 else float("nan")
    return rmse, mae, r2


def msd(pred, reference) -> float:
    """Mean signed deviation; positive when ``pred`` overpredicts."""
    pred, ref = _pair(pred, reference)
    return float(np.mean(pred - ref))


@dataclass
class MetricReport:
    brier: float
    rmse: float
    mae: float
    r2: float
    msd: float

    HEADER = ("brier", "rmse", "mae", "r2", "msd")

    def row(self) -> list[float]:
        return [self.brier, self.rmse, self.mae, self.r2, self.msd]


def metric_report(pred, y, reference, msd_reference=None) -> MetricReport:
    """Brier against outcomes, regression metrics against ``reference``.

    MSD uses ``msd_reference`` when given, otherwise ``reference``.
    """
    rmse, mae, r2 = regression_metrics(pred, reference)
    return MetricReport(
        brier=brier(pred, y),
        rmse=rmse,
        mae=mae,
        r2=r2,
        msd=msd(pred, reference if msd_reference is None else msd_reference),
    )


# -- adjustments -------------------------------------------------------------


def _quantile_summary(x: np.ndarray) -> dict:
    out = {"n": int(x.size), "mean": float(x.mean())}
    for q, v in zip(QUANTILES, np.quantile(x, QUANTILES)):
        out[f"q{int(round(q * 100)):02d}"] = float(v)
    return out


@dataclass
class CurveBin:
    low: float
    high: float
    n: int
    adjustment: float
    hierarchical: float
    baseline: float


def _binned(values, width, adj, hier, base) -> list[CurveBin]:
    idx = np.floor(np.asarray(values, dtype=float) / width).astype(int)
    bins = []
    for b in np.unique(idx):
        m = idx == b
        bins.append(
            CurveBin(b * width, (b + 1) * width, int(m.sum()), float(adj[m].mean()), float(hier[m].mean()), float(base[m].mean()))
        )
    return bins


@dataclass
class AdjustmentReport:
    adjustments: np.ndarray
    groups: list
    by_group: dict
    distance_curve: list = field(default_factory=list)
    angle_curve: list = field(default_factory=list)

    @property
    def overall_mean(self) -> float:
        return float(self.adjustments.mean())

    def group_means(self) -> dict[str, float]:
        return {g: s["mean"] for g, s in self.by_group.items()}


def xg_adjustments(hier_pred, baseline_pred, groups, distance=None, angle=None, levels=None) -> AdjustmentReport:
    """Per-shot ``hier_pred - baseline_pred`` with group and binned summaries.

    ``distance`` and ``angle`` (per shot) switch on the binned curves.
    ``levels`` fixes the group order; a label outside it is an error.
    """
    hier, base = _pair(hier_pred, baseline_pred, "prediction vectors")
    groups = list(groups)
    if len(groups) != hier.size:
        raise GroupMismatch(f"{len(groups)} group labels for {hier.size} shots")
    present = sorted(set(groups), key=str)
    if levels is None:
        levels = present
    else:
        stray = set(groups) - set(levels)
        if stray:
            raise GroupMismatch(f"labels {sorted(stray, key=str)} not among levels {list(levels)}")
    adj = hier - base
    labels = np.asarray(groups, dtype=object)
    by_group = {lv: _quantile_summary(adj[labels == lv]) for lv in levels if np.any(labels == lv)}
    report = AdjustmentReport(adj, groups, by_group)
    if distance is not None:
        _pair(distance, adj, "distance column")
        report.distance_curve = _binned(distance, DISTANCE_BIN, adj, hier, base)
    if angle is not None:
        _pair(angle, adj, "angle column")
        report.angle_curve = _binned(angle, ANGLE_BIN, adj, hier, base)
    return report


@dataclass
class TheoreticalAdjustment:
    share: dict  # P(group)
    lift: dict  # P(group | goal) / P(group)
    adjustment: dict  # mean of clip(p * lift) - p within the group


def bayes_theorem_adjustment(baseline_pred, positions, goals, levels=None) -> TheoreticalAdjustment:
    """Rescale each shot's baseline xG by its group's goal lift.

    The lift of group k is the share of goals scored from k divided by the
    share of shots taken from k. Adjusted values are clipped to [0, 1]
    before differencing.
    """
    p, y = _pair(baseline_pred, goals, "predictions and outcomes")
    positions = np.asarray(list(positions), dtype=object)
    if positions.size != p.size:
        raise LengthMismatch(f"{positions.size} positions for {p.size} shots")
    if levels is None:
        levels = sorted(set(positions.tolist()), key=str)
    n_goals = y.sum()
    if n_goals == 0:
        raise EmptyGroup("no goals, so the goal-conditional shares are undefined")
    share, lift, adj = {}, {}, {}
    for lv in levels:
        m = positions == lv
        if not m.any():
            raise EmptyGroup(f"group {lv!r} has no shots")
        share[lv] = m.mean()
        lift[lv] = (y[m].sum() / n_goals) / share[lv]
        adj[lv] = float(np.mean(np.clip(p[m] * lift[lv], 0.0, 1.0) - p[m]))
    return TheoreticalAdjustment({k: float(v) for k, v in share.items()}, {k: float(v) for k, v in lift.items()}, adj)


# -- players -----------------------------------------------------------------


@dataclass(frozen=True)
class ConversionRow:
    player: str
    shots: int
    goals: int

    @property
    def rate(self) -> float:
        return self.goals / self.shots

    def percent(self) -> str:
        return f"{100.0 * self.rate:.1f}%"


@dataclass
class ConversionTable:
    rows: list

    HEADER = ("player", "shots", "goals", "conversion_rate")

    def render(self) -> list[tuple]:
        return [(r.player, r.shots, r.goals, r.percent()) for r in self.rows]

    def players(self) -> list[str]:
        return [r.player for r in self.rows]


def select_players(shots: Sequence[FeatureRow], min_shots: int = 50) -> ConversionTable:
    """Players with at least ``min_shots`` shots, best conversion first.

    Ties on rate are broken by more shots, then by name, so the table does
    not depend on row order.
    """
    n, g = defaultdict(int), defaultdict(int)
    for r in shots:
        n[r.player] += 1
        g[r.player] += bool(r.goal)
    rows = [ConversionRow(p, n[p], g[p]) for p in n if n[p] >= min_shots]
    rows.sort(key=lambda r: (-r.rate, -r.shots, r.player))
    return ConversionTable(rows)


@dataclass(frozen=True)
class PlayerTotal:
    player: str
    shots: int
    goals: int
    baseline_xg: float
    adjusted_xg: float

    @property
    def closer(self) -> bool:
        return abs(self.adjusted_xg - self.goals) < abs(self.baseline_xg - self.goals)


def totals_report(samples: PosteriorSamples, shots: Sequence[FeatureRow], baseline_pred, players: Sequence[str], adjusted_pred=None) -> list[PlayerTotal]:
    """Goals, baseline xG and adjusted xG summed per player.

    Each requested player must be a group level of the player-grouped fit in
    ``samples``. ``adjusted_pred`` defaults to posterior-mean predictions
    of that fit on ``shots``. A player without shots in ``shots`` gets
    zeros throughout.
    """
    base = np.asarray(baseline_pred, dtype=float)
    if base.size != len(shots):
        raise LengthMismatch(f"{base.size} baseline predictions for {len(shots)} shots")
    fitted = [lv for lv in samples.group_levels if lv != "other"]
    resolved = []
    for q in players:
        hits = [lv for lv in fitted if lv == q or name_matches(q, lv)]
        if len(hits) != 1:
            raise MissingPlayer(f"{q!r} is not a single fitted player level (fitted: {fitted})")
        resolved.append(hits[0])
    if adjusted_pred is None:
        design = build_design_matrix(shots, layout=_layout_of(samples)) if shots else None
        adjusted = posterior_predict(samples, design).mean if shots else np.zeros(0)
    else:
        adjusted = np.asarray(adjusted_pred, dtype=float)
    names = np.asarray([r.player for r in shots], dtype=object)
    goals = outcomes(shots) if shots else np.zeros(0)
    out = []
    for q, lv in zip(players, resolved):
        m = names == lv
        out.append(PlayerTotal(q, int(m.sum()), int(goals[m].sum()), float(base[m].sum()), float(adjusted[m].sum())))
    return out


def _layout_of(samples: PosteriorSamples) -> DesignLayout:
    lay = samples.spec.get("layout")
    if lay is None:
        raise ValueError("samples carry no design layout; pass adjusted_pred explicitly")
    return DesignLayout.from_dict(lay)


# -- model fitting helpers ----------------------------------------------------


# The fit helpers drop levels absent from the data subset (with a warning)
# rather than failing; build_design_matrix itself stays strict by default.


def fit_frequentist(rows: Sequence[FeatureRow], predictors="baseline") -> tuple[Coefficients, np.ndarray]:
    design = build_design_matrix(rows, predictors, drop_constant=True)
    coefs = fit_logistic(design, outcomes(rows))
    return coefs, predict_proba(coefs, design)


def fit_bayes_full(rows: Sequence[FeatureRow], spec: ModelSpec, config: SamplerConfig) -> tuple[PosteriorSamples, Prediction]:
    design = build_design_matrix(rows, spec.predictors, spec.grouping, spec.players, drop_constant=True)
    samples = run_hmc(spec, design, outcomes(rows), config)
    samples.spec["layout"] = design.layout.to_dict()
    return samples, posterior_predict(samples, design)


def fit_bayes(rows: Sequence[FeatureRow], spec: ModelSpec, config: SamplerConfig) -> tuple[PosteriorSamples, np.ndarray]:
    samples, pred = fit_bayes_full(rows, spec, config)
    return samples, pred.mean


def feature_sweep(rows: Sequence[FeatureRow], reference=None) -> list[tuple[int, str, MetricReport]]:
    """Refit with the first k predictor blocks for k = 1..13.

    The reference column defaults to each row's StatsBomb xG.
    """
    y = outcomes(rows)
    ref = np.array([r.statsbomb_xg for r in rows]) if reference is None else np.asarray(reference, float)
    out = []
    for k in range(1, len(BLOCK_ORDER) + 1):
        design = build_design_matrix(rows, BLOCK_ORDER[:k], drop_constant=True)
        p = predict_proba(fit_logistic(design, y), design)
        out.append((k, BLOCK_ORDER[k - 1], metric_report(p, y, ref)))
    return out


@dataclass
class PositionalValidation:
    model: AdjustmentReport
    theoretical: TheoreticalAdjustment
    samples: PosteriorSamples

    def table(self) -> list[tuple]:
        means = self.model.group_means()
        return [(lv, means.get(lv, float("nan")), self.theoretical.adjustment[lv]) for lv in self.theoretical.adjustment]


def positional_validation(rows: Sequence[FeatureRow], config: SamplerConfig, predictors="baseline", baseline="freq") -> PositionalValidation:
    """Position-grouped fit compared with the Bayes-theorem adjustment.

    ``baseline`` picks the single-level reference: the frequentist fit
    (``"freq"``) or the posterior mean of the single-level Bayesian model
    (``"bayes"``). The theoretical adjustment is always computed from the
    same baseline predictions.
    """
    spec = ModelSpec(predictors=predictors, grouping="position")
    samples, hier = fit_bayes(rows, spec, config)
    if baseline == "freq":
        _, base = fit_frequentist(rows, predictors)
    elif baseline == "bayes":
        _, base = fit_bayes(rows, ModelSpec(predictors=predictors), config)
    else:
        raise ValueError(f"baseline must be freq or bayes, got {baseline!r}")
    positions = [r.general_position for r in rows]
    levels = [p for p in POSITIONS if p in set(positions)]
    model = xg_adjustments(hier, base, positions, [r.distance_to_goal for r in rows], [r.shot_angle for r in rows], levels)
    theory = bayes_theorem_adjustment(base, positions, outcomes(rows), levels)
    return PositionalValidation(model, theory, samples)


# -- prior sensitivity --------------------------------------------------------


@dataclass
class PriorSetResult:
    prior_set: str
    seed: int
    predictions: np.ndarray | None = None
    deviations: np.ndarray | None = None  # per shot, Bayesian minus frequentist
    draw_msd: np.ndarray | None = None  # per draw, MSD against the frequentist predictions
    samples: PosteriorSamples | None = None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None

    @property
    def spread(self) -> float:
        """Standard deviation of the per-shot posterior-mean predictions."""
        return float(np.std(self.predictions))

    def prediction_summary(self) -> dict:
        s = _quantile_summary(self.predictions)
        s["sd"] = self.spread
        s["share_above_half"] = float(np.mean(self.predictions > 0.5))
        return s

    def deviation_summary(self) -> dict:
        s = _quantile_summary(self.deviations)
        s["iqr"] = s["q75"] - s["q25"]
        return s

    def msd_summary(self) -> dict:
        """Distribution of MSD over posterior draws."""
        s = _quantile_summary(self.draw_msd)
        s["iqr"] = s["q75"] - s["q25"]
        return s


@dataclass
class SensitivityReport:
    frequentist: np.ndarray
    results: list

    def get(self, prior_set: str) -> PriorSetResult:
        for r in self.results:
            if r.prior_set == prior_set:
                return r
        raise KeyError(prior_set)

    def summary(self) -> dict:
        out = {"frequentist": _quantile_summary(self.frequentist) | {"sd": float(np.std(self.frequentist))}}
        for r in self.results:
            if r.ok:
                out[r.prior_set] = {
                    "seed": r.seed,
                    "predictions": r.prediction_summary(),
                    "msd": float(r.deviations.mean()),
                    "deviations": r.deviation_summary(),
                    "msd_draws": r.msd_summary(),
                    "divergence_rate": r.samples.divergence_rate,
                    "flags": list(r.samples.flags),
                }
            else:
                out[r.prior_set] = {"seed": r.seed, "error": r.error}
        return out


def set_seed(seed: int, index: int) -> int:
    """Independent per-set seed derived from the run seed."""
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def _sensitivity_job(args):
    rows, prior_set, config, freq = args
    try:
        spec = ModelSpec(predictors="extended", prior_set=prior_set)
        samples, pred = fit_bayes_full(rows, spec, config)
        return PriorSetResult(prior_set, config.seed, pred.mean, pred.mean - freq, pred.draw_means - freq.mean(), samples)
    except Exception as e:  # one failing set must not sink the others
        log.warning("prior set %s failed: %s", prior_set, e)
        return PriorSetResult(prior_set, config.seed, error=f"{type(e).__name__}: {e}")


def prior_sensitivity(rows: Sequence[FeatureRow], config: SamplerConfig, prior_sets: Sequence[str] = PRIOR_SETS, workers: int = 1) -> SensitivityReport:
    """Fit the single-level extended model once per prior set.

    Each set samples with its own seed derived from ``config.seed`` and its
    position in :data:`PRIOR_SETS`, so a set's draws do not depend on which
    other sets run alongside it.
    """
    _, freq = fit_frequentist(rows, "extended")
    jobs = [(list(rows), ps, replace(config, seed=set_seed(config.seed, PRIOR_SETS.index(ps))), freq) for ps in prior_sets]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(min(workers, len(jobs))) as ex:
            results = list(ex.map(_sensitivity_job, jobs))
    else:
        results = [_sensitivity_job(j) for j in jobs]
    return SensitivityReport(freq, results)


# -- writers -------------------------------------------------------------------


def write_json(path, doc) -> None:
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True, default=_jsonable) + "\n", encoding="utf-8")


def _jsonable(v):
    if isinstance(v, np.generic):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    raise TypeError(f"cannot serialise {type(v).__name__}")


def write_adjustments(path, report: AdjustmentReport, hier, base) -> None:
    write_csv(
        path,
        ["shot", "group", "hierarchical", "baseline", "adjustment"],
        ((i, g, float(h), float(b), float(a)) for i, (g, h, b, a) in enumerate(zip(report.groups, hier, base, report.adjustments))),
    )


def write_curve(path, bins: Sequence[CurveBin]) -> None:
    write_csv(
        path,
        ["bin_low", "bin_high", "n", "adjustment", "hierarchical", "baseline"],
        ((b.low, b.high, b.n, b.adjustment, b.hierarchical, b.baseline) for b in bins),
    )


def write_group_summary(path, report: AdjustmentReport) -> None:
    keys = ["n", "mean"] + [f"q{int(round(q * 100)):02d}" for q in QUANTILES]
    write_csv(path, ["group", *keys], ([g, *(s[k] for k in keys)] for g, s in report.by_group.items()))


def write_deviations(path, report: SensitivityReport) -> None:
    """Per-shot deviations from the frequentist predictions, one column per prior set."""
    ok = [r for r in report.results if r.ok]
    write_csv(
        path,
        ["shot", "frequentist", *(r.prior_set for r in ok)],
        ([i, float(f), *(float(r.deviations[i]) for r in ok)] for i, f in enumerate(report.frequentist)),
    )


def write_draw_msd(path, report: SensitivityReport) -> None:
    """MSD against the frequentist predictions per posterior draw, one column per prior set."""
    ok = [r for r in report.results if r.ok]
    n = min((len(r.draw_msd) for r in ok), default=0)
    write_csv(path, ["draw", *(r.prior_set for r in ok)], ([i, *(float(r.draw_msd[i]) for r in ok)] for i in range(n)))
