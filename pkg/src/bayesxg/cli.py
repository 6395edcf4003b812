"""Command-line entry point: ``bayesxg <command> [options]``.

Settings come from built-in defaults, then an optional ``--config`` JSON
file, then explicit flags. Every command writes into ``--out`` and leaves a
``manifest.json`` there with the resolved settings, seeds and SHA-256
hashes of its inputs and outputs.

Exit codes: 0 success, 1 invalid arguments or settings, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__, analysis
from .bayes.diagnostics import summary as draw_summary
from .bayes.fit import SamplerConfig
from .bayes.model import PRIOR_SETS, ModelSpec, resolve_players
from .dists import PriorDist
from .features import POSITIONS, default_group_levels, engineer, group_labels, outcomes
from .synth import REALISTIC_BETA, TruthConfig, generate_shots
from .tables import read_features, read_raw_shots, write_csv, write_features, write_raw_shots

log = logging.getLogger("bayesxg")

COMMANDS = ("ingest", "features", "fit", "adjustments", "validate-bayes", "players", "totals", "prior-sensitivity", "synth")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    data_dir: str | None = None
    shots: str | None = None
    competitions: list = field(default_factory=list)
    model: str = "baseline"
    method: str = "freq"
    grouping: str = "none"
    players: list = field(default_factory=list)
    priors: dict = field(default_factory=dict)
    prior_set: str = "existing"
    baseline: str = "freq"
    chains: int = 4
    draws: int = 1500
    warmup: int = 250
    target_accept: float = 0.95
    seed: int = 0
    workers: int = 1
    min_shots: int = 50
    subsample: int | None = None
    n: int = 1000
    realistic: bool = False
    group_offsets: dict = field(default_factory=dict)
    out: str = "out"

    def validate(self, command: str) -> None:
        def bad(msg):
            raise ConfigError(msg)

        if self.model not in ("baseline", "extended"):
            bad(f"--model must be baseline or extended, got {self.model!r}")
        if self.method not in ("freq", "bayes"):
            bad(f"--method must be freq or bayes, got {self.method!r}")
        if self.grouping not in ("none", "position", "player"):
            bad(f"--grouping must be none, position or player, got {self.grouping!r}")
        if command == "fit" and self.method == "freq" and self.grouping != "none":
            bad("--grouping requires --method bayes; the frequentist fit is single-level")
        if self.grouping == "player" and not self.players and command != "synth":
            bad("--grouping player needs a non-empty --players list")
        if command == "totals" and not self.players:
            bad("totals needs a non-empty --players list")
        if self.prior_set not in PRIOR_SETS:
            bad(f"unknown prior set {self.prior_set!r}")
        if self.baseline not in ("freq", "bayes"):
            bad(f"--baseline must be freq or bayes, got {self.baseline!r}")
        if self.chains < 1 or self.draws < 1 or self.warmup < 0 or self.warmup >= self.draws:
            bad(f"need chains >= 1 and 0 <= warmup < draws (got {self.chains}, {self.draws}, {self.warmup})")
        if not 0.0 < self.target_accept < 1.0:
            bad(f"--target-accept must lie in (0, 1), got {self.target_accept}")
        if command == "synth" and self.grouping == "player" and not self.group_offsets:
            bad("synth with --grouping player needs group_offsets naming the players")
        if self.subsample is not None and self.subsample < 1:
            bad("--subsample must be positive")
        if command == "ingest" and not self.data_dir:
            bad("ingest needs --data-dir")
        if command not in ("ingest", "synth") and not (self.shots or self.data_dir):
            bad(f"{command} needs --shots or --data-dir")
        for k, v in self.priors.items():
            try:
                PriorDist.from_dict(v)
            except Exception as e:
                bad(f"bad prior override for {k!r}: {e}")

    def sampler(self) -> SamplerConfig:
        return SamplerConfig(
            chains=self.chains,
            draws=self.draws,
            warmup=self.warmup,
            target_accept=self.target_accept,
            seed=self.seed,
            workers=self.workers,
        )

    def echo(self) -> dict:
        d = asdict(self)
        d.pop("workers")
        return d


# -- argument parsing -----------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _csv_list(text: str) -> list[str]:
    return [s.strip() for s in text.split(",") if s.strip()]


def _int_list(text: str) -> list[int]:
    try:
        return [int(s) for s in _csv_list(text)]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    # flags default to None so that --config values are only overridden when given
    common.add_argument("--data-dir")
    common.add_argument("--shots", help="canonical features CSV (raw-shot CSV for the features command)")
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--competitions", type=_int_list, help="comma-separated competition ids")
    common.add_argument("--model", choices=("baseline", "extended"))
    common.add_argument("--method", choices=("freq", "bayes"))
    common.add_argument("--grouping", choices=("none", "position", "player"))
    common.add_argument("--players", type=_csv_list, help="comma-separated player names")
    common.add_argument("--prior-set", choices=PRIOR_SETS)
    common.add_argument("--baseline", choices=("freq", "bayes"), help="single-level reference for adjustments")
    common.add_argument("--chains", type=int)
    common.add_argument("--draws", type=int, help="iterations per chain, warmup included")
    common.add_argument("--warmup", type=int)
    common.add_argument("--target-accept", type=float)
    common.add_argument("--seed", type=int)
    common.add_argument("--workers", type=int)
    common.add_argument("--min-shots", type=int)
    common.add_argument("--subsample", type=int, help="random subsample size (prior-sensitivity)")
    common.add_argument("--n", type=int, help="number of synthetic shots")
    common.add_argument("--realistic", action="store_const", const=True, help="synthetic features at data-set frequencies")
    common.add_argument("--out")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="bayesxg", description="Expected-goals models: ingest, fit and analyse.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    known = {f.name for f in fields(RunConfig)}
    values: dict = {}
    if args.config:
        try:
            doc = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"--config {args.config}: {e}") from None
        if not isinstance(doc, dict):
            raise ConfigError("--config must hold a JSON object")
        doc = {k.replace("-", "_"): v for k, v in doc.items()}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"--config has unknown keys {sorted(unknown)}")
        values.update(doc)
    for name in known:
        v = getattr(args, name, None)
        if v is not None:
            values[name] = v
    try:
        cfg = RunConfig(**values)
    except TypeError as e:
        raise ConfigError(str(e)) from None
    cfg.validate(args.command)
    return cfg


# -- helpers ------------------------------------------------------------------------


def sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


class Run:
    """Tracks inputs and outputs of one command for its manifest."""

    def __init__(self, command: str, cfg: RunConfig):
        self.command = command
        self.cfg = cfg
        self.out = Path(cfg.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.inputs: dict[str, str] = {}
        self.outputs: list[str] = []
        self.seeds: dict = {"seed": cfg.seed}

    def input(self, path) -> Path:
        p = Path(path)
        if p.is_file():
            self.inputs[str(path)] = sha256(p)
        return p

    def path(self, name: str) -> Path:
        self.outputs.append(name)
        return self.out / name

    def manifest(self) -> None:
        doc = {
            "command": self.command,
            "version": __version__,
            "config": self.cfg.echo(),
            "seeds": self.seeds,
            "inputs": dict(sorted(self.inputs.items())),
            "outputs": {n: sha256(self.out / n) for n in sorted(set(self.outputs))},
        }
        (self.out / "manifest.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _league(cfg: RunConfig) -> str:
    return "c" + "-".join(str(c) for c in cfg.competitions) if cfg.competitions else "all"


def load_rows(run: Run):
    cfg = run.cfg
    if cfg.shots:
        rows = read_features(run.input(cfg.shots))
        if cfg.competitions:
            wanted = set(cfg.competitions)
            rows = [r for r in rows if r.competition_id in wanted]
    else:
        from .ingest import ingest

        run.input(Path(cfg.data_dir) / "competitions.json")
        rows = [engineer(s) for s in ingest(cfg.data_dir, cfg.competitions or None, cfg.workers)]
    if not rows:
        raise RuntimeError("no shots to work with")
    return rows


def _spec(cfg: RunConfig, players=()) -> ModelSpec:
    return ModelSpec(
        predictors=cfg.model,
        grouping=cfg.grouping,
        players=tuple(players),
        prior_set=cfg.prior_set,
        priors={k: PriorDist.from_dict(v) for k, v in cfg.priors.items()},
    )


def _players(cfg: RunConfig, rows) -> list[str]:
    return resolve_players(cfg.players, sorted({r.player for r in rows}))


def _write_samples(run: Run, samples, tag: str) -> None:
    samples.write_csv(run.path(f"draws_{tag}.csv"))
    rows = draw_summary(samples)
    keys = ["param", "mean", "sd", "q05", "q95", "rhat", "ess"]
    write_csv(run.path(f"summary_{tag}.csv"), keys, ([r[k] for k in keys] for r in rows))
    samples.write_manifest(run.path(f"sampler_{tag}.json"))
    run.seeds["chain_streams"] = [[samples.config["seed"], c] for c in range(samples.n_chains)]


# -- commands -------------------------------------------------------------------------


def cmd_ingest(run: Run) -> None:
    from .ingest import ingest

    cfg = run.cfg
    run.input(Path(cfg.data_dir) / "competitions.json")
    shots = ingest(cfg.data_dir, cfg.competitions or None, cfg.workers)
    write_raw_shots(run.path("raw_shots.csv"), shots)
    log.info("%d shots", len(shots))


def cmd_features(run: Run) -> None:
    cfg = run.cfg
    if cfg.shots:
        rows = [engineer(s) for s in read_raw_shots(run.input(cfg.shots))]
    else:
        rows = load_rows(run)
    write_features(run.path("features.csv"), rows)


def cmd_fit(run: Run) -> None:
    cfg = run.cfg
    rows = load_rows(run)
    y = outcomes(rows)
    ref = np.array([r.statsbomb_xg for r in rows])
    tag = f"{cfg.model}_{_league(cfg)}"
    if cfg.method == "freq":
        coefs, pred = analysis.fit_frequentist(rows, cfg.model)
        run.path(f"coefficients_{tag}.json").write_text(coefs.to_json() + "\n", encoding="utf-8")
    else:
        tag += f"_{cfg.grouping}_seed{cfg.seed}"
        samples, pred = analysis.fit_bayes(rows, _spec(cfg, _players(cfg, rows)), cfg.sampler())
        _write_samples(run, samples, tag)
    report = analysis.metric_report(pred, y, ref)
    write_csv(run.path(f"metrics_{tag}.csv"), list(analysis.MetricReport.HEADER), [report.row()])
    write_csv(run.path(f"predictions_{tag}.csv"), ["shot", "player", "goal", "statsbomb_xg", "xg"], ((i, r.player, r.goal, r.statsbomb_xg, float(p)) for i, (r, p) in enumerate(zip(rows, pred))))


def _write_adjustment_files(run: Run, report, hier, base, tag: str) -> None:
    analysis.write_adjustments(run.path(f"adjustments_{tag}.csv"), report, hier, base)
    analysis.write_group_summary(run.path(f"adjustment_groups_{tag}.csv"), report)
    analysis.write_curve(run.path(f"curve_distance_{tag}.csv"), report.distance_curve)
    analysis.write_curve(run.path(f"curve_angle_{tag}.csv"), report.angle_curve)


def cmd_adjustments(run: Run) -> None:
    cfg = run.cfg
    rows = load_rows(run)
    grouping = cfg.grouping if cfg.grouping != "none" else "position"
    players = _players(cfg, rows) if grouping == "player" else []
    spec = ModelSpec(predictors=cfg.model, grouping=grouping, players=tuple(players), prior_set=cfg.prior_set)
    samples, hier = analysis.fit_bayes(rows, spec, cfg.sampler())
    if cfg.baseline == "freq":
        _, base = analysis.fit_frequentist(rows, cfg.model)
    else:
        _, base = analysis.fit_bayes(rows, ModelSpec(predictors=cfg.model, prior_set=cfg.prior_set), cfg.sampler())
    levels = default_group_levels(grouping, players)
    labels = group_labels(rows, grouping, players)
    report = analysis.xg_adjustments(hier, base, labels, [r.distance_to_goal for r in rows], [r.shot_angle for r in rows], levels)
    tag = f"{cfg.model}_{grouping}_{_league(cfg)}_seed{cfg.seed}"
    _write_samples(run, samples, tag)
    _write_adjustment_files(run, report, hier, base, tag)
    analysis.write_json(run.path(f"adjustment_summary_{tag}.json"), {"overall_mean": report.overall_mean, "by_group": report.by_group, "flags": samples.flags})


def cmd_validate_bayes(run: Run) -> None:
    cfg = run.cfg
    rows = load_rows(run)
    res = analysis.positional_validation(rows, cfg.sampler(), cfg.model, cfg.baseline)
    tag = f"{cfg.model}_position_{_league(cfg)}_seed{cfg.seed}"
    _write_samples(run, res.samples, tag)
    write_csv(run.path(f"validation_{tag}.csv"), ["position", "model_adjustment", "theoretical_adjustment"], res.table())
    analysis.write_json(
        run.path(f"validation_{tag}.json"),
        {
            "model": res.model.by_group,
            "theoretical": asdict(res.theoretical),
            "ordering": sorted(res.model.group_means(), key=lambda k: -res.model.group_means()[k]),
            "flags": res.samples.flags,
        },
    )
    analysis.write_curve(run.path(f"curve_distance_{tag}.csv"), res.model.distance_curve)
    analysis.write_curve(run.path(f"curve_angle_{tag}.csv"), res.model.angle_curve)


def cmd_players(run: Run) -> None:
    cfg = run.cfg
    rows = load_rows(run)
    table = analysis.select_players(rows, cfg.min_shots)
    write_csv(run.path(f"conversion_{_league(cfg)}.csv"), list(analysis.ConversionTable.HEADER), table.render())


def cmd_totals(run: Run) -> None:
    cfg = run.cfg
    rows = load_rows(run)
    players = _players(cfg, rows)
    spec = ModelSpec(predictors=cfg.model, grouping="player", players=tuple(players), prior_set=cfg.prior_set)
    samples, hier = analysis.fit_bayes(rows, spec, cfg.sampler())
    coefs, base = analysis.fit_frequentist(rows, cfg.model)
    totals = analysis.totals_report(samples, rows, base, players, adjusted_pred=hier)
    tag = f"{cfg.model}_player_{_league(cfg)}_seed{cfg.seed}"
    _write_samples(run, samples, tag)
    write_csv(
        run.path(f"totals_{tag}.csv"),
        ["player", "shots", "goals", "baseline_xg", "adjusted_xg", "adjusted_closer"],
        ((t.player, t.shots, t.goals, t.baseline_xg, t.adjusted_xg, t.closer) for t in totals),
    )
    labels = [r.player if r.player in set(players) else "other" for r in rows]
    report = analysis.xg_adjustments(hier, base, labels, [r.distance_to_goal for r in rows], [r.shot_angle for r in rows], [*players, "other"])
    _write_adjustment_files(run, report, hier, base, tag)


def cmd_prior_sensitivity(run: Run) -> None:
    cfg = run.cfg
    rows = load_rows(run)
    if cfg.subsample is not None and cfg.subsample < len(rows):
        idx = np.sort(np.random.default_rng(cfg.seed).choice(len(rows), cfg.subsample, replace=False))
        rows = [rows[i] for i in idx]
        run.seeds["subsample"] = cfg.seed
    sampler = cfg.sampler()
    report = analysis.prior_sensitivity(rows, sampler, workers=cfg.workers)
    run.seeds["prior_sets"] = {r.prior_set: r.seed for r in report.results}
    tag = f"extended_{_league(cfg)}_seed{cfg.seed}"
    analysis.write_draw_msd(run.path(f"msd_{tag}.csv"), report)
    analysis.write_deviations(run.path(f"deviations_{tag}.csv"), report)
    ok = [r for r in report.results if r.ok]
    write_csv(
        run.path(f"predictions_{tag}.csv"),
        ["shot", "frequentist", *(r.prior_set for r in ok)],
        ([i, float(f), *(float(r.predictions[i]) for r in ok)] for i, f in enumerate(report.frequentist)),
    )
    analysis.write_json(run.path(f"prior_sensitivity_{tag}.json"), report.summary())
    failed = [r.prior_set for r in report.results if not r.ok]
    if failed:
        raise RuntimeError(f"prior sets failed: {failed}")


def cmd_synth(run: Run) -> None:
    cfg = run.cfg
    offsets = dict(cfg.group_offsets)
    grouping = "player" if cfg.grouping == "player" else "position"
    if grouping == "position" and not offsets:
        offsets = {p: 0.0 for p in POSITIONS}
    truth = TruthConfig(
        beta=dict(REALISTIC_BETA),
        group_offsets=offsets,
        grouping=grouping,
        n=cfg.n,
        seed=cfg.seed,
        realistic=cfg.realistic,
    )
    rows, p = generate_shots(truth)
    write_features(run.path("features.csv"), rows)
    analysis.write_json(
        run.path("truth.json"),
        {"beta": dict(truth.beta), "group_offsets": offsets, "grouping": grouping, "n": cfg.n, "seed": cfg.seed, "mean_p": float(p.mean())},
    )


HANDLERS = {
    "ingest": cmd_ingest,
    "features": cmd_features,
    "fit": cmd_fit,
    "adjustments": cmd_adjustments,
    "validate-bayes": cmd_validate_bayes,
    "players": cmd_players,
    "totals": cmd_totals,
    "prior-sensitivity": cmd_prior_sensitivity,
    "synth": cmd_synth,
}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
    except ConfigError as e:
        print(f"bayesxg {args.command}: error: {e}", file=sys.stderr)
        return 1
    job = Run(args.command, cfg)
    if args.config:
        job.input(args.config)
    try:
        HANDLERS[args.command](job)
    except ConfigError as e:
        print(f"bayesxg {args.command}: error: {e}", file=sys.stderr)
        return 1
    except Exception as e:
        print(f"bayesxg {args.command}: failed: {type(e).__name__}: {e}", file=sys.stderr)
        job.manifest()
        return 2
    job.manifest()
    return 0


def main() -> None:
    sys.exit(run())
