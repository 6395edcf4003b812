"""Running the sampler on a model and working with its draws."""

from __future__ import annotations

import csv
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import expit

from ..features import ColumnMismatch, DesignMatrix
from .diagnostics import InsufficientDraws, ess, rhat
from .hmc import Sampler, chain_rng
from .model import ModelSpec, Posterior

log = logging.getLogger(__name__)

DIVERGENCE_LIMIT = 0.05


@dataclass
class SamplerConfig:
    chains: int = 4
    draws: int = 1500  # per chain, warmup included
    warmup: int = 250
    target_accept: float = 0.95
    seed: int = 0
    max_depth: int = 10
    algorithm: str = "nuts"
    n_leapfrog: int = 16
    workers: int = 1

    def __post_init__(self):
        if self.chains < 1:
            raise ValueError("need at least one chain")
        if not 0 <= self.warmup < self.draws:
            raise ValueError(f"warmup ({self.warmup}) must be below draws ({self.draws})")
        if not 0.0 < self.target_accept < 1.0:
            raise ValueError("target_accept must lie in (0, 1)")

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("workers")
        return d


@dataclass
class PosteriorSamples:
    """Post-warmup draws in the reported parametrisation, shape (chains, draws, dim)."""

    draws: np.ndarray
    param_names: list
    warmup: int
    seeds: list
    accept_stat: np.ndarray
    n_leapfrog: np.ndarray
    tree_depth: np.ndarray
    divergent: np.ndarray
    lp: np.ndarray
    step_size: np.ndarray
    inv_metric: np.ndarray
    n_beta: int
    group_levels: list = field(default_factory=list)
    columns: list = field(default_factory=list)
    spec: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)
    flags: list = field(default_factory=list)

    @property
    def n_chains(self) -> int:
        return self.draws.shape[0]

    @property
    def draws_per_chain(self) -> int:
        return self.draws.shape[1]

    def param(self, name: str) -> np.ndarray:
        return self.draws[:, :, self.param_names.index(name)]

    def flat(self) -> np.ndarray:
        return self.draws.reshape(-1, self.draws.shape[-1])

    @property
    def divergence_rate(self) -> float:
        return float(self.divergent.mean())

    @property
    def mean_accept(self) -> float:
        return float(self.accept_stat.mean())

    def group_offsets(self) -> dict[str, np.ndarray]:
        k = len(self.group_levels)
        flat = self.flat()
        return {lv: flat[:, self.n_beta + i] for i, lv in enumerate(self.group_levels[:k])}

    def diagnostics(self) -> dict:
        out = {}
        for name in self.param_names:
            try:
                out[name] = {"rhat": rhat(self.param(name)), "ess": ess(self.param(name))}
            except InsufficientDraws:
                out[name] = {"rhat": None, "ess": None}
        return out

    # -- persistence ---------------------------------------------------------

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["chain", "draw", *self.param_names])
            for c in range(self.n_chains):
                for d in range(self.draws_per_chain):
                    w.writerow([c, d, *(repr(float(v)) for v in self.draws[c, d])])

    def manifest(self) -> dict:
        diag = self.diagnostics()

        def clean(v):
            return None if v is None or not np.isfinite(v) else round(float(v), 6)

        return {
            "spec": self.spec,
            "config": self.config,
            "seeds": list(self.seeds),
            "warmup": self.warmup,
            "draws_per_chain": self.draws_per_chain,
            "param_names": list(self.param_names),
            "group_levels": list(self.group_levels),
            "columns": list(self.columns),
            "mean_accept_stat": [round(float(a), 6) for a in self.accept_stat.mean(axis=1)],
            "divergences": [int(d) for d in self.divergent.sum(axis=1)],
            "divergence_rate": round(self.divergence_rate, 6),
            "step_size": [repr(float(s)) for s in self.step_size],
            "max_tree_depth_hits": int((self.tree_depth >= self.config.get("max_depth", 10)).sum()),
            "diagnostics": {k: {kk: clean(vv) for kk, vv in v.items()} for k, v in diag.items()},
            "flags": list(self.flags),
        }

    def write_manifest(self, path) -> None:
        Path(path).write_text(json.dumps(self.manifest(), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _run_chain(args):
    post, cfg, chain = args
    rng = chain_rng(cfg.seed, chain)
    sampler = Sampler(
        post.sampling_logp_and_grad,
        post.dim,
        rng,
        target_accept=cfg.target_accept,
        max_depth=cfg.max_depth,
        algorithm=cfg.algorithm,
        n_leapfrog=cfg.n_leapfrog,
    )
    q0 = post.initial_point(rng)
    return sampler.run(q0, cfg.draws, cfg.warmup)


def run_hmc(spec: ModelSpec, design: DesignMatrix, y, config: SamplerConfig | None = None) -> PosteriorSamples:
    """Sample the posterior of ``spec`` on ``design``.

    Each chain draws ``config.draws`` iterations, the first ``config.warmup``
    of which adapt the sampler and are discarded. Chains use independent
    streams derived from ``(seed, chain)`` so results do not depend on
    ``workers``.
    """
    cfg = config or SamplerConfig()
    post = Posterior(spec, design, y)
    jobs = [(post, cfg, c) for c in range(cfg.chains)]
    if cfg.workers > 1 and cfg.chains > 1:
        with ProcessPoolExecutor(min(cfg.workers, cfg.chains)) as ex:
            results = list(ex.map(_run_chain, jobs))
    else:
        results = [_run_chain(j) for j in jobs]

    draws = np.stack([post.to_reported(r.draws) for r in results])
    if not np.all(np.isfinite(draws)):
        raise FloatingPointError("non-finite posterior draws")
    samples = PosteriorSamples(
        draws=draws,
        param_names=post.param_names,
        warmup=cfg.warmup,
        seeds=[cfg.seed] * cfg.chains,
        accept_stat=np.stack([r.accept_stat for r in results]),
        n_leapfrog=np.stack([r.n_leapfrog for r in results]),
        tree_depth=np.stack([r.tree_depth for r in results]),
        divergent=np.stack([r.divergent for r in results]),
        lp=np.stack([r.lp for r in results]),
        step_size=np.array([r.step_size for r in results]),
        inv_metric=np.stack([r.inv_metric for r in results]),
        n_beta=post.p,
        group_levels=list(post.levels),
        columns=list(post.columns),
        spec=spec.to_dict(),
        config=cfg.to_dict(),
    )
    if samples.divergence_rate > DIVERGENCE_LIMIT:
        samples.flags.append(f"divergence rate {samples.divergence_rate:.3f} exceeds {DIVERGENCE_LIMIT}")
        log.warning(samples.flags[-1])
    return samples


@dataclass
class Prediction:
    mean: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    draw_means: np.ndarray | None = None  # per draw, average over shots


def posterior_predict(samples: PosteriorSamples, design: DesignMatrix, group_index=None, chunk: int = 512) -> Prediction:
    """Per-shot posterior mean probability and central 90% interval.

    Also returns, for each draw, the probability averaged over all shots.

    Rows whose group level was not seen in the fit (index -1) get a zero
    offset.
    """
    if list(design.columns) != list(samples.columns):
        raise ColumnMismatch(f"design columns {design.columns} differ from fitted {samples.columns}")
    flat = samples.flat()
    beta = flat[:, : samples.n_beta]
    k = len(samples.group_levels)
    if group_index is None:
        group_index = design.group_index
    n = len(design)
    X = design.X
    mean, lo, hi = np.empty(n), np.empty(n), np.empty(n)
    total = np.zeros(flat.shape[0])
    for start in range(0, n, chunk):
        sl = slice(start, min(n, start + chunk))
        eta = beta[:, :1] + beta[:, 1:] @ X[sl].T
        if k and group_index is not None:
            gi = np.asarray(group_index[sl])
            u = np.concatenate([flat[:, samples.n_beta : samples.n_beta + k], np.zeros((flat.shape[0], 1))], axis=1)
            eta = eta + u[:, np.where(gi < 0, k, gi)]
        p = expit(eta)
        mean[sl] = p.mean(axis=0)
        total += p.sum(axis=1)
        lo[sl], hi[sl] = np.quantile(p, [0.05, 0.95], axis=0)
    return Prediction(mean, lo, hi, total / max(n, 1))
