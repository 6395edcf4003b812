"""Bayesian logistic xG models with varying group intercepts.

The linear predictor is ``beta0 + x . beta + u[g]``. Group offsets have
skew-normal priors ``SN(0, sigma_g, alpha_k)`` with a level-specific shape
and a shared scale ``sigma_g ~ HalfNormal(5)``, sampled as ``log sigma_g``.

Parameter vector layout (the "reported" parametrisation)::

    [intercept, beta_1..beta_p, u_1..u_K, log_sigma_g]

The sampler itself runs on a non-centred version (``u = sigma_g * u_raw``)
with interval-transformed coordinates for uniform priors.
"""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import expit, log_expit

from .. import dists
from ..dists import PriorDist, PriorVector
from ..features import DesignMatrix

POSITION_ALPHA = {"ST": 2.0, "AM": 1.0, "M": 0.0, "D": -2.0}
GOOD_FINISHERS = ("Pirès", "Agüero", "Vardy", "Coutinho")
EPL_PLAYERS = ("Robert Pirès", "Sergio Agüero", "Jamie Vardy", "Philippe Coutinho", "Ross Barkley", "Jonjo Shelvey")
HYPER_SCALE = 5.0

PRIOR_SETS = ("existing", "wide_uniform", "tight_uniform", "wide_normal", "tight_normal", "ill_suited")


class DimensionMismatch(ValueError):
    pass


def _fold(name: str) -> str:
    s = unicodedata.normalize("NFKD", name)
    return "".join(c for c in s if not unicodedata.combining(c)).lower()


def name_matches(query: str, full_name: str) -> bool:
    """Accent- and case-insensitive token containment ("Aguero" ~ "Sergio Leonel Agüero del Castillo")."""
    q = _fold(query).replace("phillippe", "philippe").split()
    f = _fold(full_name).split()
    return all(tok in f for tok in q) if len(q) > 1 else (q[0] in f if q else False)


def resolve_players(requested: Sequence[str], available: Sequence[str]) -> list[str]:
    """Map short or accent-free names onto the names present in the data."""
    out = []
    avail = list(dict.fromkeys(available))
    for r in requested:
        if r in avail:
            out.append(r)
            continue
        hits = [a for a in avail if name_matches(r, a)]
        if not hits:
            # fall back on the surname alone
            surname = r.split()[-1]
            hits = [a for a in avail if name_matches(surname, a)]
        if len(hits) == 1:
            out.append(hits[0])
        elif not hits:
            raise KeyError(f"player {r!r} not found")
        else:
            raise KeyError(f"player {r!r} is ambiguous: {hits[:5]}")
    return out


def _level(col: str) -> int:
    return int(col[col.index("[") + 1 : -1])


def informative_prior(col: str) -> PriorDist:
    """Default prior for an intercept or design column."""
    if col == "intercept":
        return dists.normal(0, 5)
    if col == "distance_to_goal":
        return dists.skew_normal(-1, 5, -1)
    if col == "shot_angle":
        return dists.skew_normal(1, 5, 1)
    if col.startswith("players_in_shot_triangle["):
        return dists.skew_normal(-1, 5, 5 - _level(col))
    if col.startswith("opponents_in_radius["):
        return dists.skew_normal(-1, 5, 1 - _level(col))
    if col in ("gk_in_shot_triangle", "under_pressure"):
        return dists.skew_normal(0, 5, -2)
    if col == "shot_one_on_one":
        return dists.skew_normal(0, 5, 2)
    if col == "shot_open_goal":
        return dists.skew_normal(0, 5, 4)
    # interaction, keeper distance, body part, first time, technique
    return dists.normal(0, 5)


def ill_suited_prior(col: str) -> PriorDist:
    s = 0.25
    if col in ("intercept", "distance_to_goal", "gk_in_shot_triangle", "under_pressure"):
        return dists.skew_normal(0, s, 2)
    if col in ("distance_angle_interaction", "shot_one_on_one"):
        return dists.skew_normal(0, s, -2)
    if col == "shot_open_goal":
        return dists.skew_normal(0, s, -4)
    if col.startswith("players_in_shot_triangle["):
        return dists.skew_normal(0, s, -5 + _level(col))
    if col.startswith("opponents_in_radius["):
        return dists.skew_normal(0, s, 1 - _level(col))
    return dists.normal(0, s)


def prior_for(col: str, prior_set: str = "existing") -> PriorDist:
    if prior_set == "existing":
        return informative_prior(col)
    if prior_set == "wide_uniform":
        return dists.uniform(-100, 100)
    if prior_set == "tight_uniform":
        return dists.uniform(-1, 1)
    if prior_set == "wide_normal":
        return dists.normal(0, 10)
    if prior_set == "tight_normal":
        return dists.normal(0, 0.25)
    if prior_set == "ill_suited":
        return ill_suited_prior(col)
    raise ValueError(f"unknown prior set {prior_set!r}")


def default_group_alpha(grouping: str, levels: Sequence[str]) -> dict[str, float]:
    if grouping == "position":
        return {lv: POSITION_ALPHA[lv] for lv in levels}
    if grouping == "player":
        return {lv: 2.0 if any(name_matches(g, lv) for g in GOOD_FINISHERS) else 0.0 for lv in levels}
    return {}


@dataclass
class ModelSpec:
    """What to fit: predictor set, grouping and priors.

    ``priors`` overrides the prior of individual columns (``"intercept"``
    included); everything else comes from ``prior_set``.
    """

    predictors: str = "baseline"
    grouping: str = "none"
    players: tuple = ()
    prior_set: str = "existing"
    priors: dict = field(default_factory=dict)
    group_alpha: dict = field(default_factory=dict)
    hyper_scale: float = HYPER_SCALE

    def __post_init__(self):
        if self.predictors not in ("baseline", "extended"):
            raise ValueError(f"predictors must be baseline or extended, got {self.predictors!r}")
        if self.grouping not in ("none", "position", "player"):
            raise ValueError(f"unknown grouping {self.grouping!r}")
        if self.grouping == "player" and not self.players:
            raise ValueError("player grouping needs a non-empty player list")
        if self.prior_set not in PRIOR_SETS:
            raise ValueError(f"unknown prior set {self.prior_set!r}")
        self.players = tuple(self.players)

    def column_priors(self, columns: Sequence[str]) -> list[PriorDist]:
        names = ["intercept", *columns]
        return [self.priors.get(c) or prior_for(c, self.prior_set) for c in names]

    def alphas(self, levels: Sequence[str]) -> np.ndarray:
        base = default_group_alpha(self.grouping, levels)
        base.update(self.group_alpha)
        missing = [lv for lv in levels if lv not in base]
        if missing:
            raise ValueError(f"no skew shape for group levels {missing}")
        return np.array([base[lv] for lv in levels], dtype=float)

    def to_dict(self) -> dict:
        return {
            "predictors": self.predictors,
            "grouping": self.grouping,
            "players": list(self.players),
            "prior_set": self.prior_set,
            "priors": {k: v.to_dict() for k, v in self.priors.items()},
            "group_alpha": dict(self.group_alpha),
            "hyper_scale": self.hyper_scale,
        }


class Posterior:
    """Log-posterior and gradient for a spec on a fixed data set."""

    def __init__(self, spec: ModelSpec, design: DesignMatrix, y):
        self.spec = spec
        self.columns = list(design.columns)
        X = np.asarray(design.X, dtype=float)
        self.X1 = np.hstack([np.ones((X.shape[0], 1)), X])
        self.y = np.asarray(y, dtype=float)
        if self.y.shape != (X.shape[0],):
            raise DimensionMismatch(f"outcomes {self.y.shape} vs {X.shape[0]} rows")
        self.p = self.X1.shape[1]
        self.priors = spec.column_priors(self.columns)
        self.prior_vec = PriorVector(self.priors)
        if spec.grouping == "none":
            self.levels: list[str] = []
            self.gi = None
        else:
            if design.group_index is None:
                raise DimensionMismatch("grouped spec needs a design with a group index")
            self.levels = list(design.group_levels)
            self.gi = np.asarray(design.group_index, dtype=int)
            if np.any(self.gi < 0):
                raise DimensionMismatch("every training row needs a known group level")
        self.K = len(self.levels)
        self.alpha = spec.alphas(self.levels) if self.K else np.zeros(0)
        self.hyper = spec.hyper_scale
        self.dim = self.p + (self.K + 1 if self.K else 0)
        bounded = [i for i, pr in enumerate(self.priors) if pr.kind == "uniform"]
        self._bounded = np.array(bounded, dtype=int)
        self._low = np.array([self.priors[i].low for i in bounded])
        self._width = np.array([self.priors[i].high - self.priors[i].low for i in bounded])

    @property
    def param_names(self) -> list[str]:
        names = ["intercept", *self.columns]
        if self.K:
            names += [f"u[{lv}]" for lv in self.levels]
            names.append("log_sigma_g")
        return names

    def _check(self, theta):
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.dim,):
            raise DimensionMismatch(f"theta has shape {theta.shape}, expected ({self.dim},)")
        return theta

    def _lik(self, beta, u):
        eta = self.X1 @ beta
        if self.K:
            eta = eta + u[self.gi]
        # y log s(eta) + (1 - y) log s(-eta) = y eta - softplus(eta), with a shared exp(-|eta|)
        e = np.exp(-np.abs(eta))
        softplus = np.maximum(eta, 0.0) + np.log1p(e)
        prob = np.where(eta >= 0, 1.0, e) / (1.0 + e)
        return float(self.y @ eta - softplus.sum()), self.y - prob

    # -- reported (centred) parametrisation --------------------------------

    def log_likelihood(self, theta) -> float:
        theta = self._check(theta)
        u = theta[self.p : self.p + self.K] if self.K else None
        return self._lik(theta[: self.p], u)[0]

    def log_posterior(self, theta) -> float:
        return self.logp_and_grad(theta)[0]

    def grad_log_posterior(self, theta) -> np.ndarray:
        return self.logp_and_grad(theta)[1]

    def logp_and_grad(self, theta):
        theta = self._check(theta)
        beta = theta[: self.p]
        grad = np.zeros(self.dim)
        u = None
        if self.K:
            u = theta[self.p : self.p + self.K]
            log_sigma = theta[-1]
            sigma = np.exp(log_sigma)
        ll, resid = self._lik(beta, u)
        lp_beta, g_beta = self.prior_vec.logp_and_grad(beta)
        grad[: self.p] = self.X1.T @ resid + g_beta
        total = ll + lp_beta
        if self.K:
            zero = np.zeros(self.K)
            total += float(np.sum(dists.sn_logpdf(u, zero, sigma, self.alpha)))
            total += float(dists.halfnormal_logpdf(sigma, self.hyper)) + log_sigma
            grad[self.p : self.p + self.K] = np.bincount(self.gi, resid, self.K) + dists.sn_grad_x(
                u, zero, sigma, self.alpha
            )
            d_sigma = float(np.sum(dists.sn_grad_sigma(u, zero, sigma, self.alpha))) - sigma / self.hyper**2
            grad[-1] = sigma * d_sigma + 1.0
        return total, grad

    # -- sampling parametrisation -------------------------------------------

    def to_unconstrained(self, theta) -> np.ndarray:
        theta = self._check(theta).copy()
        if self._bounded.size:
            s = (theta[self._bounded] - self._low) / self._width
            theta[self._bounded] = np.log(s) - np.log1p(-s)
        if self.K:
            theta[self.p : self.p + self.K] /= np.exp(theta[-1])
        return theta

    def to_reported(self, phi) -> np.ndarray:
        phi = np.asarray(phi, dtype=float)
        theta = phi.copy()
        if self._bounded.size:
            theta[..., self._bounded] = self._low + self._width * expit(phi[..., self._bounded])
        if self.K:
            theta[..., self.p : self.p + self.K] *= np.exp(phi[..., -1:])
        return theta

    def sampling_logp_and_grad(self, phi):
        """Log-density (with Jacobians) and gradient in the sampler's coordinates."""
        phi = np.asarray(phi, dtype=float)
        beta = phi[: self.p].copy()
        jac = 0.0
        dbeta = None
        if self._bounded.size:
            z = phi[self._bounded]
            s = expit(z)
            beta[self._bounded] = self._low + self._width * s
            # log |d beta / d z| = log width + log s + log(1 - s)
            jac = float(np.sum(np.log(self._width) + log_expit(z) + log_expit(-z)))
            dbeta = self._width * s * (1.0 - s)
        grad = np.zeros(self.dim)
        u = None
        if self.K:
            u_raw = phi[self.p : self.p + self.K]
            log_sigma = phi[-1]
            sigma = np.exp(log_sigma)
            u = sigma * u_raw
        ll, resid = self._lik(beta, u)
        lp_beta, g_beta = self.prior_vec.logp_and_grad(beta)
        g = self.X1.T @ resid + g_beta
        if self._bounded.size:
            g[self._bounded] = g[self._bounded] * dbeta + (1.0 - 2.0 * expit(phi[self._bounded]))
        grad[: self.p] = g
        total = ll + lp_beta + jac
        if self.K:
            zero = np.zeros(self.K)
            per_group = np.bincount(self.gi, resid, self.K)
            total += float(np.sum(dists.sn_logpdf(u_raw, zero, 1.0, self.alpha)))
            total += float(dists.halfnormal_logpdf(sigma, self.hyper)) + log_sigma
            grad[self.p : self.p + self.K] = sigma * per_group + dists.sn_grad_x(u_raw, zero, 1.0, self.alpha)
            grad[-1] = sigma * float(per_group @ u_raw) - sigma**2 / self.hyper**2 + 1.0
        return total, grad

    def initial_point(self, rng: np.random.Generator, radius: float = 0.5) -> np.ndarray:
        phi = rng.uniform(-radius, radius, self.dim)
        if self.K:
            phi[-1] = np.log(0.5) + rng.uniform(-radius, radius)
        return phi


def log_posterior(spec: ModelSpec, design: DesignMatrix, y, theta) -> float:
    return Posterior(spec, design, y).log_posterior(theta)


def grad_log_posterior(spec: ModelSpec, design: DesignMatrix, y, theta) -> np.ndarray:
    return Posterior(spec, design, y).grad_log_posterior(theta)
