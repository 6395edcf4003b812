"""Logistic regression by Newton-Raphson (IRLS) with a tiny ridge."""

from __future__ import annotations

import json
import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, log_expit

from .features import ColumnMismatch, DesignLayout, DesignMatrix

log = logging.getLogger(__name__)

RIDGE = 1e-6
MAX_ITER = 100
SCORE_TOL = 1e-8
LOGLIK_RTOL = 1e-10


class Separation(RuntimeWarning):
    pass


class RankDeficient(np.linalg.LinAlgError):
    pass


@dataclass
class Coefficients:
    intercept: float
    betas: np.ndarray
    columns: list[str]
    converged: bool = True
    iterations: int = 0
    log_likelihood: float = float("nan")
    layout: DesignLayout | None = field(default=None, repr=False)

    @property
    def params(self) -> np.ndarray:
        """Intercept followed by the slopes."""
        return np.concatenate([[self.intercept], self.betas])

    def named(self) -> dict[str, float]:
        out = {"intercept": float(self.intercept)}
        out.update({c: float(b) for c, b in zip(self.columns, self.betas)})
        return out

    def raw_scale(self) -> dict[str, float]:
        """Coefficients for unstandardised predictors."""
        if self.layout is None:
            return self.named()
        slopes = self.betas / self.layout.scale
        intercept = self.intercept - float(np.sum(slopes * self.layout.center))
        out = {"intercept": intercept}
        out.update({c: float(b) for c, b in zip(self.columns, slopes)})
        return out

    def to_json(self) -> str:
        doc = {
            "intercept": float(self.intercept),
            "betas": self.named(),
            "converged": bool(self.converged),
            "iterations": int(self.iterations),
            "log_likelihood": float(self.log_likelihood),
            "layout": None if self.layout is None else self.layout.to_dict(),
        }
        return json.dumps(doc, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "Coefficients":
        doc = json.loads(text)
        named = dict(doc["betas"])
        named.pop("intercept", None)
        layout = None if doc.get("layout") is None else DesignLayout.from_dict(doc["layout"])
        cols = layout.columns if layout is not None else list(named)
        return cls(
            intercept=doc["intercept"],
            betas=np.array([named[c] for c in cols]),
            columns=list(cols),
            converged=doc["converged"],
            iterations=doc["iterations"],
            log_likelihood=doc["log_likelihood"],
            layout=layout,
        )


def bernoulli_loglik(eta: np.ndarray, y: np.ndarray) -> float:
    return float(np.sum(y * log_expit(eta) + (1.0 - y) * log_expit(-eta)))


def _as_matrix(design) -> tuple[np.ndarray, list[str], DesignLayout | None]:
    if isinstance(design, DesignMatrix):
        return design.X, list(design.columns), design.layout
    X = np.asarray(design, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    return X, [f"x{j}" for j in range(X.shape[1])], None


def fit_logistic(design, y, ridge: float = RIDGE, max_iter: int = MAX_ITER) -> Coefficients:
    """Maximise the Bernoulli log-likelihood minus ``ridge/2 * |beta|^2``.

    The intercept is added here and is not penalised. Iteration stops when
    the max-abs score falls below 1e-8 or the relative change in the
    objective falls below 1e-10.
    """
    X, cols, layout = _as_matrix(design)
    y = np.asarray(y, dtype=float)
    n, k = X.shape
    if y.shape != (n,):
        raise ValueError(f"outcomes have shape {y.shape}, expected ({n},)")
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("outcomes must be 0/1")
    if n < k + 2:
        raise ValueError(f"need at least {k + 2} rows for {k} columns")
    X1 = np.hstack([np.ones((n, 1)), X])
    if np.linalg.matrix_rank(X1) < k + 1:
        raise RankDeficient("design matrix with intercept is rank deficient")

    pen = np.full(k + 1, ridge)
    pen[0] = 0.0

    def objective(b):
        return bernoulli_loglik(X1 @ b, y) - 0.5 * float(np.sum(pen * b * b))

    rate = np.clip(y.mean(), 1e-6, 1 - 1e-6)
    beta = np.zeros(k + 1)
    beta[0] = np.log(rate / (1 - rate))
    obj = objective(beta)
    converged = False
    step_norms = []
    stalled = False
    it = 0
    for it in range(1, max_iter + 1):
        p = expit(X1 @ beta)
        score = X1.T @ (y - p) - pen * beta
        if np.max(np.abs(score)) < SCORE_TOL:
            converged = True
            it -= 1
            break
        w = p * (1.0 - p)
        H = (X1 * w[:, None]).T @ X1 + np.diag(pen)
        try:
            step = np.linalg.solve(H, score)
        except np.linalg.LinAlgError as e:
            raise RankDeficient(str(e)) from e
        t = 1.0
        while True:
            cand = beta + t * step
            new = objective(cand)
            if new >= obj or t < 1e-10:
                break
            t *= 0.5
        step_norms.append(float(np.linalg.norm(t * step)))
        beta = cand
        rel = abs(new - obj) / max(abs(obj), 1.0)
        obj = new
        # one more Newton step after the objective stalls polishes the score
        if rel < LOGLIK_RTOL:
            if stalled:
                converged = True
                break
            stalled = True
        if len(step_norms) >= 8 and step_norms[-1] > 1.0 and all(
            a <= b for a, b in zip(step_norms[-6:], step_norms[-5:])
        ):
            break

    if not converged:
        warnings.warn(
            "logistic fit did not converge; coefficients diverging suggests separation",
            Separation,
            stacklevel=2,
        )
    return Coefficients(
        intercept=float(beta[0]),
        betas=beta[1:].copy(),
        columns=cols,
        converged=converged,
        iterations=it,
        log_likelihood=bernoulli_loglik(X1 @ beta, y),
        layout=layout,
    )


def linear_predictor(coefs: Coefficients, design) -> np.ndarray:
    X, cols, _ = _as_matrix(design)
    if isinstance(design, DesignMatrix) and list(cols) != list(coefs.columns):
        raise ColumnMismatch(f"design columns {cols} differ from fitted {coefs.columns}")
    if X.shape[1] != len(coefs.betas):
        raise ColumnMismatch(f"design has {X.shape[1]} columns, model has {len(coefs.betas)}")
    return coefs.intercept + X @ coefs.betas


def predict_proba(coefs: Coefficients, design) -> np.ndarray:
    return expit(linear_predictor(coefs, design))


def score_vector(coefs: Coefficients, design, y, ridge: float = RIDGE) -> np.ndarray:
    """Gradient of the penalised log-likelihood at ``coefs``."""
    X, _, _ = _as_matrix(design)
    X1 = np.hstack([np.ones((X.shape[0], 1)), X])
    beta = coefs.params
    pen = np.full(beta.size, ridge)
    pen[0] = 0.0
    return X1.T @ (np.asarray(y, float) - expit(X1 @ beta)) - pen * beta
