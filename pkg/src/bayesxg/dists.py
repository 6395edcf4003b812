"""Prior distribution kernels.

Four families are supported: normal, skew-normal, half-normal and uniform.
Every kernel accepts numpy arrays and broadcasts over both the variate and
the parameters, so a whole vector of heterogeneous priors can be evaluated
in one call (see :class:`PriorVector`).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import log_ndtr

LOG_2 = np.log(2.0)
HALF_LOG_2PI = 0.5 * np.log(2.0 * np.pi)

# below this argument phi/Phi is taken from the asymptotic series
MILLS_SWITCH = -8.0
MILLS_TERMS = 12

KINDS = ("normal", "skew_normal", "half_normal", "uniform")


class OutsideSupport(ValueError):
    pass


@dataclass(frozen=True)
class PriorDist:
    """A tagged prior distribution.

    ``normal(mu, sigma)``, ``skew_normal(mu, sigma, alpha)``,
    ``half_normal(scale)`` or ``uniform(low, high)``.
    """

    kind: str
    mu: float = 0.0
    sigma: float = 1.0
    alpha: float = 0.0
    low: float = 0.0
    high: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown prior kind {self.kind!r}")
        if self.kind in ("normal", "skew_normal", "half_normal") and not self.sigma > 0:
            raise ValueError(f"scale must be positive, got {self.sigma}")
        if self.kind == "uniform" and not self.low < self.high:
            raise ValueError(f"uniform needs low < high, got ({self.low}, {self.high})")

    @property
    def support(self) -> tuple[float, float]:
        if self.kind == "half_normal":
            return 0.0, np.inf
        if self.kind == "uniform":
            return self.low, self.high
        return -np.inf, np.inf

    def to_dict(self) -> dict:
        if self.kind == "normal":
            return {"kind": "normal", "mu": self.mu, "sigma": self.sigma}
        if self.kind == "skew_normal":
            return {"kind": "skew_normal", "mu": self.mu, "sigma": self.sigma, "alpha": self.alpha}
        if self.kind == "half_normal":
            return {"kind": "half_normal", "sigma": self.sigma}
        return {"kind": "uniform", "low": self.low, "high": self.high}

    @classmethod
    def from_dict(cls, d: dict) -> "PriorDist":
        return cls(**d)

    def __str__(self):
        if self.kind == "normal":
            return f"N({self.mu:g}, {self.sigma:g})"
        if self.kind == "skew_normal":
            return f"SN({self.mu:g}, {self.sigma:g}, {self.alpha:g})"
        if self.kind == "half_normal":
            return f"HN({self.sigma:g})"
        return f"U({self.low:g}, {self.high:g})"


def normal(mu: float = 0.0, sigma: float = 1.0) -> PriorDist:
    return PriorDist("normal", mu=mu, sigma=sigma)


def skew_normal(mu: float = 0.0, sigma: float = 1.0, alpha: float = 0.0) -> PriorDist:
    return PriorDist("skew_normal", mu=mu, sigma=sigma, alpha=alpha)


def half_normal(scale: float = 1.0) -> PriorDist:
    return PriorDist("half_normal", sigma=scale)


def uniform(low: float = 0.0, high: float = 1.0) -> PriorDist:
    return PriorDist("uniform", low=low, high=high)


# ---------------------------------------------------------------------------
# scalar-family kernels (broadcasting)

def mills_ratio(t):
    """phi(t) / Phi(t), stable for very negative ``t``.

    For t < -8 the ratio is approximately -t; the correction uses the
    asymptotic series of the normal tail.
    """
    t = np.asarray(t, dtype=float)
    out = np.empty_like(t)
    tail = t < MILLS_SWITCH
    body = ~tail
    tb = t[body]
    out[body] = np.exp(-0.5 * tb * tb - HALF_LOG_2PI - log_ndtr(tb))
    tt = t[tail]
    inv2 = 1.0 / (tt * tt)
    # Phi(t) ~ phi(t)/(-t) * sum_n (-1)^n (2n-1)!! / t^(2n)
    series = np.ones_like(tt)
    term = np.ones_like(tt)
    for n in range(1, MILLS_TERMS):
        term = term * -(2 * n - 1) * inv2
        series += term
    out[tail] = -tt / series
    return out if out.ndim else float(out)


def sn_logpdf(x, mu, sigma, alpha):
    z = (np.asarray(x, dtype=float) - mu) / sigma
    return LOG_2 - HALF_LOG_2PI - 0.5 * z * z - np.log(sigma) + log_ndtr(alpha * z)


def sn_grad_x(x, mu, sigma, alpha):
    z = (np.asarray(x, dtype=float) - mu) / sigma
    return (-z + alpha * mills_ratio(alpha * z)) / sigma


def sn_grad_sigma(x, mu, sigma, alpha):
    z = (np.asarray(x, dtype=float) - mu) / sigma
    return (-1.0 + z * z - alpha * z * mills_ratio(alpha * z)) / sigma


def halfnormal_logpdf(x, scale):
    x = np.asarray(x, dtype=float)
    val = LOG_2 - HALF_LOG_2PI - np.log(scale) - 0.5 * (x / scale) ** 2
    return np.where(x >= 0, val, -np.inf)


def uniform_logpdf(x, low, high):
    x = np.asarray(x, dtype=float)
    inside = (x >= low) & (x <= high)
    return np.where(inside, -np.log(high - low), -np.inf)


# ---------------------------------------------------------------------------
# PriorDist front end

def log_pdf(dist: PriorDist, x):
    """Log-density of ``dist`` at ``x``; ``-inf`` outside the support."""
    if dist.kind == "normal":
        z = (np.asarray(x, dtype=float) - dist.mu) / dist.sigma
        out = -HALF_LOG_2PI - 0.5 * z * z - np.log(dist.sigma)
    elif dist.kind == "skew_normal":
        out = sn_logpdf(x, dist.mu, dist.sigma, dist.alpha)
    elif dist.kind == "half_normal":
        out = halfnormal_logpdf(x, dist.sigma)
    else:
        out = uniform_logpdf(x, dist.low, dist.high)
    return out if np.ndim(out) else float(out)


def _check_interior(dist: PriorDist, x):
    lo, hi = dist.support
    xa = np.asarray(x, dtype=float)
    if np.any(xa <= lo) and np.isfinite(lo) or np.any(xa >= hi) and np.isfinite(hi):
        raise OutsideSupport(f"{dist} gradient requested outside the open support")


def grad_log_pdf(dist: PriorDist, x):
    """Derivative of the log-density with respect to the variate."""
    _check_interior(dist, x)
    if dist.kind == "normal":
        out = -(np.asarray(x, dtype=float) - dist.mu) / dist.sigma**2
    elif dist.kind == "skew_normal":
        out = sn_grad_x(x, dist.mu, dist.sigma, dist.alpha)
    elif dist.kind == "half_normal":
        out = -np.asarray(x, dtype=float) / dist.sigma**2
    else:
        out = np.zeros_like(np.asarray(x, dtype=float))
    return out if np.ndim(out) else float(out)


def grad_log_pdf_scale(dist: PriorDist, x):
    """Derivative of the log-density with respect to the scale parameter.

    Defined for the normal, skew-normal and half-normal families.
    """
    if dist.kind == "uniform":
        raise ValueError("uniform has no scale parameter")
    if dist.kind == "half_normal":
        x = np.asarray(x, dtype=float)
        out = (-1.0 + (x / dist.sigma) ** 2) / dist.sigma
    else:
        alpha = dist.alpha if dist.kind == "skew_normal" else 0.0
        out = sn_grad_sigma(x, dist.mu, dist.sigma, alpha)
    return out if np.ndim(out) else float(out)


def sample(dist: PriorDist, rng: np.random.Generator, size=None):
    """Draw from ``dist``. Skew-normal draws use the correlated-normals construction."""
    if dist.kind == "normal":
        return rng.normal(dist.mu, dist.sigma, size)
    if dist.kind == "skew_normal":
        delta = dist.alpha / np.sqrt(1.0 + dist.alpha**2)
        u0 = rng.standard_normal(size)
        v = rng.standard_normal(size)
        u1 = delta * np.abs(u0) + np.sqrt(1.0 - delta**2) * v
        return dist.mu + dist.sigma * u1
    if dist.kind == "half_normal":
        return np.abs(rng.normal(0.0, dist.sigma, size))
    return rng.uniform(dist.low, dist.high, size)


def skew_normal_mean(dist: PriorDist) -> float:
    delta = dist.alpha / np.sqrt(1.0 + dist.alpha**2)
    return dist.mu + dist.sigma * delta * np.sqrt(2.0 / np.pi)


# ---------------------------------------------------------------------------

@dataclass
class PriorVector:
    """A vector of independent priors evaluated in one vectorised pass.

    Normal priors are folded into the skew-normal branch with alpha = 0.
    """

    priors: list
    _sn: np.ndarray = field(init=False, repr=False)
    _hn: np.ndarray = field(init=False, repr=False)
    _un: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        kinds = np.array([p.kind for p in self.priors])
        self._sn = np.flatnonzero((kinds == "normal") | (kinds == "skew_normal"))
        self._hn = np.flatnonzero(kinds == "half_normal")
        self._un = np.flatnonzero(kinds == "uniform")
        self.mu = np.array([p.mu for p in self.priors], dtype=float)
        self.sigma = np.array([p.sigma for p in self.priors], dtype=float)
        self.alpha = np.array(
            [p.alpha if p.kind == "skew_normal" else 0.0 for p in self.priors], dtype=float
        )
        self.low = np.array([p.low for p in self.priors], dtype=float)
        self.high = np.array([p.high for p in self.priors], dtype=float)

    def __len__(self):
        return len(self.priors)

    def logp_and_grad(self, x: np.ndarray) -> tuple[float, np.ndarray]:
        grad = np.zeros_like(x)
        total = 0.0
        i = self._sn
        if i.size:
            total += float(np.sum(sn_logpdf(x[i], self.mu[i], self.sigma[i], self.alpha[i])))
            grad[i] = sn_grad_x(x[i], self.mu[i], self.sigma[i], self.alpha[i])
        i = self._hn
        if i.size:
            total += float(np.sum(halfnormal_logpdf(x[i], self.sigma[i])))
            grad[i] = -x[i] / self.sigma[i] ** 2
        i = self._un
        if i.size:
            total += float(np.sum(uniform_logpdf(x[i], self.low[i], self.high[i])))
        return total, grad

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        return np.array([sample(p, rng) for p in self.priors])
