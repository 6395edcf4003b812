"""Split-chain R-hat and autocorrelation-based effective sample size."""

from __future__ import annotations

import warnings

import numpy as np

MIN_DRAWS = 100


class InsufficientDraws(ValueError):
    pass


def _as_chains(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 2:
        raise ValueError(f"expected (chains, draws), got shape {x.shape}")
    if x.shape[0] < 2 or x.shape[1] < MIN_DRAWS:
        raise InsufficientDraws(f"need >= 2 chains and >= {MIN_DRAWS} draws, got {x.shape}")
    return x


def _split(x: np.ndarray) -> np.ndarray:
    half = x.shape[1] // 2
    return np.vstack([x[:, :half], x[:, x.shape[1] - half :]])


def _extract(samples, param):
    if param is None:
        return samples
    return samples.param(param)


def rhat(samples, param=None) -> float:
    """Split-chain potential scale reduction.

    ``samples`` is either a ``(chains, draws)`` array or a
    :class:`PosteriorSamples` together with a parameter name. Constant
    chains make the statistic undefined; NaN is returned with a warning.
    """
    x = _split(_as_chains(_extract(samples, param)))
    m, n = x.shape
    means = x.mean(axis=1)
    w = x.var(axis=1, ddof=1).mean()
    b = n * means.var(ddof=1)
    if w == 0.0:
        warnings.warn("R-hat undefined for constant chains", RuntimeWarning, stacklevel=2)
        return float("nan")
    var_plus = (n - 1) / n * w + b / n
    return float(np.sqrt(var_plus / w))


def _autocov(x: np.ndarray) -> np.ndarray:
    n = x.shape[-1]
    size = 2 ** int(np.ceil(np.log2(2 * n)))
    xc = x - x.mean(axis=-1, keepdims=True)
    f = np.fft.rfft(xc, size, axis=-1)
    ac = np.fft.irfft(f * np.conj(f), size, axis=-1)[..., :n]
    return ac / n


def ess(samples, param=None) -> float:
    """Multi-chain effective sample size with Geyer's initial monotone sequence."""
    x = _split(_as_chains(_extract(samples, param)))
    m, n = x.shape
    acov = _autocov(x)
    chain_var = acov[:, 0] * n / (n - 1.0)
    w = chain_var.mean()
    if w == 0.0:
        warnings.warn("ESS undefined for constant chains", RuntimeWarning, stacklevel=2)
        return float("nan")
    var_plus = w * (n - 1.0) / n + x.mean(axis=1).var(ddof=1)
    rho = 1.0 - (w - acov.mean(axis=0)) / var_plus
    rho[0] = 1.0

    # sum of consecutive pairs, truncated at the first negative pair and made monotone
    pairs = rho[: 2 * (n // 2)].reshape(-1, 2).sum(axis=1)
    k = 0
    while k < pairs.size and pairs[k] > 0:
        k += 1
    pairs = np.minimum.accumulate(pairs[:k]) if k else pairs[:0]
    tau = -1.0 + 2.0 * float(pairs.sum())
    tau = max(tau, 1.0 / np.log10(m * n))
    return float(m * n / tau)


def mcse(samples, param=None) -> float:
    x = _as_chains(_extract(samples, param))
    return float(x.std(ddof=1) / np.sqrt(ess(x)))


def summary(samples) -> list[dict]:
    rows = []
    for name in samples.param_names:
        x = samples.param(name)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            try:
                r, e = rhat(x), ess(x)
            except InsufficientDraws:
                r = e = float("nan")
        rows.append(
            {
                "param": name,
                "mean": float(x.mean()),
                "sd": float(x.std(ddof=1)),
                "q05": float(np.quantile(x, 0.05)),
                "q95": float(np.quantile(x, 0.95)),
                "rhat": r,
                "ess": e,
            }
        )
    return rows
