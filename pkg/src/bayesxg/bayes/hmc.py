"""Hamiltonian Monte Carlo with dynamic trajectories (multinomial NUTS).

The sampler works on any differentiable log-density supplied as a callable
``logp_grad(q) -> (logp, grad)``. Warmup adapts the step size by dual
averaging and a diagonal inverse metric over expanding windows; both are
frozen afterwards.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MAX_DELTA_H = 1000.0


class NonFiniteGradient(FloatingPointError):
    pass


@dataclass
class DualAveraging:
    """Step-size adaptation of Hoffman & Gelman (2014)."""

    target: float
    mu: float
    gamma: float = 0.05
    t0: float = 10.0
    kappa: float = 0.75
    counter: int = 0
    s_bar: float = 0.0
    x_bar: float = 0.0

    @classmethod
    def start(cls, step_size: float, target: float) -> "DualAveraging":
        return cls(target=target, mu=float(np.log(10.0 * step_size)))

    def update(self, accept_stat: float) -> float:
        self.counter += 1
        eta = 1.0 / (self.counter + self.t0)
        self.s_bar = (1.0 - eta) * self.s_bar + eta * (self.target - accept_stat)
        x = self.mu - np.sqrt(self.counter) / self.gamma * self.s_bar
        w = self.counter ** (-self.kappa)
        self.x_bar = w * x + (1.0 - w) * self.x_bar
        return float(np.exp(x))

    @property
    def final(self) -> float:
        return float(np.exp(self.x_bar))


def adaptation_windows(n_warmup: int, init_buffer: int = 75, term_buffer: int = 50, base_window: int = 25):
    """Metric-estimation windows ``[(start, end), ...]`` within warmup.

    The first ``init_buffer`` and last ``term_buffer`` iterations adapt the
    step size only. Windows double in length; the last one stretches to the
    terminal buffer.
    """
    if n_warmup < 20:
        return []
    if init_buffer + term_buffer + base_window > n_warmup:
        init_buffer = int(0.15 * n_warmup)
        term_buffer = int(0.1 * n_warmup)
        base_window = n_warmup - init_buffer - term_buffer
    last = n_warmup - term_buffer
    windows = []
    start, size = init_buffer, base_window
    while start < last:
        end = start + size
        if end + 2 * size > last:
            end = last
        windows.append((start, end))
        start, size = end, 2 * size
    return windows


def regularized_variance(x: np.ndarray) -> np.ndarray:
    n = x.shape[0]
    var = x.var(axis=0, ddof=1) if n > 1 else np.ones(x.shape[1])
    return (n / (n + 5.0)) * var + 1e-3 * (5.0 / (n + 5.0))


@dataclass
class _State:
    q: np.ndarray
    logp: float
    grad: np.ndarray


@dataclass
class _Tree:
    edge: _State
    p_edge: np.ndarray
    p_beg: np.ndarray
    ps_beg: np.ndarray
    p_end: np.ndarray
    ps_end: np.ndarray
    rho: np.ndarray
    log_w: float
    proposal: _State
    valid: bool
    n_leapfrog: int
    sum_accept: float
    divergent: bool = False


def _no_uturn(ps_minus, ps_plus, rho) -> bool:
    return float(ps_plus @ rho) > 0.0 and float(ps_minus @ rho) > 0.0


@dataclass
class ChainResult:
    draws: np.ndarray
    accept_stat: np.ndarray
    n_leapfrog: np.ndarray
    tree_depth: np.ndarray
    divergent: np.ndarray
    lp: np.ndarray
    step_size: float
    inv_metric: np.ndarray
    warmup_draws: np.ndarray = field(repr=False, default=None)


class Sampler:
    """One chain of NUTS (or fixed-length HMC) on ``logp_grad``."""

    def __init__(
        self,
        logp_grad,
        dim: int,
        rng: np.random.Generator,
        target_accept: float = 0.8,
        max_depth: int = 10,
        algorithm: str = "nuts",
        n_leapfrog: int = 16,
    ):
        if algorithm not in ("nuts", "hmc"):
            raise ValueError(f"unknown algorithm {algorithm!r}")
        self.logp_grad = logp_grad
        self.dim = dim
        self.rng = rng
        self.target_accept = target_accept
        self.max_depth = max_depth
        self.algorithm = algorithm
        self.n_leapfrog = n_leapfrog
        self.inv_metric = np.ones(dim)
        self.step_size = 1.0

    # -- dynamics ---------------------------------------------------------

    def evaluate(self, q: np.ndarray) -> _State:
        logp, grad = self.logp_grad(q)
        logp = float(logp)
        if np.isnan(logp):
            logp = -np.inf
        if np.isfinite(logp) and not np.all(np.isfinite(grad)):
            raise NonFiniteGradient(f"gradient not finite at logp={logp}")
        return _State(q, logp, grad)

    def leapfrog(self, s: _State, p: np.ndarray, eps: float):
        p_half = p + 0.5 * eps * s.grad
        q = s.q + eps * self.inv_metric * p_half
        new = self.evaluate(q)
        if not np.isfinite(new.logp):
            return new, p_half
        return new, p_half + 0.5 * eps * new.grad

    def hamiltonian(self, s: _State, p: np.ndarray) -> float:
        if not np.isfinite(s.logp):
            return np.inf
        return -s.logp + 0.5 * float(p @ (self.inv_metric * p))

    def init_step_size(self, s: _State):
        """Double or halve the step until the one-step acceptance crosses 0.8."""
        eps = self.step_size
        p = self.rng.standard_normal(self.dim) / np.sqrt(self.inv_metric)
        h0 = self.hamiltonian(s, p)
        new, p1 = self.leapfrog(s, p, eps)
        delta = h0 - self.hamiltonian(new, p1)
        direction = 1 if delta > np.log(0.8) else -1
        for _ in range(100):
            p = self.rng.standard_normal(self.dim) / np.sqrt(self.inv_metric)
            h0 = self.hamiltonian(s, p)
            new, p1 = self.leapfrog(s, p, eps)
            delta = h0 - self.hamiltonian(new, p1)
            if direction == 1 and not delta > np.log(0.8):
                break
            if direction == -1 and not delta < np.log(0.8):
                break
            eps = eps * 2.0 if direction == 1 else eps * 0.5
            if eps > 1e7 or eps < 1e-10:
                break
        self.step_size = eps

    # -- NUTS -------------------------------------------------------------

    def _build_tree(self, s: _State, p: np.ndarray, depth: int, eps: float, h0: float) -> _Tree:
        if depth == 0:
            new, p1 = self.leapfrog(s, p, eps)
            h = self.hamiltonian(new, p1)
            if np.isnan(h):
                h = np.inf
            divergent = (h - h0) > MAX_DELTA_H
            ps = self.inv_metric * p1
            acc = float(np.exp(min(0.0, h0 - h))) if np.isfinite(h) else 0.0
            return _Tree(new, p1, p1, ps, p1, ps, p1.copy(), h0 - h, new, not divergent, 1, acc, divergent)

        left = self._build_tree(s, p, depth - 1, eps, h0)
        if not left.valid:
            return left
        right = self._build_tree(left.edge, left.p_edge, depth - 1, eps, h0)
        n = left.n_leapfrog + right.n_leapfrog
        acc = left.sum_accept + right.sum_accept
        if not right.valid:
            right.n_leapfrog, right.sum_accept = n, acc
            return right
        log_w = float(np.logaddexp(left.log_w, right.log_w))
        proposal = right.proposal if self.rng.random() < np.exp(right.log_w - log_w) else left.proposal
        rho = left.rho + right.rho
        valid = (
            _no_uturn(left.ps_beg, right.ps_end, rho)
            and _no_uturn(left.ps_beg, right.ps_beg, left.rho + right.p_beg)
            and _no_uturn(left.ps_end, right.ps_end, right.rho + left.p_end)
        )
        return _Tree(right.edge, right.p_edge, left.p_beg, left.ps_beg, right.p_end, right.ps_end,
                     rho, log_w, proposal, valid, n, acc)

    def nuts_transition(self, s: _State):
        p0 = self.rng.standard_normal(self.dim) / np.sqrt(self.inv_metric)
        h0 = self.hamiltonian(s, p0)
        ps0 = self.inv_metric * p0
        left, right = s, s
        p_left = p_right = p0
        ps_left = ps_right = ps0
        rho = p0.copy()
        log_w = 0.0
        sample = s
        n_leapfrog, sum_acc, depth, divergent = 0, 0.0, 0, False
        while depth < self.max_depth:
            forward = self.rng.random() > 0.5
            if forward:
                tree = self._build_tree(right, p_right, depth, self.step_size, h0)
            else:
                tree = self._build_tree(left, p_left, depth, -self.step_size, h0)
            n_leapfrog += tree.n_leapfrog
            sum_acc += tree.sum_accept
            if not tree.valid:
                divergent = tree.divergent
                break
            depth += 1
            if tree.log_w > log_w or self.rng.random() < np.exp(tree.log_w - log_w):
                sample = tree.proposal
            log_w = float(np.logaddexp(log_w, tree.log_w))
            if forward:
                a_beg_ps, a_end_p, a_end_ps, rho_a = ps_left, p_right, ps_right, rho
                b_beg_p, b_beg_ps, b_end_ps, rho_b = tree.p_beg, tree.ps_beg, tree.ps_end, tree.rho
                right, p_right, ps_right = tree.edge, tree.p_edge, tree.ps_end
            else:
                a_beg_ps, a_end_p, a_end_ps, rho_a = tree.ps_end, tree.p_beg, tree.ps_beg, tree.rho
                b_beg_p, b_beg_ps, b_end_ps, rho_b = p_left, ps_left, ps_right, rho
                left, p_left, ps_left = tree.edge, tree.p_edge, tree.ps_end
            rho = rho_a + rho_b
            if not (
                _no_uturn(a_beg_ps, b_end_ps, rho)
                and _no_uturn(a_beg_ps, b_beg_ps, rho_a + b_beg_p)
                and _no_uturn(a_end_ps, b_end_ps, rho_b + a_end_p)
            ):
                break
        accept = sum_acc / max(n_leapfrog, 1)
        return sample, accept, n_leapfrog, depth, divergent, sample.logp

    # -- static HMC --------------------------------------------------------

    def hmc_transition(self, s: _State):
        p0 = self.rng.standard_normal(self.dim) / np.sqrt(self.inv_metric)
        h0 = self.hamiltonian(s, p0)
        cur, p = s, p0
        divergent = False
        for _ in range(self.n_leapfrog):
            cur, p = self.leapfrog(cur, p, self.step_size)
            if not np.isfinite(cur.logp):
                divergent = True
                break
        h = self.hamiltonian(cur, p)
        if h - h0 > MAX_DELTA_H or np.isnan(h):
            divergent = True
        accept = float(np.exp(min(0.0, h0 - h))) if np.isfinite(h) else 0.0
        new = cur if self.rng.random() < accept else s
        return new, accept, self.n_leapfrog, 0, divergent, new.logp

    # -- driver -------------------------------------------------------------

    def run(self, q0: np.ndarray, n_iter: int, n_warmup: int) -> ChainResult:
        s = self.evaluate(np.asarray(q0, dtype=float).copy())
        if not np.isfinite(s.logp):
            raise ValueError("initial point has zero posterior density")
        self.init_step_size(s)
        da = DualAveraging.start(self.step_size, self.target_accept)
        windows = adaptation_windows(n_warmup)
        window_ends = {end: start for start, end in windows}
        step = self.hmc_transition if self.algorithm == "hmc" else self.nuts_transition

        n_keep = n_iter - n_warmup
        draws = np.empty((n_keep, self.dim))
        warm = np.empty((n_warmup, self.dim))
        stats = {k: np.empty(n_keep) for k in ("accept", "n_leapfrog", "depth", "divergent", "lp")}
        for it in range(n_iter):
            s, acc, nl, depth, div, lp = step(s)
            if it < n_warmup:
                warm[it] = s.q
                self.step_size = da.update(acc)
                if it + 1 in window_ends:
                    start = window_ends[it + 1]
                    self.inv_metric = regularized_variance(warm[start : it + 1])
                    self.init_step_size(s)
                    da = DualAveraging.start(self.step_size, self.target_accept)
                if it + 1 == n_warmup:
                    self.step_size = da.final
            else:
                j = it - n_warmup
                draws[j] = s.q
                stats["accept"][j] = acc
                stats["n_leapfrog"][j] = nl
                stats["depth"][j] = depth
                stats["divergent"][j] = div
                stats["lp"][j] = lp
        return ChainResult(
            draws=draws,
            accept_stat=stats["accept"],
            n_leapfrog=stats["n_leapfrog"].astype(int),
            tree_depth=stats["depth"].astype(int),
            divergent=stats["divergent"].astype(bool),
            lp=stats["lp"],
            step_size=self.step_size,
            inv_metric=self.inv_metric.copy(),
            warmup_draws=warm,
        )


def chain_rng(seed: int, chain: int) -> np.random.Generator:
    """Independent deterministic stream for ``chain`` under ``seed``."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(chain,)))
