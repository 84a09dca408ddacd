"""Gibbs sampler for the multi-way factorization machine.

One iteration updates, in order: the noise precision and the Gaussian-Gamma
hyperpriors, the bias and linear weights, the factor matrix ``V`` (factor by
factor, unit by unit), and finally every interaction column of ``Z``.

The sampler keeps three caches consistent with the current state:

``F``  (N, U, K)  per-unit factor values ``val * V[idx]``
``P``  (N, J, K)  per-column products of ``F`` over the column's units
                  (ones for empty columns)
``e``  (N,)       residuals ``y - y_hat``

and rebuilds them from scratch every ``recompute_every`` iterations to bound
floating-point drift.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, asdict
from typing import Callable

import numpy as np

from . import kernels
from .ffm import ColumnUpdater, FfmParams, build_depth_table, sample_column
from .model import Dataset, ModelParams, factor_values, linear_part, predict_mean

log = logging.getLogger(__name__)


class NumericalError(RuntimeError):
    def __init__(self, message, iteration=None, parameter=None):
        super().__init__(message)
        self.iteration = iteration
        self.parameter = parameter


@dataclass(frozen=True)
class Hyperparams:
    alpha0: float = 1.0
    beta0: float = 1.0
    alpha1: float = 1.0
    beta1: float = 1.0
    mu0: float = 0.0
    gamma0: float = 1.0
    K: int = 5
    J: int = 10
    alpha: float = 0.7
    gamma1: float = 0.2
    gamma2: float = 1.0
    drop_linear_terms: bool = False

    def __post_init__(self):
        for name in ("alpha0", "beta0", "alpha1", "beta1", "gamma0"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.K < 1 or self.J < 1:
            raise ValueError("K and J must be at least 1")
        FfmParams(self.gamma1, self.gamma2, self.alpha, 1)

    def ffm(self, n_units: int) -> FfmParams:
        return FfmParams(self.gamma1, self.gamma2, self.alpha, n_units)


@dataclass
class HyperState:
    mu: float
    lam: float
    mu_k: np.ndarray
    lam_k: np.ndarray

    def copy(self) -> "HyperState":
        return HyperState(float(self.mu), float(self.lam), self.mu_k.copy(), self.lam_k.copy())


@dataclass(frozen=True)
class ChainConfig:
    iterations: int = 2000
    burn_in: int = 1000
    thin: int = 1
    seed: int = 0
    z_sweeps_per_iter: int = 1
    recompute_every: int = 100
    init: str = "small"
    init_scale: float = 0.1

    def __post_init__(self):
        if self.init not in ("small", "prior"):
            raise ValueError(f"init must be 'small' or 'prior', got {self.init!r}")
        if self.iterations < 1 or self.thin < 1 or self.z_sweeps_per_iter < 1:
            raise ValueError("iterations, thin and z_sweeps_per_iter must be positive")
        if not 0 <= self.burn_in < self.iterations:
            raise ValueError("burn_in must satisfy 0 <= burn_in < iterations")


@dataclass
class SampleRecord:
    iteration: int
    theta: ModelParams
    hyper: HyperState
    chain: int = 0


@dataclass
class PosteriorSamples:
    records: list[SampleRecord] = field(default_factory=list)
    n_units: int | None = None

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)


# -- closed-form conditionals ----------------------------------------------------------
# Each returns distribution parameters; Gammas use (shape, rate).

def noise_precision_conditional(ssr: float, N: int, alpha1: float, beta1: float) -> tuple[float, float]:
    return (alpha1 + N) / 2.0, (ssr + beta1) / 2.0


def precision_conditional(values, mean: float, alpha0: float, beta0: float) -> tuple[float, float]:
    values = np.asarray(values, dtype=np.float64)
    return (alpha0 + values.size) / 2.0, (float(np.sum((values - mean) ** 2)) + beta0) / 2.0


def mean_conditional(values, precision: float, mu0: float, gamma0: float) -> tuple[float, float]:
    """Normal conditional (mean, variance) of a shared prior mean.

    ``values ~ N(mean, 1/precision)`` i.i.d. and ``mean ~ N(mu0, 1/gamma0)``.
    """
    values = np.asarray(values, dtype=np.float64)
    post_prec = gamma0 + precision * values.size
    return (precision * float(values.sum()) + gamma0 * mu0) / post_prec, 1.0 / post_prec


def multilinear_conditional(s1: float, s2: float, sigma: float, mu_theta: float,
                            lam_theta: float) -> tuple[float, float]:
    """(mean, variance) of one scalar parameter entering the mean linearly.

    ``s1 = sum (y - l) m`` and ``s2 = sum m^2`` over the data.
    """
    var = 1.0 / (sigma * s2 + lam_theta)
    if not var > 0 or not math.isfinite(var):
        raise NumericalError(f"non-positive conditional variance {var}")
    return var * (sigma * s1 + mu_theta * lam_theta), var


def update_theta_multilinear(y, l, m, sigma: float, mu_theta: float, lam_theta: float,
                             rng: np.random.Generator) -> float:
    """Draw a scalar parameter given ``y_hat = l + theta * m`` elementwise."""
    y, l, m = (np.asarray(a, dtype=np.float64) for a in (y, l, m))
    mean, var = multilinear_conditional(float(np.dot(y - l, m)), float(np.dot(m, m)), sigma, mu_theta, lam_theta)
    return mean + math.sqrt(var) * rng.standard_normal()


def _gamma(rng, shape, rate):
    return rng.gamma(shape, 1.0 / rate)


def log_likelihood(theta: ModelParams, data: Dataset) -> float:
    r = data.y - predict_mean(theta, data)
    N = r.size
    return float(-0.5 * N * math.log(2 * math.pi) + 0.5 * N * math.log(theta.sigma)
                 - 0.5 * theta.sigma * np.dot(r, r))


def draw_from_prior(data_units: int, n_features: int, hyper: Hyperparams,
                    rng: np.random.Generator) -> tuple[ModelParams, HyperState]:
    """Forward draw of every latent quantity from the generative model."""
    K, J = hyper.K, hyper.J
    sigma = _gamma(rng, hyper.alpha1 / 2, hyper.beta1 / 2)
    lam = _gamma(rng, hyper.alpha0 / 2, hyper.beta0 / 2)
    mu = rng.normal(hyper.mu0, 1 / math.sqrt(hyper.gamma0))
    lam_k = np.array([_gamma(rng, hyper.alpha0 / 2, hyper.beta0 / 2) for _ in range(K)])
    mu_k = rng.normal(hyper.mu0, 1 / math.sqrt(hyper.gamma0), size=K)
    w0 = rng.normal(mu, 1 / math.sqrt(lam))
    w = rng.normal(mu, 1 / math.sqrt(lam), size=n_features)
    if hyper.drop_linear_terms:
        w[:] = 0.0
    V = mu_k + rng.standard_normal((n_features, K)) / np.sqrt(lam_k)
    ffm = hyper.ffm(data_units)
    Z = np.column_stack([sample_column(ffm, rng) for _ in range(J)])
    return ModelParams(w0, w, V, Z, sigma), HyperState(mu, lam, mu_k, lam_k)


class GibbsChain:
    """Mutable state of one chain plus its caches."""

    def __init__(self, data: Dataset, hyper: Hyperparams, rng: np.random.Generator,
                 theta: ModelParams | None = None, state: HyperState | None = None,
                 init_scale: float | None = None):
        if data.y is None:
            raise ValueError("training data need a response")
        self.data = data
        self.hyper = hyper
        self.rng = rng
        if theta is None or state is None:
            theta0, state0 = draw_from_prior(data.n_units, data.n_features, hyper, rng)
            if init_scale is not None:
                # hyperpriors, noise and Z stay prior draws; weights start near zero
                theta0.w0 = 0.0
                theta0.w[:] = 0.0
                theta0.V = init_scale * rng.standard_normal(theta0.V.shape)
            theta = theta if theta is not None else theta0
            state = state if state is not None else state0
        self.theta = theta.copy()
        self.state = state.copy()
        self.table = build_depth_table(hyper.ffm(data.n_units), full=False)
        self.updater = ColumnUpdater(self.table)
        self.feature_unit = data.schema.feature_unit
        self.offsets = data.schema.offsets
        self.sizes = np.bincount(self.feature_unit, minlength=data.n_units)
        # row -> feature position within its unit, one contiguous array per unit
        self.local_feat = [np.ascontiguousarray(data.idx[:, u] - self.offsets[u]) for u in range(data.n_units)]
        self.unit_val = [np.ascontiguousarray(data.val[:, u]) for u in range(data.n_units)]
        self.likelihood_scale = 1.0   # 0 disables the data term in Z updates
        self.recompute()

    # -- caches ---------------------------------------------------------------------
    def recompute(self):
        th = self.theta
        self.F = factor_values(self.data, th.V)
        N, J, K = self.data.N, th.J, th.K
        self.P = np.empty((N, J, K))
        for j in range(J):
            self.P[:, j, :] = kernels.column_product(self.F, np.flatnonzero(th.Z[:, j]))
        self.e = self.data.y - self._fresh_prediction()

    def _fresh_prediction(self):
        th = self.theta
        nonempty = th.Z.any(axis=0)
        return linear_part(self.data, th.w0, th.w) + np.einsum("njk,j->n", self.P, nonempty.astype(float))

    def cache_error(self) -> float:
        """Max relative disagreement between incremental caches and a rebuild."""
        F = factor_values(self.data, self.theta.V)
        worst = 0.0
        for j in range(self.theta.J):
            P = kernels.column_product(F, np.flatnonzero(self.theta.Z[:, j]))
            worst = max(worst, float(np.max(np.abs(P - self.P[:, j, :]) / (1.0 + np.abs(P)))))
        worst = max(worst, float(np.max(np.abs(F - self.F) / (1.0 + np.abs(F)))))
        e = self.data.y - predict_mean(self.theta, self.data)
        worst = max(worst, float(np.max(np.abs(e - self.e) / (1.0 + np.abs(e)))))
        return worst

    # -- blocks -----------------------------------------------------------------------
    def update_hyperparams(self):
        h, th, st, rng = self.hyper, self.theta, self.state, self.rng
        shape, rate = noise_precision_conditional(float(self.e @ self.e), self.data.N, h.alpha1, h.beta1)
        th.sigma = _gamma(rng, shape, rate)
        weights = np.array([th.w0]) if h.drop_linear_terms else np.concatenate([[th.w0], th.w])
        shape, rate = precision_conditional(weights, st.mu, h.alpha0, h.beta0)
        st.lam = _gamma(rng, shape, rate)
        mean, var = mean_conditional(weights, st.lam, h.mu0, h.gamma0)
        st.mu = mean + math.sqrt(var) * rng.standard_normal()
        for k in range(h.K):
            shape, rate = precision_conditional(th.V[:, k], st.mu_k[k], h.alpha0, h.beta0)
            st.lam_k[k] = _gamma(rng, shape, rate)
            mean, var = mean_conditional(th.V[:, k], st.lam_k[k], h.mu0, h.gamma0)
            st.mu_k[k] = mean + math.sqrt(var) * rng.standard_normal()

    def _draw_group(self, u, theta_old_feat, m, mu_theta, lam_theta):
        """Draw all features of unit ``u`` whose rows have multiplier ``m``.

        Features of one categorical unit never share a row, so their
        conditionals are independent and can be drawn jointly.
        """
        rows_feat = self.local_feat[u]
        n_feat = int(self.sizes[u])
        s1, s2 = kernels.group_update(rows_feat, self.e, theta_old_feat, m, n_feat)
        sigma = self.theta.sigma
        var = 1.0 / (sigma * s2 + lam_theta)
        if not np.all(var > 0) or not np.all(np.isfinite(var)):
            raise NumericalError(f"non-positive conditional variance for unit {u}", parameter=f"unit {u}")
        mean = var * (sigma * s1 + mu_theta * lam_theta)
        new = mean + np.sqrt(var) * self.rng.standard_normal(n_feat)
        kernels.apply_group_delta(self.e, rows_feat, new - theta_old_feat, m)
        return new

    def update_weights(self):
        th, st, sigma = self.theta, self.state, self.theta.sigma
        s1 = float(np.sum(self.e)) + th.w0 * self.data.N
        mean, var = multilinear_conditional(s1, float(self.data.N), sigma, st.mu, st.lam)
        new = mean + math.sqrt(var) * self.rng.standard_normal()
        self.e -= new - th.w0
        th.w0 = new
        if self.hyper.drop_linear_terms:
            return
        for u in range(self.data.n_units):
            sl = slice(self.offsets[u], self.offsets[u] + self.sizes[u])
            th.w[sl] = self._draw_group(u, th.w[sl].copy(), self.unit_val[u], st.mu, st.lam)

    def update_factors(self):
        th, st = self.theta, self.state
        Z = th.Z
        for k in range(th.K):
            for u in range(self.data.n_units):
                cols = np.flatnonzero(Z[u])
                sl = slice(self.offsets[u], self.offsets[u] + self.sizes[u])
                if cols.size == 0:
                    # no data term: draw from the prior
                    th.V[sl, k] = st.mu_k[k] + self.rng.standard_normal(self.sizes[u]) / math.sqrt(st.lam_k[k])
                    self.F[:, u, k] = self.unit_val[u] * th.V[self.data.idx[:, u], k]
                    continue
                loo = kernels.loo_products(self.F, Z, u, k)
                m = loo[:, cols].sum(axis=1) * self.unit_val[u]
                th.V[sl, k] = self._draw_group(u, th.V[sl, k].copy(), m, st.mu_k[k], st.lam_k[k])
                self.F[:, u, k] = self.unit_val[u] * th.V[self.data.idx[:, u], k]
                self.P[:, cols, k] = loo[:, cols] * self.F[:, u, k][:, None]

    def _column_delta(self, j):
        """Closure computing the log-likelihood change of flipping one unit of column j."""
        th = self.theta
        pending = {}

        def delta(u, bit):
            z = th.Z[:, j]
            others = np.flatnonzero(z)
            if not bit:
                others = others[others != u]
            Pn, c, cc, ec = kernels.flip_proposal(self.P[:, j, :], self.F, u, others, bit, z.any(), self.e)
            pending["flip"] = (u, bit, Pn, c)
            scale = th.sigma * self.likelihood_scale
            if scale == 0.0:
                return 0.0
            return -0.5 * scale * (cc - 2.0 * ec)

        return delta, pending

    def update_interactions(self, sweeps: int = 1):
        th = self.theta
        U = self.data.n_units
        for _ in range(sweeps):
            for j in range(th.J):
                delta, pending = self._column_delta(j)
                col = th.Z[:, j]
                for _ in range(U):
                    pending.clear()
                    i, new = self.updater.step(col, self.rng, delta)
                    if "flip" in pending:
                        u, bit, Pn, c = pending["flip"]
                        if u == i and bit == new:
                            self.P[:, j, :] = Pn
                            self.e -= c

    def check_finite(self, iteration):
        th = self.theta
        checks = (("sigma", th.sigma), ("w0", th.w0), ("w", th.w), ("V", th.V), ("residuals", self.e),
                  ("lambda", self.state.lam), ("mu", self.state.mu),
                  ("lambda_k", self.state.lam_k), ("mu_k", self.state.mu_k))
        for name, value in checks:
            if not np.all(np.isfinite(value)):
                raise NumericalError(f"non-finite {name} at iteration {iteration}", iteration, name)

    def iterate(self, z_sweeps: int = 1):
        self.update_hyperparams()
        self.update_weights()
        self.update_factors()
        self.update_interactions(z_sweeps)


def _chain_rng(seed: int, chain: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(chain),)))


def run_chain(data: Dataset, hyper: Hyperparams, config: ChainConfig, chain: int = 0,
              progress: Callable[[int], None] | None = None) -> PosteriorSamples:
    """Run one chain and return its thinned post-burn-in records."""
    if data.N == 0:
        raise ValueError("no training data")
    rng = _chain_rng(config.seed, chain)
    g = GibbsChain(data, hyper, rng, init_scale=config.init_scale if config.init == "small" else None)
    out = PosteriorSamples(n_units=data.n_units)
    for t in range(1, config.iterations + 1):
        try:
            g.iterate(config.z_sweeps_per_iter)
        except NumericalError as exc:
            exc.iteration = t
            raise NumericalError(f"{exc} (iteration {t})", t, exc.parameter) from None
        if t % config.recompute_every == 0:
            g.recompute()
        g.check_finite(t)
        if t > config.burn_in and (t - config.burn_in) % config.thin == 0:
            out.records.append(SampleRecord(t, g.theta.copy(), g.state.copy(), chain))
        if progress is not None:
            progress(t)
        if t % 500 == 0:
            log.debug("chain %d iteration %d sigma=%.4g", chain, t, g.theta.sigma)
    return out


def run_chains(data: Dataset, hyper: Hyperparams, config: ChainConfig, n_chains: int = 1) -> PosteriorSamples:
    out = PosteriorSamples(n_units=data.n_units)
    for c in range(n_chains):
        out.records.extend(run_chain(data, hyper, config, chain=c).records)
    return out


def hyperparams_dict(h: Hyperparams) -> dict:
    return asdict(h)
