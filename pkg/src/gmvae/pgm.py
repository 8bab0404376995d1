"""Normal-like distribution on the Gaussian manifold whose exponent is a
scaled KL divergence between univariate Gaussians.

Parameters are stored in log space (``log_beta``, ``log_gamma2``) and every
formula below is evaluated from the logs, so evaluation stays finite on
extreme parameter grids.  The formula helpers are written against
:mod:`gmvae.autodiff` dispatch functions and accept tensors as well as
arrays, which lets the VAE reuse them inside its graph.

Densities returned by :func:`log_density` are with respect to the manifold
volume measure; add ``log sqrt_det_metric`` for a density under Lebesgue
measure on (mu, sigma).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import kernels
from .errors import DomainError
from .hyperbolic import _check_curvature
from .manifold import gaussian_kl_log

_HALF_LOG_2PI = 0.5 * np.log(2.0 * np.pi)


def _finite_array(x, name):
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise DomainError(f"{name} must be finite")
    return x


@dataclass(frozen=True)
class PgmNormalParams:
    """Per-factor parameters; arrays share a shape whose last axis is the factor axis."""

    alpha: np.ndarray
    log_beta: np.ndarray
    log_gamma2: np.ndarray
    curvature: float

    def __post_init__(self):
        alpha = _finite_array(self.alpha, "alpha")
        log_beta = _finite_array(self.log_beta, "log_beta")
        log_gamma2 = _finite_array(self.log_gamma2, "log_gamma2")
        if not (alpha.shape == log_beta.shape == log_gamma2.shape) or alpha.ndim == 0:
            raise DomainError(
                f"parameter shapes differ: {alpha.shape}, {log_beta.shape}, {log_gamma2.shape}"
            )
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "log_beta", log_beta)
        object.__setattr__(self, "log_gamma2", log_gamma2)
        object.__setattr__(self, "curvature", _check_curvature(self.curvature))

    @classmethod
    def from_natural(cls, alpha, beta, gamma2, curvature):
        beta = np.asarray(beta, dtype=np.float64)
        gamma2 = np.asarray(gamma2, dtype=np.float64)
        if np.any(~(beta > 0.0)) or np.any(~(gamma2 > 0.0)):
            raise DomainError("beta and gamma2 must be positive")
        return cls(np.asarray(alpha, dtype=np.float64), np.log(beta), np.log(gamma2), curvature)

    @classmethod
    def standard(cls, n_factors, curvature):
        """The prior K(0, I, I): alpha = 0, beta = 1, gamma2 = 1 in every factor."""
        zeros = np.zeros(int(n_factors))
        return cls(zeros, zeros.copy(), zeros.copy(), curvature)

    @property
    def beta(self):
        return np.exp(self.log_beta)

    @property
    def gamma2(self):
        return np.exp(self.log_gamma2)

    @property
    def n_factors(self):
        return self.alpha.shape[-1]


@dataclass(frozen=True)
class NormalParams:
    mean: np.ndarray
    log_std: np.ndarray

    @property
    def std(self):
        return np.exp(self.log_std)

    def log_pdf(self, x):
        z = (np.asarray(x, dtype=np.float64) - self.mean) * np.exp(-self.log_std)
        return -0.5 * z * z - self.log_std - _HALF_LOG_2PI


@dataclass(frozen=True)
class GammaParams:
    """Gamma(shape, rate) with density rate^shape / Gamma(shape) z^(shape-1) exp(-rate z)."""

    shape: np.ndarray
    log_rate: np.ndarray

    @classmethod
    def from_rate(cls, shape, rate):
        shape = np.asarray(shape, dtype=np.float64)
        rate = np.asarray(rate, dtype=np.float64)
        if np.any(~(shape > 0.0)) or np.any(~(rate > 0.0)):
            raise DomainError("Gamma shape and rate must be positive")
        return cls(shape, np.log(rate))

    @property
    def rate(self):
        return np.exp(self.log_rate)

    @property
    def mean(self):
        return self.shape * np.exp(-self.log_rate)

    def log_pdf(self, z):
        z = np.asarray(z, dtype=np.float64)
        a = self.shape
        return a * self.log_rate - kernels.lgamma(a) + (a - 1.0) * np.log(z) - np.exp(self.log_rate) * z


# ---------------------------------------------------------------------------
# formulas in log parameters (array or tensor inputs)
# ---------------------------------------------------------------------------

def _log_4c(c):
    return np.log(4.0 * c)


def gamma_shape_from_log(log_gamma2, c):
    """a = 1 / (4 c gamma2) + 1."""
    return ad.exp(-_log_4c(c) - log_gamma2) + 1.0


def gamma_log_rate_from_log(log_beta, log_gamma2, c):
    """log b = -log(4 c beta^2 gamma2)."""
    return -_log_4c(c) - 2.0 * log_beta - log_gamma2


def log_norm_factor_from_log(log_gamma2, c):
    k = ad.exp(-_log_4c(c) - log_gamma2)
    return (
        _HALF_LOG_2PI - 0.5 * np.log(c) - np.log(2.0) + 0.5 * log_gamma2
        + ad.lgamma(k) + k * (1.0 + _log_4c(c) + log_gamma2)
    )


def log_norm_factor(gamma2, c):
    """log Z(c, gamma2), the log normalizer of the density."""
    c = _check_curvature(c)
    gamma2 = np.asarray(gamma2, dtype=np.float64)
    if np.any(~(gamma2 > 0.0)):
        raise DomainError("gamma2 must be positive")
    return log_norm_factor_from_log(np.log(gamma2), c)


def gamma_kl_log(a1, log_b1, a2, log_b2):
    """KL(Gamma(a1, b1) || Gamma(a2, b2)) from log rates."""
    d = log_b2 - log_b1
    return (
        a2 * (log_b1 - log_b2) - ad.lgamma(a1) + ad.lgamma(a2)
        + (a1 - a2) * ad.digamma(a1) + ad.expm1(d) * a1
    )


def gamma_kl(p: GammaParams, q: GammaParams):
    for g in (p, q):
        if np.any(~(np.asarray(g.shape) > 0.0)) or not np.all(np.isfinite(g.log_rate)):
            raise DomainError("Gamma shape must be positive and rate finite and positive")
    return gamma_kl_log(p.shape, p.log_rate, q.shape, q.log_rate)


def kl_from_log(alpha1, log_beta1, log_gamma21, alpha2, log_beta2, log_gamma22, c):
    """Per-factor KL between two distributions given log parameters."""
    normal = gaussian_kl_log(
        alpha1, log_beta1 + 0.5 * log_gamma21, alpha2, log_beta2 + 0.5 * log_gamma22
    )
    gamma = gamma_kl_log(
        gamma_shape_from_log(log_gamma21, c), gamma_log_rate_from_log(log_beta1, log_gamma21, c),
        gamma_shape_from_log(log_gamma22, c), gamma_log_rate_from_log(log_beta2, log_gamma22, c),
    )
    return normal + gamma


def kl_to_standard(alpha, log_beta, log_gamma2, c):
    """Per-factor KL against K(0, I, I) at the same curvature."""
    zero = 0.0
    return kl_from_log(alpha, log_beta, log_gamma2, zero, zero, zero, c)


# ---------------------------------------------------------------------------
# numpy API
# ---------------------------------------------------------------------------

def log_density(mu, sigma, params: PgmNormalParams):
    """Per-factor log density at (mu, sigma); sum the last axis for a joint value."""
    mu = np.asarray(mu, dtype=np.float64)
    sigma = np.asarray(sigma, dtype=np.float64)
    if np.any(~(sigma > 0.0)):
        raise DomainError("sigma must be positive")
    c = params.curvature
    k = np.sqrt(2.0 * c)
    log_sigma = np.log(sigma)
    kl = gaussian_kl_log(k * mu, log_sigma, k * params.alpha, params.log_beta)
    return (
        3.0 * (log_sigma - params.log_beta)
        - log_norm_factor_from_log(params.log_gamma2, c)
        - kl * np.exp(-np.log(2.0 * c) - params.log_gamma2)
    )


def factorize(params: PgmNormalParams):
    """Normal over mu and Gamma over sigma^2 whose product is the volume-measure density."""
    c = params.curvature
    normal = NormalParams(params.alpha, params.log_beta + 0.5 * params.log_gamma2)
    gamma = GammaParams(
        gamma_shape_from_log(params.log_gamma2, c),
        gamma_log_rate_from_log(params.log_beta, params.log_gamma2, c),
    )
    return normal, gamma


def kl_divergence(p: PgmNormalParams, q: PgmNormalParams, per_factor=False):
    if p.curvature != q.curvature:
        raise DomainError(f"curvature mismatch: {p.curvature} vs {q.curvature}")
    if p.n_factors != q.n_factors:
        raise DomainError(f"factor count mismatch: {p.n_factors} vs {q.n_factors}")
    kl = kl_from_log(p.alpha, p.log_beta, p.log_gamma2, q.alpha, q.log_beta, q.log_gamma2, p.curvature)
    return kl if per_factor else np.sum(kl, axis=-1)


def sample(params: PgmNormalParams, rng: np.random.Generator, count: int):
    """Draw ``count`` points; returns ``(mu, sigma)`` each shaped ``(count,) + alpha.shape``."""
    normal, gamma = factorize(params)
    shape = (int(count),) + params.alpha.shape
    mu = normal.mean + normal.std * rng.standard_normal(shape)
    draws = kernels.standard_gamma(np.broadcast_to(gamma.shape, shape), rng)
    sigma = np.sqrt(draws * np.exp(-gamma.log_rate))
    return mu, sigma


def mc_kl_estimate(p: PgmNormalParams, q: PgmNormalParams, n_samples: int, seed):
    """Monte Carlo KL(p || q) with its standard error."""
    if n_samples < 1000:
        raise ValueError("n_samples must be at least 1000")
    if p.curvature != q.curvature:
        raise DomainError(f"curvature mismatch: {p.curvature} vs {q.curvature}")
    rng = np.random.default_rng(seed)
    mu, sigma = sample(p, rng, n_samples)
    # the volume element is common to both densities and cancels
    diff = np.sum(log_density(mu, sigma, p) - log_density(mu, sigma, q), axis=-1)
    return float(np.mean(diff)), float(np.std(diff, ddof=1) / np.sqrt(n_samples))
