"""The Gaussian manifold: univariate Gaussians (mu, sigma) with metric
diag(1/sigma^2, 1/(c sigma^2)), a half-plane of constant curvature -c.

The metric is the Fisher information of N(sqrt(2c) mu, sigma) divided by 2c,
the normalization under which the curvature-extended KL divergence
``gm_kl`` is half the squared Riemannian norm to second order.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from . import autodiff as ad
from .errors import DomainError
from .hyperbolic import _check_curvature


class MetricTensor2(NamedTuple):
    g11: np.ndarray
    g22: np.ndarray

    def matrix(self):
        g11 = np.asarray(self.g11, dtype=np.float64)
        out = np.zeros(g11.shape + (2, 2))
        out[..., 0, 0] = g11
        out[..., 1, 1] = self.g22
        return out


class ChristoffelSymbols(NamedTuple):
    """``first[i, j] = Gamma^1_ij`` and ``second[i, j] = Gamma^2_ij``."""

    first: np.ndarray
    second: np.ndarray


def _sigma(sigma):
    sigma = np.asarray(sigma, dtype=np.float64)
    if np.any(~(sigma > 0.0)):
        raise DomainError("sigma must be positive")
    return sigma


def metric_tensor(mu, sigma, c):
    c = _check_curvature(c)
    sigma = _sigma(sigma)
    inv2 = 1.0 / (sigma * sigma)
    return MetricTensor2(g11=inv2, g22=inv2 / c)


def sqrt_det_metric(mu, sigma, c):
    """Volume element 1 / (sqrt(c) sigma^2)."""
    c = _check_curvature(c)
    sigma = _sigma(sigma)
    return 1.0 / (np.sqrt(c) * sigma * sigma)


# Every Christoffel symbol is (constant) / sigma; these are the constants.
def _christoffel_coefficients(c):
    first = np.array([[0.0, -1.0], [-1.0, 0.0]])
    second = np.array([[c, 0.0], [0.0, -1.0]])
    return first, second


def christoffel(mu, sigma, c):
    c = _check_curvature(c)
    sigma = _sigma(sigma)
    first, second = _christoffel_coefficients(c)
    inv = (1.0 / sigma)[..., None, None]
    return ChristoffelSymbols(first=first * inv, second=second * inv)


def sectional_curvature(mu, sigma, c):
    """Sectional curvature Rm(mu, sigma, sigma, mu) / det g.

    With Gamma = C / sigma the bracket of the Riemann tensor is
    B / sigma^2 for a constant B, Rm = g11 B / sigma^2 = B / sigma^4 and
    det g = 1 / (c sigma^4), so the sigma powers cancel and the result is
    c * B evaluated on the constants alone.
    """
    c = _check_curvature(c)
    sigma = _sigma(sigma)
    C1, C2 = _christoffel_coefficients(c)
    C = (C1, C2)
    # d/dsigma (C / sigma) = -C / sigma^2; d/dmu = 0
    d_mu_G1_22 = 0.0
    d_sigma_G1_12 = -C1[0, 1]
    quad = sum(C[p][1, 1] * C1[0, p] - C[p][0, 1] * C1[1, p] for p in range(2))
    bracket = d_mu_G1_22 - d_sigma_G1_12 + quad
    return np.full(np.shape(sigma), c * bracket)[()]


# ---------------------------------------------------------------------------
# KL divergences
# ---------------------------------------------------------------------------

def gaussian_kl_log(m1, log_s1, m2, log_s2):
    """KL(N(m1, s1) || N(m2, s2)) written in log standard deviations.

    Works on numpy arrays and on autodiff tensors alike.
    """
    d = log_s1 - log_s2
    return 0.5 * (ad.expm1(2.0 * d) - 2.0 * d + (m1 - m2) ** 2 * ad.exp(-2.0 * log_s2))


def gaussian_kl(m1, s1, m2, s2):
    s1 = _sigma(s1)
    s2 = _sigma(s2)
    return gaussian_kl_log(m1, np.log(s1), m2, np.log(s2))


def gm_kl(p, q, c):
    """Curvature-extended KL ``KL(N(sqrt(2c) mu1, s1) || N(sqrt(2c) mu2, s2)) / 2c``."""
    c = _check_curvature(c)
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    s1, s2 = _sigma(p[..., 1]), _sigma(q[..., 1])
    k = np.sqrt(2.0 * c)
    return gaussian_kl_log(k * p[..., 0], np.log(s1), k * q[..., 0], np.log(s2)) / (2.0 * c)


def kl_quadratic_residual(base, d_mu, d_sigma, c):
    """gm_kl((mu + d_mu, s + d_sigma), (mu, s)) minus half the squared metric norm.

    The d_mu contributions of both terms are the identical d_mu^2 / (2 s^2)
    and cancel; what remains depends on r = d_sigma / s only and is
    (2 r - r^2 - 2 log(1 + r)) / (4c) = -r^3 / (6c) + O(r^4).
    """
    c = _check_curvature(c)
    base = np.asarray(base, dtype=np.float64)
    sigma = _sigma(base[..., 1])
    _sigma(sigma + d_sigma)
    r = np.asarray(d_sigma, dtype=np.float64) / sigma
    return (2.0 * r - r * r - 2.0 * np.log1p(r)) / (4.0 * c)
