"""Wrapped normal on the Lorentz model, kept as the unstable baseline.

A sample is ``exp_mu(PT_{origin -> mu}(v))`` with ``v ~ N(0, cov)`` in the
tangent plane at the origin.  Nothing here guards against overflow:
long tangents drive cosh/sinh to infinity and the resulting non-finite
values are part of the documented behaviour.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .hyperbolic import (
    _check_curvature,
    lift_tangent,
    lorentz_exp,
    lorentz_inner,
    lorentz_log,
    lorentz_origin,
    parallel_transport,
)


@dataclass(frozen=True)
class HwnParams:
    """``mean`` is (..., 3) on the hyperboloid, ``cov`` is (..., 2, 2)."""

    mean: np.ndarray
    cov: np.ndarray
    curvature: float

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64)
        cov = np.asarray(self.cov, dtype=np.float64)
        if mean.shape[-1] != 3 or cov.shape[-2:] != (2, 2):
            raise DomainError(f"bad shapes: mean {mean.shape}, cov {cov.shape}")
        if np.any(np.linalg.eigvalsh(cov) <= 0.0):
            raise DomainError("cov must be positive definite")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "curvature", _check_curvature(self.curvature))


def _log_sinhc(x):
    """log(sinh(x) / x), evaluated directly so it overflows where sinh does."""
    small = x < 1e-4
    xs = np.where(small, 1.0, x)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        direct = np.log(np.sinh(xs) / xs)
    return np.where(small, x * x / 6.0, direct)


def hwn_sample(params: HwnParams, rng: np.random.Generator, count=None):
    """Draw points; a leading ``count`` axis is added when ``count`` is given."""
    c = params.curvature
    chol = np.linalg.cholesky(params.cov)
    shape = params.mean.shape[:-1] + (2,)
    if count is not None:
        shape = (int(count),) + shape
    eps = rng.standard_normal(shape)
    v = np.einsum("...ij,...j->...i", chol, eps)
    return hwn_push_forward(v, params.mean, c)


def hwn_push_forward(v, mean, c):
    """Map Euclidean tangent coordinates at the origin onto the hyperboloid at ``mean``."""
    origin = lorentz_origin(c)
    mean = np.broadcast_to(mean, v.shape[:-1] + (3,))
    u = parallel_transport(lift_tangent(v, c), origin, mean, c)
    return lorentz_exp(mean, u, c)


def hwn_log_density(z, params: HwnParams):
    """Log density of ``z`` with respect to the hyperboloid's volume measure."""
    c = params.curvature
    z = np.asarray(z, dtype=np.float64)
    mean = np.broadcast_to(params.mean, z.shape)
    origin = lorentz_origin(c)
    finite = np.all(np.isfinite(z), axis=-1)
    with np.errstate(over="ignore", invalid="ignore"):
        u = lorentz_log(mean, np.where(finite[..., None], z, mean), c)
        v = parallel_transport(u, mean, np.broadcast_to(origin, z.shape), c)[..., 1:]
        r = np.sqrt(np.maximum(lorentz_inner(u, u), 0.0))
        out = _gaussian_logpdf(v, params.cov) - _log_sinhc(np.sqrt(c) * r)
    return np.where(finite, out, np.nan)


def hwn_log_density_from_tangent(v, params: HwnParams):
    """Log density of the point reached from origin-tangent coordinates ``v``.

    Goes through the hyperboloid, so overflow in the forward map shows up
    as a non-finite result.
    """
    return hwn_log_density(hwn_push_forward(np.asarray(v, dtype=np.float64), params.mean, params.curvature), params)


def _gaussian_logpdf(v, cov):
    cov = np.broadcast_to(cov, v.shape[:-1] + (2, 2))
    with np.errstate(over="ignore", invalid="ignore"):
        sol = np.linalg.solve(cov, v[..., None])[..., 0]
        maha = np.sum(v * sol, axis=-1)
    _, logdet = np.linalg.slogdet(cov)
    return -0.5 * maha - 0.5 * logdet - np.log(2.0 * np.pi)
