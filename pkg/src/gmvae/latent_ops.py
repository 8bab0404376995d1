"""Fused differentiable maps between Euclidean tangent coordinates at the
Lorentz origin and points of the Gaussian manifold.

Written as single graph nodes with hand-derived gradients because the
composed primitive chain has 0/0 at the origin and overflows for long
tangents.
"""

from __future__ import annotations

import numpy as np

from .autodiff import Tensor, as_tensor

# Taylor branches below these arguments
_SINHC_SERIES = 1e-4
_Q_SERIES = 0.1
_ACOSH_SERIES = 1e-4


def _sinhc(a):
    small = a < _SINHC_SERIES
    a_safe = np.where(small, 1.0, a)
    return np.where(small, 1.0 + a * a / 6.0, np.sinh(a_safe) / a_safe)


def _cubic_gap(a):
    """(a cosh a - sinh a) / a^3, the derivative of sinhc divided by a."""
    small = a < _Q_SERIES
    a_safe = np.where(small, 1.0, a)
    a2 = a * a
    series = 1.0 / 3.0 + a2 / 30.0 + a2 * a2 / 840.0
    return np.where(small, series, (a_safe * np.cosh(a_safe) - np.sinh(a_safe)) / a_safe ** 3)


def tangent_to_gaussian(v1, v2, c):
    """Send tangent coordinates ``(v1, v2)`` to ``(alpha, log_beta, partials)``.

    The point is ``exp_origin((0, v1, v2))`` on the hyperboloid carried to
    the Gaussian manifold.  ``partials`` holds d alpha / d v1, d alpha / d v2,
    d log_beta / d v1, d log_beta / d v2.
    """
    v1 = np.asarray(v1, dtype=np.float64)
    v2 = np.asarray(v2, dtype=np.float64)
    s = np.sqrt(c)
    r = np.hypot(v1, v2)
    a = s * r
    near = a < 1.0

    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        # |a| < 1: plain formulas, D = cosh a - s v1 sinhc(a) >= e^-1
        an = np.where(near, a, 0.0)
        S = _sinhc(an)
        Q = _cubic_gap(an)
        D_near = np.cosh(an) - s * v1 * S
        dD1_near = c * S * v1 - s * S - c * s * Q * v1 * v1
        dD2_near = c * S * v2 - c * s * Q * v1 * v2
        dS1_near, dS2_near = c * Q * v1, c * Q * v2

        # |a| >= 1: everything scaled by exp(-a); 1 - v1/r formed without cancellation
        af = np.where(near, 1.0, a)
        rf = np.where(near, 1.0, r)
        e2 = np.exp(-2.0 * af)
        one_minus_u = np.where(v1 >= 0.0, v2 * v2 / (rf * (rf + np.abs(v1))), (rf - v1) / rf)
        one_minus_u = np.where(near, 1.0, one_minus_u)
        one_plus_u = 2.0 - one_minus_u
        u = 1.0 - one_minus_u
        sh = 0.5 * (1.0 - e2)
        ch = 0.5 * (1.0 + e2)
        D_far = 0.5 * (one_minus_u + one_plus_u * e2)
        P = 0.5 * (one_minus_u - one_plus_u * e2)
        w2 = np.where(near, 0.0, v2) / rf
        dD1_far = P * s * u - sh * one_minus_u * one_plus_u / rf
        dD2_far = P * s * w2 + sh * u * w2 / rf
        S_far = sh / af
        Q_far = (af * ch - sh) / af ** 3
        dS1_far, dS2_far = c * Q_far * v1, c * Q_far * v2

        D = np.where(near, D_near, D_far)
        log_D = np.where(near, np.log(D_near), np.log(D_far) + af)
        Sx = np.where(near, S, S_far)
        dD1 = np.where(near, dD1_near, dD1_far)
        dD2 = np.where(near, dD2_near, dD2_far)
        dS1 = np.where(near, dS1_near, dS1_far)
        dS2 = np.where(near, dS2_near, dS2_far)

        R = Sx / D
        dR1 = (dS1 - R * dD1) / D
        dR2 = (dS2 - R * dD2) / D
        alpha = -v2 * R
        log_beta = -log_D
        partials = (-v2 * dR1, -R - v2 * dR2, -dD1 / D, -dD2 / D)
    return alpha, log_beta, partials


def encode_head(v1: Tensor, v2: Tensor, c):
    """Graph version of :func:`tangent_to_gaussian`; returns ``(alpha, log_beta)`` tensors."""
    v1, v2 = as_tensor(v1), as_tensor(v2)
    alpha, log_beta, (da1, da2, db1, db2) = tangent_to_gaussian(v1.data, v2.data, c)
    alpha_t = Tensor._make(alpha, (v1, v2), lambda g: (g * da1, g * da2))
    log_beta_t = Tensor._make(log_beta, (v1, v2), lambda g: (g * db1, g * db2))
    return alpha_t, log_beta_t


def acosh_ratio(z):
    """arccosh(1 + z) / sqrt(z (z + 2)) and its derivative, for z >= 0."""
    z = np.asarray(z, dtype=np.float64)
    small = z < _ACOSH_SERIES
    zs = np.where(small, 1.0, z)
    with np.errstate(over="ignore", invalid="ignore"):
        root = np.sqrt(zs) * np.sqrt(zs + 2.0)
        exact = np.arccosh(1.0 + zs) / root
        exact_d = (1.0 - (1.0 + zs) * exact) / (root * root)
    value = np.where(small, 1.0 - z / 3.0 + 2.0 * z * z / 15.0, exact)
    deriv = np.where(small, -1.0 / 3.0 + 4.0 * z / 15.0 - 12.0 * z * z / 35.0, exact_d)
    return value, deriv


def acosh_ratio_op(z):
    z = as_tensor(z)
    value, deriv = acosh_ratio(z.data)
    return Tensor._make(value, (z,), lambda g: (g * deriv,))


def gaussian_to_tangent(mu, sigma, c):
    """Euclidean coordinates of ``log_origin`` applied to the Lorentz image of (mu, sigma).

    Accepts tensors or arrays; returns the two coordinate components.
    """
    rc = np.sqrt(c)
    mu2 = mu * mu
    # -c <origin, point>_L - 1
    z = (c * mu2 + (sigma - 1.0) * (sigma - 1.0)) / (2.0 * sigma)
    if isinstance(z, Tensor):
        g = acosh_ratio_op(z)
    else:
        g = acosh_ratio(z)[0]
    x_l = (c * mu2 + sigma * sigma - 1.0) / (2.0 * rc * sigma)
    y_l = -mu / sigma
    return g * x_l, g * y_l
