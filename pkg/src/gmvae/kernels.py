"""Hot numeric kernels with a numba path and a vectorized numpy path.

The numba implementations are used when numba imports cleanly and the
environment variable ``GMVAE_DISABLE_NUMBA`` is unset (or ``0``).  Both
paths implement the same algorithms, so they agree to rounding; the
Marsaglia-Tsang round consumes random draws identically in both.

Public entry points accept scalars or arrays and return the same shape:

    lgamma, digamma, trigamma, gammainc_lower, standard_gamma, gamma_shape_grad
"""

from __future__ import annotations

import math
import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

_DISABLED = os.environ.get("GMVAE_DISABLE_NUMBA", "").strip().lower() not in ("", "0", "false", "no")
HAVE_NUMBA = numba is not None
BACKEND = "numba" if (HAVE_NUMBA and not _DISABLED) else "numpy"

_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)
_LGAMMA_SHIFT = 7.0
_PSI_SHIFT = 10.0

# Stirling series for log-gamma, coefficients of x^{-(2k-1)}
_STIRLING = np.array([
    1.0 / 12.0, -1.0 / 360.0, 1.0 / 1260.0, -1.0 / 1680.0, 1.0 / 1188.0,
    -691.0 / 360360.0, 1.0 / 156.0, -3617.0 / 122400.0,
])
# digamma asymptotic series, coefficients of x^{-2k}
_PSI_ASYM = np.array([
    -1.0 / 12.0, 1.0 / 120.0, -1.0 / 252.0, 1.0 / 240.0, -1.0 / 132.0,
    691.0 / 32760.0, -1.0 / 12.0,
])
# trigamma asymptotic series, coefficients of x^{-(2k+1)}
_PSI1_ASYM = np.array([
    1.0 / 6.0, -1.0 / 30.0, 1.0 / 42.0, -1.0 / 30.0, 5.0 / 66.0,
    -691.0 / 2730.0, 7.0 / 6.0,
])

_EPS = 2.220446049250313e-16
_FPMIN = 1e-300
_MAXITER = 1_000_000


def _identity_jit(*args, **kwargs):
    if args and callable(args[0]):
        return args[0]
    return lambda f: f


njit = numba.njit if HAVE_NUMBA else _identity_jit


# ---------------------------------------------------------------------------
# numba kernels (scalar loops)
# ---------------------------------------------------------------------------

@njit(cache=True)
def _lgamma_scalar(x):
    if x != x or x <= 0.0:
        return np.nan
    prod = 1.0
    while x < _LGAMMA_SHIFT:
        prod *= x
        x += 1.0
    inv = 1.0 / x
    inv2 = inv * inv
    series = 0.0
    for k in range(_STIRLING.shape[0] - 1, -1, -1):
        series = series * inv2 + _STIRLING[k]
    return (x - 0.5) * math.log(x) - x + _HALF_LOG_2PI + series * inv - math.log(prod)


@njit(cache=True)
def _digamma_scalar(x):
    if x != x or x <= 0.0:
        return np.nan
    acc = 0.0
    while x < _PSI_SHIFT:
        acc -= 1.0 / x
        x += 1.0
    inv2 = 1.0 / (x * x)
    series = 0.0
    for k in range(_PSI_ASYM.shape[0] - 1, -1, -1):
        series = series * inv2 + _PSI_ASYM[k]
    return acc + math.log(x) - 0.5 / x + series * inv2


@njit(cache=True)
def _trigamma_scalar(x):
    if x != x or x <= 0.0:
        return np.nan
    acc = 0.0
    while x < _PSI_SHIFT:
        acc += 1.0 / (x * x)
        x += 1.0
    inv = 1.0 / x
    inv2 = inv * inv
    series = 0.0
    for k in range(_PSI1_ASYM.shape[0] - 1, -1, -1):
        series = series * inv2 + _PSI1_ASYM[k]
    return acc + inv + 0.5 * inv2 + series * inv2 * inv


@njit(cache=True)
def _gammainc_scalar(a, x):
    if a != a or x != x or a <= 0.0:
        return np.nan
    if x <= 0.0:
        return 0.0
    if x == np.inf:
        return 1.0
    log_pref = -x + a * math.log(x) - _lgamma_scalar(a)
    if x < a + 1.0:
        ap = a
        term = 1.0 / a
        total = term
        for _ in range(_MAXITER):
            ap += 1.0
            term *= x / ap
            total += term
            if abs(term) < abs(total) * _EPS:
                break
        return min(1.0, total * math.exp(log_pref))
    # modified Lentz continued fraction for the upper tail
    b = x + 1.0 - a
    c = 1.0 / _FPMIN
    d = 1.0 / b
    h = d
    for i in range(1, _MAXITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = b + an / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return max(0.0, 1.0 - math.exp(log_pref) * h)


@njit(cache=True)
def _map1_nb(kind, x, out):
    for i in range(x.shape[0]):
        if kind == 0:
            out[i] = _lgamma_scalar(x[i])
        elif kind == 1:
            out[i] = _digamma_scalar(x[i])
        else:
            out[i] = _trigamma_scalar(x[i])


@njit(cache=True)
def _gammainc_nb(a, x, out):
    for i in range(a.shape[0]):
        out[i] = _gammainc_scalar(a[i], x[i])


@njit(cache=True)
def _mt_round_nb(d, z, u, out, accepted):
    for i in range(d.shape[0]):
        di = d[i]
        t = 1.0 + z[i] / math.sqrt(9.0 * di)
        if t <= 0.0:
            accepted[i] = False
            continue
        v = t * t * t
        if math.log(u[i]) < 0.5 * z[i] * z[i] + di - di * v + di * math.log(v):
            out[i] = di * v
            accepted[i] = True
        else:
            accepted[i] = False


@njit(cache=True)
def _shape_grad_nb(a, x, out):
    for i in range(a.shape[0]):
        ai = a[i]
        xi = x[i]
        h = 1e-4 * max(1.0, ai)
        lo = max(ai - h, 0.5 * ai)
        hi = ai + h
        dp = (_gammainc_scalar(hi, xi) - _gammainc_scalar(lo, xi)) / (hi - lo)
        log_pdf = (ai - 1.0) * math.log(xi) - xi - _lgamma_scalar(ai)
        pdf = math.exp(log_pdf)
        if pdf > 1e-290:
            out[i] = -dp / pdf
        else:
            out[i] = xi / ai


# ---------------------------------------------------------------------------
# numpy kernels (vectorized, same algorithms)
# ---------------------------------------------------------------------------

def _horner(coeffs, t):
    series = np.zeros_like(t)
    for c in coeffs[::-1]:
        series = series * t + c
    return series


def _lgamma_np(x):
    x = x.copy()
    bad = ~(x > 0.0)
    x[bad] = 1.0
    prod = np.ones_like(x)
    for _ in range(int(_LGAMMA_SHIFT)):
        low = x < _LGAMMA_SHIFT
        prod = np.where(low, prod * x, prod)
        x = np.where(low, x + 1.0, x)
    inv = 1.0 / x
    out = (x - 0.5) * np.log(x) - x + _HALF_LOG_2PI + _horner(_STIRLING, inv * inv) * inv - np.log(prod)
    out[bad] = np.nan
    return out


def _digamma_np(x):
    x = x.copy()
    bad = ~(x > 0.0)
    x[bad] = 1.0
    acc = np.zeros_like(x)
    for _ in range(int(_PSI_SHIFT)):
        low = x < _PSI_SHIFT
        acc = np.where(low, acc - 1.0 / x, acc)
        x = np.where(low, x + 1.0, x)
    inv2 = 1.0 / (x * x)
    out = acc + np.log(x) - 0.5 / x + _horner(_PSI_ASYM, inv2) * inv2
    out[bad] = np.nan
    return out


def _trigamma_np(x):
    x = x.copy()
    bad = ~(x > 0.0)
    x[bad] = 1.0
    acc = np.zeros_like(x)
    for _ in range(int(_PSI_SHIFT)):
        low = x < _PSI_SHIFT
        acc = np.where(low, acc + 1.0 / (x * x), acc)
        x = np.where(low, x + 1.0, x)
    inv = 1.0 / x
    inv2 = inv * inv
    out = acc + inv + 0.5 * inv2 + _horner(_PSI1_ASYM, inv2) * inv2 * inv
    out[bad] = np.nan
    return out


def _gammainc_np(a, x):
    # scipy's compiled implementation stands in for the scalar loop
    from scipy.special import gammainc
    with np.errstate(invalid="ignore"):
        out = gammainc(a, np.maximum(x, 0.0))
    out[~(a > 0.0)] = np.nan
    return out


def _mt_round_np(d, z, u):
    t = 1.0 + z / np.sqrt(9.0 * d)
    positive = t > 0.0
    v = np.where(positive, t * t * t, 1.0)
    with np.errstate(divide="ignore"):
        accepted = positive & (np.log(u) < 0.5 * z * z + d - d * v + d * np.log(v))
    return d * v, accepted


def _shape_grad_np(a, x):
    h = 1e-4 * np.maximum(1.0, a)
    lo = np.maximum(a - h, 0.5 * a)
    hi = a + h
    dp = (_gammainc_np(hi, x) - _gammainc_np(lo, x)) / (hi - lo)
    pdf = np.exp((a - 1.0) * np.log(x) - x - _lgamma_np(a))
    ok = pdf > 1e-290
    return np.where(ok, -dp / np.where(ok, pdf, 1.0), x / a)


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------

def _as_flat(x):
    arr = np.asarray(x, dtype=np.float64)
    return arr, np.ascontiguousarray(arr.ravel())


def _finish(template, flat):
    if template.ndim == 0:
        return float(flat[0])
    return flat.reshape(template.shape)


def _map1(kind, x, backend):
    template, flat = _as_flat(x)
    if backend == "numba":
        out = np.empty_like(flat)
        _map1_nb(kind, flat, out)
    else:
        out = (_lgamma_np, _digamma_np, _trigamma_np)[kind](flat)
    return _finish(template, out)


def lgamma(x, backend=None):
    """log Gamma(x) for x > 0 (NaN elsewhere)."""
    return _map1(0, x, backend or BACKEND)


def digamma(x, backend=None):
    return _map1(1, x, backend or BACKEND)


def trigamma(x, backend=None):
    return _map1(2, x, backend or BACKEND)


def gammainc_lower(a, x, backend=None):
    """Regularized lower incomplete gamma P(a, x)."""
    a_arr, x_arr = np.broadcast_arrays(np.asarray(a, np.float64), np.asarray(x, np.float64))
    template = a_arr
    a_flat = np.ascontiguousarray(a_arr.ravel())
    x_flat = np.ascontiguousarray(x_arr.ravel())
    if (backend or BACKEND) == "numba":
        out = np.empty_like(a_flat)
        _gammainc_nb(a_flat, x_flat, out)
    else:
        out = _gammainc_np(a_flat, x_flat)
    return _finish(template, out)


def gamma_shape_grad(a, x, backend=None):
    """Implicit reparameterization derivative dX/da for X ~ Gamma(a, 1).

    Uses dX/da = -(dP/da) / (dP/dX) with dP/da from a central difference of
    the regularized lower incomplete gamma (step 1e-4 * max(1, a)).
    """
    a_arr, x_arr = np.broadcast_arrays(np.asarray(a, np.float64), np.asarray(x, np.float64))
    a_flat = np.ascontiguousarray(a_arr.ravel())
    x_flat = np.ascontiguousarray(x_arr.ravel())
    if (backend or BACKEND) == "numba":
        out = np.empty_like(a_flat)
        _shape_grad_nb(a_flat, x_flat, out)
    else:
        out = _shape_grad_np(a_flat, x_flat)
    return _finish(a_arr, out)


def _mt_round(d, z, u, backend):
    if backend == "numba":
        out = np.empty_like(d)
        accepted = np.empty(d.shape[0], dtype=np.bool_)
        _mt_round_nb(d, z, u, out, accepted)
        return out, accepted
    return _mt_round_np(d, z, u)


def standard_gamma(shape, rng: np.random.Generator, backend=None):
    """Draw X ~ Gamma(shape, 1) by Marsaglia-Tsang rejection.

    Shapes below one are boosted to ``shape + 1`` and scaled by
    ``U ** (1 / shape)``.  Each rejection round draws one normal and one
    uniform per still-pending sample, in index order, so the output is a
    deterministic function of the generator state.
    """
    backend = backend or BACKEND
    template, a = _as_flat(shape)
    if np.any(~(a > 0.0)) or not np.all(np.isfinite(a)):
        raise ValueError("gamma shape must be positive and finite")
    boost = a < 1.0
    d = np.where(boost, a + 1.0, a) - 1.0 / 3.0
    out = np.empty_like(a)
    pending = np.arange(a.shape[0])
    while pending.size:
        z = rng.standard_normal(pending.size)
        u = rng.random(pending.size)
        vals, ok = _mt_round(np.ascontiguousarray(d[pending]), z, u, backend)
        out[pending[ok]] = vals[ok]
        pending = pending[~ok]
    if boost.any():
        u = rng.random(int(boost.sum()))
        out[boost] *= u ** (1.0 / a[boost])
    return _finish(template, out)
