"""Two-dimensional hyperbolic models at curvature -c.

Points are numpy arrays whose last axis holds the coordinates:

* Lorentz model ``(t, x, y)`` with ``<p, p>_L = -1/c`` and ``t > 0``
* Poincare disk ``(x, y)`` with ``c (x^2 + y^2) < 1``
* Gaussian manifold ``(mu, sigma)`` with ``sigma > 0``

Every function broadcasts over leading axes.  All are pure.
"""

from __future__ import annotations

import numpy as np

from .errors import ConstraintViolationError, DomainError

#: smallest admissible denominator in the isometries (t - x, sigma, 1 - c|p|^2)
DENOM_EPS = 1e-12
#: below this |alpha| the exp/log coefficients switch to their Taylor branch
SERIES_EPS = 1e-6
#: slack allowed on arccosh arguments before clamping turns into an error
ACOSH_TOL = 1e-9


def _check_curvature(c):
    c = float(c)
    if not (c > 0.0 and np.isfinite(c)):
        raise DomainError(f"curvature parameter c must be positive and finite, got {c}")
    return c


def lorentz_inner(u, v):
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    return -u[..., 0] * v[..., 0] + u[..., 1] * v[..., 1] + u[..., 2] * v[..., 2]


def lorentz_origin(c):
    c = _check_curvature(c)
    return np.array([1.0 / np.sqrt(c), 0.0, 0.0])


def lift_tangent(u, c=1.0):
    """Embed a Euclidean 2-vector as a tangent vector at the Lorentz origin."""
    _check_curvature(c)
    u = np.asarray(u, dtype=np.float64)
    out = np.zeros(u.shape[:-1] + (3,))
    out[..., 1:] = u
    return out


def project_to_hyperboloid(p, c):
    """Recompute ``t`` from the spatial coordinates so the constraint holds."""
    p = np.array(p, dtype=np.float64, copy=True)
    p[..., 0] = np.hypot(np.hypot(p[..., 1], p[..., 2]), 1.0 / np.sqrt(c))
    return p


def lorentz_exp(base, v, c):
    """Exponential map ``cosh(a) base + sinh(a) v / a`` with ``a = sqrt(c <v, v>_L)``.

    Overflow of cosh/sinh for very long tangents yields non-finite output
    rather than an exception; callers that probe stability rely on that.
    """
    c = _check_curvature(c)
    base = np.asarray(base, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if not (np.all(np.isfinite(base)) and np.all(np.isfinite(v))):
        raise DomainError("lorentz_exp received non-finite input")
    alpha = np.sqrt(c * np.maximum(lorentz_inner(v, v), 0.0))
    small = alpha < SERIES_EPS
    a2 = alpha * alpha
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        cosh_a = np.where(small, 1.0 + 0.5 * a2, np.cosh(alpha))
        sinhc_a = np.where(small, 1.0 + a2 / 6.0, np.sinh(alpha) / np.where(small, 1.0, alpha))
        out = cosh_a[..., None] * base + sinhc_a[..., None] * v
        return project_to_hyperboloid(out, c)


def lorentz_log(base, y, c):
    """Logarithmic map at ``base``; inverse of :func:`lorentz_exp`."""
    c = _check_curvature(c)
    base = np.asarray(base, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    beta = -c * lorentz_inner(base, y)
    if np.any(beta < 1.0 - ACOSH_TOL):
        raise ConstraintViolationError(
            f"-c<base, y>_L = {np.min(beta):.3e} < 1: points are not on the same hyperboloid"
        )
    z = np.maximum(beta, 1.0) - 1.0
    coef = _acosh_ratio(z)
    return coef[..., None] * (y - np.maximum(beta, 1.0)[..., None] * base)


def _acosh_ratio(z):
    """arccosh(1 + z) / sqrt(z (z + 2)), continuous at z = 0."""
    z = np.asarray(z, dtype=np.float64)
    small = z < 0.5 * SERIES_EPS ** 2
    zs = np.where(small, 1.0, z)
    with np.errstate(over="ignore", invalid="ignore"):
        exact = np.arccosh(1.0 + zs) / (np.sqrt(zs) * np.sqrt(zs + 2.0))
    return np.where(small, 1.0 - z / 3.0 + 2.0 * z * z / 15.0, exact)


def parallel_transport(v, src, dst, c):
    """Levi-Civita transport of ``v`` from ``src`` to ``dst`` along the geodesic."""
    c = _check_curvature(c)
    v = np.asarray(v, dtype=np.float64)
    src = np.asarray(src, dtype=np.float64)
    dst = np.asarray(dst, dtype=np.float64)
    with np.errstate(over="ignore", invalid="ignore"):
        coef = c * lorentz_inner(dst, v) / (1.0 - c * lorentz_inner(src, dst))
        return v + coef[..., None] * (src + dst)


def parallel_transport_from_origin(v, dest, c):
    return parallel_transport(v, lorentz_origin(c), dest, c)


def lorentz_distance(p, q, c):
    c = _check_curvature(c)
    arg = -c * lorentz_inner(p, q)
    if np.any(arg < 1.0 - ACOSH_TOL):
        raise ConstraintViolationError(
            f"arccosh argument {np.min(arg):.3e} < 1: points are off the hyperboloid"
        )
    arg = np.maximum(arg, 1.0)
    # chord form keeps relative accuracy for nearby points
    diff = np.asarray(p, dtype=np.float64) - np.asarray(q, dtype=np.float64)
    chord = np.sqrt(np.maximum(lorentz_inner(diff, diff), 0.0))
    near = 2.0 * np.arcsinh(0.5 * np.sqrt(c) * chord) / np.sqrt(c)
    far = np.arccosh(arg) / np.sqrt(c)
    return np.where(arg < 2.0, near, far)


def poincare_distance(p, q, c):
    """Disk distance; unguarded on purpose so boundary blow-ups stay visible."""
    c = _check_curvature(c)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        return np.arccosh(_poincare_cosh_arg(p, q, c)) / np.sqrt(c)


def _poincare_cosh_arg(p, q, c):
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    diff2 = np.sum((p - q) ** 2, axis=-1)
    den = (1.0 - c * np.sum(p * p, axis=-1)) * (1.0 - c * np.sum(q * q, axis=-1))
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        return 1.0 + 2.0 * c * diff2 / den


def _check_sigma(sigma):
    if np.any(~(np.asarray(sigma) > 0.0)):
        raise DomainError("Gaussian-manifold points need sigma > 0")


def fisher_rao_distance(p, q, c):
    """Geodesic distance on the Gaussian manifold of curvature -c.

    Evaluated as ``(2/sqrt c) log((A + B) / (2 sqrt(s1 s2)))``, the same
    quantity as ``log((A + B)/(A - B)) / sqrt c`` without the A - B
    cancellation for distant points.
    """
    c = _check_curvature(c)
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    s1, s2 = p[..., 1], q[..., 1]
    _check_sigma(s1)
    _check_sigma(s2)
    dm2 = c * (p[..., 0] - q[..., 0]) ** 2
    a = np.sqrt(dm2 + (s1 + s2) ** 2)
    b = np.sqrt(dm2 + (s1 - s2) ** 2)
    # (A+B)/(2 sqrt(s1 s2)) - 1 with A - 2 sqrt(s1 s2) rationalized
    root = np.sqrt(s1 * s2)
    excess = (b + (dm2 + (s1 - s2) ** 2) / (a + 2.0 * root)) / (2.0 * root)
    return 2.0 * np.log1p(excess) / np.sqrt(c)


# ---------------------------------------------------------------------------
# isometries
# ---------------------------------------------------------------------------

def iso_l_to_p(p, c):
    c = _check_curvature(c)
    p = np.asarray(p, dtype=np.float64)
    den = np.sqrt(c) * p[..., 0] + 1.0
    if np.any(~(den > DENOM_EPS)):
        raise DomainError("Lorentz -> Poincare denominator sqrt(c) t + 1 is not positive")
    return np.stack([p[..., 1] / den, p[..., 2] / den], axis=-1)


def iso_p_to_l(q, c):
    c = _check_curvature(c)
    q = np.asarray(q, dtype=np.float64)
    r2 = c * (q[..., 0] ** 2 + q[..., 1] ** 2)
    den = 1.0 - r2
    if np.any(~(den > DENOM_EPS)):
        raise DomainError("Poincare point lies on or outside the disk boundary")
    return np.stack(
        [(1.0 + r2) / (np.sqrt(c) * den), 2.0 * q[..., 0] / den, 2.0 * q[..., 1] / den],
        axis=-1,
    )


def iso_p_to_g(q, c):
    c = _check_curvature(c)
    q = np.asarray(q, dtype=np.float64)
    x, y = q[..., 0], q[..., 1]
    den = (np.sqrt(c) * x - 1.0) ** 2 + c * y * y
    if np.any(~(den > DENOM_EPS)):
        raise DomainError("Poincare -> Gaussian denominator vanishes (boundary point (1/sqrt c, 0))")
    sigma = (1.0 - c * (x * x + y * y)) / den
    if np.any(~(sigma > 0.0)):
        raise DomainError("Poincare point lies on or outside the disk boundary")
    return np.stack([-2.0 * y / den, sigma], axis=-1)


def iso_g_to_p(g, c):
    c = _check_curvature(c)
    g = np.asarray(g, dtype=np.float64)
    mu, sigma = g[..., 0], g[..., 1]
    if np.any(~(sigma > DENOM_EPS)):
        raise DomainError("Gaussian-manifold point needs sigma > 1e-12")
    den = c * mu * mu + (sigma + 1.0) ** 2
    rc = np.sqrt(c)
    return np.stack([(rc * mu * mu + (sigma * sigma - 1.0) / rc) / den, -2.0 * mu / den], axis=-1)


def iso_l_to_g(p, c):
    """The isometry T_c from the Lorentz model onto the Gaussian manifold."""
    c = _check_curvature(c)
    p = np.asarray(p, dtype=np.float64)
    t, x, y = p[..., 0], p[..., 1], p[..., 2]
    # t - x = (1/c + y^2) / (t + x) on the hyperboloid
    gap = (1.0 / c + y * y) / (t + x)
    if np.any(~(gap > DENOM_EPS)):
        raise DomainError("Lorentz -> Gaussian map needs t - x > 1e-12")
    rc = np.sqrt(c)
    return np.stack([-y / (rc * gap), 1.0 / (rc * gap)], axis=-1)


def iso_g_to_l(g, c):
    """Inverse of T_c."""
    c = _check_curvature(c)
    g = np.asarray(g, dtype=np.float64)
    mu, sigma = g[..., 0], g[..., 1]
    if np.any(~(sigma > DENOM_EPS)):
        raise DomainError("Gaussian-manifold point needs sigma > 1e-12")
    rc = np.sqrt(c)
    cm2 = c * mu * mu
    return np.stack(
        [
            (1.0 + cm2 + sigma * sigma) / (2.0 * rc * sigma),
            (-1.0 + cm2 + sigma * sigma) / (2.0 * rc * sigma),
            -mu / sigma,
        ],
        axis=-1,
    )


def sample_gaussian_pairs(n, rng, mu_range=100.0, sigma_max=100.0):
    """Random Gaussian-manifold point pairs, mu uniform, sigma uniform on (0, sigma_max]."""
    mu = rng.uniform(-mu_range, mu_range, size=(2, n))
    sigma = sigma_max * (1.0 - rng.random(size=(2, n)))
    pts = np.stack([mu, sigma], axis=-1)
    return pts[0], pts[1]


def isometry_errors(c, n_pairs=1000, seed=0):
    """Mean absolute distance change for the three isometry routes.

    Returns a dict keyed by ``"P->L"``, ``"G->P"`` and ``"G->L"``.
    """
    rng = np.random.default_rng(seed)
    g1, g2 = sample_gaussian_pairs(n_pairs, rng)
    p1, p2 = iso_g_to_p(g1, c), iso_g_to_p(g2, c)
    l1, l2 = iso_g_to_l(g1, c), iso_g_to_l(g2, c)
    d_g = fisher_rao_distance(g1, g2, c)
    d_p = poincare_distance(p1, p2, c)
    d_pl = lorentz_distance(iso_p_to_l(p1, c), iso_p_to_l(p2, c), c)
    d_l = lorentz_distance(l1, l2, c)
    return {
        "P->L": float(np.mean(np.abs(d_p - d_pl))),
        "G->P": float(np.mean(np.abs(d_g - d_p))),
        "G->L": float(np.mean(np.abs(d_g - d_l))),
    }


def geodesic(a, b, c, ts):
    """Points ``exp_a(t log_a(b))`` on the Lorentz model for each t in ``ts``."""
    a = np.asarray(a, dtype=np.float64)
    v = lorentz_log(a, b, c)
    ts = np.asarray(ts, dtype=np.float64)
    return lorentz_exp(np.broadcast_to(a, ts.shape + a.shape), ts[:, None] * v, c)
