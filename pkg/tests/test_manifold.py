import numpy as np
import pytest
from oracles import fd_christoffel, fd_gaussian_curvature

from gmvae import manifold
from gmvae.errors import DomainError


def test_metric_examples():
    g = manifold.metric_tensor(0.0, 1.0, 1.0)
    np.testing.assert_array_equal(g.matrix(), np.eye(2))
    g = manifold.metric_tensor(5.0, 2.0, 0.5)
    assert (g.g11, g.g22) == (0.25, 0.5)


@pytest.mark.parametrize("sigma, c, expected", [(1.0, 1.0, 1.0), (2.0, 1.0, 0.25), (1.0, 4.0, 0.5)])
def test_sqrt_det_metric(sigma, c, expected):
    assert manifold.sqrt_det_metric(0.0, sigma, c) == expected


def test_sigma_must_be_positive():
    for fn in (manifold.metric_tensor, manifold.christoffel, manifold.sqrt_det_metric):
        with pytest.raises(DomainError):
            fn(0.0, 0.0, 1.0)


def test_christoffel_examples():
    ch = manifold.christoffel(0.0, 1.0, 1.0)
    np.testing.assert_array_equal(ch.first, [[0, -1], [-1, 0]])
    np.testing.assert_array_equal(ch.second, [[1, 0], [0, -1]])
    assert manifold.christoffel(0.0, 2.0, 0.5).second[0, 0] == 0.25


@pytest.mark.parametrize("c", [0.5, 1.0, 1.5])
def test_christoffel_matches_finite_differences(c, rng):
    for mu, sigma in zip(rng.uniform(-3, 3, 20), rng.uniform(0.3, 3, 20)):
        first, second = fd_christoffel(mu, sigma, c)
        ch = manifold.christoffel(mu, sigma, c)
        np.testing.assert_allclose(ch.first, first, atol=1e-5)
        np.testing.assert_allclose(ch.second, second, atol=1e-5)


@pytest.mark.parametrize("c", [0.5, 1.0, 1.5, 0.7])
def test_curvature_is_minus_c(c, rng):
    mu = rng.uniform(-5, 5, 100)
    sigma = rng.uniform(0.2, 5, 100)
    assert np.all(manifold.sectional_curvature(mu, sigma, c) == -c)
    fd = [fd_gaussian_curvature(m, s, c) for m, s in zip(mu, sigma)]
    np.testing.assert_allclose(fd, -c, atol=1e-3)


def test_gaussian_kl_examples():
    assert manifold.gaussian_kl(0.0, 1.0, 0.0, 1.0) == 0
    assert manifold.gaussian_kl(1.0, 1.0, 0.0, 1.0) == pytest.approx(0.5, rel=1e-15)
    assert manifold.gaussian_kl(0.0, 2.0, 0.0, 1.0) == pytest.approx(0.5 * (np.log(0.25) + 3), rel=1e-14)


def test_gaussian_kl_matches_quadrature(rng):
    from scipy import integrate, stats

    for _ in range(5):
        m1, m2 = rng.normal(size=2)
        s1, s2 = np.exp(rng.uniform(-0.5, 0.5, 2))
        p, q = stats.norm(m1, s1), stats.norm(m2, s2)
        val, _ = integrate.quad(lambda x: p.pdf(x) * (p.logpdf(x) - q.logpdf(x)), -np.inf, np.inf, epsabs=1e-13)
        assert manifold.gaussian_kl(m1, s1, m2, s2) == pytest.approx(val, abs=1e-9)


def test_gm_kl_examples():
    assert manifold.gm_kl([0.3, 1.2], [0.3, 1.2], 1.0) == 0
    assert manifold.gm_kl([0.1, 1.0], [0.0, 1.0], 1.0) == pytest.approx(0.005, rel=1e-12)
    assert manifold.gm_kl([0.0, 1.1], [0.0, 1.0], 1.0) == pytest.approx(0.5 * (-2 * np.log(1.1) + 0.21) / 2, rel=1e-12)


def test_residual_examples():
    r1 = manifold.kl_quadratic_residual([0.0, 1.0], 0.0, 0.1, 1.0)
    r2 = manifold.kl_quadratic_residual([0.0, 1.0], 0.0, 0.05, 1.0)
    assert r1 == pytest.approx(-1.55e-4, rel=5e-3)
    assert r2 == pytest.approx(-2.0e-5, rel=1e-2)
    assert 6 <= r1 / r2 <= 10
    assert manifold.kl_quadratic_residual([2.0, 0.3], 0.7, 0.0, 1.5) == 0.0


def test_residual_is_kl_minus_metric_quadratic(rng):
    for _ in range(50):
        mu, sigma, c = rng.uniform(-2, 2), np.exp(rng.uniform(-1, 1)), rng.uniform(0.3, 2)
        d_mu, d_sigma = rng.normal(scale=0.2 * sigma, size=2)
        g = manifold.metric_tensor(mu, sigma, c)
        direct = manifold.gm_kl([mu + d_mu, sigma + d_sigma], [mu, sigma], c) - 0.5 * (
            g.g11 * d_mu**2 + g.g22 * d_sigma**2)
        assert manifold.kl_quadratic_residual([mu, sigma], d_mu, d_sigma, c) == pytest.approx(direct, abs=1e-13)
