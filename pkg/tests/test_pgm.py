import numpy as np
import pytest
from oracles import gamma_kl_quadrature, pgm_log_density_direct, quadrature_mass
from scipy import stats

from gmvae import pgm
from gmvae.errors import DomainError


def single(alpha, beta, gamma2, c):
    return pgm.PgmNormalParams.from_natural([alpha], [beta], [gamma2], c)


def test_log_norm_factor_value():
    # quoted to five decimals, truncated
    assert pgm.log_norm_factor(1.0, 1.0) == pytest.approx(2.11038, abs=1e-5)


def test_log_norm_factor_matches_unnormalized_quadrature():
    params = single(0.0, 1.0, 1.0, 1.0)

    def unnormalized(m, s):
        return pgm.log_density(m[..., None], s[..., None], params)[..., 0] + pgm.log_norm_factor(1.0, 1.0)

    assert np.log(quadrature_mass(unnormalized, 0.0, 1.0, 1.0, 1.0)) == pytest.approx(2.11038, abs=1e-5)


def test_log_norm_factor_finite_over_range():
    lg = np.linspace(-10, 10, 201)
    for c in (0.5, 1.0, 1.5):
        assert np.all(np.isfinite(pgm.log_norm_factor_from_log(lg, c)))


def test_density_at_mode_point_is_minus_log_norm(rng):
    for _ in range(10):
        a, b, g2, c = rng.normal(), np.exp(rng.normal()), np.exp(rng.normal()), rng.uniform(0.3, 2)
        val = pgm.log_density([a], [b], single(a, b, g2, c))[0]
        assert val == pytest.approx(-pgm.log_norm_factor(g2, c), rel=1e-13, abs=1e-13)


def test_density_matches_direct_formula(rng):
    for _ in range(50):
        a, b, g2, c = rng.normal(), np.exp(rng.normal()), np.exp(rng.normal()), rng.uniform(0.3, 2)
        mu, sigma = rng.normal(), np.exp(rng.normal())
        expected = pgm_log_density_direct(mu, sigma, a, b, g2, c)
        assert pgm.log_density([mu], [sigma], single(a, b, g2, c))[0] == pytest.approx(expected, rel=1e-11)


@pytest.mark.parametrize("c", [0.5, 1.0, 1.5])
def test_normalization(c, rng):
    for _ in range(10):
        a, b, g2 = rng.uniform(-2, 2), np.exp(rng.uniform(-1, 1)), np.exp(rng.uniform(-1, 1))
        params = single(a, b, g2, c)
        mass = quadrature_mass(lambda m, s: pgm.log_density(m[..., None], s[..., None], params)[..., 0],
                               a, b, g2, c)
        assert mass == pytest.approx(1.0, abs=5e-3)


def test_factorize_examples():
    normal, gamma = pgm.factorize(single(0.0, 1.0, 1.0, 1.0))
    assert (gamma.shape[0], gamma.rate[0]) == pytest.approx((1.25, 0.25), rel=1e-15)
    assert (normal.mean[0], normal.std[0]) == (0.0, 1.0)
    _, gamma = pgm.factorize(single(0.0, 1.0, 1.0, 0.5))
    assert (gamma.shape[0], gamma.rate[0]) == pytest.approx((1.5, 0.5), rel=1e-15)
    normal, gamma = pgm.factorize(pgm.PgmNormalParams.standard(3, 1.0))
    np.testing.assert_array_equal(normal.std, 1.0)
    np.testing.assert_allclose(gamma.shape, 1.25)
    np.testing.assert_allclose(gamma.rate, 0.25)


def test_factorization_identity(rng):
    n = 1000
    c = rng.choice([0.5, 1.0, 1.5], n)
    a, b, g2 = rng.uniform(-3, 3, n), np.exp(rng.uniform(-2, 2, n)), np.exp(rng.uniform(-2, 2, n))
    mu, sigma = rng.normal(a, 2 * b), b * np.exp(rng.uniform(-1, 1, n))
    for i in range(n):
        params = single(a[i], b[i], g2[i], c[i])
        normal, gamma = pgm.factorize(params)
        lhs = pgm.log_density([mu[i]], [sigma[i]], params)[0] - np.log(np.sqrt(c[i]) * sigma[i] ** 2)
        rhs = (stats.norm.logpdf(mu[i], a[i], b[i] * np.sqrt(g2[i]))
               + stats.gamma.logpdf(sigma[i] ** 2, gamma.shape[0], scale=1 / gamma.rate[0]))
        # the sigma -> sigma^2 chart change carries the Jacobian 2 sigma
        assert lhs == pytest.approx(rhs + np.log(2 * sigma[i]), rel=1e-9, abs=1e-9)
        assert normal.log_pdf(mu[i])[0] == pytest.approx(stats.norm.logpdf(mu[i], a[i], b[i] * np.sqrt(g2[i])),
                                                         rel=1e-12)
        assert gamma.log_pdf(sigma[i] ** 2)[0] == pytest.approx(
            stats.gamma.logpdf(sigma[i] ** 2, gamma.shape[0], scale=1 / gamma.rate[0]), rel=1e-9, abs=1e-9)


def test_gamma_kl_examples():
    p = pgm.GammaParams.from_rate(1.25, 0.25)
    assert pgm.gamma_kl(p, p) == 0
    assert pgm.gamma_kl(pgm.GammaParams.from_rate(1.0, 2.0), pgm.GammaParams.from_rate(1.0, 1.0)) == pytest.approx(
        np.log(2) - 0.5, rel=1e-13)
    q = pgm.GammaParams.from_rate(1.5, 0.5)
    assert pgm.gamma_kl(p, q) == pytest.approx(gamma_kl_quadrature(1.25, 0.25, 1.5, 0.5), abs=1e-4)


def test_gamma_kl_matches_quadrature_randomly(rng):
    for _ in range(10):
        a1, b1, a2, b2 = np.exp(rng.uniform(-0.5, 1.5, 4))
        val = pgm.gamma_kl(pgm.GammaParams.from_rate(a1, b1), pgm.GammaParams.from_rate(a2, b2))
        assert val == pytest.approx(gamma_kl_quadrature(a1, b1, a2, b2), abs=1e-8)


def test_kl_zero_cases():
    p = pgm.PgmNormalParams([0.3, -1.0], [0.2, 0.1], [-0.5, 0.4], 1.2)
    assert pgm.kl_divergence(p, p) == 0
    prior = pgm.PgmNormalParams.standard(4, 1.0)
    assert pgm.kl_divergence(prior, prior) == 0
    assert pgm.kl_to_standard(np.zeros(4), np.zeros(4), np.zeros(4), 1.0).sum() == 0


def test_kl_sums_factors_and_checks_compatibility():
    p = pgm.PgmNormalParams([0.3, -1.0], [0.2, 0.1], [-0.5, 0.4], 1.0)
    q = pgm.PgmNormalParams.standard(2, 1.0)
    per = pgm.kl_divergence(p, q, per_factor=True)
    assert per.shape == (2,) and np.all(per > 0)
    assert pgm.kl_divergence(p, q) == pytest.approx(per.sum(), rel=1e-15)
    with pytest.raises(DomainError):
        pgm.kl_divergence(p, pgm.PgmNormalParams.standard(2, 0.5))
    with pytest.raises(DomainError):
        pgm.kl_divergence(p, pgm.PgmNormalParams.standard(3, 1.0))


def test_kl_is_finite_in_extreme_log_parameters():
    lb, lg = np.meshgrid(np.linspace(-20, 20, 41), np.linspace(-10, 10, 21))
    kl = pgm.kl_to_standard(np.zeros_like(lb), lb, lg, 1.0)
    assert np.all(np.isfinite(kl)) and np.all(kl >= 0)


def test_params_validation():
    with pytest.raises(DomainError):
        pgm.PgmNormalParams([0.0], [np.nan], [0.0], 1.0)
    with pytest.raises(DomainError):
        pgm.PgmNormalParams([0.0, 1.0], [0.0], [0.0], 1.0)
    with pytest.raises(DomainError):
        pgm.PgmNormalParams.from_natural([0.0], [-1.0], [1.0], 1.0)
    with pytest.raises(DomainError):
        pgm.PgmNormalParams.standard(1, 0.0)
    with pytest.raises(DomainError):
        pgm.log_density([0.0], [0.0], pgm.PgmNormalParams.standard(1, 1.0))


def test_sample_moments():
    params = single(0.7, 1.0, 1.0, 1.0)
    mu, sigma = pgm.sample(params, np.random.default_rng(0), 10**6)
    assert mu.shape == (10**6, 1) and np.all(sigma > 0)
    se_mu = mu.std() / 1e3
    assert abs(mu.mean() - 0.7) <= 4 * se_mu
    s2 = sigma**2
    assert abs(s2.mean() - 5.0) <= 4 * s2.std() / 1e3


def test_sample_concentrates_for_tiny_gamma2():
    mu, sigma = pgm.sample(single(0.5, 2.0, 1e-6, 1.0), np.random.default_rng(1), 10**4)
    assert mu.std() <= 2e-3 * 2.0
    assert np.median(sigma) == pytest.approx(2.0, rel=1e-2)


def test_mc_kl_estimate_properties():
    p = pgm.PgmNormalParams([0.5, -0.2], [0.3, -0.4], [0.2, -0.3], 1.0)
    est, se = pgm.mc_kl_estimate(p, p, 10**4, seed=0)
    assert abs(est) <= 4 * se + 1e-15
    q = pgm.PgmNormalParams.standard(2, 1.0)
    _, se_small = pgm.mc_kl_estimate(p, q, 10**4, seed=1)
    est, se_big = pgm.mc_kl_estimate(p, q, 10**6, seed=2)
    assert 7 <= se_small / se_big <= 14
    assert abs(est - pgm.kl_divergence(p, q)) <= 4 * se_big
    with pytest.raises(ValueError):
        pgm.mc_kl_estimate(p, q, 10, seed=0)
