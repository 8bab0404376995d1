"""Acceptance criteria, one test each; every test prints a PASS/FAIL line."""

import time

import numpy as np
from conftest import record
from oracles import (
    central_difference,
    fd_gaussian_curvature,
    max_relative_error,
    quadrature_mass,
)
from scipy import stats
from scipy.stats import spearmanr

from gmvae import autodiff as ad
from gmvae import hyperbolic as hyp
from gmvae import manifold, pgm, stability
from gmvae.config import VaeConfig
from gmvae.nn import MLP
from gmvae.vae import GMVAE, LatentNoise, bernoulli_entropy, iwae_log_likelihood, latent_traversal

# pinned tolerances and budgets
ISOMETRY_TOL = 1e-9
ISOMETRY_SECONDS = 5.0
ISOMETRY_CURVATURES = (0.25, 0.5, 1.0, 1.5, 2.0)
CURVATURE_FD_TOL = 1e-3
CURVATURE_SECONDS = 5.0
NORMALIZATION_TOL = 5e-3
NORMALIZATION_SECONDS = 30.0
FACTORIZATION_TOL = 1e-9
FACTORIZATION_SECONDS = 1.0
MC_KL_SIGMAS = 4.0
MC_KL_SAMPLES = 10**6
MC_KL_SECONDS = 60.0
RESIDUAL_RATIO_RANGE = (6.0, 10.0)
RESIDUAL_SECONDS = 1.0
EXP_LOG_TOL = 1e-9
TRANSPORT_TOL = 1e-9
EXP_LOG_SECONDS = 1.0
# base points lie within this geodesic distance of the origin; ambient round-off grows like exp(3 sqrt(c) r)
BASE_RADIUS = 2.0
MLP_GRAD_TOL = 1e-4
ELBO_GRAD_TOL = 1e-3
GRAD_STEP = 1e-5
GRAD_SECONDS = 30.0
STABILITY_SECONDS = 10.0
HWN_PROBE_NORM = 800.0
DESK_ELBO_GAIN = 20.0
DESK_NLL_MAX = 180.0
DESK_IWAE_K = 100
DESK_SECONDS = 15 * 60.0
TRAVERSAL_INPUTS = 50
TRAVERSAL_STEPS = 10
TRAVERSAL_LOG_BETA_SPAN = 3.0


def test_criterion_01_isometries_preserve_distance():
    start = time.perf_counter()
    worst = {c: max(hyp.isometry_errors(c, n_pairs=1000, seed=2024).values()) for c in ISOMETRY_CURVATURES}
    elapsed = time.perf_counter() - start
    ok = all(v <= ISOMETRY_TOL for v in worst.values()) and elapsed < ISOMETRY_SECONDS
    detail = ", ".join(f"c={c}: {v:.2e}" for c, v in worst.items())
    record(1, ok, f"max mean |dd| over routes {detail}; {elapsed:.2f}s")
    assert ok


def test_criterion_02_curvature():
    start = time.perf_counter()
    rng = np.random.default_rng(7)
    exact_ok = True
    fd_err = 0.0
    for c in (0.5, 1.0, 1.5):
        mu = rng.uniform(-5.0, 5.0, 100)
        sigma = rng.uniform(0.2, 5.0, 100)
        exact_ok &= bool(np.all(manifold.sectional_curvature(mu, sigma, c) == -c))
        fd = np.array([fd_gaussian_curvature(m, s, c) for m, s in zip(mu, sigma)])
        fd_err = max(fd_err, float(np.max(np.abs(fd + c))))
    elapsed = time.perf_counter() - start
    ok = exact_ok and fd_err <= CURVATURE_FD_TOL and elapsed < CURVATURE_SECONDS
    record(2, ok, f"closed form exact={exact_ok}; finite-difference max err {fd_err:.2e}; {elapsed:.2f}s")
    assert ok


def test_criterion_03_normalization():
    start = time.perf_counter()
    rng = np.random.default_rng(11)
    worst = 0.0
    for c in (0.5, 1.0, 1.5):
        for _ in range(10):
            alpha = rng.uniform(-2.0, 2.0)
            beta = np.exp(rng.uniform(-1.0, 1.0))
            gamma2 = np.exp(rng.uniform(-1.0, 1.0))
            params = pgm.PgmNormalParams.from_natural([alpha], [beta], [gamma2], c)

            def logpdf(m, s, params=params):
                return pgm.log_density(m[..., None], s[..., None], params)[..., 0]

            mass = quadrature_mass(logpdf, alpha, beta, gamma2, c)
            worst = max(worst, abs(mass - 1.0))
    elapsed = time.perf_counter() - start
    ok = worst <= NORMALIZATION_TOL and elapsed < NORMALIZATION_SECONDS
    record(3, ok, f"max |mass - 1| = {worst:.2e} over 30 parameter sets; {elapsed:.2f}s")
    assert ok


def test_criterion_04_factorization():
    rng = np.random.default_rng(5)
    n = 1000
    c = rng.choice([0.5, 1.0, 1.5], n)
    alpha = rng.uniform(-3, 3, n)
    beta = np.exp(rng.uniform(-2, 2, n))
    gamma2 = np.exp(rng.uniform(-2, 2, n))
    mu = alpha + beta * np.sqrt(gamma2) * rng.normal(size=n)
    sigma = beta * np.exp(rng.uniform(-1, 1, n))
    start = time.perf_counter()
    lhs = np.empty(n)
    for i in range(n):
        params = pgm.PgmNormalParams.from_natural([alpha[i]], [beta[i]], [gamma2[i]], c[i])
        lhs[i] = (pgm.log_density([mu[i]], [sigma[i]], params)[0]
                  + np.log(manifold.sqrt_det_metric(mu[i], sigma[i], c[i])))
    elapsed = time.perf_counter() - start
    # Normal over mu times Gamma over sigma^2; the chart change sigma -> sigma^2 contributes log(2 sigma)
    rhs = (stats.norm.logpdf(mu, alpha, beta * np.sqrt(gamma2))
           + stats.gamma.logpdf(sigma**2, 1 / (4 * c * gamma2) + 1, scale=4 * c * beta**2 * gamma2)
           + np.log(2 * sigma))
    rel = float(np.max(np.abs(lhs - rhs) / np.maximum(1.0, np.abs(rhs))))
    ok = rel <= FACTORIZATION_TOL and elapsed < FACTORIZATION_SECONDS
    record(4, ok, f"max relative mismatch {rel:.2e} at {n} points; {elapsed:.3f}s")
    assert ok


def test_criterion_05_kl_matches_monte_carlo():
    rng = np.random.default_rng(99)
    start = time.perf_counter()
    worst = 0.0
    for i in range(20):
        def draw():
            return pgm.PgmNormalParams(rng.uniform(-2, 2, 1), rng.uniform(-2, 2, 1), rng.uniform(-2, 2, 1), 1.0)

        p, q = draw(), draw()
        estimate, se = pgm.mc_kl_estimate(p, q, MC_KL_SAMPLES, seed=1000 + i)
        worst = max(worst, abs(estimate - float(pgm.kl_divergence(p, q))) / se)
    elapsed = time.perf_counter() - start
    ok = worst <= MC_KL_SIGMAS and elapsed < MC_KL_SECONDS
    record(5, ok, f"worst |closed - MC| = {worst:.2f} SE over 20 pairs; {elapsed:.1f}s")
    assert ok


def _direct_residual(base, d_mu, d_sigma, c):
    moved = np.stack([base[:, 0] + d_mu, base[:, 1] + d_sigma], axis=-1)
    g = manifold.metric_tensor(base[:, 0], base[:, 1], c)
    quad = 0.5 * (g.g11 * d_mu**2 + g.g22 * d_sigma**2)
    return manifold.gm_kl(moved, base, c) - quad


def test_criterion_06_local_quadratic_law():
    rng = np.random.default_rng(3)
    start = time.perf_counter()
    base = np.stack([rng.uniform(-3, 3, 50), np.exp(rng.uniform(-1, 1, 50))], axis=-1)
    c = rng.choice([0.5, 1.0, 1.5], 50)
    d_sigma = 0.1 * base[:, 1]
    d_mu = 0.1 * base[:, 1] * rng.normal(size=50)
    ratios = []
    direct_gap = 0.0
    zero_ok = True
    for i in range(50):
        b = base[i:i + 1]
        full = manifold.kl_quadratic_residual(b, d_mu[i], d_sigma[i], c[i])
        half = manifold.kl_quadratic_residual(b, d_mu[i] / 2, d_sigma[i] / 2, c[i])
        ratios.append(float((full / half).item()))
        direct = _direct_residual(b, d_mu[i], d_sigma[i], c[i])
        direct_gap = max(direct_gap, float(np.max(np.abs(direct - full))))
        zero_ok &= bool(manifold.kl_quadratic_residual(b, d_mu[i], 0.0, c[i]) == 0.0)
    elapsed = time.perf_counter() - start
    lo, hi = RESIDUAL_RATIO_RANGE
    ok = (all(lo <= r <= hi for r in ratios) and zero_ok and direct_gap < 1e-10
          and elapsed < RESIDUAL_SECONDS)
    record(6, ok, f"ratios in [{min(ratios):.3f}, {max(ratios):.3f}]; d_sigma=0 exact zero={zero_ok}; "
                  f"closed vs direct residual {direct_gap:.1e}; {elapsed:.3f}s")
    assert ok


def _ball(rng, n, radius):
    direction = rng.normal(size=(n, 2))
    direction /= np.linalg.norm(direction, axis=-1, keepdims=True)
    return direction * rng.uniform(0.0, radius, (n, 1))


def test_criterion_07_exp_log_and_transport():
    rng = np.random.default_rng(17)
    start = time.perf_counter()
    inv_err = 0.0
    pt_err = 0.0
    for c in (0.25, 0.5, 1.0, 1.5, 2.0):
        n = 200
        origin = hyp.lorentz_origin(c)
        base = hyp.lorentz_exp(np.broadcast_to(origin, (n, 3)), hyp.lift_tangent(_ball(rng, n, BASE_RADIUS), c), c)
        v = hyp.parallel_transport(hyp.lift_tangent(_ball(rng, n, 5.0), c), origin, base, c)
        back = hyp.lorentz_log(base, hyp.lorentz_exp(base, v, c), c)
        inv_err = max(inv_err, float(np.max(np.abs(back - v))))
        u = hyp.lift_tangent(_ball(rng, n, 5.0), c)
        moved = hyp.parallel_transport_from_origin(u, base, c)
        pt_err = max(pt_err, float(np.max(np.abs(hyp.lorentz_inner(moved, moved) - hyp.lorentz_inner(u, u)))))
    elapsed = time.perf_counter() - start
    ok = inv_err <= EXP_LOG_TOL and pt_err <= TRANSPORT_TOL and elapsed < EXP_LOG_SECONDS
    record(7, ok, f"log(exp(v)) - v max {inv_err:.2e}; transport norm drift {pt_err:.2e}; {elapsed:.3f}s")
    assert ok


def test_criterion_08_gradient_checks():
    start = time.perf_counter()
    rng = np.random.default_rng(23)
    # two-layer tanh MLP with 6*20 + 20 + 20*3 + 3 = 203 parameters
    net = MLP([6, 20, 3], rng)
    x = rng.uniform(-2, 2, (5, 6))
    target = rng.uniform(-1, 1, (5, 3))

    def mlp_loss():
        out = net(ad.Tensor(x))
        return ((out - target) ** 2).sum() * 0.5

    loss = mlp_loss()
    loss.backward()
    params = net.parameters()
    analytic = [p.grad.copy() for p in params]
    with ad.no_grad():
        numeric = central_difference(lambda: mlp_loss().item(), [p.data for p in params], h=GRAD_STEP)
    mlp_err = max_relative_error(analytic, numeric, floor=1e-6)

    model = GMVAE(VaeConfig(n_factors=2, hidden=6, input_dim=8), rng)
    xb = (rng.random((4, 8)) > 0.5).astype(float)
    noise = LatentNoise(rng.standard_normal((4, 2)), rng.uniform(0.05, 0.95, (4, 2)))
    model.elbo(xb, noise=noise).elbo.backward()
    params = model.parameters()
    analytic = [p.grad.copy() for p in params]
    with ad.no_grad():
        numeric = central_difference(lambda: model.elbo(xb, noise=noise).elbo.item(),
                                     [p.data for p in params], h=GRAD_STEP)
    elbo_err = max_relative_error(analytic, numeric, floor=1e-6)
    elapsed = time.perf_counter() - start
    ok = mlp_err <= MLP_GRAD_TOL and elbo_err <= ELBO_GRAD_TOL and elapsed < GRAD_SECONDS
    record(8, ok, f"MLP max rel err {mlp_err:.2e}; frozen-noise ELBO max rel err {elbo_err:.2e}; {elapsed:.2f}s")
    assert ok


def test_criterion_09_stability_probes():
    start = time.perf_counter()
    pgm_rows = stability.stability_sweep("pgm_kl")
    poincare_rows = stability.stability_sweep("poincare_dist")
    hwn_rows = stability.stability_sweep("hwn_logpdf")
    elapsed = time.perf_counter() - start
    pgm_finite = sum(r.finite for r in pgm_rows) / len(pgm_rows)
    poincare_flagged = sum((not r.finite) or r.guarded for r in poincare_rows)
    probe = [r for r in hwn_rows if r.param1 == HWN_PROBE_NORM]
    hwn_probe_nonfinite = bool(probe) and not any(r.finite for r in probe)
    ok = pgm_finite == 1.0 and poincare_flagged >= 1 and hwn_probe_nonfinite and elapsed < STABILITY_SECONDS
    record(9, ok, f"pgm KL finite {100 * pgm_finite:.1f}% of {len(pgm_rows)}; poincare flagged "
                  f"{poincare_flagged}; hwn norm {HWN_PROBE_NORM:g} non-finite={hwn_probe_nonfinite}; "
                  f"{elapsed:.2f}s")
    assert ok


def test_criterion_10_desk_training(desk_run):
    state = desk_run.state
    curve = state.train_curve()
    all_finite = bool(np.all(np.isfinite(state.batch_elbos))) and len(curve) == desk_run.config.epochs
    gain = curve[-1] - curve[0]
    start = time.perf_counter()
    ll = iwae_log_likelihood(desk_run.model, desk_run.test_bits, DESK_IWAE_K, seed=desk_run.config.seed)
    total = desk_run.seconds + time.perf_counter() - start
    nll = -float(np.mean(ll))
    ok = (all_finite and gain >= DESK_ELBO_GAIN and nll <= DESK_NLL_MAX and len(ll) == 1000
          and total <= DESK_SECONDS)
    record(10, ok, f"losses finite={all_finite}; ELBO {curve[0]:.1f} -> {curve[-1]:.1f} (gain {gain:.1f}); "
                   f"IWAE-{DESK_IWAE_K} test NLL {nll:.2f} on {len(ll)} images; {total:.1f}s")
    assert ok


def test_criterion_11_traversal_entropy(desk_run):
    x = desk_run.test_bits[:TRAVERSAL_INPUTS]
    steps = np.arange(TRAVERSAL_STEPS)
    per_factor = []
    for factor in range(desk_run.config.n_factors):
        tv = latent_traversal(desk_run.model, x, factor, steps=TRAVERSAL_STEPS,
                              log_beta_span=TRAVERSAL_LOG_BETA_SPAN)
        entropy = bernoulli_entropy(tv.logits).mean(axis=-1)
        rhos = [spearmanr(steps, entropy[:, i])[0] for i in range(x.shape[0])]
        per_factor.append(float(np.nanmean(rhos)))
    rho = float(np.mean(per_factor))
    ok = rho > 0.0
    detail = ", ".join(f"{r:+.3f}" for r in per_factor)
    record(11, ok, f"mean Spearman rho {rho:+.3f} over {x.shape[0]} inputs and all factors (per factor {detail})")
    assert ok
