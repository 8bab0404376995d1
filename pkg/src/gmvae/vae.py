"""Variational autoencoders with a product of Gaussian-manifold latents
(``GMVAE``) and with a Euclidean diagonal-Gaussian latent (``EuclideanVAE``).

Both expose the same surface: ``encode``, ``decode``, ``elbo``,
``iwae_log_likelihood``, ``parameters``.  Bernoulli decoders work on logits
throughout.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.special import gammaincinv

from . import autodiff as ad
from . import kernels, pgm
from .autodiff import Tensor
from .config import VaeConfig
from .errors import DomainError, TrainingAborted
from .hyperbolic import geodesic, iso_g_to_l, iso_l_to_g
from .latent_ops import encode_head, gaussian_to_tangent
from .nn import MLP

LOG_GAMMA2_MIN = float(np.log(1e-8))
LOG_GAMMA2_MAX = float(np.log(1e8))


class EncoderOutput(NamedTuple):
    alpha: object
    log_beta: object
    log_gamma2: object

    @property
    def beta(self):
        return np.exp(ad.value(self.log_beta))

    @property
    def gamma2(self):
        return np.exp(ad.value(self.log_gamma2))

    def params(self, c):
        return pgm.PgmNormalParams(
            ad.value(self.alpha), ad.value(self.log_beta), ad.value(self.log_gamma2), c
        )


class LatentNoise(NamedTuple):
    """Frozen randomness for one latent draw.

    ``normal`` drives the location, ``gamma_quantile`` in (0, 1) is pushed
    through the inverse regularized incomplete gamma at the current shape.
    """

    normal: np.ndarray
    gamma_quantile: np.ndarray


class ElboResult(NamedTuple):
    elbo: Tensor
    reconstruction: float
    kl: float


def _check_finite(name, arr, **context):
    arr = ad.value(arr)
    if not np.all(np.isfinite(arr)):
        bad = int(np.size(arr) - np.count_nonzero(np.isfinite(arr)))
        raise TrainingAborted(f"non-finite {name}", {"quantity": name, "non_finite": bad, **context})


def _as_input(x):
    return Tensor(x) if not isinstance(x, Tensor) else x


class GMVAE:
    kind = "gm"

    def __init__(self, config: VaeConfig, rng: np.random.Generator):
        self.config = config
        n, h, d = config.n_factors, config.hidden, config.input_dim
        self.encoder = MLP([d, h, h, 3 * n], rng, name="encoder")
        self.decoder = MLP([2 * n, h, h, d], rng, name="decoder")

    @property
    def curvature(self):
        return self.config.curvature

    @property
    def latent_width(self):
        return 2 * self.config.n_factors

    def parameters(self):
        return self.encoder.parameters() + self.decoder.parameters()

    # -- encoder / decoder ----------------------------------------------------

    def encode(self, x):
        x = _as_input(x)
        if x.shape[-1] != self.config.input_dim:
            raise ValueError(f"input width {x.shape[-1]} != {self.config.input_dim}")
        n = self.config.n_factors
        out = self.encoder(x)
        alpha, log_beta = encode_head(out[:, :n], out[:, n:2 * n], self.curvature)
        log_gamma2 = ad.clip(out[:, 2 * n:], LOG_GAMMA2_MIN, LOG_GAMMA2_MAX)
        return EncoderOutput(alpha, log_beta, log_gamma2)

    def decode(self, mu, sigma):
        """Logits for latent points; leading axes of ``mu``/``sigma`` are flattened and restored."""
        if np.any(~(ad.value(sigma) > 0.0)):
            raise DomainError("decode needs sigma > 0")
        lead = ad.value(mu).shape[:-1]
        tx, ty = gaussian_to_tangent(mu, sigma, self.curvature)
        features = ad.concat([tx, ty], axis=-1)
        rows = int(np.prod(lead))
        logits = self.decoder(features.reshape(rows, self.latent_width))
        return logits.reshape(*lead, self.config.input_dim)

    # -- sampling -------------------------------------------------------------

    def draw_noise(self, enc: EncoderOutput, rng, samples=1):
        """Noise for ``samples`` draws; the gamma part is a ready draw, not a quantile."""
        c = self.curvature
        shape = (samples,) + ad.value(enc.alpha).shape
        normal = rng.standard_normal(shape)
        a = np.broadcast_to(ad.value(pgm.gamma_shape_from_log(enc.log_gamma2, c)), shape)
        draws = kernels.standard_gamma(a, rng)
        return normal, draws

    def reparameterize(self, enc: EncoderOutput, normal, gamma_draws=None, gamma_quantile=None):
        """Latent (mu, sigma) as differentiable functions of the encoder output."""
        c = self.curvature
        a = pgm.gamma_shape_from_log(enc.log_gamma2, c)
        if gamma_quantile is not None:
            gamma_draws = gammaincinv(ad.value(a), gamma_quantile)
        x = ad.implicit_gamma(a, gamma_draws) if isinstance(a, Tensor) else gamma_draws
        mu = enc.alpha + ad.exp(enc.log_beta + 0.5 * enc.log_gamma2) * normal
        # sigma^2 = X / rate with rate = 1 / (4 c beta^2 gamma2)
        sigma = ad.sqrt(x) * ad.exp(enc.log_beta + 0.5 * enc.log_gamma2 + 0.5 * np.log(4.0 * c))
        return mu, sigma

    def kl(self, enc: EncoderOutput):
        per_factor = pgm.kl_to_standard(enc.alpha, enc.log_beta, enc.log_gamma2, self.curvature)
        return per_factor.sum(axis=-1) if isinstance(per_factor, Tensor) else np.sum(per_factor, axis=-1)

    # -- objectives -----------------------------------------------------------

    def elbo(self, x, rng=None, noise: LatentNoise | None = None) -> ElboResult:
        """Single-sample ELBO averaged over the batch, as a graph scalar."""
        x_arr = ad.value(x)
        enc = self.encode(x_arr)
        _check_finite("encoder output", enc.alpha)
        _check_finite("encoder output", enc.log_beta)
        if noise is None:
            normal, draws = self.draw_noise(enc, rng)
            mu, sigma = self.reparameterize(enc, normal[0], gamma_draws=draws[0])
        else:
            mu, sigma = self.reparameterize(enc, noise.normal, gamma_quantile=noise.gamma_quantile)
        logits = self.decode(mu, sigma)
        recon = ad.bernoulli_log_likelihood(logits, x_arr)
        kl = self.kl(enc)
        elbo = (recon - kl).mean()
        _check_finite("elbo", elbo)
        return ElboResult(elbo, float(np.mean(ad.value(recon))), float(np.mean(ad.value(kl))))

    def log_weights(self, x, k, rng):
        """Importance log-weights, shape (k, batch)."""
        x = np.asarray(x, dtype=np.float64)
        c = self.curvature
        with ad.no_grad():
            enc = self.encode(x)
            q = enc.params(c)
            mu, sigma = pgm.sample(q, rng, k)
            logits = self.decode(mu, sigma).data
        prior = pgm.PgmNormalParams.standard(self.config.n_factors, c)
        # both densities share the volume element, which cancels
        log_q = np.sum(pgm.log_density(mu, sigma, q), axis=-1)
        log_p = np.sum(pgm.log_density(mu, sigma, prior), axis=-1)
        return ad.bernoulli_log_likelihood(logits, x) + log_p - log_q

    def iwae_log_likelihood(self, x, k, rng=None, seed=None, chunk=100):
        return iwae_log_likelihood(self, x, k, rng=rng, seed=seed, chunk=chunk)

    # -- traversal ------------------------------------------------------------

    def mean_latent(self, x):
        with ad.no_grad():
            enc = self.encode(np.asarray(x, dtype=np.float64))
        return ad.value(enc.alpha), np.exp(ad.value(enc.log_beta))

    def decode_numpy(self, mu, sigma):
        with ad.no_grad():
            return self.decode(np.asarray(mu, dtype=np.float64), np.asarray(sigma, dtype=np.float64)).data


class EuclideanVAE:
    kind = "euclidean"

    def __init__(self, config: VaeConfig, rng: np.random.Generator):
        self.config = config
        h, d = config.hidden, config.input_dim
        w = self.latent_width
        self.encoder = MLP([d, h, h, 2 * w], rng, name="encoder")
        self.decoder = MLP([w, h, h, d], rng, name="decoder")

    @property
    def latent_width(self):
        return 2 * self.config.n_factors

    def parameters(self):
        return self.encoder.parameters() + self.decoder.parameters()

    def encode(self, x):
        out = self.encoder(_as_input(x))
        w = self.latent_width
        return out[:, :w], out[:, w:]

    def decode(self, z):
        lead = ad.value(z).shape[:-1]
        z = z if isinstance(z, Tensor) else Tensor(z)
        rows = int(np.prod(lead))
        return self.decoder(z.reshape(rows, self.latent_width)).reshape(*lead, self.config.input_dim)

    @staticmethod
    def kl(mean, log_std):
        per = 0.5 * (ad.expm1(2.0 * log_std) - 2.0 * log_std + mean * mean)
        return per.sum(axis=-1) if isinstance(per, Tensor) else np.sum(per, axis=-1)

    def elbo(self, x, rng=None, noise: LatentNoise | None = None) -> ElboResult:
        x_arr = ad.value(x)
        mean, log_std = self.encode(x_arr)
        _check_finite("encoder output", mean)
        eps = noise.normal if noise is not None else rng.standard_normal(mean.shape)
        z = mean + ad.exp(log_std) * eps
        recon = ad.bernoulli_log_likelihood(self.decode(z), x_arr)
        kl = self.kl(mean, log_std)
        elbo = (recon - kl).mean()
        _check_finite("elbo", elbo)
        return ElboResult(elbo, float(np.mean(ad.value(recon))), float(np.mean(ad.value(kl))))

    def log_weights(self, x, k, rng):
        x = np.asarray(x, dtype=np.float64)
        with ad.no_grad():
            mean, log_std = (t.data for t in self.encode(x))
            eps = rng.standard_normal((k,) + mean.shape)
            z = mean + np.exp(log_std) * eps
            logits = self.decode(z).data
        log_q = np.sum(-0.5 * eps * eps - log_std - 0.5 * np.log(2.0 * np.pi), axis=-1)
        log_p = np.sum(-0.5 * z * z - 0.5 * np.log(2.0 * np.pi), axis=-1)
        return ad.bernoulli_log_likelihood(logits, x) + log_p - log_q

    def iwae_log_likelihood(self, x, k, rng=None, seed=None, chunk=100):
        return iwae_log_likelihood(self, x, k, rng=rng, seed=seed, chunk=chunk)


def _logmeanexp(w, axis=0):
    m = np.max(w, axis=axis, keepdims=True)
    return np.squeeze(m, axis=axis) + np.log(np.mean(np.exp(w - m), axis=axis))


def example_streams(seed, count):
    """One independent generator per example, split from ``seed`` via SeedSequence.spawn."""
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(count)]


def iwae_log_likelihood(model, x, k, rng=None, seed=None, chunk=100):
    """Per-example ``log mean_i w_i`` over ``k`` importance samples.

    With ``seed`` every example gets its own stream, so results do not
    depend on batching; otherwise ``rng`` drives the whole batch.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    x = np.asarray(x, dtype=np.float64)
    if seed is None:
        if rng is None:
            raise ValueError("pass rng or seed")
        return _logmeanexp(model.log_weights(x, k, rng))
    streams = example_streams(seed, x.shape[0])
    out = np.empty(x.shape[0])
    for i, stream in enumerate(streams):
        logw = np.concatenate([
            model.log_weights(x[i:i + 1], min(chunk, k - j), stream) for j in range(0, k, chunk)
        ])
        out[i] = _logmeanexp(logw)[0]
    return out


# ---------------------------------------------------------------------------
# latent traversal
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Traversal:
    """``path`` is (steps, batch, 2) holding (mu, sigma) of the moving factor."""

    ts: np.ndarray
    path: np.ndarray
    logits: np.ndarray


def geodesic_path(start, end, c, steps):
    """(steps, ..., 2) Gaussian-manifold points along the geodesic from start to end."""
    start = np.asarray(start, dtype=np.float64)
    end = np.asarray(end, dtype=np.float64)
    ts = np.linspace(0.0, 1.0, int(steps))
    a, b = iso_g_to_l(start, c), iso_g_to_l(end, c)
    flat_a, flat_b = a.reshape(-1, 3), b.reshape(-1, 3)
    pts = np.stack([iso_l_to_g(geodesic(pa, pb, c, ts), c) for pa, pb in zip(flat_a, flat_b)], axis=1)
    pts = pts.reshape((len(ts),) + start.shape)
    # endpoints exactly
    pts[0], pts[-1] = start, end
    return ts, pts


def latent_traversal(model: GMVAE, x, factor, steps=10, end=None, log_beta_span=3.0):
    """Walk one factor along a geodesic with every other factor at its encoded mean.

    Without ``end`` the walk raises beta from its encoded value by
    ``exp(log_beta_span)`` at fixed alpha.
    """
    if steps < 2:
        raise ValueError("steps must be at least 2")
    n = model.config.n_factors
    if not 0 <= factor < n:
        raise ValueError(f"factor {factor} outside [0, {n})")
    alpha, beta = model.mean_latent(x)
    start = np.stack([alpha[:, factor], beta[:, factor]], axis=-1)
    if end is None:
        end = np.stack([alpha[:, factor], beta[:, factor] * np.exp(log_beta_span)], axis=-1)
    end = np.broadcast_to(np.asarray(end, dtype=np.float64), start.shape)
    ts, path = geodesic_path(start, end, model.curvature, steps)
    mu = np.broadcast_to(alpha, (len(ts),) + alpha.shape).copy()
    sigma = np.broadcast_to(beta, (len(ts),) + beta.shape).copy()
    mu[..., factor] = path[..., 0]
    sigma[..., factor] = path[..., 1]
    return Traversal(ts, path, model.decode_numpy(mu, sigma))


def bernoulli_entropy(logits):
    """Per-pixel entropy of Bernoulli(sigmoid(logits)) from logits."""
    logits = np.asarray(logits, dtype=np.float64)
    p = ad.sigmoid(logits)
    return ad.softplus(logits) - p * logits


def build_model(config: VaeConfig, rng: np.random.Generator):
    if config.model == "gm":
        return GMVAE(config, rng)
    if config.model == "euclidean":
        return EuclideanVAE(config, rng)
    raise ValueError(f"unknown model kind {config.model!r}")
