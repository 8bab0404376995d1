"""Run configuration: model hyperparameters plus data and output locations."""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass
from importlib import resources

from .errors import ConfigError

SEED_ENV = "GMVAE_SEED"


@dataclass(frozen=True)
class VaeConfig:
    model: str = "gm"
    n_factors: int = 5
    curvature: float = 1.0
    hidden: int = 200
    input_dim: int = 784
    batch_size: int = 100
    lr: float = 1e-3
    epochs: int = 30
    seed: int = 0
    # "marginal": decoder output bias = logit of the training pixel means; "zero": all biases zero
    decoder_bias_init: str = "marginal"
    # dataset
    train_path: str | None = None
    test_path: str | None = None
    n_train: int = 1000
    n_test: int = 1000
    threshold: float = 0.5
    # run outputs
    out_dir: str = "runs/desk"
    checkpoint_every: int = 5
    iwae_k: int = 100

    def __post_init__(self):
        if self.model not in ("gm", "euclidean"):
            raise ConfigError(f"model must be 'gm' or 'euclidean', got {self.model!r}")
        if self.decoder_bias_init not in ("marginal", "zero"):
            raise ConfigError(f"decoder_bias_init must be 'marginal' or 'zero', got {self.decoder_bias_init!r}")
        for name in ("n_factors", "hidden", "input_dim", "batch_size", "epochs", "n_train", "n_test",
                     "checkpoint_every", "iwae_k"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int) or value < 1:
                raise ConfigError(f"{name} must be a positive integer, got {value!r}")
        if not (isinstance(self.curvature, (int, float)) and self.curvature > 0):
            raise ConfigError(f"curvature must be positive, got {self.curvature!r}")
        if not (isinstance(self.lr, (int, float)) and self.lr > 0):
            raise ConfigError(f"lr must be positive, got {self.lr!r}")
        if not (0.0 < self.threshold < 1.0):
            raise ConfigError(f"threshold must lie in (0, 1), got {self.threshold!r}")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError(f"seed must be a non-negative integer, got {self.seed!r}")

    def to_dict(self):
        return dataclasses.asdict(self)

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        data = dict(data)
        if "curvature" in data and isinstance(data["curvature"], int):
            data["curvature"] = float(data["curvature"])
        return cls(**data)


def load_config(path=None, env=None):
    """Read a JSON config; ``None`` loads the packaged desk config.

    ``GMVAE_SEED`` in ``env`` (default ``os.environ``) overrides the seed.
    """
    env = os.environ if env is None else env
    try:
        if path is None:
            text = resources.files("gmvae.configs").joinpath("desk.json").read_text(encoding="utf-8")
        else:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    config = VaeConfig.from_dict(data)
    raw = env.get(SEED_ENV)
    if raw not in (None, ""):
        try:
            seed = int(raw)
        except ValueError as exc:
            raise ConfigError(f"{SEED_ENV}={raw!r} is not an integer") from exc
        config = config.replace(seed=seed)
    return config
