"""Training loop with per-epoch metrics, periodic checkpoints and an
abort-on-non-finite policy."""

from __future__ import annotations

import csv
import os
import time
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .checkpoint import load_checkpoint, save_checkpoint
from .config import VaeConfig
from .data_io import iterate_batches
from .errors import TrainingAborted
from .nn import Adam
from .vae import build_model

METRICS_HEADER = ("epoch", "split", "elbo", "recon", "kl", "wall_seconds")
CHECKPOINT_NAME = "checkpoint.gmvae"
METRICS_NAME = "metrics.csv"


@dataclass
class EpochMetrics:
    epoch: int
    split: str
    elbo: float
    recon: float
    kl: float
    wall_seconds: float


@dataclass
class TrainState:
    model: object
    optimizer: Adam
    rng: np.random.Generator
    epoch: int = 0
    step: int = 0
    history: list = field(default_factory=list)
    batch_elbos: list = field(default_factory=list)

    @property
    def config(self) -> VaeConfig:
        return self.model.config

    def train_curve(self):
        return [m.elbo for m in self.history if m.split == "train"]


# keeps the marginal-logit initialization finite for constant pixels
_MARGINAL_CLIP = 1e-3


def init_state(config: VaeConfig, train_bits=None):
    """Fresh model and optimizer; ``train_bits`` feeds the marginal output-bias init."""
    init_rng = np.random.default_rng([config.seed, 0])
    model = build_model(config, init_rng)
    if config.decoder_bias_init == "marginal" and train_bits is not None:
        p = np.clip(np.mean(train_bits, axis=0), _MARGINAL_CLIP, 1.0 - _MARGINAL_CLIP)
        model.decoder.layers[-1].bias.data[:] = np.log(p) - np.log1p(-p)
    optimizer = Adam(model.parameters(), lr=config.lr)
    return TrainState(model, optimizer, np.random.default_rng([config.seed, 2]))


def evaluate_elbo(model, bits, batch_size, rng):
    """Mean single-sample ELBO and its components over ``bits``."""
    totals = np.zeros(3)
    with ad.no_grad():
        for start in range(0, bits.shape[0], batch_size):
            batch = bits[start:start + batch_size]
            res = model.elbo(batch, rng)
            totals += len(batch) * np.array([res.elbo.item(), res.reconstruction, res.kl])
    return totals / bits.shape[0]


def _append_metrics(path, rows):
    new = not os.path.exists(path)
    with open(path, "a", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        if new:
            writer.writerow(METRICS_HEADER)
        for r in rows:
            writer.writerow((r.epoch, r.split, repr(float(r.elbo)), repr(float(r.recon)), repr(float(r.kl)),
                             f"{r.wall_seconds:.3f}"))


def read_metrics(path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        if header != METRICS_HEADER:
            raise ValueError(f"unexpected metrics header {header}")
        return [EpochMetrics(int(e), s, float(a), float(b), float(c), float(w)) for e, s, a, b, c, w in reader]


def train(config: VaeConfig, train_bits, test_bits=None, out_dir=None, state: TrainState | None = None,
          log=None):
    """Run ``config.epochs`` epochs (continuing from ``state`` when given).

    Each epoch shuffles with the state's generator, takes Adam steps on the
    negative batch ELBO and records the mean training ELBO over its batches.
    With ``out_dir`` a metrics CSV is appended every epoch and a checkpoint
    is written every ``checkpoint_every`` epochs and at the end.  A
    non-finite loss raises :class:`TrainingAborted`; checkpoints already on
    disk are left as they were.
    """
    train_bits = np.asarray(train_bits, dtype=np.float64)
    state = state if state is not None else init_state(config, train_bits)
    model, opt = state.model, state.optimizer
    metrics_path = ckpt_path = None
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        metrics_path = os.path.join(out_dir, METRICS_NAME)
        ckpt_path = os.path.join(out_dir, CHECKPOINT_NAME)
    start = time.perf_counter()
    while state.epoch < config.epochs:
        epoch = state.epoch + 1
        sums = np.zeros(3)
        for batch in iterate_batches(train_bits, config.batch_size, state.rng):
            opt.zero_grad()
            try:
                res = model.elbo(batch, state.rng)
            except TrainingAborted as exc:
                exc.diagnostics.update(epoch=epoch, step=state.step)
                raise
            loss = -res.elbo
            loss.backward()
            grads_ok = all(p.grad is None or np.all(np.isfinite(p.grad)) for p in opt.params)
            if not grads_ok:
                raise TrainingAborted("non-finite gradient", {"epoch": epoch, "step": state.step})
            opt.step()
            state.step += 1
            state.batch_elbos.append(res.elbo.item())
            sums += len(batch) * np.array([res.elbo.item(), res.reconstruction, res.kl])
        means = sums / train_bits.shape[0]
        rows = [EpochMetrics(epoch, "train", *means, time.perf_counter() - start)]
        if test_bits is not None:
            test_means = evaluate_elbo(model, np.asarray(test_bits, dtype=np.float64), config.batch_size,
                                       np.random.default_rng([config.seed, 3, epoch]))
            rows.append(EpochMetrics(epoch, "test", *test_means, time.perf_counter() - start))
        state.epoch = epoch
        state.history.extend(rows)
        if log is not None:
            log(rows)
        if metrics_path is not None:
            _append_metrics(metrics_path, rows)
            if epoch % config.checkpoint_every == 0 or epoch == config.epochs:
                save_state(ckpt_path, state)
    return state


def save_state(path, state: TrainState):
    save_checkpoint(
        path, state.model, state.optimizer.state, state.epoch,
        rng_state=state.rng.bit_generator.state, extra={"step": state.step},
    )


def resume_state(path, config: VaeConfig | None = None):
    """Rebuild a :class:`TrainState` from a checkpoint.

    When ``config`` is given its model shape must match the stored one;
    its ``epochs`` may exceed the stored run to continue training.
    """
    from .checkpoint import read_checkpoint

    header = read_checkpoint(path)[0]
    stored = VaeConfig.from_dict(header["config"])
    config = config if config is not None else stored
    state = init_state(config)
    load_checkpoint(path, state.model, state.optimizer.state)
    state.epoch = int(header["epoch"])
    state.step = int(header["extra"].get("step", 0))
    if header.get("rng_state"):
        state.rng.bit_generator.state = header["rng_state"]
    return state
