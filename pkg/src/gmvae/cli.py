"""``gmvae`` command line.

Exit status: 0 on success, 2 when a verification criterion is not met,
1 on operational errors (missing files, bad configs or checkpoints,
aborted training).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time

import numpy as np

from . import data_io, stability
from .checkpoint import load_checkpoint
from .config import VaeConfig, load_config
from .errors import CheckpointError, ConfigError, FormatError, TrainingAborted
from .hyperbolic import isometry_errors
from .pgm import PgmNormalParams, sample
from .training import CHECKPOINT_NAME, METRICS_NAME, resume_state, train
from .vae import iwae_log_likelihood, latent_traversal

EXIT_OK = 0
EXIT_OPERATIONAL = 1
EXIT_VALIDATION = 2

ISOMETRY_TOL = 1e-9
DEFAULT_CURVATURES = (0.25, 0.5, 1.0, 1.5, 2.0)

log = logging.getLogger("gmvae")


def _emit(payload):
    print(json.dumps(payload, sort_keys=True))


def _curvatures(text):
    try:
        values = tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad curvature list {text!r}") from exc
    if not values or any(not v > 0 for v in values):
        raise argparse.ArgumentTypeError("curvatures must be positive")
    return values


def cmd_verify_geometry(args):
    routes = ("P->L", "G->P", "G->L")
    rows = []
    for c in args.curvatures:
        errs = isometry_errors(c, n_pairs=args.pairs, seed=args.seed)
        rows.append((c, *(errs[r] for r in routes)))
    print(f"{'c':>6}  " + "  ".join(f"{r:>12}" for r in routes))
    for c, *errs in rows:
        print(f"{c:6.3g}  " + "  ".join(f"{e:12.3e}" for e in errs))
    if args.out:
        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(("curvature", "p_to_l", "g_to_p", "g_to_l"))
            writer.writerows((repr(c), *(repr(e) for e in errs)) for c, *errs in rows)
    ok = all(e <= ISOMETRY_TOL for _, *errs in rows for e in errs)
    return EXIT_OK if ok else EXIT_VALIDATION


def cmd_bench_stability(args):
    rows = []
    summary = {}
    for kind in stability.KINDS:
        kind_rows = stability.stability_sweep(kind)
        rows.extend(kind_rows)
        summary[kind] = stability.summarize(kind_rows)
    if args.out:
        stability.write_csv(rows, args.out)
    pgm_s = summary["pgm_kl"]
    pct = 100.0 * pgm_s.get("finite", 0) / pgm_s["total"]
    print(f"pgm_kl: {pct:.1f}% finite ({pgm_s['total']} points)")
    print(f"poincare_dist: {summary['poincare_dist']['flagged']} non-finite or guarded of "
          f"{summary['poincare_dist']['total']}")
    print(f"hwn_logpdf: {summary['hwn_logpdf'].get('nonfinite', 0)} non-finite of {summary['hwn_logpdf']['total']}")
    ok = (pct == 100.0 and summary["poincare_dist"]["flagged"] >= 1
          and summary["hwn_logpdf"].get("nonfinite", 0) >= 1)
    return EXIT_OK if ok else EXIT_VALIDATION


def _load_split(config: VaeConfig, split):
    if split == "train":
        return data_io.load_dataset(config.train_path, "train", config.threshold, config.n_train, config.seed).bits
    return data_io.load_dataset(config.test_path, "test", config.threshold, config.n_test, config.seed).bits


def cmd_train(args):
    config = load_config(args.config)
    if args.out_dir:
        config = config.replace(out_dir=args.out_dir)
    train_bits = _load_split(config, "train")
    test_bits = _load_split(config, "test")
    ckpt = os.path.join(config.out_dir, CHECKPOINT_NAME)
    state = None
    if args.resume:
        if not os.path.exists(ckpt):
            raise FileNotFoundError(f"--resume given but {ckpt} does not exist")
        state = resume_state(ckpt, config)
    elif os.path.exists(os.path.join(config.out_dir, METRICS_NAME)):
        os.remove(os.path.join(config.out_dir, METRICS_NAME))

    def report(rows):
        for r in rows:
            log.info("epoch %d %s elbo %.3f recon %.3f kl %.3f", r.epoch, r.split, r.elbo, r.recon, r.kl)

    start = time.perf_counter()
    state = train(config, train_bits, test_bits, out_dir=config.out_dir, state=state, log=report)
    curve = state.train_curve()
    _emit({
        "epochs": state.epoch,
        "first_train_elbo": curve[0] if curve else None,
        "final_train_elbo": curve[-1] if curve else None,
        "checkpoint": ckpt,
        "metrics": os.path.join(config.out_dir, METRICS_NAME),
        "wall_seconds": round(time.perf_counter() - start, 3),
    })
    return EXIT_OK


def cmd_eval(args):
    model, _, header = load_checkpoint(args.checkpoint)
    config = load_config(args.config) if args.config else model.config
    if args.config and (config.model, config.n_factors, config.hidden, config.input_dim) != (
        model.config.model, model.config.n_factors, model.config.hidden, model.config.input_dim
    ):
        raise CheckpointError("config and checkpoint describe different architectures")
    k = args.iwae_k or config.iwae_k
    seed = config.seed if args.seed is None else args.seed
    test_bits = _load_split(config, "test")
    ll = iwae_log_likelihood(model, test_bits, k, seed=seed)
    nll = -float(np.mean(ll))
    if not np.isfinite(nll):
        _emit({"nll": None, "k": k, "n": int(len(ll))})
        return EXIT_VALIDATION
    _emit({"nll": nll, "nll_stderr": float(np.std(ll, ddof=1) / np.sqrt(len(ll))), "k": k,
           "n": int(len(ll)), "epoch": header["epoch"]})
    return EXIT_OK


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def cmd_traverse(args):
    model, _, _ = load_checkpoint(args.checkpoint)
    if model.kind != "gm":
        raise CheckpointError("traversal needs a Gaussian-manifold model")
    config = model.config
    test_bits = _load_split(config, "test")[: args.inputs]
    tv = latent_traversal(model, test_bits, args.factor, steps=args.steps, log_beta_span=args.span)
    os.makedirs(args.out_dir, exist_ok=True)
    grid_path = os.path.join(args.out_dir, "traversal.gmimg")
    coords_path = os.path.join(args.out_dir, "traversal.csv")
    data_io.write_matrix(grid_path, _sigmoid(tv.logits))
    with open(coords_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("step", "input", "t", "mu", "sigma"))
        for s, t in enumerate(tv.ts):
            for i in range(tv.path.shape[1]):
                writer.writerow((s, i, repr(float(t)), repr(float(tv.path[s, i, 0])), repr(float(tv.path[s, i, 1]))))
    _emit({"steps": int(len(tv.ts)), "inputs": int(tv.path.shape[1]), "factor": args.factor,
           "grid": grid_path, "coords": coords_path})
    return EXIT_OK


def cmd_sample_prior(args):
    model, _, _ = load_checkpoint(args.checkpoint)
    rng = np.random.default_rng(args.seed)
    config = model.config
    if model.kind == "gm":
        prior = PgmNormalParams.standard(config.n_factors, config.curvature)
        mu, sigma = sample(prior, rng, args.n)
        logits = model.decode_numpy(mu, sigma)
    else:
        from . import autodiff as ad

        with ad.no_grad():
            logits = model.decode(rng.standard_normal((args.n, model.latent_width))).data
    os.makedirs(os.path.dirname(os.path.abspath(args.out)), exist_ok=True)
    data_io.write_matrix(args.out, _sigmoid(logits))
    _emit({"n": args.n, "out": args.out})
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="gmvae", description="Gaussian-manifold VAE toolkit")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify-geometry", help="check the isometries preserve distances")
    p.add_argument("--curvatures", type=_curvatures, default=DEFAULT_CURVATURES)
    p.add_argument("--pairs", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="CSV file for the per-curvature table")
    p.set_defaults(func=cmd_verify_geometry)

    p = sub.add_parser("bench-stability", help="finite/non-finite sweeps on extreme inputs")
    p.add_argument("--out", help="CSV file for every evaluated point")
    p.set_defaults(func=cmd_bench_stability)

    p = sub.add_parser("train", help="train a model from a JSON config")
    p.add_argument("--config", help="JSON config (default: packaged desk config)")
    p.add_argument("--resume", action="store_true", help="continue from the checkpoint in out_dir")
    p.add_argument("--out-dir", help="override the config's out_dir")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="IWAE negative log-likelihood on the test split")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--config")
    p.add_argument("--iwae-k", type=int)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("traverse", help="decode a geodesic walk that raises beta in one factor")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--factor", type=int, default=0)
    p.add_argument("--steps", type=int, default=10)
    p.add_argument("--inputs", type=int, default=8)
    p.add_argument("--span", type=float, default=3.0, help="log of the final beta / initial beta")
    p.add_argument("--out-dir", default="traversal")
    p.set_defaults(func=cmd_traverse)

    p = sub.add_parser("sample-prior", help="decode samples from the prior")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--n", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="prior_samples.gmimg")
    p.set_defaults(func=cmd_sample_prior)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except TrainingAborted as exc:
        print(f"error: training aborted: {exc} {json.dumps(exc.diagnostics, sort_keys=True)}", file=sys.stderr)
        return EXIT_OPERATIONAL
    except (ConfigError, CheckpointError, FormatError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_OPERATIONAL


if __name__ == "__main__":
    sys.exit(main())
