"""Finite/non-finite sweeps over extreme inputs for three quantities:
the closed-form KL against the standard prior, the Poincare-disk distance
near the boundary, and the wrapped-normal log density at long tangents.
"""

from __future__ import annotations

import csv
from collections import Counter
from typing import NamedTuple

import numpy as np

from . import hwn, pgm
from .hyperbolic import _poincare_cosh_arg, lorentz_origin, poincare_distance

KINDS = ("pgm_kl", "poincare_dist", "hwn_logpdf")
CSV_HEADER = ("kind", "param1", "param2", "value", "finite")

# arccosh arguments past this leave fewer than ~4 significant digits in 1 - c|x|^2
POINCARE_GUARD = 1e12

DEFAULT_GRIDS = {
    "pgm_kl": {
        "log_beta": np.linspace(-20.0, 20.0, 41),
        "log_gamma2": np.linspace(-10.0, 10.0, 21),
        "curvature": 1.0,
    },
    "poincare_dist": {
        "offsets": np.concatenate([10.0 ** -np.arange(1, 17), [0.0]]),
        "curvatures": [0.5, 1.0, 1.5],
    },
    "hwn_logpdf": {
        "norms": np.array([0.1, 1.0, 10.0, 100.0, 300.0, 500.0, 700.0, 710.0, 720.0, 800.0, 1000.0]),
        "curvatures": [1.0],
    },
}


class SweepRow(NamedTuple):
    kind: str
    param1: float
    param2: float
    value: float
    finite: bool
    guarded: bool = False
    error: str = ""


def _row(kind, p1, p2, fn, guard=None):
    try:
        with np.errstate(all="ignore"):
            value = float(fn())
    except (ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
        return SweepRow(kind, float(p1), float(p2), float("nan"), False, True, type(exc).__name__)
    guarded = bool(guard()) if guard is not None else False
    return SweepRow(kind, float(p1), float(p2), value, bool(np.isfinite(value)), guarded)


def _sweep_pgm_kl(grid):
    c = float(grid["curvature"])
    rows = []
    for lb in grid["log_beta"]:
        for lg in grid["log_gamma2"]:
            rows.append(_row(
                "pgm_kl", lb, lg,
                lambda lb=lb, lg=lg: pgm.kl_to_standard(0.0, float(lb), float(lg), c),
            ))
    return rows


def _sweep_poincare(grid):
    rows = []
    for c in grid["curvatures"]:
        origin = np.zeros(2)
        for delta in grid["offsets"]:
            x = np.array([1.0 / np.sqrt(c) - delta, 0.0])
            rows.append(_row(
                "poincare_dist", delta, c,
                lambda x=x, c=c: poincare_distance(origin, x, c),
                guard=lambda x=x, c=c: not (_poincare_cosh_arg(origin, x, c) < POINCARE_GUARD),
            ))
    return rows


def _sweep_hwn(grid):
    rows = []
    for c in grid["curvatures"]:
        params = hwn.HwnParams(lorentz_origin(c), np.eye(2), c)
        for norm in grid["norms"]:
            v = np.array([float(norm), 0.0])
            rows.append(_row(
                "hwn_logpdf", norm, c,
                lambda v=v, params=params: hwn.hwn_log_density_from_tangent(v, params),
            ))
    return rows


_SWEEPS = {"pgm_kl": _sweep_pgm_kl, "poincare_dist": _sweep_poincare, "hwn_logpdf": _sweep_hwn}


def stability_sweep(kind, grid=None):
    """Evaluate ``kind`` over ``grid`` (defaults in ``DEFAULT_GRIDS``); errors become rows."""
    if kind not in _SWEEPS:
        raise ValueError(f"unknown sweep kind {kind!r}; expected one of {KINDS}")
    settings = dict(DEFAULT_GRIDS[kind])
    if grid:
        settings.update(grid)
    return _SWEEPS[kind](settings)


def summarize(rows):
    counts = Counter()
    for r in rows:
        counts["total"] += 1
        counts["finite" if r.finite else "nonfinite"] += 1
        counts["guarded"] += r.guarded
        counts["error"] += bool(r.error)
    counts["flagged"] = sum(1 for r in rows if (not r.finite) or r.guarded)
    return dict(counts)


def write_csv(rows, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for r in rows:
            writer.writerow((r.kind, repr(r.param1), repr(r.param2), repr(r.value), int(r.finite)))


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        if header != CSV_HEADER:
            raise ValueError(f"unexpected stability CSV header {header}")
        return [
            SweepRow(k, float(a), float(b), float(v), bool(int(f)))
            for k, a, b, v, f in reader
        ]
