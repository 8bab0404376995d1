"""Binary checkpoints.

Layout: ``b"GMVAE01\\n"``, a UTF-8 JSON header terminated by a NUL byte,
then the parameter blocks as little-endian float64 in declaration order,
followed by the Adam first and second moments in the same order.
"""

from __future__ import annotations

import json
import os
import tempfile

import numpy as np

from .config import VaeConfig
from .errors import CheckpointError
from .nn import AdamState

MAGIC = b"GMVAE01\n"
_LE_F64 = np.dtype("<f8")


def save_checkpoint(path, model, adam: AdamState, epoch, rng_state=None, extra=None):
    """Write atomically: the file at ``path`` is either the old or the new checkpoint."""
    params = model.parameters()
    header = {
        "config": model.config.to_dict(),
        "shapes": [list(p.shape) for p in params],
        "names": [p.name for p in params],
        "epoch": int(epoch),
        "seed": int(model.config.seed),
        "adam": {"step": adam.step, "lr": adam.lr, "beta1": adam.beta1, "beta2": adam.beta2, "eps": adam.eps},
        "rng_state": rng_state,
        "extra": extra or {},
    }
    blob = bytearray(MAGIC)
    blob += json.dumps(header, sort_keys=True).encode("utf-8") + b"\0"
    for arrays in ([p.data for p in params], adam.m, adam.v):
        for a in arrays:
            blob += np.ascontiguousarray(a, dtype=_LE_F64).tobytes()
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".ckpt-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(blob)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_checkpoint(path):
    """Return ``(header, params, m, v)`` with arrays in declaration order."""
    with open(path, "rb") as fh:
        data = fh.read()
    if not data.startswith(MAGIC):
        raise CheckpointError(f"{path}: bad magic {data[:8]!r}")
    end = data.find(b"\0", len(MAGIC))
    if end < 0:
        raise CheckpointError(f"{path}: header is not NUL-terminated")
    try:
        header = json.loads(data[len(MAGIC):end].decode("utf-8"))
        shapes = [tuple(int(d) for d in s) for s in header["shapes"]]
        VaeConfig.from_dict(header["config"])
    except (ValueError, KeyError, TypeError) as exc:
        raise CheckpointError(f"{path}: corrupted header ({exc})") from exc
    sizes = [int(np.prod(s)) for s in shapes]
    body = data[end + 1:]
    expected = 3 * sum(sizes) * _LE_F64.itemsize
    if len(body) != expected:
        raise CheckpointError(f"{path}: body holds {len(body)} bytes, header implies {expected}")
    flat = np.frombuffer(body, dtype=_LE_F64).astype(np.float64)
    blocks = []
    offset = 0
    for _ in range(3):
        group = []
        for shape, size in zip(shapes, sizes):
            group.append(flat[offset:offset + size].reshape(shape).copy())
            offset += size
        blocks.append(group)
    return header, blocks[0], blocks[1], blocks[2]


def load_checkpoint(path, model=None, adam: AdamState | None = None):
    """Load into ``model`` (built from the stored config when omitted).

    Refuses, without touching the model, when any parameter shape differs.
    Returns ``(model, adam_state, header)``.
    """
    from .vae import build_model

    header, params, m, v = read_checkpoint(path)
    stored = VaeConfig.from_dict(header["config"])
    if model is None:
        model = build_model(stored, np.random.default_rng(0))
    targets = model.parameters()
    theirs = [tuple(s) for s in header["shapes"]]
    ours = [p.shape for p in targets]
    if theirs != ours:
        diffs = [f"{i}: checkpoint {a} vs model {b}" for i, (a, b) in enumerate(zip(theirs, ours)) if a != b]
        if len(theirs) != len(ours):
            diffs.append(f"block count {len(theirs)} vs {len(ours)}")
        raise CheckpointError("checkpoint does not match model: " + "; ".join(diffs))
    for p, arr in zip(targets, params):
        p.data = arr
    h = header["adam"]
    state = adam if adam is not None else AdamState()
    state.lr, state.beta1, state.beta2, state.eps = h["lr"], h["beta1"], h["beta2"], h["eps"]
    state.step = int(h["step"])
    state.m, state.v = m, v
    return model, state, header
