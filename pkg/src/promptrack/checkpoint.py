"""Versioned weight checkpoints.

A checkpoint is a compressed npz archive: one entry per parameter array
(npy headers carry shapes), a JSON metadata entry with the static
configuration, the vocabulary word list, and the optimizer step count so a
resumed run continues bit-for-bit.
"""

from __future__ import annotations

import json

import numpy as np

from .errors import ConfigError
from .net import TrackerNet

FORMAT = "promptrack-weights"
VERSION = 1


def save_net(net: TrackerNet, path) -> None:
    meta = {
        "format": FORMAT,
        "version": VERSION,
        "dim": net.weights.dim,
        "heads": net.weights.heads,
        "grid": list(net.encoder.cfg.grid),
        "seed": net.encoder.cfg.seed,
        "use_positions": net.encoder.cfg.use_positions,
        "mode": net.mode,
        "step_count": net.step_count,
        "words": net.vocab.words,
    }
    arrays = {f"param/{k}": v for k, v in net.parameters().items()}
    np.savez_compressed(path, meta=np.str_(json.dumps(meta)), **arrays)


def load_net(path) -> TrackerNet:
    with np.load(path, allow_pickle=False) as data:
        meta = json.loads(str(data["meta"]))
        if meta.get("format") != FORMAT or meta.get("version") != VERSION:
            raise ConfigError(f"{path}: not a version-{VERSION} weight checkpoint")
        net = TrackerNet(
            dim=meta["dim"],
            heads=meta["heads"],
            grid=tuple(meta["grid"]),
            seed=meta["seed"],
            mode=meta["mode"],
            use_positions=meta["use_positions"],
        )
        if meta["words"] != net.vocab.words:
            raise ConfigError(f"{path}: vocabulary words disagree with this build")
        params = net.parameters()
        for key in data.files:
            if not key.startswith("param/"):
                continue
            name = key[len("param/"):]
            if name not in params:
                raise ConfigError(f"{path}: unknown parameter {name!r}")
            if params[name].shape != data[key].shape:
                raise ConfigError(
                    f"{path}: parameter {name!r} has shape {data[key].shape}, expected {params[name].shape}"
                )
            params[name][...] = data[key]
        net.step_count = meta["step_count"]
    return net
