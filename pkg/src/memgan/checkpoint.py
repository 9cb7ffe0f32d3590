"""Plain-text model checkpoints.

Layout, one file::

    # memgan checkpoint v1
    {"mode": "hw-d2d", "gen_dims": [...], "disc_dims": [...], "mapping": {...}}
    @gen_w1 100 128
    <100 comma-separated rows>
    @gen_b1 1 128
    <1 row>
    ...

Hardware checkpoints store the signed weight view of the conductances, so a
checkpoint always reloads as a digital model.
"""

from __future__ import annotations

import json
from dataclasses import asdict
from pathlib import Path

import numpy as np

from memgan.gan import GanModel, WEIGHT_NAMES

MAGIC = "# memgan checkpoint v1"
ORDER = ("gen_w1", "gen_b1", "gen_w2", "gen_b2", "disc_w1", "disc_b1", "disc_w2", "disc_b2")


def save_checkpoint(model: GanModel, path, mode: str = "software") -> Path:
    path = Path(path)
    params = model.params()
    header = {"mode": mode, "gen_dims": list(model.gen_dims), "disc_dims": list(model.disc_dims)}
    if model.stack is not None:
        header["mapping"] = {k: asdict(v) for k, v in model.stack.specs.items()}
    with open(path, "w") as fh:
        fh.write(MAGIC + "\n")
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for name in ORDER:
            a = np.atleast_2d(params[name])
            fh.write(f"@{name} {a.shape[0]} {a.shape[1]}\n")
            np.savetxt(fh, a, delimiter=",", fmt="%.17g")
    return path


def load_checkpoint(path) -> tuple[GanModel, dict]:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != MAGIC:
        raise ValueError(f"{path}: not a memgan checkpoint")
    header = json.loads(lines[1])
    arrays, i = {}, 2
    while i < len(lines):
        tag, r, c = lines[i][1:].split()
        r, c = int(r), int(c)
        rows = lines[i + 1:i + 1 + r]
        arrays[tag] = np.array([[float(v) for v in row.split(",")] for row in rows]).reshape(r, c)
        i += 1 + r
    weights = {n: arrays[n] for n in WEIGHT_NAMES}
    biases = {n: arrays[n].ravel() for n in ORDER if n not in WEIGHT_NAMES}
    model = GanModel(biases, weights=weights, gen_dims=header["gen_dims"], disc_dims=header["disc_dims"])
    return model, header
