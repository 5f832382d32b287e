"""Value-network checkpoint: magic, header length, JSON header, raw float64 LE params."""
from __future__ import annotations

import json
import struct

import numpy as np

from .network import MLP

MAGIC = b"WVNET1\n"


def save_checkpoint(path, net: MLP, epoch: int = 0, extra: dict | None = None) -> None:
    header = {"dims": net.sizes[0], "layers": net.sizes, "seed": net.seed, "epoch": epoch,
              "shapes": [list(p.shape) for p in net.params],
              "input_scale": net.input_scale.tolist(), **(extra or {})}
    hb = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(hb)))
        fh.write(hb)
        fh.write(net.flat_params().astype("<f8").tobytes())


def load_checkpoint(path) -> tuple[MLP, dict]:
    with open(path, "rb") as fh:
        if fh.read(len(MAGIC)) != MAGIC:
            raise ValueError(f"{path}: not a value-network checkpoint")
        (hlen,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(hlen))
        flat = np.frombuffer(fh.read(), dtype="<f8")
    sizes = header["layers"]
    net = MLP(sizes[0], hidden=tuple(sizes[1:-1]), seed=header["seed"],
              input_scale=header["input_scale"])
    net.set_flat_params(flat)
    return net, header
