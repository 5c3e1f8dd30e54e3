"""Weight bundle export.

Serializes the trained model into the engine's bundle JSON: structural
hyperparameters, hash seeds, the clamped embedding table, and the three
layer stacks with row-major weights. Writes are atomic (temp file plus
rename) so a crashed run never leaves a half-written bundle.
"""

from __future__ import annotations

import json
import os
import tempfile

import torch

from .config import TrainConfig
from .model import SketchModel


def _stack_json(layers, last_identity: bool) -> list[dict]:
    out = []
    for i, layer in enumerate(layers):
        identity = last_identity and i == len(layers) - 1
        out.append(
            {
                "in_dim": layer.in_features,
                "out_dim": layer.out_features,
                "weights": [float(w) for w in layer.weight.detach().reshape(-1)],
                "bias": [float(b) for b in layer.bias.detach()],
                "activation": "identity" if identity else "leaky_relu",
            }
        )
    return out


def bundle_dict(model: SketchModel, config: TrainConfig) -> dict:
    values = torch.clamp(model.v_table.detach(), config.clamp_epsilon, 1.0)
    doc = {
        "format_version": 1,
        "d1": config.d1,
        "d2": config.d2,
        "v_dim": config.v_dim,
        "clamp_epsilon": config.clamp_epsilon,
        "s_dim": config.s_dim,
        "beta": config.resolved_export_beta,
        "alpha_interval": [config.alpha_range[0], config.alpha_range[1]],
        "scan_subset_columns": config.scan_subset_columns,
        "leaky_slope": config.leaky_slope,
        "embedding_values": [float(v) for v in values],
        "seeds": {
            "embed": model.embed_seeds,
            "address": model.address_seeds,
            "brick": model.brick_seed,
        },
        "scan_phi": None if config.no_scanner else _stack_json(model.phi, last_identity=False),
        "scan_rho": None if config.no_scanner else _stack_json(model.rho, last_identity=True),
        "dec": _stack_json(model.dec, last_identity=True),
        "flags": {
            "no_scanner": config.no_scanner,
            "no_normalization": config.no_normalization,
        },
    }
    return doc


def export_bundle(model: SketchModel, config: TrainConfig, path: str) -> None:
    doc = bundle_dict(model, config)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            json.dump(doc, fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
