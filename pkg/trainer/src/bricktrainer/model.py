"""Differentiable single-brick sketch model.

Mirrors the engine's forward semantics exactly: normalized table-lookup
embedding, additive memory writes, min(m/v) rule estimate, Deepsets scan
over the leading column subset, and a decode MLP over (m, v, ln(1+N), s)
with the expm1 output transform. Everything runs in float64 so the exported
bundle reproduces the engine's numpy forward to near machine precision.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from . import hashing
from .config import TrainConfig
from .tasks import Task, task_indices

LOGIT_CEILING = 60.0


def _stack(dims: list[int], generator) -> nn.ModuleList:
    layers = nn.ModuleList()
    for i in range(len(dims) - 1):
        linear = nn.Linear(dims[i], dims[i + 1], dtype=torch.float64)
        with torch.no_grad():
            bound = 1.0 / np.sqrt(dims[i])
            linear.weight.uniform_(-bound, bound, generator=generator)
            linear.bias.uniform_(-0.1, 0.1, generator=generator)
        layers.append(linear)
    return layers


@dataclass
class EpisodeResult:
    """Per-item outputs of one store-all/query-all episode."""

    f_neural: torch.Tensor
    f_rule: torch.Tensor
    truth: torch.Tensor
    s: torch.Tensor
    n: int
    alpha: float


class SketchModel(nn.Module):
    """Learnable embedding table plus scan and decode networks (one brick)."""

    def __init__(self, config: TrainConfig):
        super().__init__()
        self.config = config
        gen = torch.Generator().manual_seed(config.seed)
        eps = config.clamp_epsilon
        idx = torch.arange(config.v_dim, dtype=torch.float64)
        spread = eps + (1.0 - eps) * (idx + 0.5) / config.v_dim
        self.v_table = nn.Parameter(spread, requires_grad=not config.fixed_v)

        # The engine requires phi + rho = 8 layers and dec = 8 layers, with
        # every width at most 32; the 4 + 4 split follows the bundle format.
        d1, s_dim = config.d1, config.s_dim
        self.phi = _stack([d1, 32, 32, 32, 32], generator=gen)
        self.rho = _stack([33, 32, 32, 32, s_dim], generator=gen)
        self.dec = _stack([2 * d1 + 1 + s_dim, 32, 32, 32, 32, 32, 32, 32, 1], generator=gen)
        # Small final heads keep the first forward passes in a sane range;
        # the output transform exponentiates, so wild initial logits stall
        # training behind the clamp.
        with torch.no_grad():
            for head in (self.rho[-1], self.dec[-1]):
                head.weight.mul_(0.01)
                head.bias.zero_()
            self.dec[-1].bias.fill_(1.0)

        seeds = hashing.seed_sequence(config.seed, 2 * d1 + 1)
        self.embed_seeds = seeds[:d1]
        self.address_seeds = seeds[d1 : 2 * d1]
        self.brick_seed = seeds[2 * d1]

    def _forward_stack(self, layers: nn.ModuleList, x: torch.Tensor, last_identity: bool) -> torch.Tensor:
        slope = self.config.leaky_slope
        for i, layer in enumerate(layers):
            x = layer(x)
            if not (last_identity and i == len(layers) - 1):
                x = torch.nn.functional.leaky_relu(x, negative_slope=slope)
        return x

    def embed(self, embed_idx: torch.Tensor) -> torch.Tensor:
        raw = self.v_table[embed_idx]
        if self.config.no_normalization:
            return raw
        return raw / raw.sum(dim=1, keepdim=True)

    def build_memory(self, v: torch.Tensor, address_idx: torch.Tensor, weights: torch.Tensor) -> torch.Tensor:
        cfg = self.config
        n, d1 = v.shape
        rows = torch.arange(d1, dtype=torch.long).repeat(n)
        cols = address_idx.reshape(-1)
        vals = (weights.unsqueeze(1) * v).reshape(-1)
        memory = torch.zeros(d1, cfg.d2, dtype=torch.float64)
        return memory.index_put((rows, cols), vals, accumulate=True)

    def scan(self, memory: torch.Tensor, count: torch.Tensor) -> torch.Tensor:
        subset = memory[:, : self.config.scan_subset_columns].T
        feats = self._forward_stack(self.phi, subset, last_identity=False)
        pooled = feats.mean(dim=0)
        extra = torch.log1p(torch.clamp_min(count, 0.0)).reshape(1)
        return self._forward_stack(self.rho, torch.cat([pooled, extra]), last_identity=True)

    def decode(
        self, m: torch.Tensor, v: torch.Tensor, count: torch.Tensor, s: torch.Tensor
    ) -> torch.Tensor:
        n = m.shape[0]
        ln_count = torch.log1p(torch.clamp_min(count, 0.0)).expand(n, 1)
        x = torch.cat([m, v, ln_count, s.expand(n, s.shape[-1])], dim=1)
        y = self._forward_stack(self.dec, x, last_identity=True).squeeze(1)
        return torch.clamp_min(torch.expm1(torch.clamp_max(y, LOGIT_CEILING)), 0.0)

    def episode(self, task: Task) -> EpisodeResult:
        """Clear the brick, store every item, query every distinct item."""
        cfg = self.config
        idx = task_indices(task, self.embed_seeds, self.address_seeds, cfg.v_dim, cfg.d2)
        embed_idx = torch.from_numpy(idx.embed)
        address_idx = torch.from_numpy(idx.address)
        weights = torch.from_numpy(task.counts)

        v = self.embed(embed_idx)
        memory = self.build_memory(v, address_idx, weights)
        count = weights.sum()
        m = memory[torch.arange(cfg.d1).unsqueeze(0), address_idx]
        f_rule = (m / v).min(dim=1).values.detach()
        if cfg.no_scanner:
            s = torch.zeros(cfg.s_dim, dtype=torch.float64)
        else:
            s = self.scan(memory, count)
        f_neural = self.decode(m, v, count, s)
        return EpisodeResult(
            f_neural=f_neural,
            f_rule=f_rule,
            truth=weights,
            s=s,
            n=task.n,
            alpha=task.alpha,
        )

    def clamp_table(self) -> None:
        """Project the embedding table back into [epsilon, 1] after a step."""
        with torch.no_grad():
            self.v_table.clamp_(self.config.clamp_epsilon, 1.0)

    @classmethod
    def from_bundle_dict(cls, doc: dict, config: TrainConfig | None = None) -> "SketchModel":
        """Rebuild a model from an exported bundle (for fine-tuning and
        parity checks)."""
        if config is None:
            config = TrainConfig()
        config.d1 = int(doc["d1"])
        config.d2 = int(doc["d2"])
        config.v_dim = int(doc["v_dim"])
        config.s_dim = int(doc["s_dim"])
        config.scan_subset_columns = int(doc["scan_subset_columns"])
        config.clamp_epsilon = float(doc["clamp_epsilon"])
        config.leaky_slope = float(doc["leaky_slope"])
        config.no_scanner = bool(doc["flags"].get("no_scanner", False))
        config.no_normalization = bool(doc["flags"].get("no_normalization", False))
        model = cls(config)
        with torch.no_grad():
            model.v_table.copy_(torch.tensor(doc["embedding_values"], dtype=torch.float64))
            for stack, name in ((model.phi, "scan_phi"), (model.rho, "scan_rho"), (model.dec, "dec")):
                layers = doc.get(name)
                if layers is None:
                    continue
                for layer, spec in zip(stack, layers):
                    layer.weight.copy_(
                        torch.tensor(spec["weights"], dtype=torch.float64).reshape(
                            spec["out_dim"], spec["in_dim"]
                        )
                    )
                    layer.bias.copy_(torch.tensor(spec["bias"], dtype=torch.float64))
        model.embed_seeds = [int(s) for s in doc["seeds"]["embed"]]
        model.address_seeds = [int(s) for s in doc["seeds"]["address"]]
        model.brick_seed = int(doc["seeds"]["brick"])
        return model
