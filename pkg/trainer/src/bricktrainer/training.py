"""Meta-learning loop.

Each step samples a batch of synthetic Zipf tasks, runs a clear/store-all/
query-all episode per task on one memory brick, and descends the combined
self-guided plus auxiliary loss. The learning rate decays linearly; after
every optimizer step the embedding table is projected back into its value
band. A non-finite loss aborts the run and the last good parameters are
what gets exported.
"""

from __future__ import annotations

import argparse
import copy
import sys

import numpy as np
import torch

from .config import TrainConfig
from .export import export_bundle
from .losses import LossComputer
from .model import SketchModel
from .tasks import sample_task


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


def train(config: TrainConfig, out_path: str, loss_csv_path: str | None = None) -> SketchModel:
    torch.manual_seed(config.seed)
    model = SketchModel(config)
    loss_fn = LossComputer(config.loss_variant, config.aux_loss_weight, config.guide_floor)
    params = [p for p in model.parameters() if p.requires_grad]
    params += list(loss_fn.parameters())
    optimizer = torch.optim.Adam(params, lr=config.lr_start)
    steps = config.steps
    end_ratio = config.lr_end / config.lr_start
    schedule = torch.optim.lr_scheduler.LambdaLR(
        optimizer, lambda step: 1.0 + (end_ratio - 1.0) * min(step / max(steps - 1, 1), 1.0)
    )
    rng = np.random.default_rng(config.seed)
    curve: list[tuple[int, float, float, float]] = []
    last_good: dict | None = None
    diverged_at = None

    for step in range(1, steps + 1):
        batch = [
            sample_task(rng, config.n_range, config.alpha_range, config.length_multiplier_range)
            for _ in range(config.batch_size)
        ]
        episodes = [model.episode(task) for task in batch]
        breakdown = loss_fn(episodes)
        if not torch.isfinite(breakdown.total):
            diverged_at = step
            _log(f"step {step}: non-finite loss, aborting with last good checkpoint")
            break
        optimizer.zero_grad()
        breakdown.total.backward()
        # Squared-ratio terms occasionally spike by orders of magnitude on
        # easy-guide tasks; clipping keeps Adam's moments sane.
        torch.nn.utils.clip_grad_norm_(params, 10.0)
        optimizer.step()
        schedule.step()
        model.clamp_table()
        last_good = {
            "model": copy.deepcopy(model.state_dict()),
            "loss": copy.deepcopy(loss_fn.state_dict()),
        }
        curve.append(
            (
                step,
                float(breakdown.total.detach()),
                float(breakdown.main.detach()),
                float(breakdown.aux.detach()),
            )
        )
        if step % config.log_every == 0 or step == 1:
            rule_aae = np.mean([d["aae_rule"] for d in breakdown.per_task_metrics])
            neural_aae = np.mean([d["aae_neural"] for d in breakdown.per_task_metrics])
            _log(
                f"step {step}/{steps} L={curve[-1][1]:.4f} "
                f"L'={curve[-1][2]:.4f} L''={curve[-1][3]:.4f} "
                f"AAE neural {neural_aae:.3f} vs rule {rule_aae:.3f} "
                f"lr {schedule.get_last_lr()[0]:.2e}"
            )

    if diverged_at is not None and last_good is not None:
        model.load_state_dict(last_good["model"])
    if loss_csv_path:
        with open(loss_csv_path, "w", encoding="utf-8", newline="") as fh:
            fh.write("step,L,L_prime,L_aux\n")
            for step, total, main, aux in curve:
                fh.write(f"{step},{total!r},{main!r},{aux!r}\n")
    export_bundle(model, config, out_path)
    _log(f"exported bundle to {out_path}")
    if diverged_at is not None and last_good is None:
        raise RuntimeError(f"training diverged at step {diverged_at} before any good step")
    return model


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="bricksketch-train", description=__doc__)
    parser.add_argument("--out", required=True, help="output bundle JSON path")
    parser.add_argument("--loss-csv", default=None)
    parser.add_argument("--tasks", type=int, default=20000, help="meta-task count")
    parser.add_argument("--batch-size", type=int, default=10)
    parser.add_argument("--n-low", type=int, default=1000)
    parser.add_argument("--n-high", type=int, default=5000)
    parser.add_argument("--alpha-low", type=float, default=0.5)
    parser.add_argument("--alpha-high", type=float, default=1.0)
    parser.add_argument("--seed", type=int, default=42)
    parser.add_argument("--loss-variant", choices=["self_guided", "regular"], default="self_guided")
    parser.add_argument("--fixed-v", action="store_true")
    parser.add_argument("--no-normalization", action="store_true")
    parser.add_argument("--no-scanner", action="store_true")
    parser.add_argument("--export-beta", type=float, default=None)
    args = parser.parse_args(argv)
    config = TrainConfig(
        meta_task_count=args.tasks,
        batch_size=args.batch_size,
        n_range=(args.n_low, args.n_high),
        alpha_range=(args.alpha_low, args.alpha_high),
        seed=args.seed,
        loss_variant=args.loss_variant,
        fixed_v=args.fixed_v,
        no_normalization=args.no_normalization,
        no_scanner=args.no_scanner,
        export_beta=args.export_beta,
    )
    _log(f"config: {config}")
    train(config, args.out, args.loss_csv)
    return 0


if __name__ == "__main__":
    sys.exit(main())
