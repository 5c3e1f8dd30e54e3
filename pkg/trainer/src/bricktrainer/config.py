"""Training configuration."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass
class TrainConfig:
    """Desk-scale defaults; the full-scale setting raises meta_task_count to
    4e6, n_range to (1000, 50000), and d2 to 5120 but needs days, not
    minutes.

    n_range is narrowed to (1000, 5000) by default so a full run stays under
    an hour on a laptop-class CPU, and d2 shrinks by the same factor (5120
    to 512) so the per-cell collision load n/d2 matches the full-scale
    regime; the neural decoder only has headroom over the min(m/v) rule
    when cells actually collide. The scan subset stays one tenth of d2.
    export_beta of None resolves to 0.8 * n_range[0], placing the ensemble
    gate just below the trained distinct-count regime (the full-scale value
    is 10000).
    """

    meta_task_count: int = 20000
    batch_size: int = 10
    n_range: tuple[int, int] = (1000, 5000)
    alpha_range: tuple[float, float] = (0.5, 1.0)
    length_multiplier_range: tuple[float, float] = (1.0, 10.0)
    lr_start: float = 0.001
    lr_end: float = 0.0001
    loss_variant: str = "self_guided"  # or "regular"
    fixed_v: bool = False
    no_normalization: bool = False
    no_scanner: bool = False
    seed: int = 42
    d1: int = 5
    d2: int = 512
    v_dim: int = 80
    s_dim: int = 8
    scan_subset_columns: int = 52
    clamp_epsilon: float = 0.001
    leaky_slope: float = 0.01
    export_beta: float | None = None
    aux_loss_weight: float = 0.1
    guide_floor: float = 1e-12
    log_every: int = 10

    @property
    def steps(self) -> int:
        return max(1, self.meta_task_count // self.batch_size)

    @property
    def resolved_export_beta(self) -> float:
        if self.export_beta is not None:
            return self.export_beta
        return 0.8 * self.n_range[0]
