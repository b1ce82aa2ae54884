"""Configuration records for model building and training."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class UNetConfig:
    """Architecture settings.

    base_filters is the channel count at the first encoder level; each
    level below doubles it.  The published variants are dims=2 with 64
    filters, dims=3 with 32, and the heavy dims=3 with 64.
    """

    dims: int = 2
    depth: int = 5
    base_filters: int = 64
    leaky_slope: float = 0.3

    def __post_init__(self):
        if self.dims not in (2, 3):
            raise ValueError("dims must be 2 or 3")
        if self.depth < 2:
            raise ValueError("depth must be at least 2")
        if self.base_filters < 1:
            raise ValueError("base_filters must be at least 1")
        if not 0.0 < self.leaky_slope < 1.0:
            raise ValueError("leaky_slope must lie in (0, 1)")

    def to_dict(self) -> dict:
        return {"dims": self.dims, "depth": self.depth,
                "base_filters": self.base_filters,
                "leaky_slope": self.leaky_slope}

    @classmethod
    def from_dict(cls, d: dict) -> "UNetConfig":
        return cls(dims=int(d["dims"]), depth=int(d["depth"]),
                   base_filters=int(d["base_filters"]),
                   leaky_slope=float(d["leaky_slope"]))


AXES = ("axial", "coronal", "sagittal", "3d")

# per-axis defaults: sagittal trains an order of magnitude hotter
DEFAULT_LR = {"axial": 1e-3, "coronal": 1e-3, "sagittal": 1e-2, "3d": 1e-3}


@dataclass(frozen=True)
class TrainConfig:
    """Optimization settings; axis picks the slicing direction.

    epochs defaults to 50 for slice models and 100 for 3d; patch_size is
    required for (and only meaningful with) axis="3d".
    """

    axis: str = "axial"
    epochs: int | None = None
    batch_size: int | None = None
    learning_rate: float | None = None
    patch_size: int | None = None

    def __post_init__(self):
        if self.axis not in AXES:
            raise ValueError(f"axis must be one of {AXES}")
        if self.epochs is not None and self.epochs < 1:
            raise ValueError("epochs must be at least 1")
        if self.batch_size is not None and self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        if self.axis == "3d" and self.patch_size is None:
            raise ValueError("axis='3d' requires patch_size")
        if self.patch_size is not None and self.patch_size < 16:
            raise ValueError("patch_size must be at least 16")

    @property
    def resolved_epochs(self) -> int:
        if self.epochs is not None:
            return self.epochs
        return 100 if self.axis == "3d" else 50

    @property
    def resolved_batch_size(self) -> int:
        if self.batch_size is not None:
            return self.batch_size
        # slice models batch 10 planes; volumetric training steps one patch
        return 1 if self.axis == "3d" else 10

    @property
    def resolved_lr(self) -> float:
        if self.learning_rate is not None:
            return self.learning_rate
        return DEFAULT_LR[self.axis]


@dataclass(frozen=True)
class MpWeights:
    """Multi-plane fusion weights (axial, coronal, sagittal)."""

    w_axial: float = 0.5
    w_coronal: float = 0.3
    w_sagittal: float = 0.2

    def __post_init__(self):
        ws = (self.w_axial, self.w_coronal, self.w_sagittal)
        if any(w < 0 for w in ws):
            raise ValueError("weights must be nonnegative")
        if abs(sum(ws) - 1.0) > 1e-9:
            raise ValueError("weights must sum to 1")
