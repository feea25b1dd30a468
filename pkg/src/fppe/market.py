"""Market primitives: buyers, budgets, value-generating processes, item samples.

All value families are realized through an inverse-transform of per-item
uniform latents, so that two processes evaluated on the same latent draw
describe potential outcomes of the same underlying item. Sampling is
deterministic given (market, t, seed) via a counter-based Philox generator.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import ndtri

FAMILIES = ("uniform", "exponential", "truncated_normal", "constant", "custom_matrix")

# Clip bounds keeping every draw inside a finite envelope. The truncated
# normal is |N(0,1)| cut at 3 by definition. Exponential draws are clipped
# far out in the tail (mass ~6e-6): a tight bound would put an atom at the
# envelope and, in markets with tens of buyers, give the clearing price a
# point mass and tied bids positive probability.
HALF_NORMAL_CLIP = 3.0
EXPONENTIAL_CLIP = 12.0


class GenerationError(RuntimeError):
    """A value process produced a non-finite or out-of-range draw."""


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=int(seed) & (2**64 - 1)))


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ValueDistribution:
    """Per-item value generator for n buyers; draws are i.i.d. across items.

    `scale` is a per-buyer (or scalar) multiplier applied after the family
    transform; exponential and truncated-normal draws are clipped to
    [0, clip_bound] before scaling.
    """

    family: str
    low: np.ndarray | float = 0.0
    high: np.ndarray | float = 1.0
    rate: np.ndarray | float = 1.0
    level: np.ndarray | float = 1.0
    matrix: np.ndarray | None = None
    clip_bound: float = HALF_NORMAL_CLIP
    scale: np.ndarray | float = 1.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown value family {self.family!r}")
        if self.family == "custom_matrix":
            if self.matrix is None:
                raise ValueError("custom_matrix family requires a matrix")
            m = np.asarray(self.matrix, dtype=float)
            if m.ndim != 2 or m.size == 0:
                raise ValueError("custom matrix must be a nonempty 2-d array")
            if not np.isfinite(m).all() or (m < 0).any():
                raise ValueError("custom matrix entries must be finite and nonnegative")
            object.__setattr__(self, "matrix", _readonly(m))
        if np.any(np.asarray(self.scale) <= 0):
            raise ValueError("scale must be positive")
        if self.clip_bound <= 0:
            raise ValueError("clip_bound must be positive")

    @classmethod
    def uniform(cls, low=0.0, high=1.0) -> "ValueDistribution":
        return cls(family="uniform", low=low, high=high)

    @classmethod
    def exponential(cls, rate=1.0, clip_bound: float = EXPONENTIAL_CLIP) -> "ValueDistribution":
        return cls(family="exponential", rate=rate, clip_bound=clip_bound)

    @classmethod
    def truncated_normal(cls, clip_bound: float = HALF_NORMAL_CLIP) -> "ValueDistribution":
        return cls(family="truncated_normal", clip_bound=clip_bound)

    @classmethod
    def constant(cls, level) -> "ValueDistribution":
        return cls(family="constant", level=level)

    @classmethod
    def custom(cls, matrix) -> "ValueDistribution":
        return cls(family="custom_matrix", matrix=matrix)

    def scaled(self, alpha: float) -> "ValueDistribution":
        """Return the same process with all values multiplied by alpha."""
        if alpha <= 0:
            raise ValueError("alpha must be positive")
        return ValueDistribution(
            family=self.family,
            low=self.low,
            high=self.high,
            rate=self.rate,
            level=self.level,
            matrix=self.matrix,
            clip_bound=self.clip_bound,
            scale=np.asarray(self.scale) * alpha,
        )

    def values_from_latent(self, latent: np.ndarray) -> np.ndarray:
        """Map per-item uniform latents in [0, 1) to an n x t value matrix.

        The custom_matrix family uses only the first latent row, interpreting
        it as a column index (sampling columns with replacement).
        """
        latent = np.asarray(latent)
        n = latent.shape[0]
        scale = np.broadcast_to(np.asarray(self.scale, dtype=float), (n,))
        if self.family == "uniform":
            low = np.broadcast_to(np.asarray(self.low, dtype=float), (n,))
            high = np.broadcast_to(np.asarray(self.high, dtype=float), (n,))
            raw = low[:, None] + (high - low)[:, None] * latent
        elif self.family == "exponential":
            rate = np.broadcast_to(np.asarray(self.rate, dtype=float), (n,))
            raw = -np.log1p(-latent) / rate[:, None]
            raw = np.clip(raw, 0.0, self.clip_bound)
        elif self.family == "truncated_normal":
            # |N(0,1)| realized as the half-normal quantile, clipped.
            raw = ndtri((1.0 + latent) / 2.0)
            raw = np.clip(raw, 0.0, self.clip_bound)
        elif self.family == "constant":
            level = np.broadcast_to(np.asarray(self.level, dtype=float), (n,))
            raw = np.broadcast_to(level[:, None], latent.shape).copy()
        else:  # custom_matrix
            if n != self.matrix.shape[0]:
                raise ValueError("latent row count does not match custom matrix")
            cols = np.minimum(
                (latent[0] * self.matrix.shape[1]).astype(int), self.matrix.shape[1] - 1
            )
            raw = self.matrix[:, cols]
        values = scale[:, None] * raw
        if not np.isfinite(values).all():
            raise GenerationError("value process produced a non-finite draw")
        return values

    def sample(self, rng: np.random.Generator, n: int, t: int) -> np.ndarray:
        return self.values_from_latent(rng.random((n, t)))

    def value_bound(self, n: int) -> float:
        """Upper bound on any draw from this process."""
        scale = np.broadcast_to(np.asarray(self.scale, dtype=float), (n,))
        if self.family == "uniform":
            high = np.broadcast_to(np.asarray(self.high, dtype=float), (n,))
            return float(np.max(scale * high))
        if self.family in ("exponential", "truncated_normal"):
            return float(np.max(scale) * self.clip_bound)
        if self.family == "constant":
            level = np.broadcast_to(np.asarray(self.level, dtype=float), (n,))
            return float(np.max(scale * level))
        return float(np.max(scale) * np.max(self.matrix))

    def to_json(self) -> dict:
        def enc(x):
            if x is None:
                return None
            arr = np.asarray(x)
            return arr.tolist() if arr.ndim else float(arr)

        return {
            "family": self.family,
            "low": enc(self.low),
            "high": enc(self.high),
            "rate": enc(self.rate),
            "level": enc(self.level),
            "matrix": enc(self.matrix),
            "clip_bound": self.clip_bound,
            "scale": enc(self.scale),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ValueDistribution":
        matrix = obj.get("matrix")
        default_clip = (
            EXPONENTIAL_CLIP if obj["family"] == "exponential" else HALF_NORMAL_CLIP
        )
        return cls(
            family=obj["family"],
            low=obj.get("low", 0.0),
            high=obj.get("high", 1.0),
            rate=obj.get("rate", 1.0),
            level=obj.get("level", 1.0),
            matrix=None if matrix is None else np.asarray(matrix, dtype=float),
            clip_bound=obj.get("clip_bound", default_clip),
            scale=obj.get("scale", 1.0),
        )


@dataclass(frozen=True, eq=False)
class MarketDefinition:
    """Limit-market primitives: budgets plus a value-generating process."""

    budgets: np.ndarray
    value_process: ValueDistribution
    value_bound: float = field(default=0.0)

    def __post_init__(self):
        b = np.asarray(self.budgets, dtype=float)
        if b.ndim != 1 or b.size == 0:
            raise ValueError("budgets must be a nonempty 1-d vector")
        if not np.isfinite(b).all() or (b <= 0).any():
            raise ValueError("all budgets must be finite and strictly positive")
        object.__setattr__(self, "budgets", _readonly(b))
        if self.value_bound <= 0:
            object.__setattr__(
                self, "value_bound", self.value_process.value_bound(b.size)
            )

    @property
    def n(self) -> int:
        return self.budgets.size

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "budgets": self.budgets.tolist(),
            "value_process": self.value_process.to_json(),
            "value_bound": self.value_bound,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "MarketDefinition":
        return cls(
            budgets=np.asarray(obj["budgets"], dtype=float),
            value_process=ValueDistribution.from_json(obj["value_process"]),
            value_bound=obj.get("value_bound", 0.0),
        )


@dataclass(frozen=True, eq=False)
class ItemBatch:
    """A realized sample of t items: an n x t value matrix plus a per-item
    supply weight (default 1/t) and the seed that generated it."""

    values: np.ndarray
    supply_weight: float
    seed: int = 0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[1] < 1:
            raise ValueError("values must be an n x t matrix with t >= 1")
        if not np.isfinite(v).all() or (v < 0).any():
            raise GenerationError("batch values must be finite and nonnegative")
        if self.supply_weight <= 0:
            raise ValueError("supply_weight must be positive")
        object.__setattr__(self, "values", _readonly(v))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def t(self) -> int:
        return self.values.shape[1]


def sample_items(mdef: MarketDefinition, t: int, seed: int) -> ItemBatch:
    """Draw t i.i.d. items from the market's value process.

    Pure function of (mdef, t, seed): identical inputs give bit-identical
    batches. The supply weight is 1/t.
    """
    if t < 1:
        raise ValueError("t must be >= 1")
    rng = _rng(seed)
    values = mdef.value_process.values_from_latent(rng.random((mdef.n, t)))
    if (values > mdef.value_bound + 1e-12).any():
        raise GenerationError("draw exceeded the declared value bound")
    return ItemBatch(values=values, supply_weight=1.0 / t, seed=int(seed))


def scale_budgets_and_values(
    mdef: MarketDefinition, batch: ItemBatch, alpha: float
) -> tuple[MarketDefinition, ItemBatch]:
    """Scale budgets and values jointly by alpha > 0.

    Leaves pacing multipliers and allocations of the equilibrium unchanged;
    prices scale by alpha.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    scaled_mdef = MarketDefinition(
        budgets=mdef.budgets * alpha,
        value_process=mdef.value_process.scaled(alpha),
    )
    scaled_batch = ItemBatch(
        values=batch.values * alpha, supply_weight=batch.supply_weight, seed=batch.seed
    )
    return scaled_mdef, scaled_batch


def scale_values_and_supply(batch: ItemBatch, alpha: float) -> ItemBatch:
    """Scale values by alpha and the supply weight by 1/alpha.

    Pacing multipliers, allocations, per-item spend (supply_weight * price)
    and revenue are unchanged; raw prices scale by alpha.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    return ItemBatch(
        values=batch.values * alpha,
        supply_weight=batch.supply_weight / alpha,
        seed=batch.seed,
    )


def problem_to_json(budgets: np.ndarray, batch: ItemBatch) -> dict:
    """Bundle budgets and a batch into the interchange schema used by the CLI."""
    budgets = np.asarray(budgets, dtype=float)
    if budgets.size != batch.n:
        raise ValueError("budgets length does not match batch")
    return {
        "n": int(budgets.size),
        "budgets": budgets.tolist(),
        "values": batch.values.tolist(),
        "supply_weight": batch.supply_weight,
        "seed": batch.seed,
    }


def problem_from_json(obj: dict) -> tuple[np.ndarray, ItemBatch]:
    budgets = np.asarray(obj["budgets"], dtype=float)
    values = np.asarray(obj["values"], dtype=float)
    if int(obj.get("n", budgets.size)) != budgets.size or values.shape[0] != budgets.size:
        raise ValueError("inconsistent problem JSON: n, budgets and values disagree")
    batch = ItemBatch(
        values=values,
        supply_weight=float(obj.get("supply_weight", 1.0 / values.shape[1])),
        seed=int(obj.get("seed", 0)),
    )
    return budgets, batch


def save_problem(path: str | Path, budgets: np.ndarray, batch: ItemBatch) -> None:
    Path(path).write_text(json.dumps(problem_to_json(budgets, batch)))


def load_problem(path: str | Path) -> tuple[np.ndarray, ItemBatch]:
    return problem_from_json(json.loads(Path(path).read_text()))


def values_to_csv(batch: ItemBatch, path: str | Path) -> None:
    """Write the value matrix as CSV, one row per buyer, one column per item."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for row in batch.values:
            writer.writerow([repr(float(x)) for x in row])


def values_from_csv(path: str | Path, supply_weight: float, seed: int = 0) -> ItemBatch:
    with open(path, newline="") as fh:
        rows = [[float(x) for x in row] for row in csv.reader(fh) if row]
    return ItemBatch(values=np.asarray(rows), supply_weight=supply_weight, seed=seed)
