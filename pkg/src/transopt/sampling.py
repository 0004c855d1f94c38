"""Latin Hypercube design matrices with min-max scaled objective values."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, InputError
from .fnsuite import ProblemInstance, evaluate_many
from .rng import SplitRng, hash_words

LOWER, UPPER = -5.0, 5.0
SAMPLE_MULTIPLIERS = (50, 100)


def lhs_sample(d: int, s: int, seed: int) -> np.ndarray:
    """Latin Hypercube sample of ``s`` points in ``[-5, 5]^d``.

    Each axis is cut into ``s`` equal strata and every stratum receives
    exactly one coordinate, placed uniformly inside it.  Axis ``j`` uses
    stream ``j`` split off ``SplitRng(seed)``: first the stratum-to-row
    permutation, then the within-stratum offsets.
    """
    if int(d) < 1 or int(s) < 1:
        raise ConfigError(f"lhs_sample needs d >= 1 and s >= 1, got d={d}, s={s}")
    d, s = int(d), int(s)
    root = SplitRng(seed)
    edges = LOWER + (UPPER - LOWER) * np.arange(s + 1) / s
    out = np.empty((s, d))
    for j in range(d):
        rng = root.split(j)
        strata = rng.permutation(s)
        u = rng.uniform(s)
        lo, hi = edges[strata], edges[strata + 1]
        col = lo + u * (hi - lo)
        # rounding must never push a point onto the next stratum's edge
        out[:, j] = np.minimum(col, np.nextafter(hi, -np.inf))
    return out


def minmax_scale(y_raw) -> np.ndarray:
    y = np.asarray(y_raw, dtype=np.float64)
    if y.size == 0:
        raise InputError("cannot scale an empty vector")
    if not np.all(np.isfinite(y)):
        raise InputError("objective values must be finite")
    lo, hi = y.min(), y.max()
    if hi == lo:
        return np.zeros_like(y)
    return (y - lo) / (hi - lo)


@dataclass(frozen=True, eq=False)
class DesignMatrix:
    x: np.ndarray
    y: np.ndarray
    class_label: int
    y_raw: np.ndarray | None = None
    instance_id: int = 0
    multiplier: int = 0
    seed: int = 0

    @property
    def s(self) -> int:
        return self.x.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]

    def as_input(self) -> np.ndarray:
        """The ``[s, d + 1]`` model input: x columns then scaled y."""
        return np.column_stack([self.x, self.y])


def design_seed(inst: ProblemInstance, multiplier: int, seed: int) -> int:
    return hash_words(inst.spec.seed, multiplier, seed)


def build_design(
    inst: ProblemInstance,
    multiplier: int,
    seed: int,
    *,
    allow_any_multiplier: bool = False,
) -> DesignMatrix:
    if not allow_any_multiplier and multiplier not in SAMPLE_MULTIPLIERS:
        raise ConfigError(
            f"multiplier must be one of {SAMPLE_MULTIPLIERS} (pass allow_any_multiplier=True to override), got {multiplier}"
        )
    if int(multiplier) < 1:
        raise ConfigError(f"multiplier must be positive, got {multiplier}")
    s = int(multiplier) * inst.dim
    x = lhs_sample(inst.dim, s, design_seed(inst, multiplier, seed))
    y_raw = evaluate_many(inst, x)
    return DesignMatrix(
        x=x,
        y=minmax_scale(y_raw),
        class_label=inst.class_id,
        y_raw=y_raw,
        instance_id=inst.spec.instance_id,
        multiplier=int(multiplier),
        seed=int(seed),
    )
