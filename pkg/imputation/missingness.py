"""
Amputation: impose MCAR or MAR missingness on a dataset, reproducibly.

Only currently observed cells are candidates, so the same functions serve
complete simulated data and real data that already has gaps. Every column
keeps at least MIN_OBSERVED observed cells.
"""
import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq
from scipy.special import expit

from .data_model import MixedDataset
from .exceptions import InfeasibleMissingnessError
from .rand_kernels import rng_handle

logger = logging.getLogger(__name__)

MCAR = 'mcar'
MAR = 'mar'
MECHANISMS = (MCAR, MAR)
MIN_OBSERVED = 2
MAX_ATTEMPTS = 1000
# Bracket for the MAR intercept search
ALPHA_BOUND = 50.0
CALIBRATION_TOL = 1e-4


@dataclass(frozen=True)
class MissingnessSpec:
    mechanism: str = MCAR
    rate: Optional[float] = None
    count: Optional[int] = None
    anchor_columns: Tuple[int, ...] = ()
    seed: int = 42
    beta: float = 1.0

    def __post_init__(self):
        mechanism = self.mechanism.lower()
        object.__setattr__(self, 'mechanism', mechanism)
        object.__setattr__(self, 'anchor_columns', tuple(int(a) for a in self.anchor_columns))
        if mechanism not in MECHANISMS:
            raise ValueError(f"mechanism must be one of {MECHANISMS}, got {self.mechanism!r}")
        if (self.rate is None) == (self.count is None):
            raise ValueError("Set exactly one of rate and count")
        if self.rate is not None and not 0 < self.rate < 1:
            raise ValueError(f"rate must lie in (0, 1), got {self.rate}")
        if self.count is not None and self.count < 1:
            raise ValueError(f"count must be >= 1, got {self.count}")
        if mechanism == MAR and not self.anchor_columns:
            raise ValueError("MAR amputation needs at least one anchor column")


def default_anchors(p: int, blocks: int = 1) -> Tuple[int, ...]:
    """First column of each of `blocks` equal-width variable blocks."""
    width = max(p // blocks, 1)
    return tuple(sorted({b * width for b in range(blocks) if b * width < p}))


def newly_masked(original: MixedDataset, amputed: MixedDataset) -> np.ndarray:
    """Cells observed in `original` and missing in `amputed`."""
    return original.mask & ~amputed.mask


def restore(amputed: MixedDataset, truth: MixedDataset) -> MixedDataset:
    """Put the true values back into every cell amputation removed."""
    values = np.where(amputed.mask, amputed.values, truth.values)
    return amputed.with_values(values)


def _retains_floor(observed_before, drop):
    before = observed_before.sum(axis=0)
    return bool(np.all(before - drop.sum(axis=0) >= np.minimum(before, MIN_OBSERVED)))


def _apply(d: MixedDataset, drop: np.ndarray) -> MixedDataset:
    values = np.array(d.values, copy=True)
    values[drop] = np.nan
    return d.with_values(values)


def ampute_mcar(d: MixedDataset, spec: MissingnessSpec) -> MixedDataset:
    """Mask exactly ⌊rate·n·p⌋ (or `count`) observed cells, uniformly without replacement."""
    rng = rng_handle(spec.seed)
    target = spec.count if spec.count is not None else int(np.floor(spec.rate * d.n * d.p))
    rows, cols = np.nonzero(d.mask)
    spare = int((d.mask.sum(axis=0) - np.minimum(d.mask.sum(axis=0), MIN_OBSERVED)).sum())
    if target > spare:
        raise InfeasibleMissingnessError(
            f"Cannot mask {target} cells and keep {MIN_OBSERVED} observed per column "
            f"(at most {spare} can be removed)")

    for attempt in range(1, MAX_ATTEMPTS + 1):
        chosen = rng.choice(rows.size, size=target, replace=False)
        drop = np.zeros(d.mask.shape, dtype=bool)
        drop[rows[chosen], cols[chosen]] = True
        if _retains_floor(d.mask, drop):
            logger.debug(f"MCAR: {target} cells masked (attempt {attempt})")
            return _apply(d, drop)
    raise InfeasibleMissingnessError(
        f"No MCAR mask of {target} cells kept {MIN_OBSERVED} observed cells per column "
        f"after {MAX_ATTEMPTS} attempts")


def anchor_scores(d: MixedDataset, anchors: Sequence[int]) -> np.ndarray:
    """Standardized per-row mean of the standardized anchor columns."""
    block = d.values[:, list(anchors)]
    if np.isnan(block).any():
        raise InfeasibleMissingnessError("MAR anchor columns must be fully observed")
    sd = block.std(axis=0)
    standardized = (block - block.mean(axis=0)) / np.where(sd > 0, sd, 1.0)
    score = standardized.mean(axis=1)
    spread = score.std()
    return (score - score.mean()) / spread if spread > 0 else np.zeros(d.n)


def calibrate_intercept(scores: np.ndarray, beta: float, rate: float) -> float:
    """α with mean σ(α + β·score) = rate over the candidate cells."""
    def gap(alpha):
        return float(expit(alpha + beta * scores).mean()) - rate

    low, high = gap(-ALPHA_BOUND), gap(ALPHA_BOUND)
    if low > 0 or high < 0:
        raise InfeasibleMissingnessError(
            f"MAR rate {rate} unreachable with beta={beta}: achievable range "
            f"[{low + rate:.4f}, {high + rate:.4f}]")
    return brentq(gap, -ALPHA_BOUND, ALPHA_BOUND, xtol=CALIBRATION_TOL / 10)


def ampute_mar(d: MixedDataset, spec: MissingnessSpec) -> MixedDataset:
    """Mask non-anchor cell (i, j) with probability σ(α + β·z̄_i)."""
    anchors = list(spec.anchor_columns)
    if any(a < 0 or a >= d.p for a in anchors):
        raise ValueError(f"Anchor columns {anchors} out of range for {d.p} columns")
    rng = rng_handle(spec.seed)
    scores = anchor_scores(d, anchors)

    eligible = np.array(d.mask, copy=True)
    eligible[:, anchors] = False
    rows, cols = np.nonzero(eligible)
    if rows.size == 0:
        raise InfeasibleMissingnessError("MAR amputation found no maskable cells outside the anchors")
    rate = spec.rate if spec.rate is not None else spec.count / rows.size
    if not 0 < rate < 1:
        raise InfeasibleMissingnessError(f"count {spec.count} exceeds the {rows.size} maskable cells")
    alpha = calibrate_intercept(scores[rows], spec.beta, rate)
    prob = expit(alpha + spec.beta * scores[rows])
    logger.debug(f"MAR: alpha={alpha:.4f}, beta={spec.beta}, expected rate {prob.mean():.4f}")

    for attempt in range(1, MAX_ATTEMPTS + 1):
        hit = rng.uniform(size=rows.size) < prob
        drop = np.zeros(d.mask.shape, dtype=bool)
        drop[rows[hit], cols[hit]] = True
        if _retains_floor(d.mask, drop):
            return _apply(d, drop)
    raise InfeasibleMissingnessError(
        f"No MAR mask kept {MIN_OBSERVED} observed cells per column after {MAX_ATTEMPTS} attempts")


def ampute(d: MixedDataset, spec: MissingnessSpec) -> MixedDataset:
    return ampute_mcar(d, spec) if spec.mechanism == MCAR else ampute_mar(d, spec)
