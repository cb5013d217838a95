"""
Adjusted Bayesian-bootstrap marginals.

A MarginalDraw is one realisation of

    F̃(t) = n/(n+1) · Σ w_i I(X_i <= t),   (w_1..w_n) ~ Dir(1, ..., 1)

over the observed cells of a column. The n/(n+1) factor keeps F̃ below 1 at
the column maximum (so Φ⁻¹ stays finite) and makes the draw sign invariant.
"""
import logging
from dataclasses import dataclass
from typing import Callable, Dict, Optional

import numpy as np

from .exceptions import DegenerateColumnError
from .rand_kernels import RngHandle, dirichlet_flat, phi_inv

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class MarginalDraw:
    support: np.ndarray
    cum_weights: np.ndarray
    adjustment: float
    n_obs: int

    @property
    def adjusted(self):
        """Adjusted cumulative weights, F̃ at each support point."""
        return self.adjustment * self.cum_weights

    def cdf(self, t):
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.support, t, side='right') - 1
        out = np.where(idx >= 0, self.adjusted[np.maximum(idx, 0)], 0.0)
        return float(out) if out.ndim == 0 else out

    def quantile(self, u):
        u = np.asarray(u, dtype=float)
        if np.any((u < 0) | (u > 1)):
            raise ValueError("quantile needs u in [0, 1]")
        # Smallest atom whose adjusted cumulative weight reaches u; above
        # n/(n+1) this runs off the end and clamps to the maximum.
        idx = np.searchsorted(self.adjusted, u, side='left')
        out = self.support[np.minimum(idx, self.support.size - 1)]
        return float(out) if out.ndim == 0 else out


def _check_column(values):
    values = np.asarray(values, dtype=float)
    values = values[~np.isnan(values)]
    if values.size < 2:
        raise DegenerateColumnError(
            f"A marginal needs at least 2 observed values, got {values.size}",
            constant=values.size == 1, value=float(values[0]) if values.size == 1 else None)
    if np.all(values == values[0]):
        raise DegenerateColumnError(
            f"Column is constant at {values[0]!r}", constant=True, value=float(values[0]))
    return values


def _build(values, weights):
    support, inverse = np.unique(values, return_inverse=True)
    # Tied observations pool their weight on one atom
    merged = np.bincount(inverse.ravel(), weights=weights, minlength=support.size)
    cum = np.cumsum(merged)
    cum /= cum[-1]
    cum[-1] = 1.0
    n_obs = values.size
    return MarginalDraw(support=support, cum_weights=cum, adjustment=n_obs / (n_obs + 1.0), n_obs=n_obs)


def draw_marginal(rng: Optional[RngHandle], column_observed_values, weights=None) -> MarginalDraw:
    """One adjusted Bayesian-bootstrap CDF of a column.

    `weights` replaces the Dirichlet draw (used for ECDF margins and for
    hand-checked examples); `rng` may then be None.
    """
    values = _check_column(column_observed_values)
    if weights is None:
        weights = dirichlet_flat(rng, values.size)
    else:
        weights = np.asarray(weights, dtype=float)
        if weights.shape != values.shape or np.any(weights <= 0):
            raise ValueError("weights must be positive and match the observed values")
    return _build(values, weights)


def ecdf_marginal(column_observed_values) -> MarginalDraw:
    """The uniform-weight draw: the adjusted empirical CDF."""
    values = _check_column(column_observed_values)
    return _build(values, np.full(values.size, 1.0 / values.size))


def cdf_eval(m: MarginalDraw, t):
    return m.cdf(t)


def quantile(m: MarginalDraw, u):
    return m.quantile(u)


# ================================
# ORDINAL CUTOFFS
# ================================


def latent_cutoffs(m: MarginalDraw, levels: int) -> np.ndarray:
    """Latent thresholds s_0 = -inf < s_1 <= ... <= s_{levels-1} < s_levels = +inf.

    s_l = Φ⁻¹(F̃(l)): the cutoffs live on the latent Gaussian scale.
    """
    if levels < 2:
        raise ValueError("An ordinal column needs at least 2 levels")
    inner = phi_inv(m.cdf(np.arange(1, levels, dtype=float)))
    return np.concatenate(([-np.inf], np.atleast_1d(inner), [np.inf]))


@dataclass
class CutoffSet:
    """Per ordinal column j, its threshold vector of length levels_j + 1."""

    thresholds: Dict[int, np.ndarray]

    def interval(self, j, categories):
        s = self.thresholds[j]
        categories = np.asarray(categories, dtype=int)
        return s[categories - 1], s[categories]

    def bracket(self, j, z):
        """Category l such that z lies in (s_{l-1}, s_l]."""
        s = self.thresholds[j]
        return np.searchsorted(s[1:-1], z, side='left') + 1


# ================================
# CREDIBLE BANDS
# ================================


@dataclass(frozen=True, eq=False)
class CredibleBand:
    t: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    ecdf: np.ndarray
    level: float

    def at(self, x):
        """Band (lower, upper) at values that belong to the grid."""
        idx = np.searchsorted(self.t, x)
        return self.lower[idx], self.upper[idx]

    def width(self):
        return self.upper - self.lower


def credible_band(rng: RngHandle, column, n_draws: int, level: float) -> CredibleBand:
    """Pointwise credible band of F̃ on the column's distinct observed values."""
    if n_draws < 100:
        raise ValueError("A credible band needs at least 100 draws")
    if not 0 < level <= 1:
        raise ValueError("level must lie in (0, 1]")
    values = _check_column(column)
    support, inverse = np.unique(values, return_inverse=True)
    weights = dirichlet_flat(rng, values.size, size=n_draws)
    # Atom masses per draw, then cumulate along the grid
    indicator = np.zeros((values.size, support.size))
    indicator[np.arange(values.size), inverse.ravel()] = 1.0
    draws = values.size / (values.size + 1.0) * np.cumsum(weights @ indicator, axis=1)
    tail = (1.0 - level) / 2.0
    lower, upper = np.quantile(draws, [tail, 1.0 - tail], axis=0)
    ecdf = ecdf_marginal(values).cdf(support)
    logger.debug(f"Credible band: {support.size} points, {n_draws} draws, level {level}")
    return CredibleBand(t=support, lower=lower, upper=upper, ecdf=np.atleast_1d(ecdf), level=level)


def sup_distance(m: MarginalDraw, true_cdf: Callable[[np.ndarray], np.ndarray]) -> float:
    """sup_t |F̃(t) - F(t)| for a continuous F, evaluated at the atoms.

    Between atoms F̃ is flat and F monotone, so the supremum is reached at an
    atom from the left or from the right, or in one of the two tails.
    """
    f_at = np.asarray(true_cdf(m.support), dtype=float)
    right = m.adjusted
    left = np.concatenate(([0.0], right[:-1]))
    gaps = np.maximum(np.abs(right - f_at), np.abs(left - f_at))
    # Upper tail: F -> 1 while F̃ stays at n/(n+1)
    return float(max(gaps.max(), 1.0 - right[-1]))
