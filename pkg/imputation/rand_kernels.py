"""
Seedable random primitives for the sampler.

Every kernel takes a numpy Generator (the "RngHandle") as its first argument
and is otherwise pure. Parallel work gets one handle per stream, spawned from
SeedSequence([seed, stream]) so streams of neighbouring seeds never collide.
"""
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import linalg
from scipy.special import ndtr, ndtri

from .exceptions import NumericalError

logger = logging.getLogger(__name__)

RngHandle = np.random.Generator

PHI_INV_CLAMP = 1e-15
# Beyond this standardized bound the inverse-CDF loses precision
TAIL_THRESHOLD = 5.0


def rng_handle(seed: int, stream: int = 0) -> RngHandle:
    """Independent handle for `stream`; equal (seed, stream) gives equal draws."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(stream)]))


def phi(x):
    return ndtr(x)


def phi_inv(u):
    """Standard normal quantile with inputs clamped to [1e-15, 1 - 1e-15]."""
    return ndtri(np.clip(u, PHI_INV_CLAMP, 1.0 - PHI_INV_CLAMP))


@dataclass(frozen=True, eq=False)
class PriorConfig:
    """Inverse-Wishart prior (nu0, psi0) on the unnormalized covariance R*."""

    nu0: float
    psi0: np.ndarray

    def __post_init__(self):
        psi0 = np.atleast_2d(np.asarray(self.psi0, dtype=float))
        p = psi0.shape[0]
        if psi0.shape != (p, p):
            raise ValueError("psi0 must be square")
        if not self.nu0 > p - 1:
            raise ValueError(f"nu0 must exceed p - 1 = {p - 1}, got {self.nu0}")
        check_spd(psi0, 'psi0')
        object.__setattr__(self, 'psi0', psi0)

    @classmethod
    def default(cls, p):
        """nu0 = p + 2 and psi0 = I_p: finite prior mean equal to I_p."""
        return cls(nu0=p + 2.0, psi0=np.eye(p))

    @property
    def p(self):
        return self.psi0.shape[0]


def check_spd(matrix, label='matrix'):
    if not np.allclose(matrix, matrix.T, atol=1e-10):
        raise NumericalError(f"{label} is not symmetric")
    try:
        return linalg.cholesky(matrix, lower=True)
    except linalg.LinAlgError as exc:
        raise NumericalError(f"{label} is not positive definite") from exc


# ================================
# DIRICHLET
# ================================


def dirichlet_flat(rng: RngHandle, n: int, size: Optional[int] = None) -> np.ndarray:
    """Dir(1, ..., 1) weights of length n (shape (size, n) when size is given)."""
    if n < 1:
        raise ValueError("The flat Dirichlet needs n >= 1")
    shape = (n,) if size is None else (size, n)
    # Normalized Exp(1) variables are exactly Dir(1, ..., 1)
    gaps = rng.standard_exponential(shape)
    return gaps / gaps.sum(axis=-1, keepdims=True)


# ================================
# TRUNCATED NORMAL
# ================================


def _upper_tail(rng, a, b):
    """Standard normal on (a, b] with a > TAIL_THRESHOLD: exponential rejection."""
    out = np.empty_like(a)
    pending = np.arange(a.size)
    while pending.size:
        lo, hi = a[pending], b[pending]
        rate = (lo + np.sqrt(lo * lo + 4.0)) / 2.0
        width = hi - lo
        # Exponential proposal truncated to the interval width
        u = rng.uniform(size=pending.size)
        x = lo - np.log1p(-u * -np.expm1(-rate * width)) / rate
        accept = rng.uniform(size=pending.size) <= np.exp(-0.5 * (x - rate) ** 2)
        out[pending[accept]] = x[accept]
        pending = pending[~accept]
    return out


def _body(rng, a, b):
    """Inverse-CDF draw on (a, b], using the upper tail form when a > 0."""
    u = rng.uniform(size=a.size)
    flip = a > 0
    out = np.empty_like(a)
    lo_cdf, hi_cdf = ndtr(a[~flip]), ndtr(b[~flip])
    out[~flip] = ndtri(lo_cdf + u[~flip] * (hi_cdf - lo_cdf))
    # Survival form keeps precision when the whole interval sits above 0
    lo_sf, hi_sf = ndtr(-a[flip]), ndtr(-b[flip])
    out[flip] = -ndtri(lo_sf - u[flip] * (lo_sf - hi_sf))
    return out


def truncated_normal(rng: RngHandle, mu, sigma, lo=-np.inf, hi=np.inf):
    """N(mu, sigma²) conditioned on (lo, hi]; broadcasts over array arguments."""
    mu, sigma, lo, hi = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (mu, sigma, lo, hi)))
    shape = mu.shape
    mu, sigma, lo, hi = (np.atleast_1d(v).ravel() for v in (mu, sigma, lo, hi))
    if np.any(sigma <= 0):
        raise ValueError("truncated_normal needs sigma > 0")
    if np.any(lo >= hi):
        raise ValueError("truncated_normal needs lo < hi")

    a = (lo - mu) / sigma
    b = (hi - mu) / sigma
    z = np.empty_like(a)
    upper = a > TAIL_THRESHOLD
    lower = b < -TAIL_THRESHOLD
    body = ~(upper | lower)
    if np.any(upper):
        z[upper] = _upper_tail(rng, a[upper], b[upper])
    if np.any(lower):
        # Mirror: Z in (a, b] <=> -Z in [-b, -a)
        z[lower] = -_upper_tail(rng, -b[lower], -a[lower])
    if np.any(body):
        z[body] = _body(rng, a[body], b[body])

    x = mu + sigma * z
    # Rounding can land on the open end or past the closed one
    x = np.where(x <= lo, np.nextafter(lo, np.inf), x)
    x = np.minimum(x, hi)
    return float(x[0]) if shape == () else x.reshape(shape)


# ================================
# WISHART / INVERSE-WISHART
# ================================


def _bartlett_factor(rng, nu, p, size):
    """Lower-triangular A with chi diagonal: W = L A Aᵀ Lᵀ ~ Wishart(nu, L Lᵀ)."""
    a = np.zeros((size, p, p))
    dof = nu - np.arange(p)
    a[:, np.arange(p), np.arange(p)] = np.sqrt(rng.chisquare(dof, size=(size, p)))
    rows, cols = np.tril_indices(p, k=-1)
    a[:, rows, cols] = rng.standard_normal((size, rows.size))
    return a


def wishart(rng: RngHandle, nu: float, scale: np.ndarray, size: Optional[int] = None):
    scale = np.atleast_2d(np.asarray(scale, dtype=float))
    p = scale.shape[0]
    if not nu > p - 1:
        raise ValueError(f"Wishart degrees of freedom must exceed p - 1 = {p - 1}")
    chol = check_spd(scale, 'Wishart scale')
    la = chol @ _bartlett_factor(rng, nu, p, 1 if size is None else size)
    w = la @ np.swapaxes(la, -1, -2)
    return w[0] if size is None else w


def inverse_wishart(rng: RngHandle, nu: float, scale: np.ndarray, size: Optional[int] = None):
    """Inverse-Wishart(nu, scale): the inverse of W ~ Wishart(nu, scale⁻¹)."""
    scale = np.atleast_2d(np.asarray(scale, dtype=float))
    p = scale.shape[0]
    if not nu > p - 1:
        raise ValueError(f"Inverse-Wishart degrees of freedom must exceed p - 1 = {p - 1}")
    scale_chol = check_spd(scale, 'inverse-Wishart scale')
    inv_scale = linalg.cho_solve((scale_chol, True), np.eye(p))
    inv_scale = (inv_scale + inv_scale.T) / 2.0
    chol = linalg.cholesky(inv_scale, lower=True)
    la = chol @ _bartlett_factor(rng, nu, p, 1 if size is None else size)
    # (L A)⁻ᵀ (L A)⁻¹ = W⁻¹
    eye = np.broadcast_to(np.eye(p), la.shape)
    la_inv = np.linalg.solve(la, eye)
    sigma = np.swapaxes(la_inv, -1, -2) @ la_inv
    sigma = (sigma + np.swapaxes(sigma, -1, -2)) / 2.0
    return sigma[0] if size is None else sigma
