"""
Gibbs sampler for the Bayesian-bootstrap Gaussian copula.

For each of M marginal draws F ~ π(F | X_O) a chain alternates

    A. latent update, column by column, from Z_ij | Z_i,-j, R
    B. R* ~ Inv-Wishart(nu0 + n, psi0 + Σ z_i z_iᵀ), normalized to a correlation
    C. imputation of the missing cells through F⁻¹(Φ(z)) or the ordinal cutoffs

and the retained Step-C outputs of all chains are pooled (model averaging
over F).
"""
import logging
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from scipy import linalg

from .data_model import MixedDataset
from .exceptions import DegenerateColumnError, NumericalError
from .marginals import CutoffSet, MarginalDraw, draw_marginal, ecdf_marginal, latent_cutoffs
from .rand_kernels import PriorConfig, RngHandle, inverse_wishart, phi, phi_inv, rng_handle, truncated_normal

logger = logging.getLogger(__name__)

# Initial latents of observed ordinal cells are uniform on their cutoff
# interval; infinite ends are clamped here.
INIT_CLAMP = 8.0
JITTER = 1e-10
MARGINAL_MODES = ('bb', 'ecdf')
ORDINAL_POINT_RULES = ('mode', 'mean')


# ================================
# TYPES
# ================================


@dataclass(frozen=True)
class ChainConfig:
    m_marginal_draws: int = 20
    iters_per_draw: int = 200
    burn_in: int = 100
    thin: int = 2
    prior: Optional[PriorConfig] = None
    seed: int = 42
    marginal: str = 'bb'
    keep_samples: bool = False

    def __post_init__(self):
        if self.m_marginal_draws < 1 or self.iters_per_draw < 1 or self.thin < 1 or self.burn_in < 0:
            raise ValueError("Chain counts must be positive")
        if self.burn_in >= self.iters_per_draw:
            raise ValueError(f"burn_in ({self.burn_in}) must be below iters_per_draw ({self.iters_per_draw})")
        if self.marginal not in MARGINAL_MODES:
            raise ValueError(f"marginal must be one of {MARGINAL_MODES}, got {self.marginal!r}")

    @property
    def retained_per_chain(self):
        return len(range(self.burn_in, self.iters_per_draw, self.thin))

    def echo(self):
        return {
            'm_marginal_draws': self.m_marginal_draws,
            'iters_per_draw': self.iters_per_draw,
            'burn_in': self.burn_in,
            'thin': self.thin,
            'seed': self.seed,
            'marginal': self.marginal,
            'keep_samples': self.keep_samples,
            'prior_nu0': None if self.prior is None else float(self.prior.nu0),
        }


@dataclass
class GibbsState:
    z: np.ndarray
    r: np.ndarray
    iteration: int = 0


@dataclass
class SamplerDiagnostics:
    jitter_events: int = 0


def check_correlation(r, atol=1e-10):
    """Raise NumericalError unless r is a valid correlation matrix."""
    if not np.allclose(r, r.T, atol=atol):
        raise NumericalError("Correlation matrix is not symmetric")
    if np.any(np.diag(r) != 1.0):
        raise NumericalError("Correlation matrix diagonal is not exactly 1")
    if np.any(np.abs(r) > 1.0):
        raise NumericalError("Correlation entries outside [-1, 1]")
    try:
        linalg.cholesky(r, lower=True)
    except linalg.LinAlgError as exc:
        raise NumericalError("Correlation matrix is not positive definite") from exc


def normalize_covariance(cov):
    """diag(cov)^(-1/2) · cov · diag(cov)^(-1/2), with an exact unit diagonal."""
    scale = 1.0 / np.sqrt(np.diag(cov))
    r = cov * np.outer(scale, scale)
    r = (r + r.T) / 2.0
    np.fill_diagonal(r, 1.0)
    return np.clip(r, -1.0, 1.0)


# ================================
# CONDITIONALS
# ================================


def conditional_params(r, z_row, j, diagnostics: Optional[SamplerDiagnostics] = None) -> Tuple[float, float]:
    """Mean and variance of Z_j given the other coordinates of one row."""
    r = np.asarray(r, dtype=float)
    z_row = np.asarray(z_row, dtype=float)
    others = np.arange(r.shape[0]) != j
    r_oo = r[np.ix_(others, others)]
    r_jo = r[j, others]
    try:
        coef = linalg.solve(r_oo, r_jo, assume_a='pos')
    except linalg.LinAlgError:
        if diagnostics is not None:
            diagnostics.jitter_events += 1
        logger.warning(f"R_-j,-j near singular at column {j}; adding jitter {JITTER}")
        coef = linalg.solve(r_oo + JITTER * np.eye(r_oo.shape[0]), r_jo, assume_a='pos')
    mu = float(coef @ z_row[others])
    sigma2 = float(r[j, j] - r_jo @ coef)
    return mu, max(sigma2, JITTER)


def conditional_coefficients(r, diagnostics: Optional[SamplerDiagnostics] = None):
    """Regression coefficients and variances for every column from one factorization.

    With Q = R⁻¹: Z_j | Z_-j has mean -Σ_{k≠j} Q_kj/Q_jj · Z_k and variance
    1/Q_jj. Returns (B, sigma2) where column j of B holds those coefficients
    (B_jj = 0).
    """
    p = r.shape[0]
    try:
        factor = linalg.cho_factor(r, lower=True)
    except linalg.LinAlgError:
        if diagnostics is not None:
            diagnostics.jitter_events += 1
        logger.warning(f"R near singular; adding jitter {JITTER} to the diagonal")
        factor = linalg.cho_factor(r + JITTER * np.eye(p), lower=True)
    precision = linalg.cho_solve(factor, np.eye(p))
    diag = np.diag(precision)
    coef = -precision / diag[np.newaxis, :]
    np.fill_diagonal(coef, 0.0)
    return coef, np.maximum(1.0 / diag, JITTER)


# ================================
# ESTADO Y PASOS A/B/C
# ================================


def _latent_of_observed(values, marginal: MarginalDraw):
    return phi_inv(marginal.cdf(values))


def initialize_state(d: MixedDataset, f: List[MarginalDraw], cutoffs: CutoffSet, rng: RngHandle) -> GibbsState:
    """Deterministic latents for observed continuous cells, uniform draws in
    the cutoff interval for observed ordinal cells, zeros elsewhere, R = I."""
    if len(f) != d.p or any(m is None for m in f):
        raise DegenerateColumnError("Every sampled column needs a marginal draw")
    z = np.zeros((d.n, d.p))
    for j, kind in enumerate(d.kinds):
        rows = d.mask[:, j]
        if not kind.is_ordinal:
            z[rows, j] = _latent_of_observed(d.values[rows, j], f[j])
            continue
        lo, hi = cutoffs.interval(j, d.values[rows, j].astype(int))
        lo = np.clip(lo, -INIT_CLAMP, INIT_CLAMP)
        hi = np.clip(hi, -INIT_CLAMP, INIT_CLAMP)
        u = rng.uniform(size=lo.size)
        # (lo, hi]: 1 - u lies in (0, 1]
        z[rows, j] = np.where(hi > lo, lo + (1.0 - u) * (hi - lo), hi)
    return GibbsState(z=z, r=np.eye(d.p), iteration=0)


def gibbs_step_a(state: GibbsState, d: MixedDataset, f: List[MarginalDraw], cutoffs: CutoffSet,
                 rng: RngHandle, diagnostics: Optional[SamplerDiagnostics] = None,
                 coefficients=None) -> GibbsState:
    """Column-major single-site sweep over the latent matrix.

    Rows are conditionally independent given R, so all rows of one column are
    drawn together, each against the freshest values of the other columns.
    """
    z = state.z.copy()
    coef, sigma2 = coefficients if coefficients is not None else conditional_coefficients(state.r, diagnostics)
    for j, kind in enumerate(d.kinds):
        observed = d.mask[:, j]
        missing = ~observed
        mu = z @ coef[:, j]
        sd = np.sqrt(sigma2[j])
        if not kind.is_ordinal:
            z[observed, j] = _latent_of_observed(d.values[observed, j], f[j])
        elif np.any(observed):
            lo, hi = cutoffs.interval(j, d.values[observed, j].astype(int))
            z[observed, j] = truncated_normal(rng, mu[observed], sd, lo, hi)
        if np.any(missing):
            z[missing, j] = mu[missing] + sd * rng.standard_normal(int(missing.sum()))
    return GibbsState(z=z, r=state.r, iteration=state.iteration)


def gibbs_step_b(state: GibbsState, prior: PriorConfig, rng: RngHandle) -> GibbsState:
    n = state.z.shape[0]
    scale = prior.psi0 + state.z.T @ state.z
    if not np.all(np.isfinite(scale)):
        raise NumericalError("Non-finite latent matrix in Step B")
    r_star = inverse_wishart(rng, prior.nu0 + n, scale)
    return GibbsState(z=state.z, r=normalize_covariance(r_star), iteration=state.iteration + 1)


def gibbs_step_c(state: GibbsState, d: MixedDataset, f: List[MarginalDraw], cutoffs: CutoffSet) -> np.ndarray:
    """This sweep's completed data matrix: observed cells copied, missing ones imputed."""
    x = np.array(d.values, copy=True)
    for j, kind in enumerate(d.kinds):
        missing = ~d.mask[:, j]
        if not np.any(missing):
            continue
        z = state.z[missing, j]
        if kind.is_ordinal:
            x[missing, j] = cutoffs.bracket(j, z)
        else:
            x[missing, j] = f[j].quantile(phi(z))
    return x


# ================================
# CHAINS
# ================================


def draw_marginals(d: MixedDataset, rng: RngHandle, mode: str = 'bb') -> Tuple[List[MarginalDraw], CutoffSet]:
    marginals, thresholds = [], {}
    for j, kind in enumerate(d.kinds):
        observed = d.observed_values(j)
        m = ecdf_marginal(observed) if mode == 'ecdf' else draw_marginal(rng, observed)
        marginals.append(m)
        if kind.is_ordinal:
            thresholds[j] = latent_cutoffs(m, kind.levels)
    return marginals, CutoffSet(thresholds)


@dataclass
class ChainResult:
    chain: int
    retained: int
    cont_sum: np.ndarray
    cont_sumsq: np.ndarray
    ord_counts: np.ndarray
    r_sum: np.ndarray
    mean_abs_delta_r: float
    jitter_events: int
    seconds: float
    samples: Optional[np.ndarray] = None

    @property
    def r_mean(self):
        return self.r_sum / self.retained


def run_chain(d: MixedDataset, cfg: ChainConfig, chain: int) -> ChainResult:
    """One marginal draw followed by iters_per_draw Gibbs sweeps."""
    started = time.perf_counter()
    rng = rng_handle(cfg.seed, chain)
    prior = cfg.prior if cfg.prior is not None else PriorConfig.default(d.p)
    if prior.p != d.p:
        raise ValueError(f"Prior dimension {prior.p} does not match {d.p} sampled columns")
    diagnostics = SamplerDiagnostics()

    f, cutoffs = draw_marginals(d, rng, cfg.marginal)
    state = initialize_state(d, f, cutoffs, rng)

    missing = ~d.mask
    ordinal_cols = np.array([k.is_ordinal for k in d.kinds])
    cont_cells = missing & ~ordinal_cols
    ord_cells = missing & ordinal_cols
    max_levels = max([k.levels for k in d.kinds if k.is_ordinal], default=1)
    ord_cols_of_cells = np.nonzero(ord_cells)[1]

    cont_sum = np.zeros(int(cont_cells.sum()))
    cont_sumsq = np.zeros_like(cont_sum)
    ord_counts = np.zeros((int(ord_cells.sum()), max_levels), dtype=np.int64)
    r_sum = np.zeros((d.p, d.p))
    samples = [] if cfg.keep_samples else None
    retained = 0
    delta_total = 0.0
    off_diag = ~np.eye(d.p, dtype=bool)

    for it in range(cfg.iters_per_draw):
        previous_r = state.r
        state = gibbs_step_a(state, d, f, cutoffs, rng, diagnostics)
        state = gibbs_step_b(state, prior, rng)
        delta_total += float(np.abs(state.r - previous_r)[off_diag].mean()) if d.p > 1 else 0.0
        if it < cfg.burn_in or (it - cfg.burn_in) % cfg.thin:
            continue
        x = gibbs_step_c(state, d, f, cutoffs)
        cont_values = x[cont_cells]
        cont_sum += cont_values
        cont_sumsq += cont_values ** 2
        categories = x[ord_cells].astype(int)
        ord_counts[np.arange(categories.size), categories - 1] += 1
        r_sum += state.r
        retained += 1
        if samples is not None:
            samples.append(x[missing])

    seconds = time.perf_counter() - started
    logger.debug(f"Cadena {chain}: {retained} muestras retenidas en {seconds:.2f}s")
    return ChainResult(
        chain=chain,
        retained=retained,
        cont_sum=cont_sum,
        cont_sumsq=cont_sumsq,
        ord_counts=ord_counts,
        r_sum=r_sum,
        mean_abs_delta_r=delta_total / cfg.iters_per_draw,
        jitter_events=diagnostics.jitter_events,
        seconds=seconds,
        samples=None if samples is None else np.array(samples),
    )


def _run_chain_job(job):
    d, cfg, chain = job
    return run_chain(d, cfg, chain)


# ================================
# POSTERIOR
# ================================


@dataclass
class PosteriorSummary:
    names: Tuple[str, ...]
    missing_cells: np.ndarray
    cont_mean: Dict[Tuple[int, int], float]
    cont_sd: Dict[Tuple[int, int], float]
    ord_freq: Dict[Tuple[int, int], np.ndarray]
    r_mean: np.ndarray
    chain_r_means: List[np.ndarray]
    retained: int
    sampled_columns: List[int]
    constant_columns: Dict[int, float]
    diagnostics: List[dict] = field(default_factory=list)
    samples: Optional[np.ndarray] = None

    def modal_category(self, cell):
        counts = self.ord_freq[cell]
        # argmax keeps the smaller category on ties
        return int(np.argmax(counts)) + 1

    def mean_category(self, cell):
        """Frequency-weighted mean category; not a level in general."""
        counts = self.ord_freq[cell]
        return float(np.dot(np.arange(1, counts.size + 1), counts) / counts.sum())

    def point_imputation(self, ordinal: str = 'mode'):
        """Posterior mean for continuous cells; modal (or mean) category for ordinal ones."""
        if ordinal not in ORDINAL_POINT_RULES:
            raise ValueError(f"Unknown ordinal point rule {ordinal!r}; choose from {ORDINAL_POINT_RULES}")
        rule = self.modal_category if ordinal == 'mode' else self.mean_category
        point = dict(self.cont_mean)
        point.update({cell: float(rule(cell)) for cell in self.ord_freq})
        return point

    def point_values(self, d: MixedDataset, ordinal: str = 'mode') -> np.ndarray:
        """Completed value matrix; ordinal='mean' may leave non-integer categories."""
        values = np.array(d.values, dtype=float, copy=True)
        for (i, j), value in self.point_imputation(ordinal).items():
            values[i, j] = value
        return values

    def imputed_dataset(self, d: MixedDataset) -> MixedDataset:
        return d.with_values(self.point_values(d))


def _classify_columns(d: MixedDataset):
    sampled, constants = [], {}
    for j in range(d.p):
        observed = d.observed_values(j)
        if observed.size == 0:
            raise DegenerateColumnError(f"Column '{d.names[j]}' has no observed values", column=j)
        if np.all(observed == observed[0]):
            logger.warning(f"Column '{d.names[j]}' is constant ({observed[0]!r}); left out of the copula")
            constants[j] = float(observed[0])
        else:
            sampled.append(j)
    if len(sampled) < 2:
        raise DegenerateColumnError(
            f"The copula needs at least 2 non-degenerate columns, found {len(sampled)}")
    return sampled, constants


def run_bbgc(d: MixedDataset, cfg: ChainConfig, map_fn: Callable = map) -> PosteriorSummary:
    """Pool M independent chains, one per marginal draw.

    `map_fn` runs the chain jobs; it must return results in job order (the
    builtin map, Executor.map and tasks.dispatch all do).
    """
    sampled, constants = _classify_columns(d)
    if cfg.prior is not None:
        if cfg.prior.p != d.p:
            raise ValueError(f"Prior dimension {cfg.prior.p} does not match {d.p} columns")
        if constants:
            # Constant columns leave the copula, and so do their prior rows
            block = cfg.prior.psi0[np.ix_(sampled, sampled)]
            cfg = replace(cfg, prior=PriorConfig(nu0=cfg.prior.nu0, psi0=block))
    sub = MixedDataset(d.values[:, sampled], tuple(d.kinds[j] for j in sampled),
                       tuple(d.names[j] for j in sampled))
    logger.info(
        f"BBGC: {d.n}x{d.p}, {d.n_missing()} missing cells, M={cfg.m_marginal_draws}, "
        f"{cfg.iters_per_draw} iterations per chain")

    jobs = [(sub, cfg, k) for k in range(cfg.m_marginal_draws)]
    results: List[ChainResult] = list(map_fn(_run_chain_job, jobs))

    retained = sum(r.retained for r in results)
    cont_sum = sum(r.cont_sum for r in results)
    cont_sumsq = sum(r.cont_sumsq for r in results)
    ord_counts = sum(r.ord_counts for r in results)
    r_sub = sum(r.r_sum for r in results) / retained

    # Cell bookkeeping in the sampled sub-dataset, mapped back to full indices
    missing = ~sub.mask
    ordinal_cols = np.array([k.is_ordinal for k in sub.kinds])
    cont_rows, cont_cols = np.nonzero(missing & ~ordinal_cols)
    ord_rows, ord_cols = np.nonzero(missing & ordinal_cols)

    cont_mean, cont_sd, ord_freq = {}, {}, {}
    means = cont_sum / retained if cont_rows.size else np.zeros(0)
    sds = np.sqrt(np.maximum(cont_sumsq / retained - means ** 2, 0.0)) if cont_rows.size else np.zeros(0)
    for k, (i, c) in enumerate(zip(cont_rows, cont_cols)):
        cell = (int(i), sampled[c])
        cont_mean[cell] = float(means[k])
        cont_sd[cell] = float(sds[k])
    for k, (i, c) in enumerate(zip(ord_rows, ord_cols)):
        levels = sub.kinds[c].levels
        ord_freq[(int(i), sampled[c])] = np.asarray(ord_counts[k, :levels], dtype=np.int64)

    for j, value in constants.items():
        rows = np.nonzero(~d.mask[:, j])[0]
        for i in rows:
            if d.kinds[j].is_ordinal:
                counts = np.zeros(d.kinds[j].levels, dtype=np.int64)
                counts[int(value) - 1] = retained
                ord_freq[(int(i), j)] = counts
            else:
                cont_mean[(int(i), j)] = value
                cont_sd[(int(i), j)] = 0.0

    # Constant columns sit outside the copula: independent of the rest
    r_full = np.eye(d.p)
    r_full[np.ix_(sampled, sampled)] = r_sub
    chain_r_means = []
    for r in results:
        full = np.eye(d.p)
        full[np.ix_(sampled, sampled)] = r.r_mean
        chain_r_means.append(full)

    missing_rows, missing_cols = np.nonzero(~d.mask)
    missing_cells = np.column_stack([missing_rows, missing_cols]) if missing_rows.size else np.zeros((0, 2), int)
    samples = None
    if cfg.keep_samples:
        samples = _pool_samples(d, sub, sampled, constants, results, missing_cells)

    diagnostics = [
        {
            'chain': r.chain,
            'retained': r.retained,
            'mean_abs_delta_r': r.mean_abs_delta_r,
            'jitter_events': r.jitter_events,
        }
        for r in results
    ]
    logger.info(f"BBGC done: {retained} samples pooled from {len(results)} chains")
    return PosteriorSummary(
        names=d.names,
        missing_cells=missing_cells,
        cont_mean=cont_mean,
        cont_sd=cont_sd,
        ord_freq=ord_freq,
        r_mean=r_full,
        chain_r_means=chain_r_means,
        retained=retained,
        sampled_columns=sampled,
        constant_columns=constants,
        diagnostics=diagnostics,
        samples=samples,
    )


def _pool_samples(d, sub, sampled, constants, results, missing_cells):
    """Stack retained draws of every chain into (draws, missing cells of d)."""
    sub_rows, sub_cols = np.nonzero(~sub.mask)
    position = {(int(i), sampled[c]): k for k, (i, c) in enumerate(zip(sub_rows, sub_cols))}
    stacked = np.vstack([r.samples for r in results])
    out = np.empty((stacked.shape[0], len(missing_cells)))
    for k, (i, j) in enumerate(missing_cells):
        j = int(j)
        out[:, k] = constants[j] if j in constants else stacked[:, position[(int(i), j)]]
    return out
