"""
Evaluation harness: the three-block synthetic design, the NRMSE metric, the
MEAN and KNN comparators, the replicated benchmark and the marginal
credible-band coverage experiment.
"""
import logging
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from scipy.linalg import cholesky
from scipy.special import log_ndtr, ndtr
from sklearn.metrics.pairwise import nan_euclidean_distances

from .copula_gibbs import ORDINAL_POINT_RULES, ChainConfig, run_bbgc
from .data_model import ColumnKind, MixedDataset, parse_kind, read_csv
from .exceptions import NumericalError
from .marginals import CredibleBand, credible_band
from .missingness import MCAR, MissingnessSpec, ampute, default_anchors, newly_masked
from .rand_kernels import rng_handle

logger = logging.getLogger(__name__)

METHODS = ('bbgc', 'mean', 'knn')
BLOCKS = 3
# Seed offsets per role within one replication
AMPUTATION_SEED_OFFSET = 10 ** 6
SAMPLER_SEED_OFFSET = 2 * 10 ** 6
EVAL_COLUMNS = ['method', 'mechanism', 'rate', 'count', 'nrmse_mean', 'nrmse_sd', 'replications', 'sd_flag']


# ================================
# SIMULATION DESIGN
# ================================


@dataclass(frozen=True)
class SimulationDesign:
    n: int = 1000
    p: int = 15
    r_spec: str = 'inverse-square'
    seed: int = 42

    def __post_init__(self):
        if self.p % BLOCKS or self.p < BLOCKS:
            raise ValueError(f"p must be a positive multiple of {BLOCKS}, got {self.p}")
        if self.n < 2:
            raise ValueError(f"n must be >= 2, got {self.n}")
        if self.r_spec != 'inverse-square':
            raise ValueError(f"Unknown correlation rule {self.r_spec!r}")

    @property
    def block(self):
        return self.p // BLOCKS

    def representative_columns(self):
        """First column of each block (rounded normal, uniform, exponential)."""
        return [0, self.block, 2 * self.block]


def true_correlation(p: int) -> np.ndarray:
    """R_ij = (|i - j| + 1)^-2."""
    idx = np.arange(p)
    return 1.0 / (np.abs(idx[:, None] - idx[None, :]) + 1.0) ** 2


@dataclass(frozen=True, eq=False)
class SimulationResult:
    dataset: MixedDataset
    true_r: np.ndarray
    design: SimulationDesign
    ordinal_offsets: Dict[int, int] = field(default_factory=dict)

    def true_cdf(self, j: int, x):
        """Population CDF of column j at x (in the dataset's coding)."""
        x = np.asarray(x, dtype=float)
        block = j // self.design.block
        if block == 0:
            # Category c codes the integer c + offset - 1 of round(Z)
            return ndtr(np.floor(x) + self.ordinal_offsets[j] - 1 + 0.5)
        if block == 1:
            return np.clip(x, 0.0, 1.0)
        return np.where(x > 0, -np.expm1(-np.maximum(x, 0.0)), 0.0)



def to_generating_scale(values, ordinal_offsets: Dict[int, int]) -> np.ndarray:
    """Undo the 1..levels shift of simulated ordinal columns (category c -> c + offset - 1)."""
    out = np.array(values, dtype=float, copy=True)
    for j, offset in ordinal_offsets.items():
        out[:, j] += offset - 1
    return out


def _round_half_up(x):
    return np.floor(np.asarray(x) + 0.5)


def simulate_dataset(design: SimulationDesign) -> SimulationResult:
    """Rows iid N(0, R); blocks of rounded-normal, uniform and Exp(1) columns."""
    rng = rng_handle(design.seed)
    r = true_correlation(design.p)
    z = rng.standard_normal((design.n, design.p)) @ cholesky(r, lower=True).T
    b = design.block

    values = np.empty_like(z)
    kinds, offsets = [], {}
    for j in range(design.p):
        if j < b:
            rounded = _round_half_up(z[:, j])
            low = int(rounded.min())
            values[:, j] = rounded - low + 1
            offsets[j] = low
            kinds.append(ColumnKind.ordinal(max(int(rounded.max()) - low + 1, 2)))
        elif j < 2 * b:
            values[:, j] = ndtr(z[:, j])
            kinds.append(ColumnKind.continuous())
        else:
            # F⁻¹_Exp(1)(Φ(z)) = -log(1 - Φ(z)) = -log Φ(-z)
            values[:, j] = -log_ndtr(-z[:, j])
            kinds.append(ColumnKind.continuous())

    dataset = MixedDataset(values, tuple(kinds), tuple(f"X{j + 1}" for j in range(design.p)))
    return SimulationResult(dataset=dataset, true_r=r, design=design, ordinal_offsets=offsets)


# ================================
# METRIC
# ================================


def nrmse(x_true, x_imputed, mask) -> float:
    """sqrt(mean((truth - imputed)²) / Var(truth)) over the evaluated cells.

    Var is the population (divide-by-m) variance of the true values at those
    cells, so imputing their own mean scores exactly 1.
    """
    x_true = np.asarray(x_true, dtype=float)
    x_imputed = np.asarray(x_imputed, dtype=float)
    mask = np.asarray(mask, dtype=bool)
    if x_true.shape != x_imputed.shape or mask.shape != x_true.shape:
        raise ValueError("Truth, imputation and mask must share one shape")
    if not mask.any():
        raise ValueError("NRMSE needs at least one evaluated cell")
    truth = x_true[mask]
    variance = truth.var()
    if variance == 0:
        raise NumericalError("Truth has zero variance at the evaluated cells")
    return float(np.sqrt(np.mean((truth - x_imputed[mask]) ** 2) / variance))


# ================================
# BASELINE IMPUTERS
# ================================


def _column_means(d: MixedDataset):
    means = np.empty(d.p)
    for j in range(d.p):
        observed = d.observed_values(j)
        if observed.size == 0:
            raise ValueError(f"Column '{d.names[j]}' has no observed values to average")
        means[j] = observed.mean()
    return means


def _fill_value(kind, value):
    if kind.is_ordinal:
        return float(np.clip(_round_half_up(value), 1, kind.levels))
    return float(value)


def impute_mean(d: MixedDataset) -> MixedDataset:
    """Observed column mean; ordinal columns take the rounded mean clamped to 1..levels."""
    means = _column_means(d)
    values = np.array(d.values, copy=True)
    for j, kind in enumerate(d.kinds):
        values[~d.mask[:, j], j] = _fill_value(kind, means[j])
    return d.with_values(values)


def _pairwise_distances(d: MixedDataset, means):
    sd = np.array([d.observed_values(j).std() for j in range(d.p)])
    scaled = np.where(d.mask, (d.values - means) / np.where(sd > 0, sd, 1.0), np.nan)
    # Rows with no shared observed column come back NaN: never neighbours
    dist = nan_euclidean_distances(scaled)
    dist[np.isnan(dist)] = np.inf
    np.fill_diagonal(dist, np.inf)
    return dist


def impute_knn(d: MixedDataset, k: int = 5) -> MixedDataset:
    """k-nearest-neighbour imputation over standardized shared columns.

    Neighbour distance is the Euclidean distance over columns both rows
    observe, scaled by sqrt(p / #shared). Ties in distance go to the lower
    row index; ordinal ties in the vote go to the smaller category.
    """
    if not 1 <= k <= d.n - 1:
        raise ValueError(f"k must lie in 1..{d.n - 1}, got {k}")
    means = _column_means(d)
    values = np.array(d.values, copy=True)
    if d.n_missing() == 0:
        return d.with_values(values)
    dist = _pairwise_distances(d, means)

    for i in np.nonzero((~d.mask).any(axis=1))[0]:
        for j in np.nonzero(~d.mask[i])[0]:
            kind = d.kinds[j]
            candidates = np.nonzero(d.mask[:, j] & np.isfinite(dist[i]))[0]
            if candidates.size == 0:
                values[i, j] = _fill_value(kind, means[j])
                continue
            nearest = candidates[np.argsort(dist[i, candidates], kind='stable')[:k]]
            neighbours = d.values[nearest, j]
            if kind.is_ordinal:
                votes = np.bincount(neighbours.astype(int), minlength=kind.levels + 1)
                values[i, j] = float(np.argmax(votes))
            else:
                values[i, j] = float(neighbours.mean())
    return d.with_values(values)


# ================================
# BENCHMARK
# ================================


@dataclass
class EvalReport:
    method: str
    mechanism: str
    rate: Optional[float]
    count: Optional[int]
    nrmse_mean: float
    nrmse_sd: float
    replications: int
    runtime_mean: float
    sd_flag: bool = False
    nrmse_values: List[float] = field(default_factory=list)

    @property
    def level_label(self):
        return f"{self.rate:.0%}" if self.rate is not None else f"n={self.count}"


def _load_truth(job):
    """Complete data of one replication and the ordinal offsets of its coding."""
    source = job['input']
    if source is None:
        design = SimulationDesign(**job['design'], seed=job['base_seed'] + job['replication'])
        sim = simulate_dataset(design)
        return sim.dataset, sim.ordinal_offsets
    schema = [parse_kind(token) for token in source['schema']]
    return read_csv(source['path'], schema, source.get('missing_token', 'NA')), {}


def run_replication(job: dict) -> dict:
    """One (mechanism, level, replication) cell of the benchmark for every method.

    `job` is a plain JSON-able dict so Celery workers, process pools and the
    serial path all run the same code.
    """
    truth, offsets = _load_truth(job)
    r = job['replication']
    spec = MissingnessSpec(
        mechanism=job['mechanism'],
        rate=job.get('rate'),
        count=job.get('count'),
        anchor_columns=tuple(job.get('anchors') or ()),
        seed=job['base_seed'] + AMPUTATION_SEED_OFFSET + r,
        beta=job.get('beta', 1.0),
    )
    amputed = ampute(truth, spec)
    scored = newly_masked(truth, amputed)

    results = {}
    for method in job['methods']:
        started = time.perf_counter()
        if method == 'mean':
            imputed = impute_mean(amputed).values
        elif method == 'knn':
            imputed = impute_knn(amputed, job.get('knn_k', 5)).values
        elif method == 'bbgc':
            cfg = ChainConfig(**job.get('chain', {}), seed=job['base_seed'] + SAMPLER_SEED_OFFSET + r)
            imputed = run_bbgc(amputed, cfg).point_values(amputed, job.get('ordinal_point', 'mode'))
        else:
            raise ValueError(f"Unknown method {method!r}; choose from {METHODS}")
        results[method] = {
            'nrmse': nrmse(to_generating_scale(truth.values, offsets), to_generating_scale(imputed, offsets), scored),
            'seconds': time.perf_counter() - started,
        }
    logger.info(
        f"Replication {r} ({job['mechanism']}, {job.get('rate') or job.get('count')}): "
        + ', '.join(f"{m}={v['nrmse']:.4f}" for m, v in results.items()))
    return {
        'replication': r,
        'mechanism': job['mechanism'],
        'rate': job.get('rate'),
        'count': job.get('count'),
        'results': results,
    }


def build_jobs(mechanisms: Sequence[str], levels: Sequence[dict], methods: Sequence[str],
               replications: int, base_seed: int, design: Optional[SimulationDesign] = None,
               input_source: Optional[dict] = None, anchors: Optional[Sequence[int]] = None,
               chain: Optional[dict] = None, knn_k: int = 5, beta: float = 1.0,
               ordinal_point: str = 'mode') -> List[dict]:
    """Cartesian product mechanism × level × replication as JSON-able jobs.

    Each level is {'rate': r} or {'count': c}.
    """
    unknown = [m for m in methods if m not in METHODS]
    if unknown:
        raise ValueError(f"Unknown methods {unknown}; choose from {METHODS}")
    if replications < 1:
        raise ValueError("replications must be >= 1")
    if ordinal_point not in ORDINAL_POINT_RULES:
        raise ValueError(f"Unknown ordinal point rule {ordinal_point!r}; choose from {ORDINAL_POINT_RULES}")
    if (design is None) == (input_source is None):
        raise ValueError("Give exactly one of a simulation design or a CSV input")
    if anchors is None:
        anchors = default_anchors(design.p, BLOCKS) if design is not None else (0,)
    jobs = []
    for mechanism in mechanisms:
        for level in levels:
            for r in range(replications):
                jobs.append({
                    'replication': r,
                    'base_seed': base_seed,
                    'mechanism': mechanism,
                    'rate': level.get('rate'),
                    'count': level.get('count'),
                    'anchors': list(anchors),
                    'beta': beta,
                    'methods': list(methods),
                    'knn_k': knn_k,
                    'chain': dict(chain or {}),
                    'ordinal_point': ordinal_point,
                    'design': None if design is None else {'n': design.n, 'p': design.p},
                    'input': input_source,
                })
    return jobs


def aggregate(outcomes: Sequence[dict], methods: Sequence[str]) -> List[EvalReport]:
    """Fold replication outcomes into one EvalReport per design cell, in job order."""
    cells: Dict[tuple, List[dict]] = {}
    for outcome in outcomes:
        key = (outcome['mechanism'], outcome['rate'], outcome['count'])
        cells.setdefault(key, []).append(outcome)
    reports = []
    for (mechanism, rate, count), group in cells.items():
        for method in methods:
            scores = np.array([o['results'][method]['nrmse'] for o in group])
            seconds = np.array([o['results'][method]['seconds'] for o in group])
            single = scores.size == 1
            reports.append(EvalReport(
                method=method,
                mechanism=mechanism,
                rate=rate,
                count=count,
                nrmse_mean=float(scores.mean()),
                nrmse_sd=0.0 if single else float(scores.std(ddof=1)),
                replications=int(scores.size),
                runtime_mean=float(seconds.mean()),
                sd_flag=single,
                nrmse_values=[float(s) for s in scores],
            ))
    return reports


def run_benchmark(jobs: Sequence[dict], map_fn: Callable = map) -> List[EvalReport]:
    """Run every job through `map_fn` (order preserving) and aggregate."""
    if not jobs:
        return []
    outcomes = list(map_fn(run_replication, jobs))
    return aggregate(outcomes, jobs[0]['methods'])


def format_table(reports: Sequence[EvalReport]) -> str:
    """Method rows × (mechanism, level) columns with 'mean (sd)' cells."""
    columns, methods, cells = [], [], {}
    for rep in reports:
        column = (rep.mechanism.upper(), rep.level_label)
        if column not in columns:
            columns.append(column)
        if rep.method not in methods:
            methods.append(rep.method)
        cells[(rep.method, column)] = f"{rep.nrmse_mean:.3f} ({rep.nrmse_sd:.3f})"
    width = max([len(v) for v in cells.values()] + [12])
    header = 'Method'.ljust(8) + ''.join(f"{m} {lvl}".rjust(width + 2) for m, lvl in columns)
    lines = [header, '-' * len(header)]
    for method in methods:
        row = method.upper().ljust(8)
        row += ''.join(cells.get((method, c), '-').rjust(width + 2) for c in columns)
        lines.append(row)
    return '\n'.join(lines)


# ================================
# MARGINAL COVERAGE
# ================================


@dataclass
class CoverageResult:
    column: int
    name: str
    coverage: float
    n_observed: int
    band: CredibleBand
    true_cdf: np.ndarray


def coverage_experiment(design: SimulationDesign, rate: float, n_bb_draws: int, level: float,
                        columns: Optional[Sequence[int]] = None) -> List[CoverageResult]:
    """Share of observed cells whose true F_j(x) falls in the pointwise band of F̃_j."""
    sim = simulate_dataset(design)
    amputed = ampute(sim.dataset, MissingnessSpec(
        mechanism=MCAR, rate=rate, seed=design.seed + AMPUTATION_SEED_OFFSET))
    columns = list(columns) if columns is not None else design.representative_columns()

    results = []
    for j in columns:
        if not 0 <= j < design.p:
            raise ValueError(f"Column {j} out of range for p={design.p}")
        observed = amputed.observed_values(j)
        band = credible_band(rng_handle(design.seed + SAMPLER_SEED_OFFSET, j), observed, n_bb_draws, level)
        lower, upper = band.at(observed)
        truth = sim.true_cdf(j, observed)
        covered = (lower <= truth) & (truth <= upper)
        results.append(CoverageResult(
            column=j,
            name=amputed.names[j],
            coverage=float(covered.mean()),
            n_observed=int(observed.size),
            band=band,
            true_cdf=np.asarray(sim.true_cdf(j, band.t), dtype=float),
        ))
        logger.info(f"Coverage {amputed.names[j]}: {covered.mean():.3f} ({observed.size} observed)")
    return results


# ================================
# CSV OUTPUT
# ================================


def _fmt(value):
    # Shortest repr that round-trips
    return '' if value is None else repr(float(value))


def write_eval_csv(reports: Sequence[EvalReport], path) -> None:
    """One row per design cell. Runtimes stay out so reruns are byte-identical."""
    frame = pd.DataFrame([{
        'method': rep.method,
        'mechanism': rep.mechanism,
        'rate': _fmt(rep.rate),
        'count': '' if rep.count is None else str(rep.count),
        'nrmse_mean': _fmt(rep.nrmse_mean),
        'nrmse_sd': _fmt(rep.nrmse_sd),
        'replications': rep.replications,
        'sd_flag': int(rep.sd_flag),
    } for rep in reports], columns=EVAL_COLUMNS)
    frame.to_csv(path, index=False, lineterminator='\n')


def write_coverage_csv(results: Sequence[CoverageResult], level: float, path) -> None:
    frame = pd.DataFrame([{
        'column': res.column,
        'name': res.name,
        'level': _fmt(level),
        'coverage': _fmt(res.coverage),
        'n_observed': res.n_observed,
    } for res in results], columns=['column', 'name', 'level', 'coverage', 'n_observed'])
    frame.to_csv(path, index=False, lineterminator='\n')


def write_band_csv(result: CoverageResult, path) -> None:
    """Grid, band limits, adjusted ECDF and true CDF, under a `# level=` header line."""
    band = result.band
    frame = pd.DataFrame({
        't': [_fmt(v) for v in band.t],
        'lower': [_fmt(v) for v in band.lower],
        'upper': [_fmt(v) for v in band.upper],
        'ecdf': [_fmt(v) for v in band.ecdf],
        'true_cdf': [_fmt(v) for v in result.true_cdf],
    })
    with open(path, 'w', encoding='utf-8', newline='') as handle:
        handle.write(f"# level={band.level} column={result.name}\n")
        frame.to_csv(handle, index=False, lineterminator='\n')
