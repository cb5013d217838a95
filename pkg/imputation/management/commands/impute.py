import time

import numpy as np
import pandas as pd

from imputation.baselines_eval import METHODS, impute_knn, impute_mean, nrmse
from imputation.cli import (
    CHAIN_OPTIONS, INPUT_OPTIONS, BaseBBGCCommand, Option, add_chain_arguments, add_input_arguments,
    chain_data, from_settings, write_report,
)
from imputation.copula_gibbs import run_bbgc
from imputation.data_model import read_csv, write_csv
from imputation.serializers import ChainConfigSerializer
from imputation.tasks import pool_map


def write_samples_csv(summary, d, path):
    """Long format: one row per (missing cell, retained draw)."""
    cells = summary.missing_cells
    draws = summary.samples.shape[0]
    frame = pd.DataFrame({
        'row': np.repeat(cells[:, 0], draws),
        'column': np.repeat([d.names[j] for j in cells[:, 1]], draws),
        'draw': np.tile(np.arange(draws), len(cells)),
        'value': [format(v, '.17g') for v in summary.samples.T.ravel()],
    })
    frame.to_csv(path, index=False, lineterminator='\n')


class Command(BaseBBGCCommand):
    help = 'Impute the missing cells of a mixed CSV with BBGC, column means or k-nearest neighbours'

    options_spec = {
        **INPUT_OPTIONS,
        **CHAIN_OPTIONS,
        'method': Option('METHOD', 'bbgc', lambda v: v.strip().lower()),
        'knn_k': Option('KNN_K', from_settings('KNN_K'), int),
        'prior_nu0': Option('PRIOR_NU0', None, float),
    }

    def add_command_arguments(self, parser):
        add_input_arguments(parser)
        add_chain_arguments(parser)
        parser.add_argument('--method', type=str.lower, choices=METHODS)
        parser.add_argument('--knn-k', dest='knn_k', type=int, help='Neighbours for --method knn')
        parser.add_argument('--prior-nu0', dest='prior_nu0', type=float,
                            help='Inverse-Wishart degrees of freedom (default p + 2)')
        parser.add_argument('--out', required=True, help='Imputed CSV path')
        parser.add_argument('--truth', help='Complete CSV (same schema) to score the imputation against')
        parser.add_argument('--samples-out', dest='samples_out', help='Long CSV of every retained BBGC draw')
        parser.add_argument('--report', help='JSON report path')

    def run(self, effective, options):
        dataset = self.load_input(options, effective)
        method = effective['method']
        if method not in METHODS:
            self.usage_error(f"Unknown method {method!r}; choose from {', '.join(METHODS)}")

        report = {
            'command': 'impute',
            'input': options['input'],
            'n': dataset.n,
            'p': dataset.p,
            'n_missing': dataset.n_missing(),
            'method': method,
            'config': effective,
        }
        started = time.perf_counter()
        if method == 'bbgc':
            cfg = self.validated(ChainConfigSerializer, {
                **chain_data(effective),
                'keep_samples': bool(options['samples_out']),
                'prior_nu0': effective['prior_nu0'],
            }, p=dataset.p).save()
            summary = run_bbgc(dataset, cfg, map_fn=pool_map(effective['threads']))
            imputed = summary.imputed_dataset(dataset)
            report['chain_config'] = cfg.echo()
            report['retained_draws'] = summary.retained
            report['posterior_mean_r'] = summary.r_mean
            report['constant_columns'] = {dataset.names[j]: v for j, v in summary.constant_columns.items()}
            report['chains'] = summary.diagnostics
            if options['samples_out']:
                write_samples_csv(summary, dataset, options['samples_out'])
        elif method == 'mean':
            imputed = impute_mean(dataset)
        else:
            imputed = impute_knn(dataset, effective['knn_k'])
        report['runtime_seconds'] = time.perf_counter() - started

        write_csv(imputed, options['out'], effective['missing_token'])

        if options['truth']:
            truth = read_csv(options['truth'], list(dataset.kinds), effective['missing_token'])
            if truth.values.shape != dataset.values.shape:
                raise ValueError(f"Truth is {truth.n}x{truth.p}, input is {dataset.n}x{dataset.p}")
            scored = ~dataset.mask & truth.mask
            report['nrmse'] = nrmse(truth.values, imputed.values, scored)
            report['scored_cells'] = int(scored.sum())

        if options['report']:
            write_report(options['report'], report)
        line = f"{method.upper()}: imputed {dataset.n_missing()} cells -> {options['out']}"
        if 'nrmse' in report:
            line += f" (NRMSE {report['nrmse']:.4f})"
        self.stdout.write(self.style.SUCCESS(line))
