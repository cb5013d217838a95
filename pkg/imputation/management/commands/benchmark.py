from pathlib import Path

from django.conf import settings

from imputation.baselines_eval import aggregate, build_jobs, format_table, run_replication, write_eval_csv
from imputation.cli import (
    CHAIN_OPTIONS, INPUT_OPTIONS, BaseBBGCCommand, Option, add_chain_arguments, add_input_arguments,
    chain_data, default_anchor_columns, float_list, from_settings, int_list, str_list, write_report,
)
from imputation.data_model import parse_schema_flag, read_schema
from imputation.serializers import (
    BenchmarkRequestSerializer, ChainConfigSerializer, EvalReportSerializer, SimulationDesignSerializer,
)
from imputation.tasks import dispatch, run_replication_task


class Command(BaseBBGCCommand):
    help = 'Replicated NRMSE benchmark over mechanism x rate x method, on simulated data or a CSV'

    options_spec = {
        **INPUT_OPTIONS,
        **CHAIN_OPTIONS,
        'n': Option('N', 1000, int),
        'p': Option('P', 15, int),
        'mechanisms': Option('MECHANISMS', ['mcar'], str_list),
        'rates': Option('RATES', None, float_list),
        'counts': Option('COUNTS', None, int_list),
        'methods': Option('METHODS', ['bbgc', 'mean', 'knn'], str_list),
        'reps': Option('REPS', 10, int),
        'anchors': Option('ANCHORS', None, int_list),
        'beta': Option('BETA', 1.0, float),
        'knn_k': Option('KNN_K', from_settings('KNN_K'), int),
        'ordinal_point': Option('ORDINAL_POINT', 'mode', str),
    }

    def add_command_arguments(self, parser):
        add_input_arguments(parser, required=False)
        add_chain_arguments(parser)
        parser.add_argument('--n', type=int, help='Simulated rows (default 1000)')
        parser.add_argument('--p', type=int, help='Simulated columns, a multiple of 3 (default 15)')
        parser.add_argument('--mechanisms', type=str_list, help='e.g. mcar,mar')
        parser.add_argument('--rates', type=float_list, help='e.g. 0.1,0.3,0.5,0.7')
        parser.add_argument('--counts', type=int_list, help='Extra cells to mask, e.g. 50,100,150')
        parser.add_argument('--methods', type=str_list, help='Subset of bbgc,mean,knn')
        parser.add_argument('--reps', type=int, help='Replications per design cell')
        parser.add_argument('--anchors', type=int_list, help='MAR anchor columns, 0-based')
        parser.add_argument('--beta', type=float, help='MAR logistic slope')
        parser.add_argument('--knn-k', dest='knn_k', type=int)
        parser.add_argument('--ordinal-point', dest='ordinal_point', choices=['mode', 'mean'],
                            help='BBGC point for ordinal cells: modal or frequency-weighted mean category')
        parser.add_argument('--out', required=True, help='Report CSV path')
        parser.add_argument('--table-out', dest='table_out', help='Also write the text table here')
        parser.add_argument('--report', help='JSON report path (includes runtimes)')

    def run(self, effective, options):
        request = self.validated(BenchmarkRequestSerializer, {
            'mechanisms': effective['mechanisms'],
            'rates': effective['rates'] or [],
            'counts': effective['counts'] or [],
            'methods': effective['methods'],
            'replications': effective['reps'],
            'threads': effective['threads'],
            'knn_k': effective['knn_k'],
            'ordinal_point': effective['ordinal_point'],
        }).validated_data

        chain = None
        if 'bbgc' in request['methods']:
            chain = dict(self.validated(ChainConfigSerializer, chain_data(effective)).validated_data)
            for key in ('seed', 'keep_samples', 'prior_nu0'):
                chain.pop(key, None)

        design, source, anchors = None, None, effective['anchors']
        if options['input']:
            # Validates the file and schema up front, before any job is queued
            dataset = self.load_input(options, effective)
            kinds = ([spec.kind for spec in read_schema(options['schema'])] if options['schema']
                     else parse_schema_flag(options['kinds']))
            source = {
                'path': str(Path(options['input']).resolve()),
                'schema': [kind.token() for kind in kinds],
                'missing_token': effective['missing_token'],
            }
            if anchors is None:
                anchors = default_anchor_columns(dataset.p)
        else:
            design = self.validated(SimulationDesignSerializer, {
                'n': effective['n'], 'p': effective['p'], 'seed': effective['seed'],
            }).save()

        jobs = build_jobs(
            mechanisms=request['mechanisms'],
            levels=request['levels'],
            methods=request['methods'],
            replications=request['replications'],
            base_seed=effective['seed'],
            design=design,
            input_source=source,
            anchors=anchors,
            chain=chain,
            knn_k=request['knn_k'],
            beta=effective['beta'],
            ordinal_point=request['ordinal_point'],
        )
        self.stdout.write(f"Running {len(jobs)} replications on {request['threads']} worker(s)...")
        outcomes = dispatch(run_replication, jobs, request['threads'], task=run_replication_task)
        reports = aggregate(outcomes, request['methods'])

        write_eval_csv(reports, options['out'])
        table = format_table(reports)
        if options['table_out']:
            Path(options['table_out']).write_text(table + '\n', encoding='utf-8')
        if options['report']:
            write_report(options['report'], {
                'command': 'benchmark',
                'config': effective,
                'celery': bool(settings.BBGC.get('USE_CELERY')),
                'reports': EvalReportSerializer(reports, many=True).data,
            })
        self.stdout.write(table)
        self.stdout.write(self.style.SUCCESS(f"{len(reports)} report rows -> {options['out']}"))
