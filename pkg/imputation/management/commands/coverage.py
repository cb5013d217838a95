from pathlib import Path

from imputation.baselines_eval import coverage_experiment, write_band_csv, write_coverage_csv
from imputation.cli import BaseBBGCCommand, Option, from_settings, int_list, write_report
from imputation.serializers import CoverageRequestSerializer, CoverageResultSerializer, SimulationDesignSerializer


class Command(BaseBBGCCommand):
    help = 'Coverage of the pointwise credible bands of the Bayesian-bootstrap marginals on simulated data'

    options_spec = {
        'n': Option('N', 1000, int),
        'p': Option('P', 15, int),
        'rate': Option('RATE', 0.5, float),
        'level': Option('COVERAGE_LEVEL', from_settings('COVERAGE_LEVEL'), float),
        'draws': Option('COVERAGE_DRAWS', from_settings('COVERAGE_DRAWS'), int),
        'columns': Option('COLUMNS', None, int_list),
    }

    def add_command_arguments(self, parser):
        parser.add_argument('--n', type=int, help='Simulated rows (default 1000)')
        parser.add_argument('--p', type=int, help='Simulated columns, a multiple of 3 (default 15)')
        parser.add_argument('--rate', type=float, help='MCAR rate applied before fitting (default 0.5)')
        parser.add_argument('--level', type=float, help='Credible level (default 0.99)')
        parser.add_argument('--draws', type=int, help='Bayesian-bootstrap draws per band (>= 100)')
        parser.add_argument('--columns', type=int_list, help='0-based columns (default: first of each block)')
        parser.add_argument('--out', required=True, help='Coverage CSV path')
        parser.add_argument('--bands-dir', dest='bands_dir', help='Directory for band_<column>.csv files')
        parser.add_argument('--report', help='JSON report path')

    def run(self, effective, options):
        design = self.validated(SimulationDesignSerializer, {
            'n': effective['n'], 'p': effective['p'], 'seed': effective['seed'],
        }).save()
        request = self.validated(CoverageRequestSerializer, {
            'rate': effective['rate'],
            'level': effective['level'],
            'n_draws': effective['draws'],
            'columns': effective['columns'],
        }).validated_data

        results = coverage_experiment(design, request['rate'], request['n_draws'], request['level'],
                                      request.get('columns'))

        out = Path(options['out'])
        bands_dir = Path(options['bands_dir']) if options['bands_dir'] else out.parent
        bands_dir.mkdir(parents=True, exist_ok=True)
        write_coverage_csv(results, request['level'], out)
        for result in results:
            write_band_csv(result, bands_dir / f"band_{result.name}.csv")

        if options['report']:
            write_report(options['report'], {
                'command': 'coverage',
                'config': effective,
                'level': request['level'],
                'results': CoverageResultSerializer(results, many=True).data,
            })
        self.stdout.write(f"Coverage at level {request['level']} ({design.n}x{design.p}, MCAR {request['rate']:.0%})")
        for result in results:
            self.stdout.write(f"  {result.name}: {result.coverage:.3f} over {result.n_observed} observed cells")
        self.stdout.write(self.style.SUCCESS(f"{len(results)} bands -> {bands_dir}"))
