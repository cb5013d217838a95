from pathlib import Path

from imputation.baselines_eval import simulate_dataset
from imputation.cli import BaseBBGCCommand, Option
from imputation.data_model import write_csv, write_matrix_csv, write_schema
from imputation.serializers import SimulationDesignSerializer


class Command(BaseBBGCCommand):
    help = 'Generate the three-block mixed dataset: data CSV, schema file and true correlation matrix'

    options_spec = {
        'n': Option('N', 1000, int),
        'p': Option('P', 15, int),
    }

    def add_command_arguments(self, parser):
        parser.add_argument('--n', type=int, help='Rows (default 1000)')
        parser.add_argument('--p', type=int, help='Columns, a multiple of 3 (default 15)')
        parser.add_argument('--out', required=True, help='Data CSV path')
        parser.add_argument('--schema-out', dest='schema_out', help='Schema path (default <out>.schema.txt)')
        parser.add_argument('--r-out', dest='r_out', help='Correlation CSV path (default <out>.R.csv)')

    def run(self, effective, options):
        design = self.validated(SimulationDesignSerializer, {
            'n': effective['n'],
            'p': effective['p'],
            'seed': effective['seed'],
        }).save()
        sim = simulate_dataset(design)

        out = Path(options['out'])
        schema_out = options['schema_out'] or out.with_suffix('.schema.txt')
        r_out = options['r_out'] or out.with_suffix('.R.csv')
        write_csv(sim.dataset, out)
        write_schema(sim.dataset, schema_out)
        write_matrix_csv(sim.true_r, r_out, sim.dataset.names)

        self.stdout.write(self.style.SUCCESS(
            f"Simulated {design.n}x{design.p} (seed {design.seed}) -> {out}, {schema_out}, {r_out}"))
