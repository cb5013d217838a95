from imputation.cli import INPUT_OPTIONS, BaseBBGCCommand, Option, add_input_arguments, default_anchor_columns, int_list
from imputation.data_model import write_csv, write_mask_csv
from imputation.missingness import ampute, newly_masked
from imputation.serializers import MissingnessSpecSerializer


class Command(BaseBBGCCommand):
    help = 'Impose MCAR or MAR missingness on a CSV (only observed cells are candidates)'

    options_spec = {
        **INPUT_OPTIONS,
        'mechanism': Option('MECHANISM', 'mcar', lambda v: v.strip().lower()),
        'rate': Option('RATE', None, float),
        'count': Option('COUNT', None, int),
        'anchors': Option('ANCHORS', None, int_list),
        'beta': Option('BETA', 1.0, float),
    }

    def add_command_arguments(self, parser):
        add_input_arguments(parser)
        parser.add_argument('--mechanism', type=str.lower, choices=['mcar', 'mar'])
        parser.add_argument('--rate', type=float, help='Share of all n*p cells to mask')
        parser.add_argument('--count', type=int, help='Exact number of extra cells to mask')
        parser.add_argument('--anchors', type=int_list, help='MAR anchor columns, 0-based (e.g. 0,5,10)')
        parser.add_argument('--beta', type=float, help='MAR logistic slope')
        parser.add_argument('--out', required=True, help='Amputed CSV path')
        parser.add_argument('--mask-out', dest='mask_out', help='Write the 0/1 observed mask here')

    def run(self, effective, options):
        dataset = self.load_input(options, effective)
        anchors = effective['anchors'] if effective['anchors'] is not None else default_anchor_columns(dataset.p)
        spec = self.validated(MissingnessSpecSerializer, {
            'mechanism': effective['mechanism'],
            'rate': effective['rate'],
            'count': effective['count'],
            'anchor_columns': list(anchors) if effective['mechanism'] == 'mar' else [],
            'seed': effective['seed'],
            'beta': effective['beta'],
        }, p=dataset.p).save()

        amputed = ampute(dataset, spec)
        write_csv(amputed, options['out'], effective['missing_token'])
        if options['mask_out']:
            write_mask_csv(amputed, options['mask_out'])

        masked = int(newly_masked(dataset, amputed).sum())
        self.stdout.write(self.style.SUCCESS(
            f"{spec.mechanism.upper()}: masked {masked} cells "
            f"({masked / (dataset.n * dataset.p):.1%} of {dataset.n}x{dataset.p}) -> {options['out']}"))
