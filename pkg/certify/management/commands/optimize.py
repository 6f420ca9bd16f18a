from certify.constants import OPTIMIZABLE_BOUNDS, OPTIMIZE_RUN
from certify.decorators import command_error_handler
from certify.experiments.serializers import OptimizeConfigSerializer
from certify.experiments.service import provenance, restore_split, run_optimize
from certify.experiments.tables import optimize_table
from certify.forest.document import load_ensemble
from certify.management.base import CertifyCommand
from certify.management.commands.bounds import data_label


class Command(CertifyCommand):
    help = "Minimize FO, TND or DIS over the weights of a trained ensemble and compare the test losses."
    config_serializer = OptimizeConfigSerializer

    def add_arguments(self, parser):
        self.add_dataset_arguments(parser)
        parser.add_argument('--ensemble', help='Ensemble document (default: <out>/ensemble.json).')
        parser.add_argument('--delta', type=float, help='Confidence parameter.')
        parser.add_argument('--optimize', nargs='+', choices=OPTIMIZABLE_BOUNDS, help='Bounds to minimize (default: FO TND).')
        self.add_bounds_argument(parser)
        self.add_output_arguments(parser)

    @command_error_handler
    def handle(self, *args, **options):
        out = self.output_dir(options)
        options['ensemble'] = options.get('ensemble') or str(out / "ensemble.json")
        config = self.validated_config(options)
        data = self.load_dataset(config)
        ensemble, metadata = load_ensemble(config['ensemble'])
        train, test = restore_split(data, ensemble, metadata)

        info = provenance(data, ensemble, config)
        document = self.jsonable(
            run_optimize(ensemble, train, test, config['delta'], config['optimize'], bounds=config.get('bounds'),
                         provenance_info=info)
        )
        self.write_outputs(out, "optimize", document, optimize_table(document, label=data_label(config)))
        self.record(options, OPTIMIZE_RUN, config, document, info['dataset_hash'], info['ensemble_hash'])
