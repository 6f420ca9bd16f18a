from certify.constants import BAGGING_MODES, EXPERIMENT_RUN, OPTIMIZABLE_BOUNDS
from certify.decorators import command_error_handler
from certify.experiments.serializers import ExperimentConfigSerializer
from certify.experiments.service import run_experiment
from certify.experiments.tables import experiment_table
from certify.management.base import CertifyCommand


class Command(CertifyCommand):
    help = "Repeat split, training, certification and optimization over derived seeds and report mean (std)."
    config_serializer = ExperimentConfigSerializer

    def add_arguments(self, parser):
        self.add_dataset_arguments(parser)
        parser.add_argument('--trees', type=int, help='Number of trees M.')
        parser.add_argument('--bagging', nargs='+', choices=BAGGING_MODES, help='Bagging modes to compare.')
        parser.add_argument('--delta', type=float, help='Confidence parameter.')
        parser.add_argument('--seed', type=int, help='Master seed; repetition seeds derive from it.')
        parser.add_argument('--reps', type=int, help='Number of repetitions.')
        self.add_bounds_argument(parser)
        parser.add_argument('--optimize', nargs='+', choices=OPTIMIZABLE_BOUNDS, help='Bounds to minimize.')
        parser.add_argument(
            '--unlabeled-r', nargs='+', type=float,
            help='Labeled fractions of the training part; the rest is used unlabeled for DIS.',
        )
        parser.add_argument('--test-fraction', type=float, help='Share of each class held out for testing.')
        parser.add_argument('--max-features', type=int, help='Features evaluated per split.')
        parser.add_argument('--workers', type=int, help='Repetitions run in parallel.')
        self.add_output_arguments(parser)

    @command_error_handler
    def handle(self, *args, **options):
        config = self.validated_config(options)
        data = self.load_dataset(config)
        document = self.jsonable(
            run_experiment(
                data,
                config['trees'],
                reps=config['reps'],
                seed=config['seed'],
                bagging=config['bagging'],
                labeled_fractions=config['unlabeled_r'],
                delta=config['delta'],
                bounds=config.get('bounds'),
                optimize=config['optimize'],
                test_fraction=config['test_fraction'],
                max_features=config.get('max_features'),
                workers=config['workers'],
            )
        )
        out = self.output_dir(options)
        self.write_outputs(out, "experiment", document, experiment_table(document))
        self.record(options, EXPERIMENT_RUN, config, document, document['provenance']['dataset_hash'])
