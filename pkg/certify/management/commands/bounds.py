from certify.constants import BOUNDS_RUN, KL_FORM, LAMBDA_FORM
from certify.decorators import command_error_handler
from certify.experiments.serializers import BoundsConfigSerializer
from certify.experiments.service import provenance, restore_split, run_bounds
from certify.experiments.tables import bounds_table
from certify.forest.document import load_ensemble
from certify.management.base import CertifyCommand


class Command(CertifyCommand):
    help = "Certify the uniform majority vote of a trained ensemble with the requested bounds."
    config_serializer = BoundsConfigSerializer

    def add_arguments(self, parser):
        self.add_dataset_arguments(parser)
        parser.add_argument('--ensemble', help='Ensemble document (default: <out>/ensemble.json).')
        parser.add_argument('--delta', type=float, help='Confidence parameter.')
        self.add_bounds_argument(parser)
        parser.add_argument('--form', choices=[KL_FORM, LAMBDA_FORM], help='PAC-Bayes-kl (default) or lambda form.')
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
            run_bounds(ensemble, train, test, config['delta'], bounds=config.get('bounds'), form=config['form'],
                       provenance_info=info)
        )
        self.write_outputs(out, "bounds", document, bounds_table(document, label=data_label(config)))
        self.record(options, BOUNDS_RUN, config, document, info['dataset_hash'], info['ensemble_hash'])


def data_label(config) -> str:
    return config['dataset'].replace("\\", "/").rsplit("/", 1)[-1]
