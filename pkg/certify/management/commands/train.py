from certify.constants import BAGGING_MODES, TRAIN_RUN
from certify.decorators import command_error_handler
from certify.experiments.serializers import TrainConfigSerializer
from certify.experiments.service import run_train
from certify.forest.document import ensemble_hash, save_ensemble
from certify.management.base import CertifyCommand


class Command(CertifyCommand):
    help = "Split a dataset, train a bagged forest on the training part and write ensemble.json."
    config_serializer = TrainConfigSerializer

    def add_arguments(self, parser):
        self.add_dataset_arguments(parser)
        parser.add_argument('--trees', type=int, help='Number of trees M.')
        parser.add_argument('--bagging', choices=BAGGING_MODES, help='full (n draws) or reduced (n/2 draws).')
        parser.add_argument('--seed', type=int, help='Master seed of the split and the forest.')
        parser.add_argument('--test-fraction', type=float, help='Share of each class held out for testing.')
        parser.add_argument('--max-features', type=int, help='Features evaluated per split (default: ceil(sqrt(d))).')
        parser.add_argument('--workers', type=int, help='Training processes.')
        self.add_output_arguments(parser)

    @command_error_handler
    def handle(self, *args, **options):
        config = self.validated_config(options)
        data = self.load_dataset(config)
        ensemble, metadata, train, _ = run_train(
            data,
            config['trees'],
            bagging=config['bagging'],
            seed=config['seed'],
            test_fraction=config['test_fraction'],
            max_features=config.get('max_features'),
            workers=config['workers'],
        )
        out = self.output_dir(options)
        path = save_ensemble(ensemble, out / "ensemble.json", metadata)
        digest = ensemble_hash(ensemble)
        self.stdout.write(
            f"Trained {ensemble.size} trees on {train.n_samples} samples "
            f"({ensemble.bagging_mode} bagging); ensemble {digest[:12]}"
        )
        self.stdout.write(self.style.SUCCESS(f"Wrote {path}"))
        summary = {
            "ensemble": str(path),
            "oob_sizes": ensemble.oob_masks.sum(axis=1),
            "node_counts": [tree.node_count for tree in ensemble.trees],
            "metadata": metadata,
        }
        self.record(options, TRAIN_RUN, config, summary, dataset_hash=ensemble.dataset_hash, ensemble_hash=digest)
