import logging
from pathlib import Path

from django.conf import settings
from django.core.management.base import BaseCommand

from certify.constants import ALL_BOUNDS, DATASET_FORMATS, LIBSVM_FORMAT
from certify.data.service import load_dataset
from certify.exceptions import SerializerValidationError
from certify.runs.service import record_run
from certify.utils import to_jsonable, write_json

logger = logging.getLogger('mvcert')


class CertifyCommand(BaseCommand):
    """
    Shared plumbing of the certify commands: dataset flags, option
    validation through a serializer, output files and run recording.
    """
    config_serializer = None

    def add_dataset_arguments(self, parser):
        parser.add_argument('--dataset', required=True, help='Path of the dataset file.')
        parser.add_argument('--format', choices=DATASET_FORMATS, default=LIBSVM_FORMAT, help='Dataset format.')
        parser.add_argument('--label-column', type=int, help='Label column of CSV input (default: last).')

    def add_output_arguments(self, parser):
        parser.add_argument('--out', help='Output directory (default: settings.MVCERT["OUTPUT_DIR"]).')
        parser.add_argument('--record', action='store_true', help='Store the run in the database.')

    def add_bounds_argument(self, parser):
        parser.add_argument('--bounds', nargs='+', choices=ALL_BOUNDS, help='Bounds to report (default: all applicable).')

    def validated_config(self, options) -> dict:
        """Runs the options through ``config_serializer``; unset flags fall back to its defaults."""
        data = {key: value for key, value in options.items() if value is not None}
        serializer = self.config_serializer(data=data)
        if not serializer.is_valid():
            raise SerializerValidationError(serializer.errors)
        return dict(serializer.validated_data)

    def load_dataset(self, config):
        return load_dataset(config['dataset'], fmt=config['format'], label_column=config['label_column'])

    def output_dir(self, options) -> Path:
        return Path(options.get('out') or settings.MVCERT['OUTPUT_DIR'])

    def write_outputs(self, out: Path, stem: str, document: dict, table: str = None) -> Path:
        path = write_json(out / f"{stem}.json", document)
        logger.info("Wrote %s report to %s.", stem, path)
        if table is not None:
            (out / f"{stem}.txt").write_text(table, encoding="utf-8")
            self.stdout.write(table)
        self.stdout.write(self.style.SUCCESS(f"Wrote {path}"))
        return path

    def record(self, options, kind: str, config: dict, document: dict, dataset_hash: str = "", ensemble_hash: str = ""):
        if not options.get('record'):
            return None
        run = record_run(kind, config, document, dataset_hash=dataset_hash, ensemble_hash=ensemble_hash or "")
        self.stdout.write(f"Recorded run {run.id}")
        return run

    @staticmethod
    def jsonable(document):
        return to_jsonable(document)
