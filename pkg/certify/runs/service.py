import logging

from certify.models import Run
from certify.utils import to_jsonable

logger = logging.getLogger('mvcert')


def record_run(kind: str, config: dict, report: dict, dataset_hash: str = "", ensemble_hash: str = "") -> Run:
    """
    Stores a run with its configuration and JSON report.

    Non-finite numbers in the report are stored as null.

    Args:
        kind (str): One of the RUN_KINDS values.
        config (dict): Inputs of the run.
        report (dict): Output document of the run.
        dataset_hash (str): Hash of the dataset the run used, if any.
        ensemble_hash (str): Hash of the ensemble the run used, if any.

    Returns:
        Run: The saved instance.
    """
    run = Run.objects.create(
        kind=kind,
        dataset_hash=dataset_hash or "",
        ensemble_hash=ensemble_hash or "",
        config=to_jsonable(config),
        report=to_jsonable(report),
    )
    logger.info("Recorded %s run %d.", kind, run.id)
    return run
