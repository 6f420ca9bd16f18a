import logging

from rest_framework import status
from rest_framework.response import Response
from rest_framework.views import APIView

from certify.bounds.report import compute_bound_report
from certify.bounds.serializers import BoundRequestSerializer
from certify.constants import BOUNDS_RUN
from certify.decorators import view_set_error_handler
from certify.runs.service import record_run
from certify.utils import to_jsonable

logger = logging.getLogger('mvcert')


class BoundsView(APIView):
    """
    Evaluates certified bounds on posted out-of-bag statistics.
    """

    @view_set_error_handler
    def post(self, request):
        """Compute the requested bounds and record the report as a run.

        Vacuous bounds are returned with ``value: null`` and ``vacuous: true``.

        Args:
            request: Request carrying a BoundRequestSerializer payload.

        Returns:
            Response: The report with the id of the recorded run.
        """
        serializer = BoundRequestSerializer(data=request.data)
        serializer.is_valid(raise_exception=True)
        data = serializer.validated_data

        report = compute_bound_report(
            data["stats"],
            posterior=data["posterior"],
            delta=data["delta"],
            bounds=data.get("bounds"),
            form=data["form"],
        )
        payload = report.to_dict()
        run = record_run(BOUNDS_RUN, serializer.run_config(), payload)
        logger.info("Bounds request answered as run %d.", run.id)
        return Response({"run": run.id, **to_jsonable(payload)}, status=status.HTTP_200_OK)
