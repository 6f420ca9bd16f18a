import logging

from rest_framework import status
from rest_framework.response import Response
from rest_framework.views import APIView

from certify.constants import OPTIMIZE_RUN
from certify.decorators import view_set_error_handler
from certify.optimize.serializers import OptimizeRequestSerializer
from certify.optimize.service import minimize_bound
from certify.runs.service import record_run
from certify.utils import to_jsonable

logger = logging.getLogger('mvcert')


class OptimizeView(APIView):
    """
    Minimizes FO, TND or DIS over the posterior for posted out-of-bag statistics.
    """

    @view_set_error_handler
    def post(self, request):
        serializer = OptimizeRequestSerializer(data=request.data)
        serializer.is_valid(raise_exception=True)
        data = serializer.validated_data

        result = minimize_bound(
            data["bound"],
            data["stats"],
            prior=data.get("prior"),
            delta=data["delta"],
            max_outer=data["max_outer"],
        )
        payload = result.to_dict()
        run = record_run(OPTIMIZE_RUN, serializer.run_config(), payload)
        logger.info("%s optimization recorded as run %d.", data["bound"], run.id)
        return Response({"run": run.id, **to_jsonable(payload)}, status=status.HTTP_200_OK)
