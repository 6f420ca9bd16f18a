import logging

from django_filters.rest_framework import CharFilter, DjangoFilterBackend, FilterSet
from rest_framework import viewsets
from rest_framework.filters import OrderingFilter
from rest_framework.pagination import PageNumberPagination

from certify.decorators import view_set_error_handler
from certify.models import Run
from certify.runs.serializers import RunSerializer, RunSummarySerializer

logger = logging.getLogger('mvcert')


class StandardResultsSetPagination(PageNumberPagination):
    """
    Standard pagination for consistent results per page.
    """
    page_size = 10
    page_size_query_param = 'page_size'
    max_page_size = 100


class RunFilter(FilterSet):
    """
    Filters runs by kind and by the hashes of the data they used. Hashes match on prefixes.
    """
    dataset_hash = CharFilter(field_name='dataset_hash', lookup_expr='startswith')
    ensemble_hash = CharFilter(field_name='ensemble_hash', lookup_expr='startswith')

    class Meta:
        model = Run
        fields = ['kind', 'dataset_hash', 'ensemble_hash']


class RunViewSet(viewsets.ReadOnlyModelViewSet):
    """
    Recorded train, bounds, optimize and experiment runs.

    ### Filter Examples
    - `?kind=bounds` - Only bound reports.
    - `?dataset_hash=3fa2` - Runs on datasets whose hash starts with `3fa2`.
    - `?ensemble_hash=91c0` - Runs on ensembles whose hash starts with `91c0`.

    ### Ordering Examples
    - `?ordering=created_at` - Oldest first (the default is newest first).

    ### Pagination Examples
    - `?page=2&page_size=5`

    The list shows summaries; `/api/runs/<id>/` returns the full configuration and report.
    """
    queryset = Run.objects.all()
    serializer_class = RunSerializer
    pagination_class = StandardResultsSetPagination
    filter_backends = [DjangoFilterBackend, OrderingFilter]
    filterset_class = RunFilter
    ordering_fields = ['created_at', 'kind']
    ordering = ['-created_at', '-id']

    def get_serializer_class(self):
        if self.action == 'list':
            return RunSummarySerializer
        return RunSerializer

    @view_set_error_handler
    def list(self, request, *args, **kwargs):
        logger.info("Listing runs with filters %s.", dict(request.query_params))
        return super().list(request, *args, **kwargs)

    @view_set_error_handler
    def retrieve(self, request, *args, **kwargs):
        return super().retrieve(request, *args, **kwargs)
