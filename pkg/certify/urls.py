from django.urls import include, path
from rest_framework.routers import DefaultRouter

from certify.bounds.views import BoundsView
from certify.optimize.views import OptimizeView
from certify.runs.views import RunViewSet

router = DefaultRouter()
router.register(r'api/runs', RunViewSet, basename='runs')

urlpatterns = [
    path('api/bounds/', BoundsView.as_view(), name='bounds'),
    path('api/optimize/', OptimizeView.as_view(), name='optimize'),
    path('', include(router.urls)),
]
