from unittest.mock import patch

import pytest
from django.urls import reverse
from rest_framework import status
from rest_framework.test import APIClient

from certify.constants import OPTIMIZE_RUN
from certify.exceptions import EmptyOverlapError
from certify.models import Run


def stats_payload(**overrides):
    payload = {
        "gibbs": [0.1, 0.4],
        "tandem": [[0.1, 0.1], [0.1, 0.4]],
        "disagreement": [[0.0, 0.3], [0.3, 0.0]],
        "n_min_first": 1000,
        "n_min_pair": 1000,
        "m_min": 1000,
    }
    payload.update(overrides)
    return payload


@pytest.mark.django_db
class TestOptimizeView:
    def setup_method(self):
        self.client = APIClient()
        self.url = reverse("optimize")

    @pytest.mark.parametrize("bound", ["FO", "TND", "DIS"])
    def test_optimized_posterior_favours_the_better_tree(self, bound):
        response = self.client.post(self.url, stats_payload(bound=bound), format="json")

        assert response.status_code == status.HTTP_200_OK
        assert response.data["bound"] == bound
        assert sum(response.data["rho"]) == pytest.approx(1.0)
        assert response.data["rho"][0] > response.data["rho"][1]
        assert response.data["final_lambda_bound"] <= response.data["initial_lambda_bound"] + 1e-12
        run = Run.objects.get(id=response.data["run"])
        assert run.kind == OPTIMIZE_RUN
        assert run.config["bound"] == bound

    def test_default_bound_is_tandem(self):
        response = self.client.post(self.url, stats_payload(), format="json")

        assert response.status_code == status.HTTP_200_OK
        assert response.data["bound"] == "TND"

    def test_custom_prior_is_reported_normalized(self):
        response = self.client.post(self.url, stats_payload(prior=[1, 3]), format="json")

        assert response.status_code == status.HTTP_200_OK
        assert response.data["prior"] == pytest.approx([0.25, 0.75])

    def test_zero_prior_is_rejected(self):
        response = self.client.post(self.url, stats_payload(prior=[1, 0]), format="json")

        assert response.status_code == status.HTTP_400_BAD_REQUEST

    def test_dis_on_multiclass_is_rejected(self):
        response = self.client.post(self.url, stats_payload(bound="DIS", n_classes=3), format="json")

        assert response.status_code == status.HTTP_400_BAD_REQUEST
        assert Run.objects.count() == 0

    def test_c_bounds_cannot_be_optimized(self):
        response = self.client.post(self.url, stats_payload(bound="CTD"), format="json")

        assert response.status_code == status.HTTP_400_BAD_REQUEST

    def test_computation_error_maps_to_422(self):
        with patch("certify.optimize.views.minimize_bound", side_effect=EmptyOverlapError((0, 1))):
            response = self.client.post(self.url, stats_payload(), format="json")

        assert response.status_code == status.HTTP_422_UNPROCESSABLE_ENTITY
        assert Run.objects.count() == 0

    def test_unexpected_failure_is_a_500(self):
        with patch("certify.optimize.views.minimize_bound", side_effect=RuntimeError("boom")):
            response = self.client.post(self.url, stats_payload(), format="json")

        assert response.status_code == status.HTTP_500_INTERNAL_SERVER_ERROR
