import pytest
from django.urls import reverse
from rest_framework import status
from rest_framework.test import APIClient

from certify.constants import BOUNDS_RUN, OPTIMIZE_RUN, TRAIN_RUN
from certify.runs.service import record_run


@pytest.mark.django_db
class TestRunViewSet:
    def setup_method(self):
        self.client = APIClient()
        self.train = record_run(TRAIN_RUN, {"trees": 10}, {"oob_sizes": [3, 4]}, dataset_hash="aaaa1111")
        self.bounds = record_run(
            BOUNDS_RUN, {"delta": 0.05}, {"bounds": {"CTD": {"value": float("inf")}}},
            dataset_hash="aaaa1111", ensemble_hash="bbbb2222",
        )
        self.optimize = record_run(OPTIMIZE_RUN, {"bound": "TND"}, {"rho": [0.5, 0.5]}, dataset_hash="cccc3333")

    def test_list_is_newest_first(self):
        response = self.client.get(reverse("runs-list"))

        assert response.status_code == status.HTTP_200_OK
        assert response.data["count"] == 3
        ids = [run["id"] for run in response.data["results"]]
        assert ids == [self.optimize.id, self.bounds.id, self.train.id]
        assert "report" not in response.data["results"][0]

    def test_filter_by_kind(self):
        response = self.client.get(reverse("runs-list"), {"kind": BOUNDS_RUN})

        assert response.status_code == status.HTTP_200_OK
        assert [run["id"] for run in response.data["results"]] == [self.bounds.id]

    def test_filter_by_dataset_hash_prefix(self):
        response = self.client.get(reverse("runs-list"), {"dataset_hash": "aaaa"})

        assert response.data["count"] == 2

    def test_pagination(self):
        for index in range(12):
            record_run(TRAIN_RUN, {"seed": index}, {})

        response = self.client.get(reverse("runs-list"), {"page_size": 5, "page": 2})

        assert response.status_code == status.HTTP_200_OK
        assert response.data["count"] == 15
        assert len(response.data["results"]) == 5

    def test_retrieve_has_full_report_with_infinity_as_null(self):
        response = self.client.get(reverse("runs-detail", args=[self.bounds.id]))

        assert response.status_code == status.HTTP_200_OK
        assert response.data["config"] == {"delta": 0.05}
        assert response.data["report"]["bounds"]["CTD"]["value"] is None

    def test_retrieve_missing_run(self):
        response = self.client.get(reverse("runs-detail", args=[9999]))

        assert response.status_code == status.HTTP_404_NOT_FOUND

    def test_runs_are_read_only(self):
        response = self.client.post(reverse("runs-list"), {"kind": TRAIN_RUN}, format="json")

        assert response.status_code == status.HTTP_405_METHOD_NOT_ALLOWED
