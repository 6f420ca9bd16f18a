from django.db import models
from django.forms.models import model_to_dict

from certify.constants import RUN_KINDS


class Run(models.Model):
    """A recorded train, bounds, optimize or experiment run with its JSON report."""

    kind = models.CharField(max_length=20, choices=RUN_KINDS)
    dataset_hash = models.CharField(max_length=64, blank=True, db_index=True)
    ensemble_hash = models.CharField(max_length=64, blank=True, db_index=True)
    config = models.JSONField(default=dict, blank=True)
    report = models.JSONField(default=dict, blank=True)
    created_at = models.DateTimeField(auto_now_add=True)

    class Meta:
        ordering = ["-created_at", "-id"]

    def save(self, *args, **kwargs):
        self.full_clean()  # Validates the data before saving
        super().save(*args, **kwargs)

    def __str__(self):
        return f"{self.kind} run {self.pk} ({self.dataset_hash[:12] or 'no dataset'})"

    def as_dict(self) -> dict:
        """
        Converts the Run instance to a dictionary representation,
        including all fields in the model.

        Returns:
            dict: Dictionary representation of the Run instance.
        """
        return model_to_dict(self)
