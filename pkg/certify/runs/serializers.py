from rest_framework import serializers

from certify.models import Run


class RunSerializer(serializers.ModelSerializer):
    class Meta:
        model = Run
        fields = "__all__"


class RunSummarySerializer(serializers.ModelSerializer):
    class Meta:
        model = Run
        fields = ["id", "kind", "dataset_hash", "ensemble_hash", "created_at"]
