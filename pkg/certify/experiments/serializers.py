from django.conf import settings
from rest_framework import serializers

from certify.constants import (
    ALL_BOUNDS,
    BAGGING_MODES,
    DATASET_FORMATS,
    FO,
    FULL_BAGGING,
    KL_FORM,
    LAMBDA_FORM,
    LIBSVM_FORMAT,
    OPTIMIZABLE_BOUNDS,
    TND,
)
from certify.domain import BoundConfig
from certify.exceptions import InputError


def _default(key):
    return lambda: settings.MVCERT[key]


class DatasetOptionsSerializer(serializers.Serializer):
    dataset = serializers.CharField()
    format = serializers.ChoiceField(choices=DATASET_FORMATS, default=LIBSVM_FORMAT)
    label_column = serializers.IntegerField(default=-1)


class ConfidenceMixin(serializers.Serializer):
    delta = serializers.FloatField(default=_default('DEFAULT_DELTA'))

    def validate_delta(self, value):
        try:
            BoundConfig(value)
        except InputError as e:
            raise serializers.ValidationError(str(e))
        return value


class ForestOptionsMixin(serializers.Serializer):
    trees = serializers.IntegerField(min_value=2, default=_default('DEFAULT_TREES'))
    seed = serializers.IntegerField(min_value=0, default=_default('DEFAULT_SEED'))
    test_fraction = serializers.FloatField(
        min_value=0.0, max_value=1.0, default=_default('DEFAULT_TEST_FRACTION')
    )
    max_features = serializers.IntegerField(min_value=1, required=False)
    workers = serializers.IntegerField(min_value=1, default=_default('WORKERS'))

    def validate_test_fraction(self, value):
        if not 0.0 < value < 1.0:
            raise serializers.ValidationError("test fraction must lie strictly between 0 and 1")
        return value


class TrainConfigSerializer(ForestOptionsMixin, DatasetOptionsSerializer):
    """Options of ``manage.py train``."""
    bagging = serializers.ChoiceField(choices=BAGGING_MODES, default=FULL_BAGGING)


class BoundsConfigSerializer(ConfidenceMixin, DatasetOptionsSerializer):
    """Options of ``manage.py bounds``; ``bounds`` defaults to every bound applicable to the data."""
    ensemble = serializers.CharField()
    bounds = serializers.ListField(child=serializers.ChoiceField(choices=ALL_BOUNDS), required=False, min_length=1)
    form = serializers.ChoiceField(choices=[KL_FORM, LAMBDA_FORM], default=KL_FORM)


class OptimizeConfigSerializer(BoundsConfigSerializer):
    optimize = serializers.ListField(
        child=serializers.ChoiceField(choices=OPTIMIZABLE_BOUNDS), default=lambda: [FO, TND], min_length=1
    )


class ExperimentConfigSerializer(ConfidenceMixin, ForestOptionsMixin, DatasetOptionsSerializer):
    """
    Options of ``manage.py experiment``.

    ``bagging`` lists the modes to sweep and ``unlabeled_r`` the labeled
    fractions; each repetition evaluates every combination on one split.
    """
    reps = serializers.IntegerField(min_value=1, default=1)
    bagging = serializers.ListField(
        child=serializers.ChoiceField(choices=BAGGING_MODES), default=lambda: [FULL_BAGGING], min_length=1
    )
    bounds = serializers.ListField(child=serializers.ChoiceField(choices=ALL_BOUNDS), required=False, min_length=1)
    optimize = serializers.ListField(
        child=serializers.ChoiceField(choices=OPTIMIZABLE_BOUNDS), default=list
    )
    unlabeled_r = serializers.ListField(
        child=serializers.FloatField(min_value=0.0, max_value=1.0), default=lambda: [1.0], min_length=1
    )

    def validate_unlabeled_r(self, value):
        if any(fraction <= 0.0 for fraction in value):
            raise serializers.ValidationError("labeled fractions must be positive")
        return value
