import numpy as np
from django.conf import settings
from rest_framework import serializers

from certify.constants import ALL_BOUNDS, KL_FORM, LAMBDA_FORM
from certify.domain import BoundConfig, LossStats, Posterior
from certify.exceptions import InputError


def _default_delta():
    return settings.MVCERT['DEFAULT_DELTA']


class LossStatsSerializer(serializers.Serializer):
    """
    Out-of-bag statistics posted by a client.

    payload:

    {
        "gibbs": [0.1, 0.4],
        "tandem": [[0.1, 0.1], [0.1, 0.4]],
        "disagreement": [[0.0, 0.3], [0.3, 0.0]],
        "n_min_first": 1000,
        "n_min_pair": 1000,
        "m_min": 1000,
        "n_classes": 2
    }
    """
    gibbs = serializers.ListField(child=serializers.FloatField(min_value=0.0, max_value=1.0), min_length=1)
    tandem = serializers.ListField(child=serializers.ListField(child=serializers.FloatField(min_value=0.0, max_value=1.0)))
    disagreement = serializers.ListField(
        child=serializers.ListField(child=serializers.FloatField(min_value=0.0, max_value=1.0))
    )
    n_min_first = serializers.IntegerField(min_value=1)
    n_min_pair = serializers.IntegerField(min_value=1)
    m_min = serializers.IntegerField(min_value=1)
    n_classes = serializers.IntegerField(min_value=2, default=2)
    prior = serializers.ListField(child=serializers.FloatField(min_value=0.0), required=False)
    delta = serializers.FloatField(default=_default_delta)

    def validate_delta(self, value):
        try:
            BoundConfig(value)
        except InputError as e:
            raise serializers.ValidationError(str(e))
        return value

    def validate_prior(self, value):
        total = sum(value)
        if total <= 0:
            raise serializers.ValidationError("prior must have positive mass")
        return [weight / total for weight in value]

    def validate(self, attrs):
        try:
            attrs["stats"] = LossStats(
                gibbs=attrs["gibbs"],
                tandem=attrs["tandem"],
                disagreement=attrs["disagreement"],
                n_min_first=attrs["n_min_first"],
                n_min_pair=attrs["n_min_pair"],
                m_min=attrs["m_min"],
                n_classes=attrs["n_classes"],
            )
        except (InputError, ValueError) as e:
            raise serializers.ValidationError({"stats": str(e)})
        prior = attrs.get("prior")
        if prior is not None and len(prior) != len(attrs["gibbs"]):
            raise serializers.ValidationError({"prior": f"expected {len(attrs['gibbs'])} weights, got {len(prior)}"})
        return attrs

    def run_config(self) -> dict:
        """Scalar settings of the request, without the matrices."""
        data = self.validated_data
        return {
            key: value for key, value in data.items()
            if key not in ("gibbs", "tandem", "disagreement", "stats", "posterior")
        } | {"size": data["stats"].size}


class BoundRequestSerializer(LossStatsSerializer):
    """
    Bound evaluation request: the statistics plus an optional posterior.

    ``rho`` defaults to uniform and ``prior`` to uniform; ``bounds`` defaults to
    every bound applicable to ``n_classes``.
    """
    rho = serializers.ListField(child=serializers.FloatField(min_value=0.0), required=False)
    bounds = serializers.ListField(child=serializers.ChoiceField(choices=ALL_BOUNDS), required=False, min_length=1)
    form = serializers.ChoiceField(choices=[KL_FORM, LAMBDA_FORM], default=KL_FORM)

    def validate(self, attrs):
        attrs = super().validate(attrs)
        size = attrs["stats"].size
        rho = attrs.get("rho")
        prior = attrs.get("prior")
        if rho is not None and len(rho) != size:
            raise serializers.ValidationError({"rho": f"expected {size} weights, got {len(rho)}"})
        try:
            if rho is None and prior is None:
                attrs["posterior"] = Posterior.uniform(size)
            else:
                weights = np.ones(size) if rho is None else np.asarray(rho)
                attrs["posterior"] = Posterior.from_weights(weights, prior)
        except InputError as e:
            raise serializers.ValidationError({"rho": str(e)})
        return attrs
