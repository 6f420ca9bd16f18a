from rest_framework import serializers

from certify.bounds.serializers import LossStatsSerializer
from certify.constants import MAX_OUTER_ITERATIONS, OPTIMIZABLE_BOUNDS, TND


class OptimizeRequestSerializer(LossStatsSerializer):
    """
    Posterior optimization request: the statistics, the bound to minimize and an optional prior.

    payload:

    {
        "bound": "TND",
        "gibbs": [0.1, 0.4],
        "tandem": [[0.1, 0.1], [0.1, 0.4]],
        "disagreement": [[0.0, 0.3], [0.3, 0.0]],
        "n_min_first": 1000,
        "n_min_pair": 1000,
        "m_min": 1000
    }
    """
    bound = serializers.ChoiceField(choices=OPTIMIZABLE_BOUNDS, default=TND)
    max_outer = serializers.IntegerField(min_value=1, max_value=MAX_OUTER_ITERATIONS, default=MAX_OUTER_ITERATIONS)

    def validate(self, attrs):
        attrs = super().validate(attrs)
        prior = attrs.get("prior")
        if prior is not None and min(prior) <= 0.0:
            raise serializers.ValidationError({"prior": "the optimizer needs a strictly positive prior"})
        return attrs
