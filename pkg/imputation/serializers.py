"""
Validation of run configurations.

Commands collect flag/config-file values into plain dicts and pass them
through these serializers; `save()` returns the validated domain object.
"""
import numpy as np
from rest_framework import serializers

from .baselines_eval import METHODS, SimulationDesign
from .copula_gibbs import MARGINAL_MODES, ORDINAL_POINT_RULES, ChainConfig
from .missingness import MAR, MECHANISMS, MissingnessSpec
from .rand_kernels import PriorConfig


def _open_unit_interval(value, label):
    if not 0 < value < 1:
        raise serializers.ValidationError(f"{label} must lie strictly between 0 and 1.")
    return value


class ChainConfigSerializer(serializers.Serializer):
    m_marginal_draws = serializers.IntegerField(min_value=1)
    iters_per_draw = serializers.IntegerField(min_value=1)
    burn_in = serializers.IntegerField(min_value=0)
    thin = serializers.IntegerField(min_value=1)
    seed = serializers.IntegerField(min_value=0)
    marginal = serializers.ChoiceField(choices=MARGINAL_MODES, default='bb')
    keep_samples = serializers.BooleanField(default=False)
    prior_nu0 = serializers.FloatField(required=False, allow_null=True)

    def validate(self, data):
        if data['burn_in'] >= data['iters_per_draw']:
            raise serializers.ValidationError(
                {'burn_in': "Burn-in must be smaller than the iterations per draw."})
        nu0 = data.get('prior_nu0')
        p = self.context.get('p')
        if nu0 is not None and p is not None and nu0 <= p - 1:
            raise serializers.ValidationError({'prior_nu0': f"Must exceed p - 1 = {p - 1}."})
        return data

    def create(self, validated_data):
        data = dict(validated_data)
        nu0 = data.pop('prior_nu0', None)
        prior = None
        if nu0 is not None:
            prior = PriorConfig(nu0=nu0, psi0=np.eye(self.context['p']))
        return ChainConfig(prior=prior, **data)


class MissingnessSpecSerializer(serializers.Serializer):
    mechanism = serializers.ChoiceField(choices=MECHANISMS)
    rate = serializers.FloatField(required=False, allow_null=True)
    count = serializers.IntegerField(required=False, allow_null=True, min_value=1)
    anchor_columns = serializers.ListField(child=serializers.IntegerField(min_value=0), default=list)
    seed = serializers.IntegerField(min_value=0)
    beta = serializers.FloatField(default=1.0)

    def validate_rate(self, value):
        return value if value is None else _open_unit_interval(value, 'Rate')

    def validate(self, data):
        if (data.get('rate') is None) == (data.get('count') is None):
            raise serializers.ValidationError("Give exactly one of rate and count.")
        if data['mechanism'] == MAR and not data['anchor_columns']:
            raise serializers.ValidationError({'anchor_columns': "MAR needs at least one anchor column."})
        p = self.context.get('p')
        if p is not None and any(a >= p for a in data['anchor_columns']):
            raise serializers.ValidationError({'anchor_columns': f"Anchors must be below {p}."})
        return data

    def create(self, validated_data):
        return MissingnessSpec(**validated_data)


class SimulationDesignSerializer(serializers.Serializer):
    n = serializers.IntegerField(min_value=2)
    p = serializers.IntegerField(min_value=3)
    seed = serializers.IntegerField(min_value=0)

    def validate_p(self, value):
        if value % 3:
            raise serializers.ValidationError("p must be a multiple of 3 (three variable blocks).")
        return value

    def create(self, validated_data):
        return SimulationDesign(**validated_data)


class BenchmarkRequestSerializer(serializers.Serializer):
    mechanisms = serializers.ListField(child=serializers.ChoiceField(choices=MECHANISMS), min_length=1)
    rates = serializers.ListField(child=serializers.FloatField(), default=list)
    counts = serializers.ListField(child=serializers.IntegerField(min_value=1), default=list)
    methods = serializers.ListField(child=serializers.ChoiceField(choices=METHODS), min_length=1)
    replications = serializers.IntegerField(min_value=1)
    threads = serializers.IntegerField(min_value=1, default=1)
    knn_k = serializers.IntegerField(min_value=1, default=5)
    ordinal_point = serializers.ChoiceField(choices=ORDINAL_POINT_RULES, default='mode')

    def validate_rates(self, value):
        return [_open_unit_interval(r, 'Rate') for r in value]

    def validate(self, data):
        if bool(data['rates']) == bool(data['counts']):
            raise serializers.ValidationError("Give rates or counts, not both and not neither.")
        data['levels'] = ([{'rate': r} for r in data['rates']] if data['rates']
                          else [{'count': c} for c in data['counts']])
        return data


class CoverageRequestSerializer(serializers.Serializer):
    rate = serializers.FloatField()
    level = serializers.FloatField()
    n_draws = serializers.IntegerField(min_value=100)
    columns = serializers.ListField(child=serializers.IntegerField(min_value=0), required=False, allow_null=True)

    def validate_rate(self, value):
        return _open_unit_interval(value, 'Rate')

    def validate_level(self, value):
        if not 0 < value <= 1:
            raise serializers.ValidationError("Level must lie in (0, 1].")
        return value


# ================================
# REPORTS
# ================================


class EvalReportSerializer(serializers.Serializer):
    method = serializers.CharField()
    mechanism = serializers.CharField()
    rate = serializers.FloatField(allow_null=True)
    count = serializers.IntegerField(allow_null=True)
    nrmse_mean = serializers.FloatField()
    nrmse_sd = serializers.FloatField()
    replications = serializers.IntegerField()
    sd_flag = serializers.BooleanField()
    runtime_mean = serializers.FloatField()


class CoverageResultSerializer(serializers.Serializer):
    column = serializers.IntegerField()
    name = serializers.CharField()
    coverage = serializers.FloatField()
    n_observed = serializers.IntegerField()
