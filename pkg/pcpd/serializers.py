import math

from rest_framework import serializers

from .exceptions import ConfigurationError
from .inference import FitOptions
from .synth_bench import ALGORITHMS, FACTOR_CORRELATIONS, BenchConfig, SynthSpec


def _finite(value):
    if value is not None and not math.isfinite(value):
        raise serializers.ValidationError('Must be a finite number.')
    return value


class FitOptionsSerializer(serializers.Serializer):
    """Options of a single fit; omitted engine knobs fall back to the PCPD settings"""
    rank_bound = serializers.IntegerField(min_value=2, required=False, allow_null=True)
    rank_bound_factor = serializers.FloatField(required=False, validators=[_finite])
    max_iters = serializers.IntegerField(min_value=1, required=False)
    tol = serializers.FloatField(required=False, validators=[_finite])
    prune_rel_threshold = serializers.FloatField(required=False)
    prune = serializers.BooleanField(required=False)
    noise_update_period = serializers.IntegerField(min_value=1, required=False)
    fixed_beta = serializers.FloatField(required=False, allow_null=True, validators=[_finite])
    seed = serializers.IntegerField(min_value=0, required=False)
    compute_elbo = serializers.BooleanField(required=False)
    epsilon = serializers.FloatField(required=False, validators=[_finite])
    lambda0 = serializers.FloatField(required=False, allow_null=True, validators=[_finite])

    def validate(self, attrs):
        try:
            FitOptions(**attrs)
        except ConfigurationError as exc:
            raise serializers.ValidationError(str(exc))
        return attrs

    def create(self, validated_data):
        return FitOptions(**validated_data)


class SynthSpecSerializer(serializers.Serializer):
    """One synthetic data cell"""
    dims = serializers.ListField(child=serializers.IntegerField(min_value=1), min_length=2)
    true_rank = serializers.IntegerField(min_value=1)
    snr_db = serializers.FloatField(required=False, allow_null=True, default=None, validators=[_finite])
    factor_correlation = serializers.ChoiceField(choices=FACTOR_CORRELATIONS, default='iid')
    seed = serializers.IntegerField(min_value=0, default=0)

    def create(self, validated_data):
        return SynthSpec(**validated_data)


class BenchFitSerializer(FitOptionsSerializer):
    """FitOptions overrides shared by every bench trial"""

    def validate(self, attrs):
        fixed = {'rank_bound', 'rank_bound_factor', 'seed'} & set(attrs)
        if fixed:
            raise serializers.ValidationError(
                f'{sorted(fixed)} are set per trial by the bench and cannot be overridden.')
        return super().validate(attrs)


class BenchConfigSerializer(serializers.Serializer):
    """Schema of the bench configuration file"""
    grid = SynthSpecSerializer(many=True, allow_empty=False)
    algorithms = serializers.ListField(
        child=serializers.ChoiceField(choices=sorted(ALGORITHMS)), min_length=1, default=['gh'])
    rank_bound_factors = serializers.ListField(
        child=serializers.FloatField(min_value=0.0, validators=[_finite]), min_length=1, default=[1.0])
    trials = serializers.IntegerField(min_value=1, default=1)
    base_seed = serializers.IntegerField(min_value=0, default=0)
    parallelism = serializers.IntegerField(min_value=1, default=1)
    fit = BenchFitSerializer(required=False)
    record_timings = serializers.BooleanField(default=False)

    def validate_rank_bound_factors(self, value):
        if any(factor <= 0 for factor in value):
            raise serializers.ValidationError('Rank bound factors must be positive.')
        return value

    def create(self, validated_data):
        data = dict(validated_data)
        data['grid'] = [SynthSpec(**cell) for cell in data['grid']]
        data['fit'] = dict(data.get('fit') or {})
        return BenchConfig(**data)


class FitReportSerializer(serializers.Serializer):
    """Read-only view of a FitReport.

    Context keys: ``metrics`` (name -> float, infinite values become null),
    ``options`` (the FitOptions used) and ``record_timings``; without the last
    ``wall_time_seconds`` is null so reruns serialize identically.
    """
    algorithm = serializers.CharField()
    estimated_rank = serializers.IntegerField()
    iterations_run = serializers.IntegerField()
    converged = serializers.BooleanField()
    wall_time_seconds = serializers.SerializerMethodField()
    noise_precision = serializers.FloatField()
    z_powers = serializers.ListField(child=serializers.FloatField())
    component_magnitudes = serializers.ListField(child=serializers.FloatField())
    elbo_trace = serializers.ListField(child=serializers.FloatField())
    rank_trace = serializers.ListField(child=serializers.IntegerField())
    prune_iterations = serializers.ListField(child=serializers.IntegerField())
    dims = serializers.SerializerMethodField()
    metrics = serializers.SerializerMethodField()
    options = serializers.SerializerMethodField()

    def get_dims(self, obj):
        return list(obj.model.dims)

    def get_wall_time_seconds(self, obj):
        return obj.wall_time_seconds if self.context.get('record_timings') else None

    def get_metrics(self, obj):
        metrics = self.context.get('metrics', {})
        return {name: (value if math.isfinite(value) else None) for name, value in metrics.items()}

    def get_options(self, obj):
        options = self.context.get('options')
        return FitOptionsSerializer(options).data if options is not None else None
