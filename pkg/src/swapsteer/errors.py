"""Exception hierarchy; the CLI maps each family to an exit code."""


class SwapSteerError(Exception):
    exit_code = 1


class ConfigError(SwapSteerError, ValueError):
    exit_code = 2


class AssumptionViolation(SwapSteerError):
    """A premise of the self-testing argument does not hold for the input."""

    exit_code = 3


class RankDeficiencyError(AssumptionViolation):
    pass


class PremiseUnmetError(AssumptionViolation):
    pass


class SchmidtRankError(AssumptionViolation):
    pass


class SupportOverlapError(AssumptionViolation):
    pass


class NumericalFailure(SwapSteerError):
    exit_code = 4


class InfeasibleTargetError(NumericalFailure):
    pass


class ConsistencyError(NumericalFailure):
    """An adversary strategy does not reproduce the observed correlations."""
