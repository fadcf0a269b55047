"""Exception hierarchy for varselclust."""


class VarselError(Exception):
    """Base class of every error raised by the library."""


# data / mixtures

class InvalidData(VarselError):
    """A data matrix violates its shape or finiteness invariants."""


class SingularData(VarselError):
    """Too few observations for K components, or a zero-variance column."""


class DegenerateFit(VarselError):
    """Every EM start collapsed a component."""


# model selection

class RankDeficient(VarselError):
    """The regression design matrix [1, y^R] is not of full column rank."""


class SingularOmega(VarselError):
    """The general-form residual covariance is not positive definite."""


class ZeroVariance(VarselError):
    """A constant column under a diagonal independent block (strict mode)."""


class SearchFailed(VarselError):
    """The initial all-relevant model could not be fitted at any grid cell."""


# sparse K-means

class EmptyCluster(VarselError):
    """A cluster has no observation."""


class AllNonpositive(VarselError):
    """No variable has a positive between-cluster sum of squares."""


# metrics

class LengthMismatch(VarselError):
    """Two partitions do not label the same number of observations."""


# benchmark

class ConfigInvalid(VarselError):
    """A run configuration is inconsistent."""


class DataLoadError(VarselError):
    """An input CSV is missing, malformed or not numeric."""


class NoRoleData(VarselError):
    """No model-selection run recorded variable roles."""


class NoWeightData(VarselError):
    """No sparse K-means run recorded a weight vector."""


class InvalidWeights(VarselError):
    """A recorded weight vector violates the sparse K-means constraints."""
