"""Exception hierarchy. Every error the package raises derives from BenchError."""


class BenchError(Exception):
    pass


# structure / parsing
class MalformedCif(BenchError):
    pass


class MissingCellParameters(BenchError):
    pass


class MissingAtomSites(BenchError):
    pass


class UnknownElement(BenchError):
    pass


class DegenerateCell(BenchError):
    pass


class NonConvergence(BenchError):
    pass


# validity
class EnumerationBudgetExceeded(BenchError):
    pass


class MissingProbability(BenchError):
    pass


class UndefinedCorrelation(BenchError):
    pass


class ProviderFailure(BenchError):
    pass


# hull
class SchemaError(BenchError):
    pass


class EmptyReference(BenchError):
    pass


class UncoveredElement(BenchError):
    pass


class InfeasibleComposition(BenchError):
    pass


class LengthMismatch(BenchError):
    pass


# statistics
class EmptyDistribution(BenchError):
    pass


class BinMismatch(BenchError):
    pass


class NonPsdCovariance(BenchError):
    pass


class DimensionMismatch(BenchError):
    pass


# rmsd
class SiteCountMismatch(BenchError):
    pass


class SpeciesMismatch(BenchError):
    pass


# pipeline
class ConfigError(BenchError):
    pass
