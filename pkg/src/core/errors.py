class EngineError(Exception):
    """Base class for every failure raised by the normal-equations engine"""


class InvalidConfigurationError(EngineError):
    pass


class RowIndexError(EngineError, IndexError):
    pass


class ProtocolViolationError(EngineError):
    """A triplet batch broke the exchange contract (size, owner or double write)"""


class CoverageViolationError(EngineError):
    def __init__(self, message, pair=None):
        super().__init__(message)
        self.pair = pair


class WorkloadValidationError(EngineError):
    pass


class SymmetryError(EngineError):
    pass


class SolverError(EngineError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class DivisionGuardError(SolverError):
    pass


class RankDeficiencyError(EngineError):
    pass


class NotPositiveDefiniteError(SolverError):
    pass


class UsageError(EngineError):
    pass
