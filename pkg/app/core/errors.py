"""Exception hierarchy shared by every package of the engine."""


class CheomError(RuntimeError):
    """Base class for engine, oracle and experiment failures (CLI exit code 1)."""


class DimensionError(CheomError):
    """Operand shapes or Hilbert-space layouts do not agree."""


class NotAStateError(CheomError):
    """Input is not a valid density matrix (or not Hermitian)."""


class IntegrationDivergedError(CheomError):
    """The physical trace collapsed during a step."""


class FeedbackSingularError(CheomError):
    """Dynamic feedback strength undefined because <J_x> vanished."""


class JumpFromEmptyModeError(CheomError):
    """A photodetection jump was requested from an (almost) empty mode."""


class CutoffLeakageError(CheomError):
    """Population reached the top Fock level of an oracle mode."""


class TruncationError(CheomError):
    """Requested hierarchy element is not retained by the truncation."""


class UnsupportedError(CheomError):
    """Combination of options the engine does not implement."""


class ConfigError(CheomError):
    """Scenario configuration is semantically invalid (CLI exit code 2)."""

    def __init__(self, field_path: str, message: str):
        self.field_path = field_path
        super().__init__(f"{field_path}: {message}")
