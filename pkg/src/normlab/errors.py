"""Exception types raised across the package."""


class NormlabError(Exception):
    pass


class ZeroVector(NormlabError, ValueError):
    """A vector with (numerically) zero norm reached an operation that needs a direction."""


class ShapeMismatch(NormlabError, ValueError):
    pass


class CollapseDetected(NormlabError, RuntimeError):
    """An embedding norm fell below the collapse threshold during descent."""


class UnequalNorms(NormlabError, ValueError):
    pass


class InvalidEpsilon(NormlabError, ValueError):
    pass


class SingletonClass(NormlabError, ValueError):
    pass


class TrainingCollapse(NormlabError, RuntimeError):
    pass


class TooFewPoints(NormlabError, ValueError):
    pass


class EmptyClass(NormlabError, ValueError):
    pass


class ConfigError(NormlabError, ValueError):
    def __init__(self, message, key=None, subcommand=None):
        super().__init__(message)
        self.key = key
        self.subcommand = subcommand
