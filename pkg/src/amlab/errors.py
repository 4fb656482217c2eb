"""Exception hierarchy shared by the grid, field-file and solver modules."""


class AmlabError(Exception):
    pass


class GridError(AmlabError, ValueError):
    pass


class NonFiniteError(AmlabError, ValueError):
    """Raised when a field holds NaN/Inf; ``node`` is the first offending index."""

    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node


class StencilError(GridError):
    pass


class FieldFileError(AmlabError):
    pass


class MagicError(FieldFileError):
    pass


class HeaderSizeMismatchError(FieldFileError):
    pass


class PayloadSizeError(FieldFileError):
    pass


class NonFinitePayloadError(FieldFileError):
    pass


class NotTransverseError(AmlabError, ValueError):
    pass


class NonSolenoidalError(AmlabError, ValueError):
    pass


class NotLocalizedError(AmlabError, ValueError):
    pass


class MemoryBudgetError(AmlabError, MemoryError):
    pass


class UnknownScenarioError(AmlabError, KeyError):
    def __str__(self):
        return self.args[0] if self.args else "unknown scenario"


class GaugeTagError(AmlabError, ValueError):
    pass


class ImaginaryResidualError(AmlabError, ArithmeticError):
    pass


class IncompleteFieldsError(AmlabError, ValueError):
    """An explicit field configuration is missing one of phi, A, E_long, E_trans, B."""
