"""Exception hierarchy shared by all modules."""


class EDMError(ValueError):
    """Base class for invalid-input errors raised by edmfix."""


class BlockNotGoodError(EDMError):
    """A principal block was expected to be PSD with rank ``d`` but is not."""


class GaleError(EDMError):
    """A Gale vector could not be computed (wrong nullspace dimension)."""


class BadWindowError(EDMError):
    """A consecutive window failed classification during Gale assembly.

    ``window`` is the 0-based start index of the offending window.
    """

    def __init__(self, window, message=None):
        self.window = window
        super().__init__(message or f"window starting at index {window} is not a good block")


class OverlapRankError(EDMError):
    """Overlap rows of two facial vectors are rank deficient or span different ranges."""


class SolverError(RuntimeError):
    """A solver could not produce a consistent correction."""


class NoCorruptionFound(SolverError):
    """Completion reproduced every observed entry; nothing to correct."""


class HardCaseNeeded(SolverError):
    """Localization was ambiguous or empty; the hard-case solver should take over."""


class UnsolvableHardCase(SolverError):
    """More than one single-entry correction yields a valid EDM.

    ``candidates`` holds every admissible :class:`~edmfix.solvers.Correction`.
    """

    def __init__(self, candidates, message=None):
        self.candidates = list(candidates)
        super().__init__(
            message or f"{len(self.candidates)} admissible single-entry corrections found"
        )
