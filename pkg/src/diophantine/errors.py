class DiophantineError(Exception):
    """Base class for all errors raised by this package."""


class NegativeRadicand(DiophantineError, ValueError):
    pass


class DegenerateDirection(DiophantineError, ValueError):
    pass


class SingularBasis(DiophantineError, ValueError):
    pass


class NotFound(DiophantineError, LookupError):
    pass


class InadmissibleSpec(DiophantineError, ValueError):
    pass


class InadmissiblePsi(DiophantineError, ValueError):
    pass


class PreconditionFailed(DiophantineError, ValueError):
    pass


class SingularSystem(DiophantineError, ValueError):
    pass


class TripleSwitchViolated(DiophantineError):
    pass


class SignLawViolated(DiophantineError):
    pass


class StepVerificationFailed(DiophantineError):
    """A claimed property of a construction step did not hold.

    `statement` names the check ("c4", "c6", "nest", ...); `k` is the
    index of the state being checked or produced.
    """

    def __init__(self, statement: str, k: int | None = None, detail: str = ""):
        self.statement = statement
        self.k = k
        self.detail = detail
        where = f" at k={k}" if k is not None else ""
        super().__init__(f"{statement} failed{where}: {detail}" if detail else f"{statement} failed{where}")


class ConstructionFailed(DiophantineError):
    """The driver could not extend the construction to the requested length."""

    def __init__(self, k: int, reason: str):
        self.k = k
        self.reason = reason
        super().__init__(f"construction stuck at k={k}: {reason}")
