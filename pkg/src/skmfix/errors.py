"""Exception types raised across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain where a formula is defined."""


class PreconditionError(ValueError):
    """A call was made on data that does not satisfy an operation's requirements."""


class NonFiniteIterateError(FloatingPointError):
    """An iterate became NaN or infinite during a run."""

    def __init__(self, step, norm):
        self.step = step
        self.norm = norm
        super().__init__(f"non-finite iterate at step {step} (norm of x = {norm!r})")


class ConvergenceError(RuntimeError):
    """An iterative solver hit its iteration cap."""


class ConvolutionConditionError(ValueError):
    """A supplied majorant h or ratio constant gamma fails its validity check."""

    def __init__(self, condition, k, lhs, rhs):
        self.condition = condition
        self.k = k
        super().__init__(
            f"condition ({condition}) fails at k={k}: {lhs!r} > {rhs!r}"
        )


class BudgetExceededError(RuntimeError):
    """An experiment would exceed the configured step budget."""


class MdpFormatError(ValueError):
    """An MDP text file could not be parsed or failed validation."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid MDP:\n  " + "\n  ".join(self.problems))
