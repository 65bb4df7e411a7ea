"""Exception types shared across the package."""


class CapacityError(RuntimeError):
    """An exact expansion would exceed the configured atom / point budget."""


class ConvergenceError(RuntimeError):
    """An iteration shows no empirical contraction."""


class NumericalError(RuntimeError):
    """A matrix decomposition or an interpolation failed."""


class NonErgodicError(RuntimeError):
    """A Markov kernel failed the uniform-ergodicity check."""


class ReductionError(RuntimeError):
    """An invariant-subspace reduction cannot proceed."""
