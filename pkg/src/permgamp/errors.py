"""Exception types shared across the package."""


class ParseError(ValueError):
    """A scenario/dataset file is not valid JSON or misses required keys."""


class ValidationError(ValueError):
    """A loaded or constructed object violates an invariant.

    The message always names the offending field.
    """


class UnusableLinkError(RuntimeError):
    """A link has no unblocked ray, or its total gain vanished at the
    queried permittivity. Harness code drops such links before solving."""


class SolverError(RuntimeError):
    """The iterative solver hit a non-finite state or the forward model
    failed at an expansion point."""


class GridSizeError(ValueError):
    """A brute-force grid would exceed the evaluation guard."""
