"""Exception types shared across the package."""


class SpecError(ValueError):
    """Invalid problem specification (sizes, weights, delays)."""


class HorizonViolationError(ValueError):
    """A disturbance entry lies outside the allowed planning horizon."""

    def __init__(self, node: int, time: int, bound: int):
        self.node = node
        self.time = time
        self.bound = bound
        super().__init__(
            f"disturbance at node {node}, time {time} violates horizon bound t <= {bound}"
        )


class LedgerRangeError(KeyError):
    """Requested a shifted-disturbance entry outside the stored window."""


class InvalidHorizonError(ValueError):
    """Oracle horizon too short for the instance."""


class RoundAbortError(RuntimeError):
    """A distributed control round could not complete; nothing was actuated."""
