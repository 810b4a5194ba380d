"""Exception hierarchy shared by every module."""


class BMLError(Exception):
    """Base class for all library errors."""


class InputError(BMLError, ValueError):
    """Malformed or out-of-range input."""


class ContractViolation(BMLError):
    """An oracle or witness failed its contract."""


class EstimationFailure(BMLError):
    """Estimate drew its whole budget without a single example in S."""


class NonTermination(BMLError):
    """A step cap or rejection-sampling cap was exceeded."""


class SoundnessFailure(BMLError):
    """The candidate set emptied out; a probabilistic failure occurred."""


class LearnerFailure(BMLError):
    """A class-specific learner reached an inconsistent state."""


class MemoryBudgetExceeded(BMLError):
    """A streaming learner's state grew past the configured bit budget."""

    def __init__(self, bits, budget):
        super().__init__(f"state uses {bits} bits, budget is {budget}")
        self.bits = bits
        self.budget = budget
