"""Exception hierarchy shared by every stage of the pipeline."""


class EntropyMonitorError(Exception):
    """Base class for all library errors."""


class InputError(EntropyMonitorError):
    """Rejected input (malformed trace, bad config, invalid argument)."""


class InvalidStep(InputError):
    def __init__(self, reason, step_index=None):
        self.reason = reason
        self.step_index = step_index
        where = f" at step {step_index}" if step_index is not None else ""
        super().__init__(f"invalid top-k step{where}: {reason}")


class MalformedLine(InputError):
    def __init__(self, line_no, cause):
        self.line_no = line_no
        self.cause = cause
        super().__init__(f"line {line_no}: malformed record: {cause}")


class SchemaViolation(InputError):
    def __init__(self, field, detail="", line_no=None):
        self.field = field
        self.detail = detail
        self.line_no = line_no
        prefix = f"line {line_no}: " if line_no is not None else ""
        suffix = f": {detail}" if detail else ""
        super().__init__(f"{prefix}schema violation in {field!r}{suffix}")


class EmptyInput(InputError):
    pass


class QOutOfRange(InputError):
    pass


class EmptyTrajectory(EmptyInput):
    pass


class MissingChosenLogprob(InputError):
    def __init__(self, step_index):
        self.step_index = step_index
        super().__init__(f"step {step_index} has no chosen_logprob")


class SingleClass(EntropyMonitorError):
    """Only one label value present where both classes are required."""


class DegenerateInput(EntropyMonitorError):
    pass


class DomainMismatch(EntropyMonitorError):
    pass


class DomainOverlap(EntropyMonitorError):
    pass


class EmptyDomain(EntropyMonitorError):
    pass


class EmptyHoldout(EntropyMonitorError):
    pass


class EmptyBucket(EntropyMonitorError):
    pass


class TooFewRows(EntropyMonitorError):
    pass


class DimensionMismatch(EntropyMonitorError):
    pass


class NonConvergence(EntropyMonitorError):
    def __init__(self, max_iter, tolerance):
        self.max_iter = max_iter
        self.tolerance = tolerance
        super().__init__(
            f"solver did not converge in {max_iter} iterations "
            f"(final subgradient violation {tolerance:.3e})"
        )


class KOutOfRange(InputError):
    pass


class InfeasibleEntropy(InputError):
    pass


class TargetOutOfRange(InfeasibleEntropy):
    pass


class ConfigError(InputError):
    pass


# errors a sweep row records instead of aborting the whole run
TRAINING_ERRORS = (SingleClass, TooFewRows, NonConvergence, DegenerateInput)
