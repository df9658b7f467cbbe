"""Exception hierarchy shared by all modules."""


class CharacterizationError(Exception):
    """Base class for every error raised by this package."""


class NonUniformGrid(CharacterizationError):
    pass


class BadSpan(CharacterizationError):
    pass


class IncompleteGrid(CharacterizationError):
    pass


class DuplicatePoint(CharacterizationError):
    pass


class NonFiniteValue(CharacterizationError):
    pass


class BadDomain(CharacterizationError):
    pass


class BadRange(CharacterizationError):
    pass


class OutOfRange(CharacterizationError):
    """A lookup-table query left the tabulated domain.

    Attributes
    ----------
    axis : str
        ``"id"`` or ``"iq"``.
    value : float
        Offending coordinate.
    bound : float
        The violated grid bound.
    """

    def __init__(self, axis, value, bound, slice_index=None):
        self.axis = axis
        self.value = value
        self.bound = bound
        self.slice_index = slice_index
        where = "" if slice_index is None else f" (skew slice {slice_index})"
        side = "below" if value < bound else "above"
        super().__init__(
            f"{axis}={value:.6g} A lies {side} the grid bound {bound:.6g} A{where}")


class TorqueUnreachable(CharacterizationError):
    def __init__(self, torque_target, torque_max):
        self.torque_target = torque_target
        self.torque_max = torque_max
        super().__init__(
            f"torque {torque_target:.6g} Nm exceeds {torque_max:.6g} Nm "
            "available at the current limit")


class InfeasibleAtSpeed(CharacterizationError):
    def __init__(self, torque_target, speed_n, max_feasible_torque):
        self.torque_target = torque_target
        self.speed_n = speed_n
        self.max_feasible_torque = max_feasible_torque
        super().__init__(
            f"torque {torque_target:.6g} Nm infeasible at n={speed_n:.6g} 1/s; "
            f"maximum feasible torque is {max_feasible_torque:.6g} Nm")


class NonPhysical(CharacterizationError):
    pass


class BadExponent(CharacterizationError):
    pass


class TooFewSamples(CharacterizationError):
    pass


class NonMonotonicTime(CharacterizationError):
    pass


class NegativeSpeed(CharacterizationError):
    pass


class JobFailed(CharacterizationError):
    """One or more characterization jobs failed; carries their coordinates."""

    def __init__(self, failures):
        # failures: list of (job_index, id_A, iq_A, message)
        self.failures = failures
        lines = [f"job {k} at (Id={d:.6g} A, Iq={q:.6g} A): {msg}"
                 for k, d, q, msg in failures]
        super().__init__(f"{len(failures)} job(s) failed:\n" + "\n".join(lines))


class ConfigError(CharacterizationError):
    def __init__(self, message, line=None):
        self.line = line
        prefix = "" if line is None else f"line {line}: "
        super().__init__(prefix + message)
