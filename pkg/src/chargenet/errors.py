"""Exception types shared across the package."""


class ScenarioError(ValueError):
    """Scenario file failed parsing or schema validation."""


class ConfigError(ValueError):
    """A parameter combination is invalid or unsupported."""


class EnergyUnderrun(RuntimeError):
    """A driving step would take the battery below its floor.

    Callers treat this as an inadmissible input rather than a crash.
    """


class InadmissibleInputError(ValueError):
    """An input was applied to a state where it is not admissible."""


class InfeasibleStepError(RuntimeError):
    """A joint simulation step failed; pinpoints the offending car and step.

    ``car`` is the 1-based id used in all user-facing output.
    """

    def __init__(self, car: int, step: int, reason: str):
        super().__init__(f"car {car} at step {step}: {reason}")
        self.car = car
        self.step = step
        self.reason = reason


class OracleSizeError(ValueError):
    """The brute-force oracle refused a problem that is too large.

    Carries the computed worst-case sequence bound so callers can report it.
    """

    def __init__(self, bound: float, limit: float):
        super().__init__(
            f"worst-case joint input sequences {bound:.3g} exceed the "
            f"exhaustive-search limit {limit:.3g}"
        )
        self.bound = bound
        self.limit = limit
