"""Exception types shared across the imaging pipeline."""


class ConfigurationError(ValueError):
    """Inconsistent grids, mismatched metadata, or an invalid configuration."""


class PhantomFormatError(ValueError):
    """A phantom file failed to parse or violates a tissue-map invariant."""


class PlacementError(ValueError):
    """A lesion (or other inclusion) does not fit where it was requested."""


class DegenerateBackgroundError(ValueError):
    """Background permittivity is zero somewhere contrast needs to divide by it."""


class SolverError(RuntimeError):
    """The sparse field solve failed or returned an untrustworthy solution."""


class ConditioningError(RuntimeError):
    """Power iteration failed to converge on the operator norm."""


class DivergenceError(RuntimeError):
    """The inversion produced a non-finite objective value."""


class PipelineError(RuntimeError):
    """A pipeline stage failed; `stage` names the stage that aborted."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage
