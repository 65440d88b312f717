"""Exception hierarchy shared by all stages."""


class StylvizError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(StylvizError, ValueError):
    """A chart spec, prompt spec or config violates its invariants.

    ``problems`` holds ``(field, message)`` pairs, one per violated invariant.
    """

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(f"{field}: {msg}" if field else msg for field, msg in self.problems))


class RenderError(StylvizError):
    pass


class DegenerateObject(StylvizError):
    pass


class EmptyMask(StylvizError):
    pass


class DimensionError(StylvizError, ValueError):
    pass


class UnsupportedPipeline(StylvizError):
    pass


class BackendFailure(StylvizError):
    pass


class CellOverflow(StylvizError):
    pass


class MissingPatch(StylvizError):
    def __init__(self, mark_id):
        self.mark_id = mark_id
        super().__init__(f"no patch for mark {mark_id}")


class NotANetwork(StylvizError):
    pass


class InvalidRecipe(StylvizError):
    pass


class UnknownMark(StylvizError):
    def __init__(self, mark_id):
        self.mark_id = mark_id
        super().__init__(f"unknown mark id {mark_id}")


class RequiresPrompt(StylvizError):
    pass


class MissingStage(StylvizError):
    pass


class StageError(StylvizError):
    """Wraps an error raised inside a workflow stage.

    The original exception is available as ``__cause__``; ``state`` is the
    partial run state persisted up to the failing stage.
    """

    def __init__(self, stage, cause, state=None):
        self.stage = stage
        self.cause = cause
        self.state = state
        super().__init__(f"stage {stage!r} failed: {cause}")
