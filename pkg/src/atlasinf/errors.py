"""Error taxonomy shared across the pipeline.

The three classes map onto the CLI exit codes: bad input (2), failed
genericity (3), and resource caps (4). Anything else is a plain bug.
"""


class InputError(ValueError):
    """The input polynomial or request is malformed or out of scope."""


class GenericityError(RuntimeError):
    """No generic configuration found: center redraws exhausted or a
    degenerate structure persisted through every allowed retry."""


class ResourceCapError(RuntimeError):
    """A configured cap was hit before the computation stabilized."""

    def __init__(self, message: str, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics
