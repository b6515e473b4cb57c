"""Exception types shared across the package."""

from __future__ import annotations

import numpy as np


class RevuncError(Exception):
    """Base class for package errors."""


class ValidationError(RevuncError, ValueError):
    """Input data or configuration failed a declared invariant."""

    def __init__(self, message: str, problems: list[str] | None = None):
        self.problems = list(problems or [])
        if self.problems:
            message = message + "\n  - " + "\n  - ".join(self.problems)
        super().__init__(message)


class ParseError(ValidationError):
    """A vintage file could not be parsed."""


class ConfigurationError(RevuncError, ValueError):
    """Settings are inconsistent with the data they are applied to."""


class DecompositionError(RevuncError, np.linalg.LinAlgError):
    """A matrix factorization failed.

    ``index`` is the pivot (for band factorizations) or the time index
    (for filter innovations) at which the failure occurred.
    """

    def __init__(self, message: str, index: int):
        self.index = int(index)
        super().__init__(f"{message} (index {self.index})")


class GibbsBlockError(RevuncError, RuntimeError):
    """A numerical failure inside one block of the Gibbs sampler."""

    def __init__(self, block: int, cause: Exception):
        self.block = int(block)
        self.cause = cause
        super().__init__(f"Gibbs block {block} failed: {cause}")


class ChainAbortedError(RevuncError, RuntimeError):
    """The sampler failed repeatedly at the same iteration."""

    def __init__(self, iteration: int, failures: list[GibbsBlockError]):
        self.iteration = iteration
        self.failures = failures
        blocks = ", ".join(str(f.block) for f in failures)
        super().__init__(
            f"chain aborted at iteration {iteration} after {len(failures)} "
            f"consecutive block failures (blocks: {blocks}); last error: {failures[-1].cause}"
        )


class MissingArtifactError(RevuncError, FileNotFoundError):
    """A pipeline stage needs the output of an earlier stage."""
