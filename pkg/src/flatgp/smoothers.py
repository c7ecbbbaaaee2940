"""Symmetric linear-smoother matrices and their degrees of freedom."""

from dataclasses import dataclass
from functools import cached_property

import numpy as np


@dataclass(frozen=True)
class SmootherMatrix:
    """A symmetric n-by-n operator mapping observations to fitted values.

    Eigenvalues live in [0, 1] up to round-off; the trace is the effective
    degrees of freedom of the fit.
    """

    matrix: np.ndarray

    def __post_init__(self):
        M = np.asarray(self.matrix, dtype=float)
        object.__setattr__(self, "matrix", M)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @cached_property
    def trace(self) -> float:
        return float(np.trace(self.matrix))

    @cached_property
    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(0.5 * (self.matrix + self.matrix.T))

    def fitted(self, y) -> np.ndarray:
        return self.matrix @ np.asarray(y, dtype=float)

    def diagonal(self) -> np.ndarray:
        return np.diag(self.matrix)
