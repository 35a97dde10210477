"""The validated covariance-matrix value type."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError

SYMMETRY_ABS_TOL = 1e-12
PSD_REL_TOL = 1e-10

_PROVENANCE_FIXED = {"model-1", "model-2", "model-3", "sample"}


def symmetrize(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.T)


def as_matrix(m) -> np.ndarray:
    """Accept a CovarianceMatrix or a plain array; return the ndarray view."""
    return m.values if isinstance(m, CovarianceMatrix) else np.asarray(m, dtype=float)


@dataclass(frozen=True)
class CovarianceMatrix:
    """Symmetric PSD matrix with provenance.

    Invariants checked at construction: symmetry to 1e-12 absolute, minimum
    eigenvalue >= -1e-10 * maximum eigenvalue, strictly positive diagonal.
    The array is frozen (read-only) after validation.
    """

    values: np.ndarray
    provenance: str = "sample"
    dim: int = field(init=False)

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=float)
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise ParameterError(f"covariance must be square, got shape {values.shape}")
        if values.shape[0] < 1:
            raise ParameterError("covariance must have dimension >= 1")
        if not np.all(np.isfinite(values)):
            raise ParameterError("covariance contains non-finite entries")
        asym = np.max(np.abs(values - values.T))
        if asym > SYMMETRY_ABS_TOL:
            raise ParameterError(f"covariance not symmetric (max asymmetry {asym:.3e})")
        diag = np.diag(values)
        if np.any(diag <= 0.0):
            raise ParameterError("covariance diagonal must be strictly positive")
        eigenvalues = np.linalg.eigvalsh(values)
        lo, hi = eigenvalues[0], eigenvalues[-1]
        if lo < -PSD_REL_TOL * max(hi, 0.0):
            raise ParameterError(
                f"covariance not positive semidefinite (min eig {lo:.3e}, max eig {hi:.3e})"
            )
        if not (self.provenance in _PROVENANCE_FIXED or self.provenance.startswith("estimator:")):
            raise ParameterError(f"unknown provenance tag {self.provenance!r}")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "dim", values.shape[0])

    def retagged(self, provenance: str) -> "CovarianceMatrix":
        return CovarianceMatrix(self.values, provenance)
