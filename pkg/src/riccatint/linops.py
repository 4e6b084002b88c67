"""Dense matrix primitives: adjoints, definiteness predicates, Loewner order.

All operators are real matrices and the pairing is the Euclidean one, so the
adjoint is the transpose.  Symmetry and nonnegativity predicates use the
relative tolerance tol * (1 + ||M||) so that they behave uniformly on badly
scaled inputs, and eigenvalue queries always go through the symmetrized part
(M + M^T)/2 to avoid being poisoned by roundoff asymmetry.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "SymmetryReport",
    "adjoint",
    "is_self_adjoint",
    "is_nonnegative",
    "loewner_leq",
    "op_norm",
    "quadratic_form",
    "symmetry_report",
    "symmetrize",
    "min_eigenvalue",
    "require_matrix",
]


def require_matrix(value, name: str = "matrix") -> np.ndarray:
    """Coerce to a 2-D float array with finite entries, or raise ValueError."""
    mat = np.asarray(value, dtype=float)
    if mat.ndim != 2 or mat.shape[0] < 1 or mat.shape[1] < 1:
        raise ValueError(f"{name} must be a nonempty 2-D matrix, got shape {mat.shape}")
    if not np.all(np.isfinite(mat)):
        raise ValueError(f"{name} contains non-finite entries")
    return mat


def _require_square(value, name: str = "matrix") -> np.ndarray:
    mat = require_matrix(value, name)
    if mat.shape[0] != mat.shape[1]:
        raise ValueError(f"{name} must be square, got shape {mat.shape}")
    return mat


def adjoint(mat) -> np.ndarray:
    """Adjoint with respect to the real Euclidean pairing: the transpose."""
    return require_matrix(mat).T.copy()


def op_norm(mat) -> float:
    """Spectral norm (largest singular value)."""
    return float(np.linalg.norm(require_matrix(mat), 2))


def symmetrize(values: np.ndarray) -> np.ndarray:
    """(M + M^T)/2, applied to a matrix or a stack of matrices."""
    arr = np.asarray(values, dtype=float)
    return 0.5 * (arr + np.swapaxes(arr, -1, -2))


def min_eigenvalue(mat) -> float:
    """Smallest eigenvalue of the symmetrized matrix."""
    sym = symmetrize(_require_square(mat))
    return float(np.linalg.eigvalsh(sym)[0])


def is_self_adjoint(mat, tol: float = 1e-12) -> bool:
    """True iff ||M - M^T|| <= tol * (1 + ||M||) in spectral norm."""
    square = _require_square(mat)
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    defect = float(np.linalg.norm(square - square.T, 2))
    return defect <= tol * (1.0 + float(np.linalg.norm(square, 2)))


def is_nonnegative(mat, tol: float = 1e-12) -> bool:
    """True iff the symmetrized matrix has min eigenvalue >= -tol * (1 + ||M||).

    Raises ValueError when the input is asymmetric beyond the tolerance; a
    definiteness query on a genuinely non-self-adjoint operator is a usage bug.
    """
    square = _require_square(mat)
    if not is_self_adjoint(square, tol):
        raise ValueError("matrix is not self-adjoint within tolerance")
    bound = tol * (1.0 + float(np.linalg.norm(square, 2)))
    return min_eigenvalue(square) >= -bound


def loewner_leq(a, b, tol: float = 1e-12) -> bool:
    """Loewner order test: A <= B iff B - A is nonnegative (within tol)."""
    mat_a = _require_square(a, "A")
    mat_b = _require_square(b, "B")
    if mat_a.shape != mat_b.shape:
        raise ValueError(f"shape mismatch: {mat_a.shape} vs {mat_b.shape}")
    return is_nonnegative(mat_b - mat_a, tol)


def quadratic_form(mat, x) -> float:
    """The pairing <M x, x>."""
    square = _require_square(mat)
    vec = np.asarray(x, dtype=float).reshape(-1)
    if vec.shape[0] != square.shape[0]:
        raise ValueError(
            f"dimension mismatch: matrix is {square.shape}, vector has length {vec.shape[0]}"
        )
    return float(vec @ square @ vec)


@dataclass(frozen=True)
class SymmetryReport:
    """Outcome of symmetry/nonnegativity queries on one matrix."""

    asymmetry: float
    min_eigenvalue: float
    symmetric: bool
    nonnegative: bool

    def __post_init__(self):
        if self.asymmetry < 0:
            raise ValueError("asymmetry must be nonnegative")


def symmetry_report(mat, tol: float = 1e-12) -> SymmetryReport:
    """Measure asymmetry and the smallest symmetrized eigenvalue of a matrix."""
    square = _require_square(mat)
    norm = float(np.linalg.norm(square, 2))
    asym = float(np.linalg.norm(square - square.T, 2))
    lam = min_eigenvalue(square)
    slack = tol * (1.0 + norm)
    return SymmetryReport(
        asymmetry=asym,
        min_eigenvalue=lam,
        symmetric=asym <= slack,
        nonnegative=(asym <= slack and lam >= -slack),
    )
