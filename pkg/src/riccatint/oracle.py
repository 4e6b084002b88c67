"""Independent verification path: the backward Riccati differential equation.

Differentiating the transported-terminal integral form (with the backward
family acting through the adjoint of the forward one) gives the matrix ODE

    P'(t) = -C(t) - A(t)^T P - P A(t) + P B(t) P,    P(T) = G,

which this module integrates backward with the classical fourth-order
Runge-Kutta method on the shared grid.  Note the sign arrangement: the
quadratic term enters the integral kernel with a minus sign, so it appears
with a plus sign in the derivative; conventions that attach the minus sign to
the derivative's quadratic term describe a different (forward) orientation.
The integrator shares no code with the integral-equation quadrature, so
agreement between the two is a genuine cross-check.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .evolution import OperatorFunction, TimeGrid
from .linops import symmetrize

__all__ = ["OdeSolveReport", "solve_differential_riccati", "compare"]


@dataclass(frozen=True)
class OdeSolveReport:
    """Result of the fixed-step backward integration."""

    P_oracle: OperatorFunction
    max_step_rejections: int
    terminal_check: float


def _require_midpoints(name: str, fn: OperatorFunction) -> None:
    if fn.grid.steps > 0 and fn.midpoint_values is None:
        raise ValueError(f"{name} needs midpoint samples for the 4th-order stages")


def solve_differential_riccati(generator: OperatorFunction, B: OperatorFunction,
                               C: OperatorFunction, G, grid: TimeGrid) -> OdeSolveReport:
    """Integrate the backward Riccati ODE from P(T) = G on the given grid.

    All coefficients must be sampled on the nodes and midpoints of ``grid``.
    When B, C and G are symmetric the state is symmetrized after every step,
    which the exact flow preserves.
    """
    if generator.grid != grid or B.grid != grid or C.grid != grid:
        raise ValueError("all coefficients must be sampled on the given grid")
    n = generator.shape[0]
    if generator.shape != (n, n):
        raise ValueError("generator samples must be square")
    if B.shape != (n, n) or C.shape != (n, n):
        raise ValueError("B and C must match the generator dimension")
    g = np.asarray(G, dtype=float)
    if g.shape != (n, n):
        raise ValueError(f"G must have shape {(n, n)}, got {g.shape}")
    for name, fn in (("generator", generator), ("B", B), ("C", C)):
        _require_midpoints(name, fn)

    sym_tol = 1e-12
    symmetric = (
        float(np.abs(g - g.T).max()) <= sym_tol * (1.0 + float(np.abs(g).max()))
        and B.symmetry_defect() <= sym_tol * (1.0 + float(np.abs(B.values).max()))
        and C.symmetry_defect() <= sym_tol * (1.0 + float(np.abs(C.values).max()))
    )

    def rhs(a_t, b_t, c_t, p):
        return -c_t - a_t.T @ p - p @ a_t + p @ b_t @ p

    values = np.empty((grid.num_nodes, n, n))
    values[grid.steps] = g
    h = -grid.h  # integrating backward in time
    with np.errstate(over="ignore", invalid="ignore"):  # blow-up is diagnosed below
        for i in range(grid.steps - 1, -1, -1):
            p = values[i + 1]
            a_hi, b_hi, c_hi = generator.values[i + 1], B.values[i + 1], C.values[i + 1]
            a_mid, b_mid, c_mid = generator.midpoint(i), B.midpoint(i), C.midpoint(i)
            a_lo, b_lo, c_lo = generator.values[i], B.values[i], C.values[i]
            k1 = rhs(a_hi, b_hi, c_hi, p)
            k2 = rhs(a_mid, b_mid, c_mid, p + 0.5 * h * k1)
            k3 = rhs(a_mid, b_mid, c_mid, p + 0.5 * h * k2)
            k4 = rhs(a_lo, b_lo, c_lo, p + h * k3)
            step = p + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            if not np.all(np.isfinite(step)):
                raise RuntimeError(f"backward integration blew up at node {i}")
            values[i] = symmetrize(step) if symmetric else step
    p_fn = OperatorFunction(grid, values)
    terminal_check = float(np.linalg.norm(values[grid.steps] - g, 2))
    return OdeSolveReport(P_oracle=p_fn, max_step_rejections=0,
                          terminal_check=terminal_check)


def compare(P: OperatorFunction, report: OdeSolveReport) -> float:
    """Sup over nodes of the spectral-norm gap between P and the oracle run."""
    oracle_p = report.P_oracle
    if P.grid != oracle_p.grid:
        raise ValueError("grids do not match")
    if P.shape != oracle_p.shape:
        raise ValueError("shapes do not match")
    diff = P.values - oracle_p.values
    return float(np.linalg.svd(diff, compute_uv=False).max(initial=0.0))
