"""Time grids, grid-sampled operator functions, and evolution families.

A two-parameter evolution family is represented by its one-step propagators,
one matrix per grid interval.  Values at arbitrary node pairs are ordered
products of the stored steps, so the composition law U_{t,s} = U_{t,r} U_{r,s}
holds by construction (up to floating-point regrouping) and the family costs
O(N) memory instead of O(N^2).

Generator-driven construction uses the midpoint rule for the single step,
exp(h * A(t_{i+1/2})), which is second order for smooth time-varying
generators and exact for constant ones up to the matrix-exponential routine.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.linalg

__all__ = [
    "TimeGrid",
    "OperatorFunction",
    "EvolutionFamily",
    "propagate_step",
    "build_forward_family",
    "adjoint_backward_family",
    "family_value",
    "check_semigroup",
]


@dataclass(frozen=True)
class TimeGrid:
    """Uniform partition of [0, T] with nodes t_i = i * T / N."""

    horizon: float
    steps: int

    def __post_init__(self):
        if not np.isfinite(self.horizon) or self.horizon < 0:
            raise ValueError(f"horizon must be a finite nonnegative real, got {self.horizon}")
        if self.horizon == 0.0:
            if self.steps != 0:
                raise ValueError("a zero horizon collapses to a single node; use steps=0")
        elif self.steps < 1:
            raise ValueError("steps must be >= 1 for a positive horizon")

    @property
    def h(self) -> float:
        return 0.0 if self.steps == 0 else self.horizon / self.steps

    @property
    def num_nodes(self) -> int:
        return self.steps + 1

    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, self.horizon, self.num_nodes)

    def midpoints(self) -> np.ndarray:
        nodes = self.nodes()
        return 0.5 * (nodes[:-1] + nodes[1:])


def _freeze(array: np.ndarray) -> np.ndarray:
    out = np.array(array, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class OperatorFunction:
    """Matrix-valued function of time sampled on a grid.

    ``values`` holds one matrix per node.  ``midpoint_values`` is optional and
    only required where an integrator needs samples between nodes (generators
    and the ODE oracle's coefficients).
    """

    grid: TimeGrid
    values: np.ndarray
    midpoint_values: Optional[np.ndarray] = None

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 3 or vals.shape[0] != self.grid.num_nodes:
            raise ValueError(
                f"values must have shape (num_nodes, rows, cols); got {vals.shape} "
                f"for a grid with {self.grid.num_nodes} nodes"
            )
        if not np.all(np.isfinite(vals)):
            raise ValueError("operator function has non-finite samples")
        object.__setattr__(self, "values", _freeze(vals))
        if self.midpoint_values is not None:
            mids = np.asarray(self.midpoint_values, dtype=float)
            if mids.shape != (self.grid.steps,) + vals.shape[1:]:
                raise ValueError(
                    f"midpoint_values must have shape {(self.grid.steps,) + vals.shape[1:]}, "
                    f"got {mids.shape}"
                )
            if not np.all(np.isfinite(mids)):
                raise ValueError("operator function has non-finite midpoint samples")
            object.__setattr__(self, "midpoint_values", _freeze(mids))

    @classmethod
    def from_callable(cls, grid: TimeGrid, fn: Callable[[float], np.ndarray],
                      midpoints: bool = True) -> "OperatorFunction":
        values = np.stack([np.atleast_2d(np.asarray(fn(t), dtype=float)) for t in grid.nodes()])
        mids = None
        if midpoints:
            if grid.steps > 0:
                mids = np.stack(
                    [np.atleast_2d(np.asarray(fn(t), dtype=float)) for t in grid.midpoints()]
                )
            else:
                mids = np.zeros((0,) + values.shape[1:])
        return cls(grid, values, mids)

    @classmethod
    def constant(cls, grid: TimeGrid, mat, midpoints: bool = True) -> "OperatorFunction":
        mat = np.atleast_2d(np.asarray(mat, dtype=float))
        values = np.broadcast_to(mat, (grid.num_nodes,) + mat.shape)
        mids = np.broadcast_to(mat, (grid.steps,) + mat.shape) if midpoints else None
        return cls(grid, values, mids)

    @classmethod
    def zero(cls, grid: TimeGrid, rows: int, cols: Optional[int] = None,
             midpoints: bool = True) -> "OperatorFunction":
        cols = rows if cols is None else cols
        return cls.constant(grid, np.zeros((rows, cols)), midpoints)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape[1], self.values.shape[2]

    def node(self, i: int) -> np.ndarray:
        return self.values[i]

    def midpoint(self, i: int) -> np.ndarray:
        if self.midpoint_values is None:
            raise ValueError("operator function carries no midpoint samples")
        return self.midpoint_values[i]

    def sup_norm(self) -> float:
        """max over nodes of the spectral norm."""
        svals = np.linalg.svd(self.values, compute_uv=False)
        return float(svals.max(initial=0.0))

    def symmetry_defect(self) -> float:
        """max over nodes of ||V - V^T|| (spectral norm); requires square samples."""
        if self.shape[0] != self.shape[1]:
            raise ValueError("symmetry defect needs square samples")
        diff = self.values - np.swapaxes(self.values, -1, -2)
        return float(np.linalg.svd(diff, compute_uv=False).max(initial=0.0))


def _certified_product_bound(steps: np.ndarray) -> float:
    """Upper bound on sup over grid pairs of ||U_{t,s}||.

    Uses submultiplicativity: ||S_{i-1} ... S_j|| <= prod ||S_k||, maximised
    over contiguous index runs (empty run included, giving the identity's
    norm 1).  This dominates every actual pair norm.
    """
    if steps.shape[0] == 0:
        return 1.0
    lognorms = np.log(np.maximum(np.linalg.svd(steps, compute_uv=False).max(axis=1), 1e-300))
    best = 0.0
    cur = 0.0
    for v in lognorms:
        cur = max(v, cur + v)
        best = max(best, cur)
    return float(math.exp(best))


@dataclass(frozen=True)
class EvolutionFamily:
    """Two-parameter family of matrices stored by one-step propagators.

    For a forward family ``steps[i]`` maps node i to node i+1; for a backward
    family it maps node i+1 to node i.  ``bound`` is a certified upper bound
    on the spectral norm over all grid pairs (always >= 1).
    """

    grid: TimeGrid
    direction: str
    steps: np.ndarray
    bound: float = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.direction not in ("forward", "backward"):
            raise ValueError(f"direction must be 'forward' or 'backward', got {self.direction!r}")
        steps = np.asarray(self.steps, dtype=float)
        if steps.ndim != 3 or steps.shape[1] != steps.shape[2]:
            raise ValueError(f"steps must be a stack of square matrices, got shape {steps.shape}")
        if steps.shape[0] != self.grid.steps:
            raise ValueError(
                f"expected {self.grid.steps} step propagators, got {steps.shape[0]}"
            )
        if not np.all(np.isfinite(steps)):
            raise ValueError("step propagators contain non-finite entries")
        object.__setattr__(self, "steps", _freeze(steps))
        if self.bound is None:
            object.__setattr__(self, "bound", _certified_product_bound(steps))
        elif self.bound < 1.0:
            raise ValueError("family bound must be >= 1")

    @property
    def dim(self) -> int:
        return self.steps.shape[1]

    def step(self, i: int) -> np.ndarray:
        return self.steps[i]

    def value(self, i: int, j: int) -> np.ndarray:
        """Ordered product of step propagators between nodes i and j.

        Forward families require i >= j (propagation j -> i), backward
        families i <= j (propagation j -> i, backwards in time).
        """
        n_nodes = self.grid.num_nodes
        if not (0 <= i < n_nodes and 0 <= j < n_nodes):
            raise IndexError(f"node indices out of range: ({i}, {j})")
        if i == j:
            return np.eye(self.dim)
        if self.direction == "forward":
            if i < j:
                raise ValueError("forward family requires i >= j")
            out = np.eye(self.dim)
            for k in range(j, i):
                out = self.steps[k] @ out
            return out
        if i > j:
            raise ValueError("backward family requires i <= j")
        out = np.eye(self.dim)
        for k in range(j - 1, i - 1, -1):
            out = self.steps[k] @ out
        return out


def propagate_step(generator_samples: OperatorFunction, i: int) -> np.ndarray:
    """One-step propagator exp(h * A(t_{i+1/2})) for the interval [t_i, t_{i+1}]."""
    rows, cols = generator_samples.shape
    if rows != cols:
        raise ValueError("generator samples must be square")
    if not (0 <= i < generator_samples.grid.steps):
        raise IndexError(f"interval index {i} out of range")
    mid = generator_samples.midpoint(i)
    h = generator_samples.grid.h
    if not np.any(mid):
        return np.eye(rows)
    if rows == 1:
        return np.array([[math.exp(h * mid[0, 0])]])
    return scipy.linalg.expm(h * mid)


def build_forward_family(generator_samples: OperatorFunction) -> EvolutionFamily:
    """Forward evolution family generated by A(t) via midpoint exponentials."""
    rows, cols = generator_samples.shape
    if rows != cols:
        raise ValueError("generator samples must be square")
    if generator_samples.midpoint_values is None:
        raise ValueError("generator-driven construction needs midpoint samples")
    grid = generator_samples.grid
    steps = np.empty((grid.steps, rows, rows))
    for i in range(grid.steps):
        steps[i] = propagate_step(generator_samples, i)
    return EvolutionFamily(grid, "forward", steps)


def adjoint_backward_family(forward: EvolutionFamily) -> EvolutionFamily:
    """The adjoint-dual backward family V_{t,s} = (U_{s,t})^T.

    Transposing each step propagator realises the duality exactly at every
    grid pair, because products of steps transpose in reverse order.
    """
    if forward.direction != "forward":
        raise ValueError("adjoint duality is defined on forward families")
    steps = np.swapaxes(forward.steps, -1, -2)
    return EvolutionFamily(forward.grid, "backward", steps, bound=forward.bound)


def family_value(family: EvolutionFamily, i: int, j: int) -> np.ndarray:
    """Value U_{t_i, t_j} of the family (orientation checked)."""
    return family.value(i, j)


def check_semigroup(family: EvolutionFamily, tol: float = 0.0, *,
                    value_fn: Optional[Callable[[int, int], np.ndarray]] = None,
                    max_points: int = 12) -> float:
    """Max composition residual ||U_{t,s} - U_{t,r} U_{r,s}|| over sampled triples.

    For a family built from step propagators this is floating-point roundoff;
    a genuinely positive residual can only come from externally supplied
    values (pass them via ``value_fn``).  ``tol`` is informational and not
    enforced here.
    """
    del tol
    value = value_fn if value_fn is not None else family.value
    n = family.grid.steps
    if n == 0:
        return 0.0
    idx = sorted(set(np.linspace(0, n, min(max_points, n + 1)).astype(int).tolist()))
    worst = 0.0
    for a in idx:
        for b in idx:
            for c in idx:
                lo, mid, hi = sorted((a, b, c))
                if family.direction == "forward":
                    i, r, j = hi, mid, lo
                else:
                    i, r, j = lo, mid, hi
                res = value(i, j) - value(i, r) @ value(r, j)
                worst = max(worst, float(np.linalg.norm(res, 2)))
    return worst
