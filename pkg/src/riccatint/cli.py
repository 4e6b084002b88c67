"""Command-line front end: solve problems from JSON files, check solutions,
run refinement studies, and demonstrate the quadratic-cost interpretation.

Problem files are JSON documents; matrices are row-major nested arrays and
time-dependent coefficients are given as specs ({"kind": "zero" | "constant" |
"polynomial" | "piecewise", ...}).  Solutions are written as CSV (one row per
node: t followed by the n^2 entries of P(t), row-major) next to a JSON
diagnostics document.  Exit codes: 0 success, 1 failed check/assertion,
2 invalid input, 3 non-convergence, 4 hypothesis violation in symmetric mode.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import __version__
from .evolution import (EvolutionFamily, OperatorFunction, TimeGrid,
                        adjoint_backward_family, build_forward_family)
from .linops import quadratic_form
from .oracle import solve_differential_riccati
from .riccati import (ConvergenceError, HypothesisViolation, RiccatiProblem,
                      RiccatiSolution, check_hypotheses, flow_consistency,
                      representation_check_one_sided,
                      representation_check_two_sided, riccati_residual,
                      solve_monotone, solve_picard_stepped)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_INVALID = 2
EXIT_NO_CONVERGENCE = 3
EXIT_HYPOTHESIS = 4

_SPEC_KINDS = ("zero", "constant", "polynomial", "piecewise")
_SOLVERS = ("monotone", "picard", "oracle")


def _fmt(x: float) -> str:
    return repr(float(x))


def _as_matrix(data, n: int, name: str, cols: Optional[int] = None) -> np.ndarray:
    mat = np.asarray(data, dtype=float)
    cols = n if cols is None else cols
    if mat.shape != (n, cols):
        raise ValueError(f"{name} must be a {n}x{cols} matrix, got shape {mat.shape}")
    if not np.all(np.isfinite(mat)):
        raise ValueError(f"{name} has non-finite entries")
    return mat


def _spec_callable(spec: dict, n: int, name: str):
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ValueError(f"{name} spec must be an object with a 'kind' field")
    kind = spec["kind"]
    if kind == "zero":
        zero = np.zeros((n, n))
        return lambda t: zero
    if kind == "constant":
        mat = _as_matrix(spec.get("matrix"), n, f"{name}.matrix")
        return lambda t: mat
    if kind == "polynomial":
        coeffs = [_as_matrix(c, n, f"{name}.coefficients[{k}]")
                  for k, c in enumerate(spec.get("coefficients", []))]
        if not coeffs:
            raise ValueError(f"{name} polynomial needs at least one coefficient")

        def poly(t, coeffs=coeffs):
            acc = np.zeros_like(coeffs[0])
            tk = 1.0
            for c in coeffs:      # lowest degree first
                acc = acc + tk * c
                tk *= t
            return acc

        return poly
    if kind == "piecewise":
        times = np.asarray(spec.get("times", []), dtype=float)
        mats = [_as_matrix(m, n, f"{name}.matrices[{k}]")
                for k, m in enumerate(spec.get("matrices", []))]
        if times.ndim != 1 or len(times) != len(mats) or len(mats) == 0:
            raise ValueError(f"{name} piecewise needs matching times and matrices")
        if times[0] != 0.0 or np.any(np.diff(times) <= 0):
            raise ValueError(f"{name} piecewise times must start at 0 and increase")

        def piecewise(t, times=times, mats=mats):
            j = int(np.searchsorted(times, t, side="right")) - 1
            return mats[max(0, min(j, len(mats) - 1))]

        return piecewise
    raise ValueError(f"{name} spec kind must be one of {_SPEC_KINDS}, got {kind!r}")


@dataclass
class ProblemFile:
    """Parsed problem document; see the README for the format reference."""

    dimension: int
    horizon: float
    steps: int
    c_spec: dict
    b_spec: dict
    g: np.ndarray
    generator: Optional[dict] = None
    propagators: Optional[np.ndarray] = None
    tolerances: Optional[dict] = None
    solver: str = "monotone"
    safety: float = 0.5
    b_factor: Optional[np.ndarray] = None

    @classmethod
    def from_dict(cls, doc: dict) -> "ProblemFile":
        try:
            n = int(doc["dimension"])
            horizon = float(doc["horizon"])
            steps = int(doc["steps"])
            g = _as_matrix(doc["G"], n, "G")
            c_spec = doc["C"]
            b_spec = doc["B"]
        except KeyError as exc:
            raise ValueError(f"problem file is missing field {exc}") from exc
        if n < 1:
            raise ValueError("dimension must be >= 1")
        generator = doc.get("generator")
        propagators = doc.get("propagators")
        if (generator is None) == (propagators is None):
            raise ValueError("exactly one of 'generator' or 'propagators' is required")
        if propagators is not None:
            steps_arr = np.asarray(propagators.get("steps"), dtype=float)
            if steps_arr.shape != (steps, n, n):
                raise ValueError(
                    f"propagators.steps must have shape {(steps, n, n)}, "
                    f"got {steps_arr.shape}")
            propagators = steps_arr
        solver = doc.get("solver", "monotone")
        if solver not in _SOLVERS:
            raise ValueError(f"solver must be one of {_SOLVERS}, got {solver!r}")
        safety = float(doc.get("safety", 0.5))
        b_factor = doc.get("B_factor")
        if b_factor is not None:
            b_factor = np.asarray(b_factor, dtype=float)
            if b_factor.ndim != 2 or b_factor.shape[0] != n:
                raise ValueError(f"B_factor must have {n} rows")
        # validate the coefficient specs eagerly
        _spec_callable(c_spec, n, "C")
        _spec_callable(b_spec, n, "B")
        if generator is not None:
            _spec_callable(generator, n, "generator")
        return cls(dimension=n, horizon=horizon, steps=steps, c_spec=c_spec,
                   b_spec=b_spec, g=g, generator=generator, propagators=propagators,
                   tolerances=doc.get("tolerances"), solver=solver, safety=safety,
                   b_factor=b_factor)

    @classmethod
    def from_path(cls, path) -> "ProblemFile":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        doc = {
            "dimension": self.dimension,
            "horizon": self.horizon,
            "steps": self.steps,
            "C": self.c_spec,
            "B": self.b_spec,
            "G": self.g.tolist(),
            "solver": self.solver,
            "safety": self.safety,
        }
        if self.generator is not None:
            doc["generator"] = self.generator
        if self.propagators is not None:
            doc["propagators"] = {"steps": self.propagators.tolist()}
        if self.tolerances is not None:
            doc["tolerances"] = self.tolerances
        if self.b_factor is not None:
            doc["B_factor"] = self.b_factor.tolist()
        return doc

    def build(self, steps: Optional[int] = None
              ) -> tuple[RiccatiProblem, Optional[OperatorFunction]]:
        """Instantiate the problem, optionally overriding the grid resolution."""
        grid = TimeGrid(self.horizon, self.steps if steps is None else steps)
        n = self.dimension
        c_fun = OperatorFunction.from_callable(grid, _spec_callable(self.c_spec, n, "C"))
        b_fun = OperatorFunction.from_callable(grid, _spec_callable(self.b_spec, n, "B"))
        generator = None
        if self.generator is not None:
            generator = OperatorFunction.from_callable(
                grid, _spec_callable(self.generator, n, "generator"))
            u_fwd = build_forward_family(generator)
        else:
            if steps is not None and steps != self.steps:
                raise ValueError("propagator-table problems cannot be re-gridded")
            u_fwd = EvolutionFamily(grid, "forward", self.propagators)
        problem = RiccatiProblem(u_fwd, adjoint_backward_family(u_fwd),
                                 c_fun, b_fun, self.g)
        symmetric = check_hypotheses(problem).passed
        if symmetric:
            problem = dataclasses.replace(problem, symmetric_mode=True)
        return problem, generator


def write_solution_csv(path, grid: TimeGrid, values: np.ndarray) -> None:
    n_rows, n_cols = values.shape[1], values.shape[2]
    header = "t," + ",".join(f"p{r}_{c}" for r in range(n_rows) for c in range(n_cols))
    lines = [header]
    nodes = grid.nodes()
    for i in range(grid.num_nodes):
        flat = values[i].reshape(-1)
        lines.append(",".join([_fmt(nodes[i])] + [_fmt(v) for v in flat]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_solution_csv(path, grid: TimeGrid, n: int) -> OperatorFunction:
    text = Path(path).read_text(encoding="utf-8").strip().splitlines()
    if len(text) != grid.num_nodes + 1:
        raise ValueError(
            f"solution has {len(text) - 1} rows, expected {grid.num_nodes}")
    values = np.empty((grid.num_nodes, n, n))
    nodes = grid.nodes()
    for i, line in enumerate(text[1:]):
        parts = line.split(",")
        if len(parts) != 1 + n * n:
            raise ValueError(f"row {i} has {len(parts)} columns, expected {1 + n * n}")
        t = float(parts[0])
        if abs(t - nodes[i]) > 1e-12 * (1.0 + abs(nodes[i])):
            raise ValueError(f"row {i} has t={t}, expected {nodes[i]}")
        values[i] = np.asarray([float(p) for p in parts[1:]]).reshape(n, n)
    return OperatorFunction(grid, values)


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _solution_diagnostics(solution: RiccatiSolution) -> dict:
    diag = {
        "iterations": solution.iterations,
        "sup_differences": solution.sup_differences,
        "residual": solution.residual,
    }
    if solution.invariant_report:
        diag["invariants"] = [
            {k: v for k, v in dataclasses.asdict(rec).items() if v is not None}
            for rec in solution.invariant_report
        ]
    if solution.intervals is not None:
        diag["intervals"] = [
            {
                "start_index": c.start_index,
                "end_index": c.end_index,
                "iterations": c.iterations,
                "final_update": c.final_update,
                "sup_iterate_norm": c.sup_iterate_norm,
                "in_ball": c.in_ball,
                "rho": c.params.rho,
                "delta": c.params.delta,
                "contraction_lhs": c.params.contraction_lhs,
            }
            for c in solution.intervals
        ]
    return diag


def cmd_solve(problem_path, out_dir, tol_abs: Optional[float] = None,
              tol_rel: Optional[float] = None, max_iter: Optional[int] = None,
              safety: Optional[float] = None, solver: Optional[str] = None) -> int:
    """Solve the problem file and write CSV + JSON outputs into out_dir."""
    try:
        pfile = ProblemFile.from_path(problem_path)
        problem, generator = pfile.build()
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    tols = pfile.tolerances or {}
    eff_tol_abs = tol_abs if tol_abs is not None else float(tols.get("tol_abs", 1e-10))
    eff_tol_rel = tol_rel if tol_rel is not None else float(tols.get("tol_rel", 1e-8))
    eff_max_iter = max_iter if max_iter is not None else int(tols.get("max_iter", 50))
    eff_safety = safety if safety is not None else pfile.safety
    chosen = solver if solver is not None else pfile.solver

    start = time.perf_counter()
    try:
        if chosen == "monotone":
            solution = solve_monotone(problem, tol_abs=eff_tol_abs,
                                      tol_rel=eff_tol_rel, max_iter=eff_max_iter)
        elif chosen == "picard":
            solution = solve_picard_stepped(problem, tol_abs=eff_tol_abs,
                                            tol_rel=eff_tol_rel, safety=eff_safety)
        elif chosen == "oracle":
            if generator is None:
                print("error: the oracle solver needs a generator-driven problem",
                      file=sys.stderr)
                return EXIT_INVALID
            report = solve_differential_riccati(generator, problem.B, problem.C,
                                                problem.G, problem.grid)
            solution = RiccatiSolution(
                P=report.P_oracle, iterations=0, sup_differences=[],
                residual=riccati_residual(report.P_oracle, problem))
        else:
            print(f"error: unknown solver {chosen!r}", file=sys.stderr)
            return EXIT_INVALID
    except HypothesisViolation as exc:
        kind, node = exc.kind, exc.node
        if kind == "mode":
            report = check_hypotheses(problem)
            if report.first_violation is not None:
                kind, node = report.first_violation
        print(f"error: hypothesis violation ({kind} at node {node})",
              file=sys.stderr)
        return EXIT_HYPOTHESIS
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    except RuntimeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    wall = time.perf_counter() - start

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = Path(problem_path).stem
    csv_path = out / f"{stem}_P.csv"
    json_path = out / f"{stem}_run.json"
    write_solution_csv(csv_path, problem.grid, solution.P.values)
    record = {
        "solver": chosen,
        "version": __version__,
        "problem_sha256": _sha256(problem_path),
        "wall_time_s": wall,
        "symmetric_mode": problem.symmetric_mode,
        "dimension": pfile.dimension,
        "grid": {"horizon": problem.grid.horizon, "steps": problem.grid.steps},
        "tolerances": {"tol_abs": eff_tol_abs, "tol_rel": eff_tol_rel,
                       "max_iter": eff_max_iter, "safety": eff_safety},
        "outputs": {"solution_csv": str(csv_path)},
        "diagnostics": _solution_diagnostics(solution),
    }
    json_path.write_text(json.dumps(record, indent=2, sort_keys=True) + "\n",
                         encoding="utf-8")
    print(f"solved with {chosen}: residual={solution.residual:.3e} "
          f"iterations={solution.iterations} -> {csv_path}")
    return EXIT_OK


def cmd_check(problem_path, solution_path, threshold: Optional[float] = None,
              flow_pairs: int = 100) -> int:
    """Residual checks of a stored solution against its problem file."""
    try:
        pfile = ProblemFile.from_path(problem_path)
        problem, _ = pfile.build()
        p_fun = read_solution_csv(solution_path, problem.grid, pfile.dimension)
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    h = problem.grid.h
    sup_p = p_fun.sup_norm()
    default_threshold = max(1e-9, 25.0 * h * h * (1.0 + sup_p))
    limit = threshold if threshold is not None else default_threshold

    rng = np.random.default_rng(20240)
    n_nodes = problem.grid.num_nodes
    pairs = rng.integers(0, n_nodes, size=(max(1, flow_pairs), 2))
    flow_max = 0.0
    for a, b in pairs:
        lo, hi = (int(a), int(b)) if a <= b else (int(b), int(a))
        flow_max = max(flow_max, flow_consistency(p_fun, problem, lo, hi))

    checks = {
        "riccati_residual": riccati_residual(p_fun, problem),
        "flow_consistency_max": flow_max,
        "representation_one_sided": representation_check_one_sided(p_fun, problem),
        "representation_two_sided": representation_check_two_sided(p_fun, problem),
    }
    ok = True
    for name, value in checks.items():
        passed = value <= limit
        ok = ok and passed
        print(f"{name} {value:.6e} (threshold {limit:.6e}) "
              f"{'PASS' if passed else 'FAIL'}")
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def cmd_study(problem_path, grids: List[int], solver: Optional[str] = None) -> int:
    """Refinement study: solver error against the finest-grid oracle."""
    try:
        pfile = ProblemFile.from_path(problem_path)
        if len(grids) < 3:
            raise ValueError("a study needs at least 3 grid sizes")
        grids = sorted(set(int(g) for g in grids))
        finest = grids[-1]
        for g in grids:
            if finest % g != 0:
                raise ValueError(f"grid size {g} must divide the finest size {finest}")
        if pfile.generator is None:
            raise ValueError("studies need a generator-driven problem (oracle reference)")
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID

    chosen = solver if solver is not None else pfile.solver
    try:
        problem_f, generator_f = pfile.build(steps=finest)
        reference = solve_differential_riccati(
            generator_f, problem_f.B, problem_f.C, problem_f.G, problem_f.grid
        ).P_oracle
        rows = []
        for n_steps in grids:
            problem, generator = pfile.build(steps=n_steps)
            if chosen == "monotone":
                values = solve_monotone(problem).P.values
            elif chosen == "picard":
                values = solve_picard_stepped(problem, safety=pfile.safety).P.values
            else:
                values = solve_differential_riccati(
                    generator, problem.B, problem.C, problem.G, problem.grid
                ).P_oracle.values
            stride = finest // n_steps
            diff = values - reference.values[::stride]
            err = float(np.linalg.svd(diff, compute_uv=False).max())
            rows.append((n_steps, problem.grid.h, err))
    except HypothesisViolation as exc:
        print(f"error: hypothesis violation ({exc.kind} at node {exc.node})",
              file=sys.stderr)
        return EXIT_HYPOTHESIS
    except (ConvergenceError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NO_CONVERGENCE

    print(f"{'N':>8} {'h':>12} {'sup_error':>14}")
    for n_steps, h, err in rows:
        print(f"{n_steps:>8} {h:>12.6e} {err:>14.6e}")
    errs = np.array([max(r[2], 1e-300) for r in rows[:-1]])
    hs = np.array([r[1] for r in rows[:-1]])
    order = float(np.polyfit(np.log(hs), np.log(errs), 1)[0]) if len(errs) >= 2 else float("nan")
    print(f"fitted order: {order:.3f}")
    return EXIT_OK


def _eval_stages(fn_nodes, fn_mids, i):
    """(later node, midpoint, earlier node) samples of one grid interval."""
    return fn_nodes[i], fn_mids[i], fn_nodes[i + 1]


def _simulate_lqr(generator: OperatorFunction, c_fun: OperatorFunction,
                  g_mat: np.ndarray, bu: np.ndarray, grid: TimeGrid, x0: np.ndarray,
                  p_values: Optional[np.ndarray] = None,
                  u_nodes: Optional[np.ndarray] = None,
                  u_mids: Optional[np.ndarray] = None):
    """Forward RK4 of the state and running cost; closed loop when P is given.

    Returns (total cost, state trajectory at nodes, control at nodes).
    """
    h = grid.h
    a_n, a_m = generator.values, generator.midpoint_values
    c_n, c_m = c_fun.values, c_fun.midpoint_values
    if p_values is not None:
        p_n = p_values
        p_m = 0.5 * (p_values[:-1] + p_values[1:])

    def control(i, stage, x):
        # stage: 0 = node i, 1 = midpoint, 2 = node i+1
        if p_values is not None:
            p_t = p_n[i] if stage == 0 else (p_m[i] if stage == 1 else p_n[i + 1])
            return -bu.T @ p_t @ x
        return (u_nodes[i], u_mids[i], u_nodes[i + 1])[stage]

    def rhs(i, stage, x):
        a_t = (a_n[i], a_m[i], a_n[i + 1])[stage]
        c_t = (c_n[i], c_m[i], c_n[i + 1])[stage]
        u = control(i, stage, x)
        dx = a_t @ x + bu @ u
        dj = float(x @ c_t @ x + u @ u)
        return dx, dj

    x = np.asarray(x0, dtype=float).copy()
    cost = 0.0
    states = np.empty((grid.num_nodes, x.shape[0]))
    controls = np.empty((grid.num_nodes, bu.shape[1]))
    states[0] = x
    controls[0] = control(0, 0, x)
    for i in range(grid.steps):
        dx1, dj1 = rhs(i, 0, x)
        dx2, dj2 = rhs(i, 1, x + 0.5 * h * dx1)
        dx3, dj3 = rhs(i, 1, x + 0.5 * h * dx2)
        dx4, dj4 = rhs(i, 2, x + h * dx3)
        x = x + (h / 6.0) * (dx1 + 2 * dx2 + 2 * dx3 + dx4)
        cost += (h / 6.0) * (dj1 + 2 * dj2 + 2 * dj3 + dj4)
        states[i + 1] = x
        controls[i + 1] = control(i, 2, x)
    cost += float(x @ g_mat @ x)
    return cost, states, controls


def cmd_lqr_demo(problem_path, x0: List[float], tol: Optional[float] = None,
                 perturbations: int = 10) -> int:
    """Closed-loop cost check: realized cost matches <P(0) x0, x0> and no
    sampled perturbed control does better."""
    try:
        pfile = ProblemFile.from_path(problem_path)
        if pfile.b_factor is None:
            raise ValueError("lqr-demo needs a B_factor with B = B_factor @ B_factor^T")
        problem, generator = pfile.build()
        if generator is None:
            raise ValueError("lqr-demo needs a generator-driven problem")
        if not problem.symmetric_mode:
            raise ValueError("lqr-demo needs a problem satisfying the symmetric hypotheses")
        bu = pfile.b_factor
        mismatch = float(np.abs(problem.B.values - (bu @ bu.T)[None]).max())
        if mismatch > 1e-10 * (1.0 + float(np.abs(problem.B.values).max())):
            raise ValueError(
                f"B_factor does not factor B(t) on the grid (defect {mismatch:.3e}); "
                "the demo needs a constant factored B")
        x_init = np.asarray(x0, dtype=float)
        if x_init.shape != (pfile.dimension,):
            raise ValueError(f"x0 must have length {pfile.dimension}")
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID

    try:
        solution = solve_monotone(problem)
    except HypothesisViolation as exc:
        print(f"error: hypothesis violation ({exc.kind} at node {exc.node})",
              file=sys.stderr)
        return EXIT_HYPOTHESIS
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NO_CONVERGENCE

    predicted = quadratic_form(solution.P.values[0], x_init)
    cost, states, controls = _simulate_lqr(generator, problem.C, problem.G, bu,
                                           problem.grid, x_init,
                                           p_values=solution.P.values)
    eff_tol = tol if tol is not None else 1e-4 * (1.0 + abs(predicted))

    # open-loop replay data for the perturbations
    p_mid = 0.5 * (solution.P.values[:-1] + solution.P.values[1:])
    x_mid = 0.5 * (states[:-1] + states[1:])
    u_nodes = -(solution.P.values @ bu).transpose(0, 2, 1) @ states[..., None]
    u_nodes = u_nodes[..., 0]
    u_mids = -(p_mid @ bu).transpose(0, 2, 1) @ x_mid[..., None]
    u_mids = u_mids[..., 0]

    nodes_t = problem.grid.nodes()
    mids_t = problem.grid.midpoints() if problem.grid.steps else np.zeros(0)
    horizon = max(problem.grid.horizon, 1e-300)
    u_scale = max(1.0, float(np.abs(u_nodes).max()))
    perturbed_costs = []
    for j in range(perturbations):
        rng = np.random.default_rng(1000 + j)
        amps = 0.1 * u_scale * rng.standard_normal((3, bu.shape[1]))
        phases = rng.uniform(0, 2 * np.pi, size=3)

        def wave(ts):
            out = np.zeros((len(ts), bu.shape[1]))
            for k in range(3):
                out += np.sin((k + 1) * np.pi * ts / horizon + phases[k])[:, None] * amps[k]
            return out

        cost_j, _, _ = _simulate_lqr(
            generator, problem.C, problem.G, bu, problem.grid, x_init,
            u_nodes=u_nodes + wave(nodes_t), u_mids=u_mids + wave(mids_t))
        perturbed_costs.append(cost_j)

    gap = abs(cost - predicted)
    worst = min(perturbed_costs) - cost if perturbed_costs else 0.0
    report = {
        "predicted_cost": predicted,
        "realized_cost": cost,
        "absolute_gap": gap,
        "tolerance": eff_tol,
        "perturbed_costs": perturbed_costs,
        "min_perturbed_margin": worst,
    }
    print(json.dumps(report, indent=2, sort_keys=True))
    if gap > eff_tol:
        print(f"FAIL: realized cost deviates from <P(0)x0, x0> by {gap:.3e}",
              file=sys.stderr)
        return EXIT_CHECK_FAILED
    if any(c < cost - eff_tol for c in perturbed_costs):
        print("FAIL: a perturbed control undercut the feedback cost", file=sys.stderr)
        return EXIT_CHECK_FAILED
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="riccatint",
        description="Backward Riccati integral equation solver toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("problem", help="path to the JSON problem file")

    p_solve = sub.add_parser("solve", help="solve a problem file")
    add_common(p_solve)
    p_solve.add_argument("--out", default=".", help="output directory")
    p_solve.add_argument("--tol-abs", type=float, default=None)
    p_solve.add_argument("--tol-rel", type=float, default=None)
    p_solve.add_argument("--max-iter", type=int, default=None)
    p_solve.add_argument("--safety", type=float, default=None)
    p_solve.add_argument("--solver", choices=_SOLVERS, default=None)

    p_oracle = sub.add_parser("oracle", help="run the ODE oracle on a problem file")
    add_common(p_oracle)
    p_oracle.add_argument("--out", default=".", help="output directory")

    p_check = sub.add_parser("check", help="verify a stored solution")
    add_common(p_check)
    p_check.add_argument("solution", help="path to the solution CSV")
    p_check.add_argument("--threshold", type=float, default=None,
                         help="residual threshold (default: 25 h^2 (1 + sup||P||))")
    p_check.add_argument("--flow-pairs", type=int, default=100)

    p_study = sub.add_parser("study", help="grid refinement study")
    add_common(p_study)
    p_study.add_argument("--grids", required=True,
                         help="comma-separated grid sizes, e.g. 250,500,1000,2000")
    p_study.add_argument("--solver", choices=_SOLVERS, default=None)

    p_demo = sub.add_parser("lqr-demo", help="closed-loop quadratic cost check")
    add_common(p_demo)
    p_demo.add_argument("--x0", required=True, help="comma-separated initial state")
    p_demo.add_argument("--tol", type=float, default=None)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "solve":
        return cmd_solve(args.problem, args.out, tol_abs=args.tol_abs,
                         tol_rel=args.tol_rel, max_iter=args.max_iter,
                         safety=args.safety, solver=args.solver)
    if args.command == "oracle":
        return cmd_solve(args.problem, args.out, solver="oracle")
    if args.command == "check":
        return cmd_check(args.problem, args.solution, threshold=args.threshold,
                         flow_pairs=args.flow_pairs)
    if args.command == "study":
        try:
            grids = [int(g) for g in args.grids.split(",") if g.strip()]
        except ValueError:
            print("error: --grids must be comma-separated integers", file=sys.stderr)
            return EXIT_INVALID
        return cmd_study(args.problem, grids, solver=args.solver)
    if args.command == "lqr-demo":
        try:
            x0 = [float(v) for v in args.x0.split(",") if v.strip()]
        except ValueError:
            print("error: --x0 must be comma-separated reals", file=sys.stderr)
            return EXIT_INVALID
        return cmd_lqr_demo(args.problem, x0, tol=args.tol)
    print(f"error: unknown command {args.command!r}", file=sys.stderr)
    return EXIT_INVALID


def console_main() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_main()
