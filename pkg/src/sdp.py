"""Semidefinite feasibility and trace-maximization backend.

Problems are declared independently of any solver: matrix variables, block
LMIs whose entries are affine in the variables, and an objective that is
either pure feasibility or maximizing the trace of one variable.  ``solve``
hands the problem to cvxpy; ``verify`` re-checks an assignment with a plain
eigendecomposition.
"""

import logging
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional

import cvxpy as cp
import numpy as np

from .utils import min_eigenvalue, symmetrize

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-8
UNBOUNDED_THRESHOLD = 1e12
VERIFY_TOL = 1e-7


class SdpStatus(Enum):
    """Outcome of a solve."""

    OPTIMAL = "optimal"
    FEASIBLE = "feasible"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    NUMERICAL_FAILURE = "numerical_failure"


@dataclass(frozen=True)
class MatrixVariable:
    """A named decision variable."""

    name: str
    shape: tuple[int, int]
    symmetric: bool = False


@dataclass(frozen=True, eq=False)
class Term:
    """One variable-dependent summand of a block.

    Either ``left @ X @ right`` (``X`` transposed when ``transpose``; missing
    factors are identities) or, for a 1x1 variable, ``X[0, 0] * scale``.
    """

    variable: str
    left: Optional[np.ndarray] = None
    right: Optional[np.ndarray] = None
    transpose: bool = False
    scale: Optional[np.ndarray] = None

    @classmethod
    def product(cls, variable: str, left=None, right=None, transpose: bool = False) -> "Term":
        return cls(
            variable,
            None if left is None else np.atleast_2d(np.asarray(left, dtype=float)),
            None if right is None else np.atleast_2d(np.asarray(right, dtype=float)),
            transpose,
        )

    @classmethod
    def scalar(cls, variable: str, matrix: np.ndarray) -> "Term":
        return cls(variable, scale=np.atleast_2d(np.asarray(matrix, dtype=float)))

    def evaluate(self, value: np.ndarray) -> np.ndarray:
        if self.scale is not None:
            return float(value[0, 0]) * self.scale
        X = value.T if self.transpose else value
        if self.left is not None:
            X = self.left @ X
        if self.right is not None:
            X = X @ self.right
        return X

    def expression(self, var: cp.Variable):
        if self.scale is not None:
            return cp.multiply(var[0, 0], self.scale)
        X = var.T if self.transpose else var
        if self.left is not None:
            X = self.left @ X
        if self.right is not None:
            X = X @ self.right
        return X

    def coefficient_magnitude(self) -> float:
        if self.scale is not None:
            return float(np.max(np.abs(self.scale), initial=0.0))
        left = 1.0 if self.left is None else float(np.max(np.abs(self.left), initial=0.0))
        right = 1.0 if self.right is None else float(np.max(np.abs(self.right), initial=0.0))
        return left * right


@dataclass(frozen=True, eq=False)
class AffineBlock:
    """const + Σ terms."""

    const: Optional[np.ndarray] = None
    terms: tuple[Term, ...] = ()

    def evaluate(self, assignment: dict[str, np.ndarray], shape: tuple[int, int]) -> np.ndarray:
        total = np.zeros(shape) if self.const is None else np.array(self.const, dtype=float)
        for term in self.terms:
            total = total + term.evaluate(assignment[term.variable])
        return total

    def expression(self, variables: dict[str, cp.Variable], shape: tuple[int, int]):
        total = cp.Constant(np.zeros(shape) if self.const is None else self.const)
        for term in self.terms:
            total = total + term.expression(variables[term.variable])
        return total

    def coefficient_magnitude(self) -> float:
        mags = [term.coefficient_magnitude() for term in self.terms]
        if self.const is not None:
            mags.append(float(np.max(np.abs(self.const), initial=0.0)))
        return max(mags, default=0.0)


@dataclass(eq=False)
class LmiConstraint:
    """Symmetric block matrix required to be PSD.

    Only blocks on and above the diagonal are stored; the lower triangle is
    their transpose and absent blocks are zero.
    """

    name: str
    sizes: list[int]
    blocks: dict[tuple[int, int], AffineBlock] = field(default_factory=dict)

    def put(self, row: int, col: int, block: AffineBlock) -> None:
        if row > col:
            raise ValueError("store blocks on or above the diagonal only")
        self.blocks[(row, col)] = block

    @property
    def dim(self) -> int:
        return sum(self.sizes)

    def evaluate(self, assignment: dict[str, np.ndarray]) -> np.ndarray:
        n = len(self.sizes)
        rows = []
        for i in range(n):
            row = []
            for j in range(n):
                if i <= j:
                    block = self.blocks.get((i, j))
                    value = (
                        np.zeros((self.sizes[i], self.sizes[j]))
                        if block is None
                        else block.evaluate(assignment, (self.sizes[i], self.sizes[j]))
                    )
                else:
                    block = self.blocks.get((j, i))
                    value = (
                        np.zeros((self.sizes[i], self.sizes[j]))
                        if block is None
                        else block.evaluate(assignment, (self.sizes[j], self.sizes[i])).T
                    )
                row.append(value)
            rows.append(row)
        return symmetrize(np.block(rows))

    def expression(self, variables: dict[str, cp.Variable]):
        n = len(self.sizes)
        upper = {
            key: block.expression(variables, (self.sizes[key[0]], self.sizes[key[1]]))
            for key, block in self.blocks.items()
        }
        rows = []
        for i in range(n):
            row = []
            for j in range(n):
                if (i, j) in upper:
                    row.append(upper[(i, j)])
                elif (j, i) in upper:
                    row.append(upper[(j, i)].T)
                else:
                    row.append(np.zeros((self.sizes[i], self.sizes[j])))
            rows.append(row)
        M = cp.bmat(rows)
        return 0.5 * (M + M.T)

    def coefficient_magnitude(self) -> float:
        return max((b.coefficient_magnitude() for b in self.blocks.values()), default=0.0)

    def variables(self) -> set[str]:
        return {t.variable for b in self.blocks.values() for t in b.terms}


@dataclass(frozen=True)
class Objective:
    """``feasibility`` or ``max_trace`` of ``variable``."""

    kind: str = "feasibility"
    variable: Optional[str] = None


@dataclass(eq=False)
class SdpProblem:
    """Variables, LMI constraints and objective."""

    variables: dict[str, MatrixVariable] = field(default_factory=dict)
    constraints: list[LmiConstraint] = field(default_factory=list)
    objective: Objective = field(default_factory=Objective)

    def add_variable(self, name: str, shape: tuple[int, int], symmetric: bool = False) -> str:
        if name in self.variables:
            raise ValueError(f"variable '{name}' declared twice")
        if symmetric and shape[0] != shape[1]:
            raise ValueError(f"symmetric variable '{name}' must be square")
        self.variables[name] = MatrixVariable(name, shape, symmetric)
        return name

    def add_constraint(self, constraint: LmiConstraint) -> LmiConstraint:
        self.constraints.append(constraint)
        return constraint

    def validate(self) -> list[str]:
        """Check variable references, block shapes and diagonal-block symmetry.

        Returns:
            List of problems (empty if valid)
        """
        errors = []
        for constraint in self.constraints:
            missing = constraint.variables() - set(self.variables)
            if missing:
                errors.append(f"{constraint.name}: undeclared variables {sorted(missing)}")
        if self.objective.kind not in ("feasibility", "max_trace"):
            errors.append(f"unknown objective kind '{self.objective.kind}'")
        if self.objective.kind == "max_trace" and self.objective.variable not in self.variables:
            errors.append("objective refers to an undeclared variable")
        if errors:
            return errors

        rng = np.random.default_rng(0)
        sample = {name: _random_value(var, rng) for name, var in self.variables.items()}
        for constraint in self.constraints:
            for (i, j), block in constraint.blocks.items():
                shape = (constraint.sizes[i], constraint.sizes[j])
                try:
                    value = block.evaluate(sample, shape)
                except ValueError as exc:
                    errors.append(f"{constraint.name}[{i},{j}]: {exc}")
                    continue
                if value.shape != shape:
                    errors.append(f"{constraint.name}[{i},{j}]: shape {value.shape}, expected {shape}")
                elif i == j and not np.allclose(value, value.T, atol=1e-9 * max(1.0, np.abs(value).max())):
                    errors.append(f"{constraint.name}[{i},{i}]: diagonal block is not symmetric")
        return errors

    @property
    def size(self) -> tuple[int, int]:
        """(scalar unknowns, total LMI dimension)."""
        unknowns = sum(
            v.shape[0] * (v.shape[0] + 1) // 2 if v.symmetric else v.shape[0] * v.shape[1]
            for v in self.variables.values()
        )
        return unknowns, sum(c.dim for c in self.constraints)


def _random_value(var: MatrixVariable, rng: np.random.Generator) -> np.ndarray:
    value = rng.standard_normal(var.shape)
    return symmetrize(value) if var.symmetric else value


@dataclass
class VerifyReport:
    """Per-constraint minimum eigenvalues of an assignment."""

    margins: dict[str, float]
    scales: dict[str, float]

    @property
    def min_margin(self) -> float:
        return min(self.margins.values(), default=float("inf"))

    def passed(self, tol: float = VERIFY_TOL) -> bool:
        return all(self.margins[name] >= -tol * self.scales[name] for name in self.margins)


@dataclass
class SdpSolution:
    """Solver outcome."""

    status: SdpStatus
    assignment: dict[str, np.ndarray] = field(default_factory=dict)
    objective_value: Optional[float] = None
    min_eigenvalue_margin: Optional[float] = None
    iterations: Optional[int] = None
    solve_time: Optional[float] = None
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.status in (SdpStatus.OPTIMAL, SdpStatus.FEASIBLE)

    def diagnostic(self) -> str:
        return (
            f"status={self.status.value} iterations={self.iterations} "
            f"margin={self.min_eigenvalue_margin} {self.message}".strip()
        )


def verify(problem: SdpProblem, assignment: dict[str, np.ndarray]) -> VerifyReport:
    """Minimum eigenvalue of every constraint under ``assignment``."""
    missing = set(problem.variables) - set(assignment)
    if missing:
        raise ValueError(f"assignment lacks variables {sorted(missing)}")
    margins, scales = {}, {}
    for index, constraint in enumerate(problem.constraints):
        key = f"{index}:{constraint.name}"
        M = constraint.evaluate(assignment)
        margins[key] = min_eigenvalue(M)
        scales[key] = max(1.0, float(np.max(np.abs(M), initial=0.0)))
    return VerifyReport(margins=margins, scales=scales)


def _solver_options(solver: str, tol: float) -> dict:
    if solver == "SCS":
        return {"eps_abs": tol, "eps_rel": tol, "max_iters": 200000}
    if solver == "CLARABEL":
        return {"tol_gap_abs": tol, "tol_gap_rel": tol, "tol_feas": tol}
    return {}


_INFEASIBLE = {cp.INFEASIBLE, cp.INFEASIBLE_INACCURATE}
_UNBOUNDED = {cp.UNBOUNDED, cp.UNBOUNDED_INACCURATE}
_OPTIMAL = {cp.OPTIMAL, cp.OPTIMAL_INACCURATE}


def solve(problem: SdpProblem, tol: float = DEFAULT_TOL, solver: str = "CLARABEL") -> SdpSolution:
    """Solve an SdpProblem.

    Constraints are normalized by their largest coefficient before solving.
    Optimal or feasible results are re-verified; an assignment that violates a
    constraint by more than 1e-7·scale is reported as a numerical failure.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    errors = problem.validate()
    if errors:
        raise ValueError("invalid SDP problem: " + "; ".join(errors))

    variables = {
        name: cp.Variable(var.shape, symmetric=var.symmetric, name=name)
        for name, var in problem.variables.items()
    }
    constraints = []
    for constraint in problem.constraints:
        magnitude = constraint.coefficient_magnitude()
        weight = 1.0 / magnitude if magnitude > 0 else 1.0
        constraints.append(weight * constraint.expression(variables) >> 0)

    if problem.objective.kind == "max_trace":
        objective = cp.Maximize(cp.trace(variables[problem.objective.variable]))
    else:
        objective = cp.Minimize(0)
    prob = cp.Problem(objective, constraints)

    unknowns, lmi_dim = problem.size
    started = time.perf_counter()
    try:
        prob.solve(solver=solver, **_solver_options(solver, tol))
    except cp.error.SolverError as exc:
        logger.debug("SDP solver error: %s", exc)
        return SdpSolution(
            status=SdpStatus.NUMERICAL_FAILURE,
            solve_time=time.perf_counter() - started,
            message=f"solver error: {exc}",
        )
    elapsed = time.perf_counter() - started
    iterations = getattr(prob.solver_stats, "num_iters", None)
    logger.debug(
        "SDP %s: %d unknowns, LMI dim %d, status %s, %s iterations, %.3fs",
        problem.objective.kind, unknowns, lmi_dim, prob.status, iterations, elapsed,
    )

    if prob.status in _INFEASIBLE:
        return SdpSolution(SdpStatus.INFEASIBLE, iterations=iterations, solve_time=elapsed)
    if prob.status in _UNBOUNDED:
        return SdpSolution(SdpStatus.UNBOUNDED, iterations=iterations, solve_time=elapsed)
    if prob.status not in _OPTIMAL:
        return SdpSolution(
            SdpStatus.NUMERICAL_FAILURE,
            iterations=iterations,
            solve_time=elapsed,
            message=f"solver status '{prob.status}'",
        )

    assignment = {}
    for name, var in variables.items():
        value = np.asarray(var.value, dtype=float).reshape(problem.variables[name].shape)
        assignment[name] = symmetrize(value) if problem.variables[name].symmetric else value

    objective_value = None
    if problem.objective.kind == "max_trace":
        objective_value = float(np.trace(assignment[problem.objective.variable]))
        if objective_value > UNBOUNDED_THRESHOLD:
            return SdpSolution(
                SdpStatus.UNBOUNDED,
                assignment=assignment,
                objective_value=objective_value,
                iterations=iterations,
                solve_time=elapsed,
            )

    report = verify(problem, assignment)
    if not report.passed():
        return SdpSolution(
            SdpStatus.NUMERICAL_FAILURE,
            assignment=assignment,
            objective_value=objective_value,
            min_eigenvalue_margin=report.min_margin,
            iterations=iterations,
            solve_time=elapsed,
            message=f"re-verification failed (solver status '{prob.status}')",
        )

    status = SdpStatus.OPTIMAL if problem.objective.kind == "max_trace" else SdpStatus.FEASIBLE
    return SdpSolution(
        status=status,
        assignment=assignment,
        objective_value=objective_value,
        min_eigenvalue_margin=report.min_margin,
        iterations=iterations,
        solve_time=elapsed,
    )


def dump(problem: SdpProblem, path: Path) -> Path:
    """Write the problem in a sparse block text format.

    Lines are ``constraint block_row block_col variable factor row col value``
    with factor one of const, left, right or scale (variable is ``-`` for
    constants). Header lines start with ``#``.
    """
    lines = ["# twochan sparse SDP dump"]
    lines.append(f"# objective {problem.objective.kind} {problem.objective.variable or '-'}")
    for var in problem.variables.values():
        kind = "sym" if var.symmetric else "full"
        lines.append(f"# variable {var.name} {var.shape[0]} {var.shape[1]} {kind}")
    for index, constraint in enumerate(problem.constraints):
        lines.append(f"# constraint {index} {constraint.name} blocks {' '.join(map(str, constraint.sizes))}")
    lines.append("# constraint block_row block_col variable factor row col value")

    def emit(index, i, j, name, factor, matrix):
        for r, c in zip(*np.nonzero(matrix)):
            lines.append(f"{index} {i} {j} {name} {factor} {r} {c} {float(matrix[r, c])!r}")

    for index, constraint in enumerate(problem.constraints):
        for (i, j), block in sorted(constraint.blocks.items()):
            if block.const is not None:
                emit(index, i, j, "-", "const", np.atleast_2d(block.const))
            for term in block.terms:
                name = term.variable + ("'" if term.transpose else "")
                if term.scale is not None:
                    emit(index, i, j, name, "scale", term.scale)
                    continue
                if term.left is not None:
                    emit(index, i, j, name, "left", term.left)
                if term.right is not None:
                    emit(index, i, j, name, "right", term.right)
                if term.left is None and term.right is None:
                    lines.append(f"{index} {i} {j} {name} identity 0 0 1.0")

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path
