"""Tikhonov-regularized variational baseline with L-curve parameter selection.

The objective is T(x) = ||H(x) - y||^2_{R^-1} + alpha ||x||^2_C with gradient
2 [dH(x)]^T R^-1 (H(x) - y) + 2 alpha C x; the factor-2 convention keeps the
pair mutually consistent. Linear operators are minimized by matrix-free
conjugate gradients on the normal equations; nonlinear ones by Polak-Ribiere
conjugate gradients with a backtracking line search. The contract in both
cases is the gradient norm at the returned point.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateCurveWarning, DimensionMismatch
from .linalg_rng import SpdMatrix

DEFAULT_ALPHA_GRID = np.logspace(-6.0, 2.0, 30)


def discrete_laplacian(rows, cols, epsilon=1e-3):
    """Grid-graph Laplacian plus epsilon * I: an SPD roughness penalty.

    ||x||^2_C sums squared differences between 4-neighbors, so the penalty
    targets gradients instead of the image's mean level.
    """
    n = rows * cols
    lap = np.zeros((n, n))
    for i in range(rows):
        for j in range(cols):
            k = i * cols + j
            for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                ii, jj = i + di, j + dj
                if 0 <= ii < rows and 0 <= jj < cols:
                    kk = ii * cols + jj
                    lap[k, k] += 1.0
                    lap[k, kk] -= 1.0
    return SpdMatrix.from_dense(lap + epsilon * np.eye(n))


@dataclass(frozen=True)
class TikhonovProblem:
    operator: object
    y: np.ndarray
    obs_cov: object  # SpdMatrix, order m
    reg_matrix: object  # SpdMatrix C, order n_var
    alpha: float

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float).reshape(-1)
        object.__setattr__(self, "y", y)
        if self.operator.out_dim != y.size or self.obs_cov.order != y.size:
            raise DimensionMismatch("operator output, y, and R must agree")
        if self.reg_matrix.order != self.operator.in_dim:
            raise DimensionMismatch("C order must equal the state dimension")
        if self.alpha < 0.0:
            raise ValueError("alpha must be non-negative")

    def with_alpha(self, alpha):
        return TikhonovProblem(self.operator, self.y, self.obs_cov, self.reg_matrix, alpha)


def tikhonov_objective(problem, x):
    """Objective value and exact gradient at x."""
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size != problem.operator.in_dim:
        raise DimensionMismatch(f"state length {x.size} != {problem.operator.in_dim}")
    residual = problem.operator.apply(x) - problem.y
    rinv_residual = problem.obs_cov.solve(residual)
    cx = problem.reg_matrix.matvec(x)
    value = float(residual @ rinv_residual) + problem.alpha * float(x @ cx)
    grad = 2.0 * problem.operator.adjoint_jacobian_apply(x, rinv_residual)
    grad += 2.0 * problem.alpha * cx
    return value, grad


@dataclass
class TikhonovSolution:
    x: np.ndarray
    grad_norm: float
    iterations: int
    converged: bool


def _normal_matvec(problem, v):
    hv = problem.operator.apply(v)
    out = problem.operator.adjoint_jacobian_apply(v, problem.obs_cov.solve(hv))
    return 2.0 * (out + problem.alpha * problem.reg_matrix.matvec(v))


def _solve_linear_cg(problem, x0, tol, max_iter):
    # Minimize the quadratic by CG on grad(x) = A x - b = 0, matrix-free.
    x = x0.copy()
    _, grad = tikhonov_objective(problem, x)
    r = -grad
    d = r.copy()
    rs = float(r @ r)
    iterations = 0
    while np.sqrt(rs) > tol and iterations < max_iter:
        ad = _normal_matvec(problem, d)
        dad = float(d @ ad)
        if dad <= 0.0:
            break
        step = rs / dad
        x += step * d
        r -= step * ad
        rs_new = float(r @ r)
        d = r + (rs_new / rs) * d
        rs = rs_new
        iterations += 1
    return TikhonovSolution(x, float(np.sqrt(rs)), iterations, np.sqrt(rs) <= tol)


def _solve_nonlinear_cg(problem, x0, tol, max_iter):
    # Polak-Ribiere+ with backtracking Armijo line search and periodic restart.
    x = x0.copy()
    value, grad = tikhonov_objective(problem, x)
    d = -grad
    iterations = 0
    while np.linalg.norm(grad) > tol and iterations < max_iter:
        slope = float(grad @ d)
        if slope >= 0.0:
            d = -grad
            slope = float(grad @ d)
        step = 1.0
        for _ in range(60):
            candidate = x + step * d
            new_value, new_grad = tikhonov_objective(problem, candidate)
            if new_value <= value + 1e-4 * step * slope:
                break
            step *= 0.5
        else:
            break
        beta = float(new_grad @ (new_grad - grad)) / max(float(grad @ grad), 1e-300)
        beta = max(0.0, beta)
        x, value = candidate, new_value
        d = -new_grad + beta * d
        grad = new_grad
        iterations += 1
        if iterations % (2 * x.size) == 0:
            d = -grad
    return TikhonovSolution(x, float(np.linalg.norm(grad)), iterations, np.linalg.norm(grad) <= tol)


def solve_tikhonov(problem, x0=None, *, grad_tol_rel=1e-8, max_iter=None):
    """Minimize the Tikhonov objective from x0.

    Converges when the gradient norm falls to grad_tol_rel times
    max(1, ||grad(x0)||). Exhausting the iteration budget returns the best
    iterate with ``converged=False``.
    """
    n = problem.operator.in_dim
    x0 = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float).reshape(-1)
    if x0.size != n:
        raise DimensionMismatch(f"x0 length {x0.size} != {n}")
    if not np.all(np.isfinite(x0)):
        raise ValueError("x0 must be finite")
    _, grad0 = tikhonov_objective(problem, x0)
    tol = grad_tol_rel * max(1.0, float(np.linalg.norm(grad0)))
    if max_iter is None:
        max_iter = max(200, 10 * n)
    if problem.operator.linear:
        return _solve_linear_cg(problem, x0, tol, max_iter)
    return _solve_nonlinear_cg(problem, x0, tol, max_iter)


@dataclass
class LCurvePoint:
    alpha: float
    residual_norm: float  # ||H(x) - y||_{R^-1}
    solution_norm: float  # ||x||_C
    curvature: float


@dataclass
class LCurveSelection:
    alpha: float
    points: list
    degenerate: bool
    solutions: dict  # alpha -> TikhonovSolution


def lcurve_select_alpha(problem, alphas=None, *, x0=None, solver_options=None):
    """Pick the regularization weight at the L-curve's sharpest corner.

    Solves the problem per grid alpha (warm-started along the grid), builds
    the (log residual-norm, log solution-norm) curve, scores interior points
    by three-point Menger curvature, and returns the curvature maximizer
    (ties toward larger alpha). A curvature range below 1e-12 degenerates to
    the grid midpoint with a warning.
    """
    alphas = DEFAULT_ALPHA_GRID if alphas is None else np.asarray(alphas, dtype=float)
    if alphas.size < 1:
        raise ValueError("alpha grid must be non-empty")
    solver_options = solver_options or {}
    # Solve from the best-conditioned (largest) alpha down, warm-starting
    # each solve from its neighbor; report points in grid order.
    order = np.argsort(-alphas, kind="stable")
    points = [None] * alphas.size
    solutions = {}
    warm = x0
    for idx in order:
        sub = problem.with_alpha(float(alphas[idx]))
        sol = solve_tikhonov(sub, warm, **solver_options)
        warm = sol.x
        residual = sub.operator.apply(sol.x) - sub.y
        res_norm = float(np.sqrt(residual @ sub.obs_cov.solve(residual)))
        sol_norm = float(np.sqrt(sol.x @ sub.reg_matrix.matvec(sol.x)))
        points[idx] = LCurvePoint(float(alphas[idx]), res_norm, sol_norm, 0.0)
        solutions[float(alphas[idx])] = sol

    unique_alphas = {p.alpha for p in points}
    if len(unique_alphas) == 1:
        return LCurveSelection(points[0].alpha, points, False, solutions)

    floor = np.finfo(float).tiny
    xs = np.log(np.maximum([p.residual_norm for p in points], floor))
    ys = np.log(np.maximum([p.solution_norm for p in points], floor))
    for j in range(1, len(points) - 1):
        a = np.array([xs[j] - xs[j - 1], ys[j] - ys[j - 1]])
        b = np.array([xs[j + 1] - xs[j], ys[j + 1] - ys[j]])
        c = np.array([xs[j + 1] - xs[j - 1], ys[j + 1] - ys[j - 1]])
        la, lb, lc = np.linalg.norm(a), np.linalg.norm(b), np.linalg.norm(c)
        if la * lb * lc == 0.0:
            continue
        cross = a[0] * b[1] - a[1] * b[0]
        points[j].curvature = float(2.0 * cross / (la * lb * lc))

    curvatures = np.array([p.curvature for p in points])
    if np.max(curvatures) - np.min(curvatures) < 1e-12:
        warnings.warn(
            "L-curve curvature is flat; falling back to the grid midpoint",
            DegenerateCurveWarning,
        )
        mid = points[len(points) // 2]
        return LCurveSelection(mid.alpha, points, True, solutions)
    best = np.max(curvatures)
    # Ties break toward larger alpha; the grid is scanned in order.
    idx = max(j for j, p in enumerate(points) if p.curvature == best)
    return LCurveSelection(points[idx].alpha, points, False, solutions)


def lcurve_points_to_csv(points):
    lines = ["alpha,residual_norm,solution_norm,curvature"]
    for p in points:
        lines.append(f"{p.alpha!r},{p.residual_norm!r},{p.solution_norm!r},{p.curvature!r}")
    return "\n".join(lines) + "\n"
