"""Data-to-decision pipelines: SAA, ETO (MLE then plug-in) and IEO (decision-aware fit)."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .model import ParametricFamily, _check_data
from .optimize import golden_section, scan_bracket
from .problems import DecisionProblem

IEO_GRID_POINTS = 401
IEO_TOL = 1e-10


class Method(str, enum.Enum):
    SAA = "SAA"
    ETO = "ETO"
    IEO = "IEO"


@dataclass(frozen=True)
class PipelineResult:
    method: Method
    decision: np.ndarray
    theta: np.ndarray | None = None
    diagnostics: dict = field(default_factory=dict)


def fit_saa(problem: DecisionProblem, data) -> PipelineResult:
    data = _as_data(problem, data)
    w = problem.saa_solution(data)
    return PipelineResult(Method.SAA, np.asarray(w, dtype=float))


def fit_eto(problem: DecisionProblem, family: ParametricFamily, data) -> PipelineResult:
    data = _as_data(problem, data, family.data_dim)
    theta = family.mle_fit(data)
    return PipelineResult(Method.ETO, problem.oracle_solution(family, theta), theta)


def ieo_objective(problem: DecisionProblem, family: ParametricFamily, data):
    """theta-batch -> mean empirical cost of the oracle decision w_theta."""
    emp = problem.empirical_objective(data)

    def f(thetas):
        return emp(problem.oracle_batch(family, np.atleast_1d(np.asarray(thetas, dtype=float))))

    return f


def fit_ieo(
    problem: DecisionProblem,
    family: ParametricFamily,
    data,
    half_width: float | None = None,
    grid_points: int = IEO_GRID_POINTS,
    tol: float = IEO_TOL,
) -> PipelineResult:
    """argmin_theta (1/n) sum_i c(w_theta, z_i) for scalar theta.

    A coarse scan (widened while its minimum sits on the boundary) brackets the
    minimizer, golden section refines it, and a final bisection moves to the
    left end of any flat stretch so ties resolve to the smallest theta.
    """
    if family.param_dim != 1:
        raise NotImplementedError("IEO search is implemented for scalar theta")
    data = _as_data(problem, data, family.data_dim)
    obj = ieo_objective(problem, family, data)
    scalar = lambda th: float(obj(th)[0])
    theta_eto = float(family.mle_fit(data)[0])
    if half_width is None:
        scales = getattr(family, "scales", np.ones(family.data_dim))
        half_width = 10.0 / float(np.sqrt(np.sum(np.asarray(scales) ** 2)))
    lo, hi, grid, vals = scan_bracket(obj, theta_eto, half_width, points=grid_points)
    gs = golden_section(scalar, lo, hi, tol=tol)
    # candidates: refined point, best grid point, the ETO fit (same model class)
    cands = [(gs.fun, gs.x), (float(vals.min()), float(grid[np.argmin(vals)])), (scalar(theta_eto), theta_eto)]
    fbest, tbest = min(cands)
    tbest = _leftmost_level(scalar, fbest, tbest, grid, vals, tol)
    theta = np.array([tbest])
    return PipelineResult(
        Method.IEO,
        problem.oracle_solution(family, theta),
        theta,
        {"iterations": gs.iterations, "objective": scalar(tbest), "bracket": (lo, hi)},
    )


def _leftmost_level(f, fbest, x, grid, vals, tol, slack=1e-13):
    """Left end of the (convex) level set {f <= fbest + slack} containing ``x``.

    The scan grid locates the first grid point left of the set; bisection then
    resolves the boundary between it and the set.
    """
    level = fbest + slack * max(1.0, abs(fbest))
    k = int(np.searchsorted(grid, x, side="right"))
    while k > 0 and vals[k - 1] <= level:
        k -= 1
    b = min(x, float(grid[k])) if k < grid.size and vals[k] <= level else x
    a = float(grid[k - 1]) if k > 0 else float(grid[0]) - (grid[-1] - grid[0])
    while f(a) <= level:
        a -= b - a + tol
    while b - a > tol:
        m = 0.5 * (a + b)
        if f(m) <= level:
            b = m
        else:
            a = m
    return b


def fit_all(problem, family, data) -> dict[Method, PipelineResult]:
    return {
        Method.SAA: fit_saa(problem, data),
        Method.ETO: fit_eto(problem, family, data),
        Method.IEO: fit_ieo(problem, family, data),
    }


def _as_data(problem, data, d=None) -> np.ndarray:
    return _check_data(data, problem.decision_dim if d is None else d)
