"""Deterministic invariant suite: closed forms, projection identities and orderings.

Every check is quadrature-only (no Monte Carlo) and finishes in seconds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .asymptotics import influence_functions, projection_matrices, bias_vector, variance_matrix
from .model import GaussianScaledMeanFamily
from .perturbation import TiltedDistribution, make_direction
from .problems import NewsvendorProblem


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    value: float
    tolerance: float
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.name}: {self.value:.3e} (tol {self.tolerance:.0e}) {self.detail}".rstrip()


def _instance(dim: int, theta0: float = 3.0, holding: float = 5.0, backlog: float = 1.0):
    problem = NewsvendorProblem(holding, backlog, dim)
    family = GaussianScaledMeanFamily(dim)
    return problem, family, influence_functions(problem, family, [theta0])


def check_sensitivity_closed_form(holding=5.0, backlog=1.0, theta0=3.0) -> list[CheckResult]:
    _, _, ifs = _instance(1, theta0, holding, backlog)
    m = ifs.matrices
    q = backlog / (holding + backlog)
    v = (holding + backlog) * stats.norm.pdf(stats.norm.ppf(q))
    phi = m.Sigma.T @ np.linalg.solve(m.V, m.Sigma)
    return [
        CheckResult("V closed form (d_z=1)", abs(m.V[0, 0] - v) < 1e-4, abs(m.V[0, 0] - v), 1e-4),
        CheckResult("Sigma = -V (d_z=1)", abs(m.Sigma[0, 0] + v) < 1e-4, abs(m.Sigma[0, 0] + v), 1e-4),
        CheckResult("Phi = Sigma^T V^-1 Sigma", float(np.abs(m.Phi - phi).max()) < 1e-8,
                    float(np.abs(m.Phi - phi).max()), 1e-8),
    ]


def check_variance_ordering(dims=(1, 2)) -> list[CheckResult]:
    out = []
    for dim in dims:
        _, _, ifs = _instance(dim)
        var = {k: variance_matrix(ifs, k) for k in ("SAA", "IEO", "ETO")}
        e1 = float(np.linalg.eigvalsh(var["SAA"] - var["IEO"]).min())
        e2 = float(np.linalg.eigvalsh(var["IEO"] - var["ETO"]).min())
        out.append(CheckResult(f"Var SAA - Var IEO PSD (d_z={dim})", e1 >= -1e-8, e1, 1e-8, "min eigenvalue"))
        out.append(CheckResult(f"Var IEO - Var ETO PSD (d_z={dim})", e2 >= -1e-8, e2, 1e-8, "min eigenvalue"))
        if dim == 1:
            gap = float(np.linalg.norm(var["IEO"] - var["SAA"]))
            out.append(CheckResult("Var IEO = Var SAA (square Sigma)", gap < 1e-8, gap, 1e-8))
    return out


def check_impactless(n_beta: int = 5, seed: int = 0) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    out = []
    for dim in (1, 2):
        _, family, ifs = _instance(dim)
        worst = 0.0
        for _ in range(n_beta):
            beta = rng.normal(size=family.param_dim)
            u = make_direction({"name": "score_linear", "beta": beta.tolist()}, family, [3.0])
            worst = max(worst, float(np.linalg.norm(bias_vector(ifs, u, "ETO"))),
                        float(np.linalg.norm(bias_vector(ifs, u, "IEO"))))
        out.append(CheckResult(f"score-span direction has zero bias (d_z={dim})", worst < 1e-8, worst, 1e-8))
    return out


def check_projections(n_points: int = 1000, seed: int = 0) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    out = []
    for dim in (1, 2):
        _, family, ifs = _instance(dim)
        proj = projection_matrices(ifs)
        z = family.sample([3.0], n_points, rng)
        idem = float(np.abs(proj.P @ proj.P - proj.P).max())
        ieo = float(np.abs(ifs("IEO", z) - proj.ieo_form(z)).max())
        eto = float(np.abs(ifs("ETO", z) - proj.eto_form(z)).max())
        out.append(CheckResult(f"P idempotent (d_z={dim})", idem < 1e-10, idem, 1e-10))
        out.append(CheckResult(f"IF^IEO = -V^-1 P grad c (d_z={dim})", ieo < 1e-10, ieo, 1e-10))
        out.append(CheckResult(f"IF^ETO = -V^-1 T grad c (d_z={dim})", eto < 1e-10, eto, 1e-10))
    return out


def check_exponential_constant(ts=(0.05, 0.1, 0.2)) -> list[CheckResult]:
    family = GaussianScaledMeanFamily(1)
    u = make_direction({"name": "linear", "gamma": [1.0]}, family, [3.0])
    worst = 0.0
    for t in ts:
        tilted = TiltedDistribution(family, [3.0], u, t, "exponential")
        worst = max(worst, abs(tilted.C - math.exp(t * t / 2)))
    return [CheckResult("exponential C_t = exp(t^2/2)", worst < 1e-6, worst, 1e-6)]


def check_tilted_optimum(t: float = 0.2) -> list[CheckResult]:
    """Mean-shift tilt: the tilted-law optimum is the oracle at the shifted mean."""
    family = GaussianScaledMeanFamily(1)
    problem = NewsvendorProblem(5.0, 1.0, 1)
    u = make_direction({"name": "linear", "gamma": [1.0]}, family, [3.0])
    tilted = TiltedDistribution(family, [3.0], u, t, "exponential")
    expected = 3.0 + t + stats.norm.ppf(problem.critical_ratio[0])
    err = abs(problem.optimum(tilted)[0] - expected)
    return [CheckResult("tilted optimum at shifted mean", err < 1e-3, err, 1e-3, "grid law")]


ALL_CHECKS = (
    check_sensitivity_closed_form,
    check_variance_ordering,
    check_impactless,
    check_projections,
    check_exponential_constant,
    check_tilted_optimum,
)


def run_checks() -> list[CheckResult]:
    return [r for check in ALL_CHECKS for r in check()]
