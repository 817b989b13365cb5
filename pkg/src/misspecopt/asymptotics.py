"""Influence functions, projection forms, misspecification biases and limit regrets.

Every expectation here is under the model point P_theta0 and is computed with
the kink-split quadrature rule, since influence functions inherit the jumps of
the newsvendor gradient.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import AssumptionError
from .estimators import Method
from .model import ParametricFamily
from .perturbation import Direction, Regime
from .problems import DecisionProblem, SensitivityMatrices, sensitivity_matrices

ORDER_TOL = 1e-8


@dataclass(frozen=True)
class InfluenceFunctionSet:
    """IF^SAA, IF^IEO and IF^ETO for one (problem, family, theta0)."""

    problem: DecisionProblem
    family: ParametricFamily
    matrices: SensitivityMatrices

    def grad_theta_cost(self, z) -> np.ndarray:
        """Chain rule: grad_theta c(w_theta, z) = (d w_theta / d theta) grad_w c, shape (N, d_theta)."""
        g = self.problem.grad_cost(self.matrices.w0, z)
        return g @ self.matrices.grad_w_theta.T

    def __call__(self, method: Method | str, z) -> np.ndarray:
        m = self.matrices
        method = Method(method)
        z = np.atleast_2d(np.asarray(z, dtype=float))
        if method is Method.SAA:
            g = self.problem.grad_cost(m.w0, z)
            return -np.linalg.solve(m.V, g.T).T
        if method is Method.IEO:
            coef = np.linalg.solve(m.V, m.Sigma) @ np.linalg.inv(m.Phi)
            return self.grad_theta_cost(z) @ coef.T
        s = self.family.score(m.theta0, z)
        coef = np.linalg.solve(m.V, m.Sigma) @ np.linalg.inv(m.I)
        return -s @ coef.T

    def rule(self):
        return self.family.quadrature_rule(
            self.matrices.theta0, breaks=self.problem.kinks(self.matrices.w0)
        )


def influence_functions(problem, family, theta0, matrices=None) -> InfluenceFunctionSet:
    matrices = matrices or sensitivity_matrices(problem, family, theta0)
    return InfluenceFunctionSet(problem, family, matrices)


def influence_function(ifs: InfluenceFunctionSet, method, z) -> np.ndarray:
    return ifs(method, z)


# --------------------------------------------------------------------------- projections


@dataclass(frozen=True)
class Projections:
    P: np.ndarray
    ifs: InfluenceFunctionSet

    def T(self, f, z) -> np.ndarray:
        """Project f onto {A s_theta0}: E[f s^T] I^{-1} s(z), moments by quadrature."""
        m = self.ifs.matrices
        nodes, weights = self.ifs.rule()
        fs = np.einsum("n,ni,nk->ik", weights, f(nodes), self.ifs.family.score(m.theta0, nodes))
        return self.ifs.family.score(m.theta0, np.atleast_2d(z)) @ (fs @ np.linalg.inv(m.I)).T

    def ieo_form(self, z) -> np.ndarray:
        m = self.ifs.matrices
        g = self.ifs.problem.grad_cost(m.w0, np.atleast_2d(z))
        return -np.linalg.solve(m.V, self.P @ g.T).T

    def eto_form(self, z) -> np.ndarray:
        m = self.ifs.matrices
        grad = lambda x: self.ifs.problem.grad_cost(m.w0, x)
        return -np.linalg.solve(m.V, self.T(grad, z).T).T


def projection_matrices(ifs: InfluenceFunctionSet) -> Projections:
    """P = Sigma (Sigma^T V^-1 Sigma)^-1 Sigma^T V^-1 and the score-span projector."""
    m = ifs.matrices
    Vinv_S = np.linalg.solve(m.V, m.Sigma)
    gram = m.Sigma.T @ Vinv_S
    if np.linalg.cond(gram) > 1e12:
        raise AssumptionError("Sigma^T V^-1 Sigma is singular")
    P = m.Sigma @ np.linalg.solve(gram, Vinv_S.T)
    return Projections(P, ifs)


# --------------------------------------------------------------------------- bias, variance, regret


def bias_vector(ifs: InfluenceFunctionSet, direction: Direction, method) -> np.ndarray:
    """E_theta0[u(z) (IF^m(z) - IF^SAA(z))]."""
    method = Method(method)
    d_w = ifs.matrices.w0.size
    if method is Method.SAA:
        return np.zeros(d_w)
    nodes, weights = ifs.rule()
    diff = ifs(method, nodes) - ifs(Method.SAA, nodes)
    b = (weights * direction(nodes)) @ diff
    if not np.all(np.isfinite(b)):
        raise ArithmeticError("non-finite bias quadrature")
    return b


def limit_regret(matrices: SensitivityMatrices, b) -> float:
    b = np.asarray(b, dtype=float)
    return 0.5 * float(b @ matrices.V @ b)


def variance_matrix(ifs: InfluenceFunctionSet, method) -> np.ndarray:
    nodes, weights = ifs.rule()
    f = ifs(method, nodes)
    mean = weights @ f
    c = f - mean
    cov = np.einsum("n,ni,nk->ik", weights, c, c)
    return 0.5 * (cov + cov.T)


def v_norm(matrices: SensitivityMatrices, b) -> float:
    b = np.asarray(b, dtype=float)
    return float(np.sqrt(max(b @ matrices.V @ b, 0.0)))


# --------------------------------------------------------------------------- report


def _chain_verdict(values: dict[str, float], order: list[str], tol: float = ORDER_TOL) -> dict:
    """Check values[order[0]] <= values[order[1]] <= ... with ties within tol."""
    links = []
    ok = True
    for lo, hi in zip(order[:-1], order[1:]):
        gap = values[hi] - values[lo]
        if abs(gap) <= tol:
            rel = "tied"
        elif gap > 0:
            rel = "<"
        else:
            rel = "violated"
            ok = False
        links.append({"lower": lo, "upper": hi, "gap": gap, "relation": rel})
    return {"order": order, "holds": ok, "links": links}


def _psd_chain(vars_: dict[str, np.ndarray], order: list[str], tol: float = ORDER_TOL) -> dict:
    """order lists methods from smallest to largest variance in the PSD sense."""
    links = []
    ok = True
    for lo, hi in zip(order[:-1], order[1:]):
        eig = float(np.min(np.linalg.eigvalsh(vars_[hi] - vars_[lo])))
        norm = float(np.linalg.norm(vars_[hi] - vars_[lo]))
        rel = "tied" if norm <= tol else ("<=" if eig >= -tol else "violated")
        ok &= rel != "violated"
        links.append({"lower": lo, "upper": hi, "min_eigenvalue": eig, "relation": rel})
    return {"order": order, "holds": ok, "links": links}


@dataclass
class AsymptoticReport:
    regime: Regime
    matrices: SensitivityMatrices
    direction: str
    direction_bias: dict[str, np.ndarray]
    bias: dict[str, np.ndarray]
    limit_regret: dict[str, float]
    variance: dict[str, np.ndarray]
    noise_regret: dict[str, float]
    verdicts: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "regime": self.regime.value,
            "direction": self.direction,
            "matrices": self.matrices.to_dict(),
            "direction_bias": {k: v.tolist() for k, v in self.direction_bias.items()},
            "bias": {k: v.tolist() for k, v in self.bias.items()},
            "limit_regret": self.limit_regret,
            "variance": {k: v.tolist() for k, v in self.variance.items()},
            "noise_regret": self.noise_regret,
            "verdicts": self.verdicts,
        }


def asymptotic_report(
    problem: DecisionProblem,
    family: ParametricFamily,
    theta0,
    direction: Direction,
    regime: Regime | str,
    ifs: InfluenceFunctionSet | None = None,
) -> AsymptoticReport:
    """Biases, variances and limit regrets with the ordering verdicts for one regime.

    ``direction_bias`` holds b^m for the direction; ``bias`` is the effective
    limit bias in this regime (zero under mild misspecification).
    ``noise_regret`` is E[1/2 N^T V N] = 1/2 tr(V Var(IF)).
    """
    regime = Regime(regime)
    ifs = ifs or influence_functions(problem, family, theta0)
    m = ifs.matrices
    names = [x.value for x in Method]
    b = {k: bias_vector(ifs, direction, k) for k in names}
    var = {k: variance_matrix(ifs, k) for k in names}
    eff = {k: (np.zeros_like(v) if regime is Regime.MILD else v) for k, v in b.items()}
    R = {k: limit_regret(m, v) for k, v in eff.items()}
    noise = {k: 0.5 * float(np.trace(m.V @ var[k])) for k in names}
    bias_norms = {k: v_norm(m, v) for k, v in b.items()}

    verdicts = {
        "bias": _chain_verdict(bias_norms, ["SAA", "IEO", "ETO"]),
        "variance": _psd_chain(var, ["ETO", "IEO", "SAA"]),
    }
    if regime is Regime.SEVERE:
        verdicts["regret"] = _chain_verdict(R, ["SAA", "IEO", "ETO"])
    elif regime is Regime.MILD:
        verdicts["regret"] = _chain_verdict(noise, ["ETO", "IEO", "SAA"])
    else:
        total = {k: noise[k] + R[k] for k in names}
        verdicts["regret_decomposition"] = {
            k: {"noise": noise[k], "bias": R[k], "total": total[k]} for k in names
        }
        verdicts["noise_part"] = _chain_verdict(noise, ["ETO", "IEO", "SAA"])
        verdicts["bias_part"] = _chain_verdict(R, ["SAA", "IEO", "ETO"])
        verdicts["lowest_expected_limit_regret"] = min(total, key=total.get)
    return AsymptoticReport(regime, m, direction.name, b, eff, R, var, noise, verdicts)
