"""Decision problems min_w E[c(w, z)] and their sensitivity matrices at (w_theta0, theta0)."""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np
from scipy import optimize, stats

from .errors import AssumptionError, NumericError, SolverError
from .model import Distribution, GaussianScaledMeanFamily, ParametricFamily


class DecisionProblem(ABC):
    decision_dim: int

    @abstractmethod
    def cost(self, w, z) -> np.ndarray:
        """c(w, z) for z of shape (..., d_z); w broadcasts against z's leading axes."""

    @abstractmethod
    def grad_cost(self, w, z) -> np.ndarray:
        """Gradient of c in w, shape (..., d_w)."""

    def kinks(self, w):
        """Per-axis z locations where grad_cost jumps (for quadrature splitting)."""
        return None

    def expected_cost(self, dist: Distribution, w) -> float:
        w = np.asarray(w, dtype=float)
        val = float(dist.expect(lambda z: self.cost(w, z), breaks=self.kinks(w)))
        if not np.isfinite(val):
            raise NumericError("non-finite expected cost")
        return val

    def minimize_expected(self, dist: Distribution, w0) -> np.ndarray:
        res = optimize.minimize(
            lambda w: self.expected_cost(dist, w), np.asarray(w0, dtype=float), method="Nelder-Mead",
            options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 20000},
        )
        if not res.success:
            raise SolverError(f"expected-cost minimization failed: {res.message}")
        return res.x

    def optimum(self, dist: Distribution, w0=None) -> np.ndarray:
        """argmin_w E_dist[c(w, z)]."""
        if w0 is None:
            w0 = np.array([dist.marginal_mean(j) for j in range(dist.dim)])
        return self.minimize_expected(dist, w0)

    def oracle_solution(self, family: ParametricFamily, theta) -> np.ndarray:
        return self.optimum(family.at(theta))

    def oracle_batch(self, family: ParametricFamily, thetas) -> np.ndarray:
        """Oracle decisions for a batch of parameters, shape (k, d_w)."""
        thetas = np.asarray(thetas, dtype=float).reshape(-1, family.param_dim)
        return np.array([self.oracle_solution(family, th) for th in thetas])

    def hessian(self, dist: Distribution, w) -> np.ndarray:
        """Central finite-difference Hessian of the expected cost."""
        return fd_hessian(lambda x: self.expected_cost(dist, x), w)

    def empirical_objective(self, data: np.ndarray):
        """Callable mapping a batch of decisions (k, d_w) to mean empirical costs (k,)."""
        data = np.asarray(data, dtype=float)

        def f(ws):
            ws = np.atleast_2d(ws)
            return np.array([self.cost(w, data).mean() for w in ws])

        return f

    def saa_solution(self, data: np.ndarray) -> np.ndarray:
        data = np.asarray(data, dtype=float)
        f = self.empirical_objective(data)
        res = optimize.minimize(lambda w: float(f(w[None])[0]), data.mean(axis=0), method="Nelder-Mead")
        return res.x


def fd_hessian(f, w, rel_step: float = 1e-4) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    d = w.size
    h = rel_step * (1.0 + np.abs(w))
    H = np.empty((d, d))
    f0 = f(w)
    for i in range(d):
        ei = np.zeros(d)
        ei[i] = h[i]
        H[i, i] = (f(w + ei) - 2.0 * f0 + f(w - ei)) / h[i] ** 2
        for k in range(i):
            ek = np.zeros(d)
            ek[k] = h[k]
            H[i, k] = H[k, i] = (
                f(w + ei + ek) - f(w + ei - ek) - f(w - ei + ek) + f(w - ei - ek)
            ) / (4.0 * h[i] * h[k])
    return H


class NewsvendorProblem(DecisionProblem):
    """c(w, z) = a^T (w - z)^+ + d^T (z - w)^+ with separable components.

    At a kink (z_j == w_j) the gradient takes the overage value a_j.
    """

    def __init__(self, holding, backlog, dim: int | None = None):
        a = np.asarray(holding, dtype=float)
        d = np.asarray(backlog, dtype=float)
        if dim is not None:
            a = np.broadcast_to(a, (dim,)).copy()
            d = np.broadcast_to(d, (dim,)).copy()
        a, d = np.atleast_1d(a), np.atleast_1d(d)
        if a.shape != d.shape:
            raise ValueError("holding and backlog costs must have equal length")
        if np.any(a <= 0) or np.any(d <= 0):
            raise ValueError("newsvendor costs must be positive")
        self.a, self.d = a, d
        self.decision_dim = a.size

    def __repr__(self):
        return f"NewsvendorProblem(a={self.a.tolist()}, d={self.d.tolist()})"

    @property
    def critical_ratio(self) -> np.ndarray:
        return self.d / (self.a + self.d)

    def cost(self, w, z):
        r = np.asarray(w, dtype=float) - np.asarray(z, dtype=float)
        return (self.a * np.maximum(r, 0.0) + self.d * np.maximum(-r, 0.0)).sum(axis=-1)

    def grad_cost(self, w, z):
        w = np.asarray(w, dtype=float)
        z = np.asarray(z, dtype=float)
        return np.where(z <= w, self.a, -self.d)

    def kinks(self, w):
        return [[float(x)] for x in np.asarray(w, dtype=float).reshape(-1)]

    def expected_cost(self, dist, w):
        w = np.asarray(w, dtype=float).reshape(self.decision_dim)
        total = 0.0
        for j in range(self.decision_dim):
            over = float(dist.partial_expectation(j, w[j]))
            under = over - (w[j] - dist.marginal_mean(j))
            total += self.a[j] * over + self.d[j] * under
        return total

    def optimum(self, dist, w0=None):
        q = self.critical_ratio
        return np.array([dist.marginal_ppf(j, q[j]) for j in range(self.decision_dim)])

    def oracle_batch(self, family, thetas):
        if isinstance(family, GaussianScaledMeanFamily):
            thetas = np.asarray(thetas, dtype=float).reshape(-1, 1)
            return thetas * family.scales + stats.norm.ppf(self.critical_ratio)
        return super().oracle_batch(family, thetas)

    def hessian(self, dist, w):
        w = np.asarray(w, dtype=float).reshape(self.decision_dim)
        dens = np.array([float(dist.marginal_pdf(j, w[j])) for j in range(self.decision_dim)])
        return np.diag((self.a + self.d) * dens)

    def empirical_objective(self, data):
        """Mean empirical cost via sorted data and prefix sums (O(log n) per decision)."""
        data = np.asarray(data, dtype=float).reshape(-1, self.decision_dim)
        n = data.shape[0]
        cols = [np.sort(data[:, j]) for j in range(self.decision_dim)]
        prefix = [np.concatenate([[0.0], np.cumsum(c)]) for c in cols]
        totals = [p[-1] for p in prefix]

        def f(ws):
            ws = np.atleast_2d(np.asarray(ws, dtype=float))
            out = np.zeros(ws.shape[0])
            for j in range(self.decision_dim):
                x = ws[:, j]
                k = np.searchsorted(cols[j], x, side="right")
                below = prefix[j][k]
                over = k * x - below
                under = (totals[j] - below) - (n - k) * x
                out += self.a[j] * over + self.d[j] * under
            return out / n

        return f

    def saa_solution(self, data):
        """Componentwise order statistic ceil(n q_j): the smallest empirical minimizer."""
        data = np.asarray(data, dtype=float).reshape(-1, self.decision_dim)
        n = data.shape[0]
        idx = np.ceil(n * self.critical_ratio - 1e-9).astype(int)
        idx = np.clip(idx, 1, n) - 1
        return np.array([np.partition(data[:, j], idx[j])[idx[j]] for j in range(self.decision_dim)])


def make_problem(spec: dict) -> NewsvendorProblem:
    spec = dict(spec)
    kind = spec.get("kind", "newsvendor")
    if kind != "newsvendor":
        raise ValueError(f"unknown problem kind {kind!r}")
    return NewsvendorProblem(spec.get("holding", 5.0), spec.get("backlog", 1.0), spec.get("dim"))


# --------------------------------------------------------------------------- module-level operations


def cost(problem: DecisionProblem, w, z):
    return problem.cost(w, z)


def grad_cost(problem: DecisionProblem, w, z):
    return problem.grad_cost(w, z)


def oracle_solution(problem: DecisionProblem, family: ParametricFamily, theta) -> np.ndarray:
    return problem.oracle_solution(family, theta)


def expected_cost(problem: DecisionProblem, dist: Distribution, w) -> float:
    return problem.expected_cost(dist, w)


# --------------------------------------------------------------------------- sensitivity matrices


@dataclass(frozen=True)
class SensitivityMatrices:
    V: np.ndarray
    Sigma: np.ndarray
    I: np.ndarray
    Phi: np.ndarray
    w0: np.ndarray
    theta0: np.ndarray

    @property
    def grad_w_theta(self) -> np.ndarray:
        """d w_theta / d theta at theta0, shape (d_theta, d_w)."""
        return -self.Sigma.T @ np.linalg.inv(self.V)

    def to_dict(self) -> dict:
        return {
            "V": self.V.tolist(),
            "Sigma": self.Sigma.tolist(),
            "I": self.I.tolist(),
            "Phi": self.Phi.tolist(),
            "w0": self.w0.tolist(),
            "theta0": self.theta0.tolist(),
        }


def sigma_by_quadrature(problem: DecisionProblem, family: ParametricFamily, theta0, w0) -> np.ndarray:
    """E_theta0[grad_w c(w0, z) s_theta0(z)^T], split at the cost kinks."""
    nodes, weights = family.quadrature_rule(theta0, breaks=problem.kinks(w0))
    g = problem.grad_cost(w0, nodes)
    s = family.score(theta0, nodes)
    return np.einsum("n,ni,nk->ik", weights, g, s)


def sensitivity_matrices(problem: DecisionProblem, family: ParametricFamily, theta0) -> SensitivityMatrices:
    theta0 = np.asarray(theta0, dtype=float).reshape(family.param_dim)
    base = family.at(theta0)
    w0 = problem.oracle_solution(family, theta0)
    V = np.atleast_2d(problem.hessian(base, w0))
    Sigma = sigma_by_quadrature(problem, family, theta0, w0)
    I = np.atleast_2d(family.fisher_information(theta0))
    if not np.all(np.isfinite(V)) or np.min(np.linalg.eigvalsh(0.5 * (V + V.T))) <= 0:
        raise AssumptionError("V is not positive definite")
    if np.linalg.matrix_rank(Sigma, tol=1e-10 * max(1.0, np.abs(Sigma).max())) < min(Sigma.shape):
        raise AssumptionError("Sigma is rank deficient")
    Phi = Sigma.T @ np.linalg.solve(V, Sigma)
    return SensitivityMatrices(V, Sigma, I, Phi, w0, theta0)
