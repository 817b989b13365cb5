"""Parametric families {P_theta} and distribution objects built from them."""

from __future__ import annotations

from abc import ABC, abstractmethod
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from . import quadrature
from .errors import DataError, DomainError, NumericError, SolverError
from .optimize import golden_section, scan_bracket

LOG_2PI = np.log(2.0 * np.pi)


class Distribution(ABC):
    """A law on R^{d_z} exposing the marginal functionals the decision layer needs."""

    dim: int

    @abstractmethod
    def marginal_mean(self, j: int) -> float: ...

    @abstractmethod
    def marginal_cdf(self, j: int, x) -> np.ndarray: ...

    @abstractmethod
    def marginal_pdf(self, j: int, x) -> np.ndarray: ...

    @abstractmethod
    def marginal_ppf(self, j: int, q: float) -> float: ...

    @abstractmethod
    def partial_expectation(self, j: int, x) -> np.ndarray:
        """E[(x - z_j)^+], vectorized over ``x``."""

    @abstractmethod
    def expect(self, f: Callable[[np.ndarray], np.ndarray], breaks=None) -> np.ndarray:
        """E[f(z)] by quadrature; ``breaks[j]`` lists kink locations on axis j."""

    @abstractmethod
    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray: ...


class ParametricFamily(ABC):
    """A family {P_theta} on a box support in R^{d_z}.

    Subclasses supply ``log_density``, ``score`` and ``sample``; Fisher
    information and MLE fall back to quadrature and numeric search.
    """

    param_dim: int
    data_dim: int

    @property
    def support(self) -> tuple[np.ndarray, np.ndarray]:
        return np.full(self.data_dim, -np.inf), np.full(self.data_dim, np.inf)

    def _check_points(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        if z.shape[-1] != self.data_dim:
            raise DomainError(f"expected trailing dimension {self.data_dim}, got shape {z.shape}")
        if np.any(np.isnan(z)):
            raise DomainError("NaN data point")
        lo, hi = self.support
        if np.any(z < lo) or np.any(z > hi):
            raise DomainError("point outside the family support")
        return z

    @abstractmethod
    def log_density(self, theta, z) -> np.ndarray: ...

    @abstractmethod
    def score(self, theta, z) -> np.ndarray:
        """Gradient of ``log_density`` in theta; shape (..., d_theta)."""

    @abstractmethod
    def sample(self, theta, n: int, rng: np.random.Generator) -> np.ndarray: ...

    @abstractmethod
    def quadrature_rule(self, theta, breaks=None, n: int = 64) -> tuple[np.ndarray, np.ndarray]:
        """Nodes/weights for expectations under P_theta."""

    def at(self, theta) -> Distribution:
        raise NotImplementedError

    def initial_guess(self, data: np.ndarray) -> np.ndarray:
        return np.zeros(self.param_dim)

    def fisher_information(self, theta, n: int = 64) -> np.ndarray:
        nodes, weights = self.quadrature_rule(theta, n=n)
        s = self.score(theta, nodes)
        info = np.einsum("n,ni,nj->ij", weights, s, s)
        if not np.all(np.isfinite(info)):
            raise NumericError("non-finite Fisher information")
        return info

    def mle_fit(self, data) -> np.ndarray:
        return self.mle_numeric(data)

    def mle_numeric(self, data, tol: float = 1e-10) -> np.ndarray:
        """Maximize the mean log-likelihood numerically.

        d_theta = 1: grid scan, golden section, then Newton polish on the mean
        score. d_theta > 1: damped Newton on the score equation.
        """
        data = _check_data(data, self.data_dim)

        def mean_score(th):
            return self.score(th, data).mean(axis=0)

        def score_jac(th, h=1e-6):
            cols = []
            for k in range(self.param_dim):
                e = np.zeros(self.param_dim)
                e[k] = h
                cols.append((mean_score(th + e) - mean_score(th - e)) / (2 * h))
            return np.stack(cols, axis=1)

        th = np.asarray(self.initial_guess(data), dtype=float).reshape(self.param_dim)
        if self.param_dim == 1:
            negll = lambda x: -float(self.log_density(np.array([x]), data).mean())
            lo, hi, _, _ = scan_bracket(
                lambda g: np.array([negll(x) for x in g]), float(th[0]), 10.0, points=81
            )
            th = np.array([golden_section(negll, lo, hi, tol=1e-9).x])
        for _ in range(100):
            g = mean_score(th)
            if np.linalg.norm(g) < tol:
                return th
            step = np.linalg.solve(score_jac(th), g)
            base = -float(self.log_density(th, data).mean())
            lam = 1.0
            while lam > 1e-8:
                cand = th - lam * step
                if -float(self.log_density(cand, data).mean()) <= base + 1e-14:
                    break
                lam *= 0.5
            th = th - lam * step
        if np.linalg.norm(mean_score(th)) < 1e-7:
            return th
        raise SolverError("MLE Newton iteration did not converge")


def _check_data(data, d: int) -> np.ndarray:
    data = np.asarray(data, dtype=float)
    if data.ndim == 1:
        data = data.reshape(-1, d) if d > 1 else data.reshape(-1, 1)
    if data.ndim != 2 or data.shape[1] != d:
        raise DataError(f"data must be (n, {d}), got {data.shape}")
    if data.shape[0] < 1:
        raise DataError("empty data")
    if not np.all(np.isfinite(data)):
        raise DataError("non-finite data")
    return data


class GaussianScaledMeanFamily(ParametricFamily):
    """Independent components z_j ~ N(j*theta, 1), j = 1..d_z, scalar theta."""

    param_dim = 1

    def __init__(self, data_dim: int):
        if data_dim < 1:
            raise ValueError("data_dim must be positive")
        self.data_dim = int(data_dim)
        self.scales = np.arange(1, self.data_dim + 1, dtype=float)

    def __repr__(self) -> str:
        return f"GaussianScaledMeanFamily(data_dim={self.data_dim})"

    def means(self, theta) -> np.ndarray:
        return self.scales * float(np.asarray(theta).reshape(-1)[0])

    def log_density(self, theta, z):
        z = self._check_points(z)
        r = z - self.means(theta)
        return -0.5 * np.sum(r * r, axis=-1) - 0.5 * self.data_dim * LOG_2PI

    def score(self, theta, z):
        z = self._check_points(z)
        r = z - self.means(theta)
        return (r @ self.scales)[..., None]

    def fisher_information(self, theta=None, n: int = 64):
        return np.array([[float(self.scales @ self.scales)]])

    def mle_fit(self, data):
        data = _check_data(data, self.data_dim)
        return np.array([float(self.scales @ data.mean(axis=0)) / float(self.scales @ self.scales)])

    def initial_guess(self, data):
        return np.array([float(np.mean(data[:, 0]))])

    def sample(self, theta, n: int, rng: np.random.Generator) -> np.ndarray:
        return self.means(theta) + rng.standard_normal((int(n), self.data_dim))

    def quadrature_rule(self, theta, breaks=None, n: int = 64):
        return quadrature.normal_product_rule(self.means(theta), 1.0, breaks, n=n)

    def at(self, theta) -> "GaussianPoint":
        return GaussianPoint(self, theta)


class GaussianPoint(Distribution):
    """P_theta for the scaled-mean family, with closed-form marginals."""

    def __init__(self, family: GaussianScaledMeanFamily, theta):
        self.family = family
        self.theta = np.asarray(theta, dtype=float).reshape(family.param_dim)
        self.dim = family.data_dim
        self.mu = family.means(self.theta)

    def marginal_mean(self, j: int) -> float:
        return float(self.mu[j])

    def marginal_cdf(self, j, x):
        return stats.norm.cdf(np.asarray(x, dtype=float) - self.mu[j])

    def marginal_pdf(self, j, x):
        return stats.norm.pdf(np.asarray(x, dtype=float) - self.mu[j])

    def marginal_ppf(self, j, q):
        return float(self.mu[j] + stats.norm.ppf(q))

    def partial_expectation(self, j, x):
        r = np.asarray(x, dtype=float) - self.mu[j]
        return r * stats.norm.cdf(r) + stats.norm.pdf(r)

    def expect(self, f, breaks=None, n: int = 64):
        nodes, weights = self.family.quadrature_rule(self.theta, breaks, n=n)
        return quadrature.expect(f, nodes, weights)

    def sample(self, n, rng):
        return self.family.sample(self.theta, n, rng)

    def log_density(self, z):
        return self.family.log_density(self.theta, z)


def make_family(spec: dict | None = None, data_dim: int | None = None) -> ParametricFamily:
    """Build a family from a config mapping (only the Gaussian scaled-mean kind exists)."""
    spec = dict(spec or {})
    kind = spec.get("kind", "gaussian_scaled_mean")
    if kind != "gaussian_scaled_mean":
        raise ValueError(f"unknown family kind {kind!r}")
    return GaussianScaledMeanFamily(int(spec.get("dim", data_dim)))


def as_theta(theta: float | Sequence[float], family: ParametricFamily) -> np.ndarray:
    return np.asarray(theta, dtype=float).reshape(family.param_dim)
