"""Locally misspecified ground truths Q_t built by tilting a model point P_theta0.

A tilted law has density ``w(t*u(z)) / C_t * p_theta0(z)`` where ``u`` is a
centered direction and ``w`` is one of three weightings (exponential, positive
part of a linear term, or a smooth bounded ``1 + g``). Sampling and the
decision-side functionals (marginal quantiles, partial expectations) use a
tensor-grid discretization with piecewise-uniform cells; that grid law is the
one data are drawn from, so regrets computed against it are internally exact.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import cached_property, wraps
from typing import NamedTuple, Sequence

import numpy as np
from scipy.special import logsumexp

from . import quadrature
from .errors import CoverageError, DirectionError, DivergenceError, NumericError
from .model import Distribution, GaussianScaledMeanFamily, ParametricFamily

MAX_GRID_CELLS = 1 << 24
COVERAGE_TOL = 1e-9
DIVERGENCE_RTOL = 1e-6


# --------------------------------------------------------------------------- directions


class RawDirection:
    """Uncentered direction u(z). Additive directions expose per-axis terms."""

    name = "raw"

    def __call__(self, z: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def axis_terms(self):
        """Per-axis callables summing to u, or None when u is not additive."""
        return None

    def describe(self) -> dict:
        return {"name": self.name}


class ProdSq(RawDirection):
    """prod_j z_j^2"""

    name = "prod_sq"

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        return np.prod(z * z, axis=-1)


class ProdCenteredSq(RawDirection):
    """prod_j (z_j - mu_j)^2 / 2"""

    name = "prod_centered_sq"

    def __init__(self, mu):
        self.mu = np.asarray(mu, dtype=float)

    def __call__(self, z):
        r = np.asarray(z, dtype=float) - self.mu
        return np.prod(r * r, axis=-1) / 2.0

    def describe(self):
        return {"name": self.name, "mu": self.mu.tolist()}


class _Additive(RawDirection):
    def __init__(self, coef, mu):
        self.coef = np.asarray(coef, dtype=float)
        self.mu = np.asarray(mu, dtype=float)

    def _term(self, j, x):
        raise NotImplementedError

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        return sum(self._term(j, z[..., j]) for j in range(self.mu.size))

    def axis_terms(self):
        return [lambda x, j=j: self._term(j, x) for j in range(self.mu.size)]


class Linear(_Additive):
    """sum_j gamma_j (z_j - mu_j)"""

    name = "linear"

    def _term(self, j, x):
        return self.coef[j] * (x - self.mu[j])

    def describe(self):
        return {"name": self.name, "gamma": self.coef.tolist(), "mu": self.mu.tolist()}


class Hermite2(_Additive):
    """sum_j ((z_j - mu_j)^2 - 1)"""

    name = "hermite2"

    def __init__(self, mu):
        super().__init__(np.ones_like(np.asarray(mu, dtype=float)), mu)

    def _term(self, j, x):
        r = x - self.mu[j]
        return r * r - 1.0

    def describe(self):
        return {"name": self.name, "mu": self.mu.tolist()}


class ScoreLinear(RawDirection):
    """beta^T s_theta0(z): a direction tangent to the model at theta0."""

    name = "score_linear"

    def __init__(self, family: ParametricFamily, theta0, beta):
        self.family = family
        self.theta0 = np.asarray(theta0, dtype=float).reshape(family.param_dim)
        self.beta = np.asarray(beta, dtype=float).reshape(family.param_dim)

    def __call__(self, z):
        return self.family.score(self.theta0, z) @ self.beta

    def axis_terms(self):
        if isinstance(self.family, GaussianScaledMeanFamily):
            lin = Linear(self.beta[0] * self.family.scales, self.family.means(self.theta0))
            return lin.axis_terms()
        return None

    def describe(self):
        return {"name": self.name, "beta": self.beta.tolist()}


@dataclass(frozen=True)
class Direction:
    """A centered direction u(z) = raw(z) - E_theta0[raw] with stored moments."""

    raw: RawDirection
    offset: float
    second_moment: float
    theta0: tuple
    centered: bool = True

    def __call__(self, z) -> np.ndarray:
        return self.raw(z) - self.offset

    @property
    def name(self) -> str:
        return self.raw.name

    def axis_terms(self):
        return self.raw.axis_terms()

    def scaled(self, c: float) -> "Direction":
        return Direction(_Scaled(self.raw, c), c * self.offset, c * c * self.second_moment, self.theta0)


class _Scaled(RawDirection):
    def __init__(self, raw, c):
        self.inner, self.c = raw, float(c)
        self.name = raw.name

    def __call__(self, z):
        return self.c * self.inner(z)

    def axis_terms(self):
        terms = self.inner.axis_terms()
        return None if terms is None else [lambda x, f=f: self.c * f(x) for f in terms]

    def describe(self):
        return {**self.inner.describe(), "scale": self.c}


def center_direction(raw: RawDirection, family: ParametricFamily, theta0, n: int = 64) -> Direction:
    """Subtract the P_theta0 mean of ``raw``; moments by Gauss--Hermite quadrature."""
    theta0 = np.asarray(theta0, dtype=float).reshape(family.param_dim)
    moments = []
    for nodes_per_axis in (n, 2 * n):
        nodes, weights = family.quadrature_rule(theta0, n=nodes_per_axis)
        u = raw(nodes)
        m1 = float(weights @ u)
        m2 = float(weights @ (u - m1) ** 2)
        moments.append((m1, m2))
    (m1, m2), (m1b, m2b) = moments
    if not all(np.isfinite([m1, m2, m1b, m2b])):
        raise DirectionError(f"direction {raw.name!r} has non-finite moments")
    if abs(m2 - m2b) > 1e-6 * max(1.0, abs(m2b)):
        raise DirectionError(f"second moment of {raw.name!r} not resolved by quadrature")
    return Direction(raw, m1b, m2b, tuple(theta0.tolist()))


def make_direction(spec, family: ParametricFamily, theta0) -> Direction:
    """Build a centered direction from a config entry (string or mapping)."""
    if isinstance(spec, str):
        spec = {"name": spec}
    spec = dict(spec)
    name = spec.pop("name")
    scale = float(spec.pop("scale", 1.0))
    theta0 = np.asarray(theta0, dtype=float).reshape(family.param_dim)
    mu = _base_means(family, theta0)
    if name == "prod_sq":
        raw = ProdSq()
    elif name == "prod_centered_sq":
        raw = ProdCenteredSq(mu)
    elif name == "score_linear":
        raw = ScoreLinear(family, theta0, spec.get("beta", [1.0] * family.param_dim))
    elif name == "hermite2":
        raw = Hermite2(mu)
    elif name == "linear":
        gamma = spec.get("gamma")
        if gamma is None or len(gamma) != family.data_dim:
            raise DirectionError("linear direction needs gamma of length d_z")
        raw = Linear(gamma, mu)
    else:
        raise DirectionError(f"unknown direction {name!r}")
    if scale != 1.0:
        raw = _Scaled(raw, scale)
    return center_direction(raw, family, theta0)


def _base_means(family, theta0):
    if isinstance(family, GaussianScaledMeanFamily):
        return family.means(theta0)
    nodes, weights = family.quadrature_rule(theta0)
    return weights @ nodes


# --------------------------------------------------------------------------- tilts


class TiltKind(str, enum.Enum):
    EXPONENTIAL = "exponential"
    RELU_LINEAR = "relu_linear"
    SMOOTH_G = "smooth_g"


def smooth_g(x) -> np.ndarray:
    """Odd, nondecreasing, C^3 map R -> [-1, 1] equal to x on [-1/2, 1/2].

    Past |x| = 1/2 it blends to sign(x) by |x| = 3/2 through
    h(s) = s - 2.5 s^4 + 3 s^5 - s^6, s = |x| - 1/2, whose first three
    derivatives match at both ends.
    """
    x = np.asarray(x, dtype=float)
    a = np.abs(x)
    s = np.clip(a - 0.5, 0.0, 1.0)
    blend = 0.5 + s - 2.5 * s**4 + 3.0 * s**5 - s**6
    return np.where(a <= 0.5, x, np.sign(x) * blend)


def tilt_weight(kind: TiltKind, tu) -> np.ndarray:
    tu = np.asarray(tu, dtype=float)
    if kind is TiltKind.EXPONENTIAL:
        return np.exp(tu)
    if kind is TiltKind.RELU_LINEAR:
        return np.maximum(1.0 + tu, 0.0)
    return 1.0 + smooth_g(tu)


def log_tilt_weight(kind: TiltKind, tu) -> np.ndarray:
    tu = np.asarray(tu, dtype=float)
    if kind is TiltKind.EXPONENTIAL:
        return tu
    with np.errstate(divide="ignore"):
        return np.log(tilt_weight(kind, tu))


# --------------------------------------------------------------------------- regimes


class Regime(str, enum.Enum):
    MILD = "mild"
    BALANCED = "balanced"
    SEVERE = "severe"


@dataclass(frozen=True)
class RegimeConfig:
    alpha: float
    n: int

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if self.n < 1:
            raise ValueError("n must be >= 1")

    @property
    def t(self) -> float:
        return float(self.n) ** (-self.alpha)

    @property
    def regime(self) -> Regime:
        return regime_of(self.alpha)


def regime_of(alpha: float) -> Regime:
    if math.isclose(alpha, 0.5, rel_tol=0.0, abs_tol=1e-12):
        return Regime.BALANCED
    return Regime.MILD if alpha > 0.5 else Regime.SEVERE


def regime_t(config: RegimeConfig) -> tuple[float, Regime]:
    return config.t, config.regime


# --------------------------------------------------------------------------- tilted law


def _base_at_zero(method):
    """At t = 0 the tilted law is the model point itself; use its exact functionals."""

    @wraps(method)
    def wrapper(self, *args, **kwargs):
        if self.t == 0.0:
            return getattr(self.base, method.__name__)(*args, **kwargs)
        return method(self, *args, **kwargs)

    return wrapper


class TiltedDistribution(Distribution):
    """Q_t with dQ_t = w(t u) / C_t dP_theta0."""

    def __init__(
        self,
        family: ParametricFamily,
        theta0,
        direction: Direction,
        t: float,
        kind: TiltKind | str = TiltKind.EXPONENTIAL,
        resolution: int = 512,
        width: float = 8.0,
        quad_nodes: int = 64,
    ):
        if t < 0:
            raise ValueError("tilt magnitude must be nonnegative")
        if family.data_dim > 3:
            raise ValueError("tilted sampling supports d_z <= 3")
        self.family = family
        self.theta0 = np.asarray(theta0, dtype=float).reshape(family.param_dim)
        self.direction = direction
        self.t = float(t)
        self.kind = TiltKind(kind)
        self.resolution = int(resolution)
        self.width = float(width)
        self.quad_nodes = int(quad_nodes)
        self.dim = family.data_dim
        self.base = family.at(self.theta0)
        self.C = self.normalization_constant()

    def __repr__(self):
        return (
            f"TiltedDistribution(kind={self.kind.value}, direction={self.direction.name}, "
            f"t={self.t:.6g}, resolution={self.resolution})"
        )

    # ---- continuous law

    def _log_C(self, n: int) -> float:
        nodes, weights = self.family.quadrature_rule(self.theta0, n=n)
        tu = self.t * self.direction(nodes)
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            if self.kind is TiltKind.EXPONENTIAL:
                return float(logsumexp(tu, b=weights))
            return float(np.log(weights @ tilt_weight(self.kind, tu)))

    def normalization_constant(self) -> float:
        """C_t by quadrature, with a node-doubling stability guard."""
        self.normalization_error = 0.0
        if self.t == 0.0:
            return 1.0
        n = self.quad_nodes if self.kind is TiltKind.EXPONENTIAL else max(self.quad_nodes, 128)
        lc, lc2 = self._log_C(n), self._log_C(2 * n)
        diag = f"log C_t = {lc:.6g} at {n} nodes vs {lc2:.6g} at {2 * n} nodes"
        if not (np.isfinite(lc) and np.isfinite(lc2)):
            raise DivergenceError(f"{self.kind.value} tilt of {self.direction.name!r} at t={self.t:.4g}: {diag}")
        rel = abs(math.expm1(min(abs(lc2 - lc), 700.0)))
        if self.kind is TiltKind.EXPONENTIAL and rel > DIVERGENCE_RTOL:
            raise DivergenceError(
                f"exponential tilt of {self.direction.name!r} at t={self.t:.4g} is not integrable: {diag}"
            )
        # bounded weights cannot diverge; node doubling only measures the kink error
        self.normalization_error = rel
        return math.exp(lc2)

    def log_density(self, z) -> np.ndarray:
        z = self.family._check_points(z)
        tu = self.t * self.direction(z)
        return log_tilt_weight(self.kind, tu) - math.log(self.C) + self.family.log_density(self.theta0, z)

    def density(self, z) -> np.ndarray:
        return np.exp(self.log_density(z))

    # ---- grid law

    @cached_property
    def _box(self):
        if isinstance(self.family, GaussianScaledMeanFamily):
            mu = self.family.means(self.theta0)
            return mu - self.width, mu + self.width
        nodes, weights = self.family.quadrature_rule(self.theta0)
        mu = weights @ nodes
        sd = np.sqrt(weights @ (nodes - mu) ** 2)
        return mu - self.width * sd, mu + self.width * sd

    @cached_property
    def edges(self) -> list[np.ndarray]:
        lo, hi = self._box
        return [np.linspace(lo[j], hi[j], self.resolution + 1) for j in range(self.dim)]

    @property
    def mids(self) -> list[np.ndarray]:
        return [0.5 * (e[:-1] + e[1:]) for e in self.edges]

    @property
    def factorized(self) -> bool:
        if not isinstance(self.family, GaussianScaledMeanFamily):
            return False
        if self.t == 0.0 or self.dim == 1:
            return True
        return self.kind is TiltKind.EXPONENTIAL and self.direction.axis_terms() is not None

    @cached_property
    def _grid(self):
        """Cell probabilities: a list of per-axis vectors, or one tensor."""
        if self.factorized:
            masses = []
            mu = self.family.means(self.theta0)
            terms = self.direction.axis_terms() if self.dim > 1 else None
            for j, x in enumerate(self.mids):
                logm = -0.5 * (x - mu[j]) ** 2
                if self.t > 0:
                    if terms is None:
                        logm = logm + log_tilt_weight(self.kind, self.t * self.direction(x[:, None]))
                    else:
                        logm = logm + self.t * terms[j](x)
                masses.append(_normalize_log(logm))
            _check_coverage(masses)
            return masses
        cells = self.resolution**self.dim
        if cells > MAX_GRID_CELLS:
            raise ValueError(
                f"{cells} grid cells exceed the limit {MAX_GRID_CELLS}; lower the resolution"
            )
        mesh = np.meshgrid(*self.mids, indexing="ij")
        z = np.stack([m.ravel() for m in mesh], axis=1)
        logm = log_tilt_weight(self.kind, self.t * self.direction(z)) + self.family.log_density(
            self.theta0, z
        )
        g = _normalize_log(logm).reshape((self.resolution,) * self.dim)
        _check_coverage([g.sum(axis=tuple(k for k in range(self.dim) if k != j)) for j in range(self.dim)])
        return g

    def boundary_mass(self) -> float:
        """Largest mass in an outermost grid layer of any axis."""
        return max(max(self.marginal_masses(j)[0], self.marginal_masses(j)[-1]) for j in range(self.dim))

    def marginal_masses(self, j: int) -> np.ndarray:
        g = self._grid
        if isinstance(g, list):
            return g[j]
        axes = tuple(k for k in range(self.dim) if k != j)
        return g.sum(axis=axes)

    @cached_property
    def _marginal_cache(self):
        out = []
        for j in range(self.dim):
            p = self.marginal_masses(j)
            cdf_edges = np.concatenate([[0.0], np.cumsum(p)])
            cdf_edges /= cdf_edges[-1]
            out.append((p, cdf_edges))
        return out

    @_base_at_zero
    def marginal_mean(self, j):
        p, _ = self._marginal_cache[j]
        return float(p @ self.mids[j])

    @_base_at_zero
    def marginal_cdf(self, j, x):
        _, F = self._marginal_cache[j]
        return np.interp(np.asarray(x, dtype=float), self.edges[j], F)

    @_base_at_zero
    def marginal_pdf(self, j, x):
        p, _ = self._marginal_cache[j]
        e = self.edges[j]
        h = e[1] - e[0]
        x = np.asarray(x, dtype=float)
        k = np.clip(np.searchsorted(e, x, side="right") - 1, 0, p.size - 1)
        inside = (x >= e[0]) & (x < e[-1])
        return np.where(inside, p[k] / h, 0.0)

    @_base_at_zero
    def marginal_ppf(self, j, q):
        """Smallest x with F(x) >= q under the piecewise-linear grid CDF."""
        p, F = self._marginal_cache[j]
        e = self.edges[j]
        k = int(np.clip(np.searchsorted(F, q, side="left") - 1, 0, p.size - 1))
        while p[k] == 0.0 and k < p.size - 1:
            k += 1
        frac = (q - F[k]) / p[k]
        return float(e[k] + np.clip(frac, 0.0, 1.0) * (e[k + 1] - e[k]))

    @_base_at_zero
    def partial_expectation(self, j, x):
        p, _ = self._marginal_cache[j]
        e = self.edges[j]
        left, right = e[:-1], e[1:]
        x = np.asarray(x, dtype=float)
        xx = x[..., None]
        inside = np.clip(xx - left, 0.0, right - left)
        # cell-uniform E[(x - U)^+]: 0 left of cell, x - mid right of it, quadratic inside
        val = np.where(xx >= right, xx - 0.5 * (left + right), inside * inside / (2.0 * (right - left)))
        return val @ p

    @_base_at_zero
    def expect(self, f, breaks=None):
        """Midpoint-rule expectation under the grid law."""
        g = self._grid
        if isinstance(g, list):
            if self.resolution**self.dim > MAX_GRID_CELLS:
                raise ValueError("grid too large for a tensor expectation")
            z, w = quadrature.tensor_rule([(m, p) for m, p in zip(self.mids, g)])
        else:
            mesh = np.meshgrid(*self.mids, indexing="ij")
            z = np.stack([m.ravel() for m in mesh], axis=1)
            w = g.ravel()
        return quadrature.expect(f, z, w)

    @_base_at_zero
    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """i.i.d. draws from the piecewise-uniform grid law."""
        n = int(n)
        g = self._grid
        out = np.empty((n, self.dim))
        if isinstance(g, list):
            for j, p in enumerate(g):
                k = _draw_cells(np.cumsum(p), rng.random(n))
                out[:, j] = self._jitter(j, k, rng)
        else:
            flat = _draw_cells(np.cumsum(g.ravel()), rng.random(n))
            idx = np.unravel_index(flat, g.shape)
            for j in range(self.dim):
                out[:, j] = self._jitter(j, idx[j], rng)
        return out

    def _jitter(self, j, k, rng):
        e = self.edges[j]
        return e[k] + rng.random(k.size) * (e[k + 1] - e[k])


def _normalize_log(logm: np.ndarray) -> np.ndarray:
    finite = np.isfinite(logm)
    if not np.any(finite):
        raise NumericError("tilted grid has no positive-mass cell")
    m = np.exp(logm - np.max(logm[finite]))
    return m / m.sum()


def _check_coverage(marginals) -> None:
    worst = max(max(p[0], p[-1]) for p in marginals)
    if worst > COVERAGE_TOL:
        raise CoverageError(f"grid boundary carries mass {worst:.3g} (> {COVERAGE_TOL}); widen the box")


def _draw_cells(cum: np.ndarray, u: np.ndarray) -> np.ndarray:
    k = np.searchsorted(cum, u * cum[-1], side="right")
    return np.minimum(k, cum.size - 1)


# --------------------------------------------------------------------------- diagnostics


class LogLikelihoodRatio(NamedTuple):
    value: float
    zero_density: bool


def log_likelihood_ratio(tilted: TiltedDistribution, data) -> LogLikelihoodRatio:
    """sum_i log q_t(z_i) - log p_theta0(z_i); -inf flagged when q_t vanishes."""
    data = tilted.family._check_points(np.asarray(data, dtype=float).reshape(-1, tilted.dim))
    if tilted.t == 0.0:
        return LogLikelihoodRatio(0.0, False)
    lw = log_tilt_weight(tilted.kind, tilted.t * tilted.direction(data))
    if np.any(np.isneginf(lw)):
        return LogLikelihoodRatio(-np.inf, True)
    return LogLikelihoodRatio(float(lw.sum() - data.shape[0] * math.log(tilted.C)), False)


def tilt(
    family: ParametricFamily,
    theta0,
    direction: Direction,
    regime: RegimeConfig,
    kind: TiltKind | str = TiltKind.EXPONENTIAL,
    **kwargs,
) -> TiltedDistribution:
    return TiltedDistribution(family, theta0, direction, regime.t, kind, **kwargs)


def directions_from(specs: Sequence, family, theta0) -> list[Direction]:
    return [make_direction(s, family, theta0) for s in specs]
