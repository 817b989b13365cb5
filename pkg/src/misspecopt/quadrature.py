"""Tensor-product quadrature rules for expectations under independent normal axes.

Two per-axis rules are provided:

* Gauss--Hermite, for integrands that are smooth in z.
* Panelled Gauss--Legendre with user breakpoints, for integrands with
  axis-aligned kinks (e.g. the newsvendor gradient jumps at z_j = w_j).
  Splitting at the kink restores spectral convergence, which Gauss--Hermite
  cannot deliver on a discontinuous integrand.

All rules return ``(nodes, weights)`` with weights already multiplied by the
normal density, so that ``E[f(z)] ~= sum(weights * f(nodes))``.
"""

from __future__ import annotations

from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

SQRT2 = np.sqrt(2.0)
SQRT_PI = np.sqrt(np.pi)

#: Half-width (in standard deviations) of the panelled rule; tail mass beyond it
#: is below 1e-30.
DEFAULT_HALF_WIDTH = 12.0


@lru_cache(maxsize=32)
def _hermgauss(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.hermite.hermgauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


@lru_cache(maxsize=32)
def _leggauss(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def hermite_rule(mean: float, sd: float = 1.0, n: int = 64) -> tuple[np.ndarray, np.ndarray]:
    """Gauss--Hermite rule for E[f(z)] with z ~ N(mean, sd^2)."""
    if n < 1:
        raise ValueError("node count must be positive")
    x, w = _hermgauss(n)
    return mean + sd * SQRT2 * x, w / SQRT_PI


def panel_rule(
    mean: float,
    sd: float = 1.0,
    breaks: Sequence[float] = (),
    n_per_panel: int = 24,
    panel_width: float = 2.0,
    half_width: float = DEFAULT_HALF_WIDTH,
) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss--Legendre rule for E[f(z)], z ~ N(mean, sd^2).

    The truncated range ``mean +- half_width*sd`` is cut at every breakpoint that
    falls inside it and then subdivided so no panel is wider than
    ``panel_width*sd``. The integrand only needs to be smooth inside panels.
    """
    lo, hi = mean - half_width * sd, mean + half_width * sd
    cuts = [lo, hi] + [float(b) for b in breaks if lo < b < hi]
    cuts = np.unique(np.asarray(cuts, dtype=float))
    gx, gw = _leggauss(n_per_panel)
    nodes, weights = [], []
    for a, b in zip(cuts[:-1], cuts[1:]):
        pieces = max(1, int(np.ceil((b - a) / (panel_width * sd))))
        edges = np.linspace(a, b, pieces + 1)
        for pa, pb in zip(edges[:-1], edges[1:]):
            half = 0.5 * (pb - pa)
            x = 0.5 * (pa + pb) + half * gx
            nodes.append(x)
            weights.append(half * gw)
    x = np.concatenate(nodes)
    w = np.concatenate(weights)
    dens = np.exp(-0.5 * ((x - mean) / sd) ** 2) / (sd * np.sqrt(2.0 * np.pi))
    return x, w * dens


def tensor_rule(axes: Sequence[tuple[np.ndarray, np.ndarray]]) -> tuple[np.ndarray, np.ndarray]:
    """Tensor product of per-axis rules: nodes (N, d), weights (N,)."""
    grids = np.meshgrid(*[a[0] for a in axes], indexing="ij")
    wgrids = np.meshgrid(*[a[1] for a in axes], indexing="ij")
    nodes = np.stack([g.ravel() for g in grids], axis=1)
    weights = np.prod(np.stack([g.ravel() for g in wgrids], axis=1), axis=1)
    return nodes, weights


def normal_product_rule(
    means: Sequence[float],
    sds: Sequence[float] | float = 1.0,
    breaks: Sequence[Sequence[float]] | None = None,
    n: int = 64,
    n_per_panel: int = 24,
) -> tuple[np.ndarray, np.ndarray]:
    """Rule for independent normal axes.

    Axes without breakpoints use Gauss--Hermite with ``n`` nodes; axes with
    breakpoints use the panelled Legendre rule.
    """
    means = np.atleast_1d(np.asarray(means, dtype=float))
    sds = np.broadcast_to(np.asarray(sds, dtype=float), means.shape)
    axes = []
    for j, (m, s) in enumerate(zip(means, sds)):
        bj = () if breaks is None or breaks[j] is None else tuple(breaks[j])
        if bj:
            axes.append(panel_rule(m, s, bj, n_per_panel=n_per_panel))
        else:
            axes.append(hermite_rule(m, s, n))
    return tensor_rule(axes)


def expect(f: Callable[[np.ndarray], np.ndarray], nodes: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Weighted sum of ``f(nodes)`` over the leading axis.

    ``f`` maps an (N, d) node array to an (N, ...) array; the result has the
    trailing shape of ``f``'s output.
    """
    vals = np.asarray(f(nodes), dtype=float)
    return np.tensordot(weights, vals, axes=(0, 0))
