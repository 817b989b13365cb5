"""Small one-dimensional optimizers used by the estimators and MLE fallbacks."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import SolverError

INV_PHI = (np.sqrt(5.0) - 1.0) / 2.0  # 1/golden ratio


@dataclass(frozen=True)
class ScalarMin:
    x: float
    fun: float
    iterations: int


def golden_section(
    f: Callable[[float], float], lo: float, hi: float, tol: float = 1e-10, max_iter: int = 200
) -> ScalarMin:
    """Minimize a unimodal ``f`` on ``[lo, hi]`` to bracket width ``tol``."""
    if not hi > lo:
        raise SolverError(f"empty bracket [{lo}, {hi}]")
    a, b = lo, hi
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    it = 0
    while b - a > tol and it < max_iter:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
        it += 1
    x, fx = (c, fc) if fc <= fd else (d, fd)
    return ScalarMin(float(x), float(fx), it)


def scan_bracket(
    f_batch: Callable[[np.ndarray], np.ndarray],
    center: float,
    half_width: float,
    points: int = 401,
    max_widenings: int = 8,
) -> tuple[float, float, np.ndarray, np.ndarray]:
    """Coarse grid scan that widens until the grid minimum is interior.

    Returns ``(lo, hi, grid, values)`` where ``[lo, hi]`` are the grid neighbours
    of the (first) grid minimizer.
    """
    for _ in range(max_widenings + 1):
        grid = np.linspace(center - half_width, center + half_width, points)
        vals = np.asarray(f_batch(grid), dtype=float)
        if not np.all(np.isfinite(vals)):
            raise SolverError("non-finite objective on scan grid")
        k = int(np.argmin(vals))
        if 0 < k < points - 1:
            return float(grid[k - 1]), float(grid[k + 1]), grid, vals
        center = float(grid[k])
        half_width *= 2.0
    raise SolverError("minimum stays on the scan boundary after widening")
