"""Monte Carlo harness: draw data from Q_{n^-alpha}, fit SAA/ETO/IEO, score exact regrets.

Within a replication all three methods see the same dataset (common random
numbers). Each replication owns an RNG stream derived from
``(seed, n, alpha, rep)``, so results do not depend on execution order.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from . import __version__
from .config import ExperimentConfig
from .errors import MisspecError, NumericError
from .estimators import Method, fit_eto, fit_ieo, fit_saa
from .model import make_family
from .perturbation import Direction, RegimeConfig, TiltedDistribution, make_direction, regime_of
from .problems import DecisionProblem, make_problem

log = logging.getLogger(__name__)

REGRET_SLACK = 1e-10
METHODS = (Method.SAA, Method.ETO, Method.IEO)


# --------------------------------------------------------------------------- records


@dataclass(frozen=True)
class RegretSample:
    method: str
    n: int
    alpha: float
    rep: int
    decision: np.ndarray
    regret: float
    direction: str = ""
    data_hash: str = ""
    theta: float | None = None
    error: str | None = None


@dataclass(frozen=True)
class RegretSummary:
    direction: str
    method: str
    n: int
    alpha: float
    mean: float
    median: float
    q25: float
    q75: float
    sem: float
    count: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class SweepResult:
    config: ExperimentConfig
    samples: list[RegretSample] = field(default_factory=list)
    summaries: list[RegretSummary] = field(default_factory=list)
    verdicts: list[dict] = field(default_factory=list)
    cell_errors: list[dict] = field(default_factory=list)


# --------------------------------------------------------------------------- truth and regret


def true_optimum(problem: DecisionProblem, tilted) -> tuple[np.ndarray, float]:
    """Minimizer and minimum of the expected cost under the tilted (grid) law."""
    w = problem.optimum(tilted)
    return w, problem.expected_cost(tilted, w)


def regret(problem: DecisionProblem, tilted, w, optimum: tuple[np.ndarray, float] | None = None) -> float:
    """v(w) - v(w*) under the tilted law, clipped at 0 within REGRET_SLACK."""
    _, v_star = optimum if optimum is not None else true_optimum(problem, tilted)
    r = problem.expected_cost(tilted, w) - v_star
    if r < -REGRET_SLACK * max(1.0, abs(v_star)):
        raise NumericError(f"negative regret {r:.3g}: the reference optimum is not optimal")
    return max(r, 0.0)


def replication_rng(seed: int, n: int, alpha: float, rep: int) -> np.random.Generator:
    alpha_key = int(round(float(alpha) * 1_000_000))
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(n), alpha_key, int(rep)]))


def data_hash(data: np.ndarray) -> str:
    return hashlib.sha1(np.ascontiguousarray(data, dtype=float).tobytes()).hexdigest()[:16]


# --------------------------------------------------------------------------- cells


class Cell:
    """One (direction, n, alpha) design point with its tilted law and true optimum."""

    def __init__(self, config: ExperimentConfig, direction: Direction, label: str, n: int, alpha: float,
                 problem: DecisionProblem | None = None):
        self.config = config
        self.problem = problem or make_problem({**config.problem, "dim": config.dim})
        self.family = make_family(config.family, config.dim)
        self.theta0 = np.array([config.theta0])
        self.direction = direction
        self.label = label
        self.n, self.alpha = int(n), float(alpha)
        self.regime = RegimeConfig(self.alpha, self.n)
        self.tilted = TiltedDistribution(
            self.family, self.theta0, direction, self.regime.t, config.tilt,
            resolution=config.resolution, width=config.width,
        )
        self.optimum = true_optimum(self.problem, self.tilted)

    def run(self, rep: int) -> list[RegretSample]:
        return run_replication(self, rep)


def run_replication(cell: Cell, rep: int) -> list[RegretSample]:
    """One dataset from Q_t, all three pipelines on it, one regret each."""
    rng = replication_rng(cell.config.seed, cell.n, cell.alpha, rep)
    data = cell.tilted.sample(cell.n, rng)
    h = data_hash(data)
    fits = {
        Method.SAA: lambda: fit_saa(cell.problem, data),
        Method.ETO: lambda: fit_eto(cell.problem, cell.family, data),
        Method.IEO: lambda: fit_ieo(cell.problem, cell.family, data),
    }
    out = []
    for method in METHODS:
        try:
            res = fits[method]()
            r = regret(cell.problem, cell.tilted, res.decision, cell.optimum)
            theta = None if res.theta is None else float(res.theta[0])
            out.append(RegretSample(method.value, cell.n, cell.alpha, rep, res.decision, r, cell.label, h, theta))
        except MisspecError as exc:
            log.warning("rep %d %s failed: %s", rep, method.value, exc)
            nan = np.full(cell.problem.decision_dim, np.nan)
            out.append(RegretSample(method.value, cell.n, cell.alpha, rep, nan, math.nan, cell.label, h,
                                    None, f"{type(exc).__name__}: {exc}"))
    return out


def _run_chunk(args):
    cell, reps = args
    return [s for rep in reps for s in run_replication(cell, rep)]


def run_cell(cell: Cell, replications: int, workers: int = 1) -> list[RegretSample]:
    reps = list(range(replications))
    if workers <= 1:
        return [s for rep in reps for s in run_replication(cell, rep)]
    chunks = [reps[i::workers] for i in range(workers)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(_run_chunk, [(cell, c) for c in chunks]))
    samples = [s for part in parts for s in part]
    order = {m.value: k for k, m in enumerate(METHODS)}
    return sorted(samples, key=lambda s: (s.rep, order[s.method]))


# --------------------------------------------------------------------------- statistics


def summarize(samples: Iterable[RegretSample]) -> list[RegretSummary]:
    groups: dict[tuple, list[float]] = {}
    for s in samples:
        if s.error is None:
            groups.setdefault((s.direction, s.method, s.n, s.alpha), []).append(s.regret)
    out = []
    for (direction, method, n, alpha), vals in groups.items():
        v = np.asarray(vals, dtype=float)
        q25, med, q75 = np.quantile(v, [0.25, 0.5, 0.75])
        sem = float(v.std(ddof=1) / np.sqrt(v.size)) if v.size > 1 else math.nan
        out.append(RegretSummary(direction, method, n, alpha, float(v.mean()), float(med), float(q25),
                                 float(q75), sem, int(v.size)))
    return out


def cell_verdict(samples: list[RegretSample]) -> dict:
    """Methods ranked by mean regret with paired-difference standard errors."""
    by_method: dict[str, dict[int, float]] = {}
    for s in samples:
        if s.error is None:
            by_method.setdefault(s.method, {})[s.rep] = s.regret
    means = {m: float(np.mean(list(v.values()))) for m, v in by_method.items()}
    ranking = sorted(means, key=means.get)
    pairs = []
    for i, a in enumerate(ranking):
        for b in ranking[i + 1:]:
            common = sorted(set(by_method[a]) & set(by_method[b]))
            diff = np.array([by_method[b][r] - by_method[a][r] for r in common])
            se = float(diff.std(ddof=1) / np.sqrt(diff.size)) if diff.size > 1 else math.nan
            pairs.append({"lower": a, "upper": b, "mean_difference": float(diff.mean()), "se": se,
                          "z": float(diff.mean() / se) if se and se > 0 else math.inf})
    return {"ranking": ranking, "means": means, "paired": pairs}


def paired_difference(samples: list[RegretSample], lower: str, upper: str) -> tuple[float, float]:
    """Mean and SE of regret(upper) - regret(lower) over replications shared by both."""
    a = {s.rep: s.regret for s in samples if s.method == lower and s.error is None}
    b = {s.rep: s.regret for s in samples if s.method == upper and s.error is None}
    common = sorted(set(a) & set(b))
    d = np.array([b[r] - a[r] for r in common])
    return float(d.mean()), float(d.std(ddof=1) / np.sqrt(d.size))


# --------------------------------------------------------------------------- sweep


def build_directions(config: ExperimentConfig) -> list[tuple[str, Direction]]:
    family = make_family(config.family, config.dim)
    dirs = [make_direction(s, family, [config.theta0]) for s in config.direction_specs()]
    return list(zip(config.direction_labels, dirs))


def simulate(config: ExperimentConfig, n: int, alpha: float, direction: str | None = None) -> SweepResult:
    """Run a single (n, alpha) cell for one direction (the first by default)."""
    dirs = build_directions(config)
    if direction is not None:
        dirs = [d for d in dirs if d[0] == direction]
        if not dirs:
            raise KeyError(f"no direction labelled {direction!r}")
    return _sweep(config, dirs[:1], [n], [alpha])


def sweep(config: ExperimentConfig) -> SweepResult:
    return _sweep(config, build_directions(config), config.ns, config.alphas)


def _sweep(config, dirs, ns, alphas) -> SweepResult:
    result = SweepResult(config)
    for label, direction in dirs:
        for alpha in alphas:
            for n in ns:
                try:
                    cell = Cell(config, direction, label, n, alpha)
                except MisspecError as exc:
                    log.warning("cell %s n=%s alpha=%s skipped: %s", label, n, alpha, exc)
                    result.cell_errors.append({"direction": label, "n": int(n), "alpha": float(alpha),
                                               "error": f"{type(exc).__name__}: {exc}"})
                    continue
                samples = run_cell(cell, config.replications, config.workers)
                result.samples.extend(samples)
                verdict = cell_verdict(samples)
                verdict.update({"direction": label, "n": int(n), "alpha": float(alpha),
                                "regime": regime_of(alpha).value, "t": cell.regime.t,
                                "true_optimum": cell.optimum[0].tolist()})
                result.verdicts.append(verdict)
    result.summaries = summarize(result.samples)
    return result


# --------------------------------------------------------------------------- emit

SUMMARY_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["version", "config", "common_random_numbers", "summaries", "verdicts", "cell_errors"],
    "properties": {
        "version": {"type": "string"},
        "config": {"type": "object"},
        "common_random_numbers": {"type": "boolean"},
        "summaries": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["direction", "method", "n", "alpha", "mean", "median", "q25", "q75", "sem", "count"],
                "properties": {
                    "direction": {"type": "string"},
                    "method": {"enum": ["SAA", "ETO", "IEO"]},
                    "n": {"type": "integer", "minimum": 1},
                    "alpha": {"type": "number", "exclusiveMinimum": 0},
                    "mean": {"type": "number"},
                    "median": {"type": "number"},
                    "q25": {"type": "number"},
                    "q75": {"type": "number"},
                    "sem": {"type": ["number", "null"]},
                    "count": {"type": "integer", "minimum": 0},
                },
            },
        },
        "verdicts": {"type": "array", "items": {"type": "object", "required": ["ranking", "means", "paired"]}},
        "cell_errors": {
            "type": "array",
            "items": {"type": "object", "required": ["direction", "n", "alpha", "error"]},
        },
    },
}


def sample_header(d_w: int) -> list[str]:
    return ["method", "n", "alpha", "rep", "regret"] + [f"w_{j + 1}" for j in range(d_w)]


def _fmt(x) -> str:
    return repr(float(x))


def _finite_or_none(x):
    return None if x is None or (isinstance(x, float) and not math.isfinite(x)) else x


def emit(result: SweepResult, out_dir: str | Path) -> dict[str, Path]:
    """Write per-direction sample CSVs, summary.json and long-format panel CSVs."""
    out = Path(out_dir)
    written: dict[str, Path] = {}
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / "panels").mkdir(exist_ok=True)
        d_w = result.config.dim
        labels = result.config.direction_labels
        for label in labels:
            path = out / f"samples_{label}.csv"
            with path.open("w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(sample_header(d_w))
                for s in result.samples:
                    if s.direction != label:
                        continue
                    w.writerow([s.method, s.n, _fmt(s.alpha), s.rep, _fmt(s.regret)] + [_fmt(x) for x in s.decision])
            written[f"samples:{label}"] = path
        doc = {
            "version": __version__,
            "config": result.config.to_dict(),
            "common_random_numbers": True,
            "summaries": [{k: _finite_or_none(v) for k, v in s.to_dict().items()} for s in result.summaries],
            "verdicts": result.verdicts,
            "cell_errors": result.cell_errors,
        }
        path = out / "summary.json"
        path.write_text(json.dumps(doc, indent=2, default=_json_default))
        written["summary"] = path
        for label in labels:
            for alpha in sorted({s.alpha for s in result.summaries if s.direction == label}):
                path = out / "panels" / f"{label}_alpha{alpha:g}.csv"
                with path.open("w", newline="") as fh:
                    w = csv.writer(fh)
                    w.writerow(["method", "n", "alpha", "statistic", "value"])
                    for s in result.summaries:
                        if s.direction == label and s.alpha == alpha:
                            for stat in ("mean", "median", "q25", "q75", "sem"):
                                w.writerow([s.method, s.n, _fmt(alpha), stat, _fmt(getattr(s, stat))])
                written[f"panel:{label}:{alpha:g}"] = path
    except OSError as exc:
        raise OSError(f"writing results under {out}: {exc}") from exc
    return written


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def read_samples(path: str | Path, direction: str = "") -> list[RegretSample]:
    """Parse a samples CSV written by ``emit``."""
    out = []
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        d_w = len(header) - 5
        for row in reader:
            out.append(RegretSample(row[0], int(row[1]), float(row[2]), int(row[3]),
                                    np.array([float(x) for x in row[5:5 + d_w]]), float(row[4]), direction))
    return out
