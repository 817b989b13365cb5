"""Command line entry point: analyze, simulate, sweep, check."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .asymptotics import asymptotic_report, influence_functions
from .config import ExperimentConfig, PRESETS, load
from .errors import MisspecError
from .experiments import build_directions, emit, simulate, sweep
from .model import make_family
from .perturbation import regime_of
from .problems import make_problem

log = logging.getLogger("misspecopt")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="YAML experiment config")
    p.add_argument("--preset", choices=sorted(PRESETS), help="start from a named preset")
    p.add_argument("--seed", type=int, help="master RNG seed (unsigned 64-bit)")
    p.add_argument("--out", type=Path, help="output directory")
    p.add_argument("--resolution", type=int, help="grid nodes per axis for tilted sampling")
    p.add_argument("--reps", type=int, help="Monte Carlo replications per cell")
    p.add_argument("--workers", type=int, help="worker processes")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="misspecopt", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="closed-form asymptotic report for each direction and regime")
    _common(p)
    p.add_argument("--format", choices=["json", "text"], default="json")

    p = sub.add_parser("simulate", help="Monte Carlo for a single (n, alpha) cell")
    _common(p)
    p.add_argument("--n", type=int, help="sample size (default: first in config)")
    p.add_argument("--alpha", type=float, help="misspecification exponent (default: first in config)")
    p.add_argument("--direction", help="direction label (default: first in config)")

    p = sub.add_parser("sweep", help="full factorial over directions, alphas and sample sizes")
    _common(p)

    p = sub.add_parser("check", help="run the deterministic invariant suite")
    _common(p)
    return parser


def resolve_config(args) -> ExperimentConfig:
    if args.seed is not None and not 0 <= args.seed < 2**64:
        raise MisspecError("--seed must be an unsigned 64-bit integer")
    cfg = load(args.config, args.preset)
    output = dict(cfg.output)
    if args.out is not None:
        output["dir"] = str(args.out)
    return cfg.override(seed=args.seed, resolution=args.resolution, replications=args.reps,
                        workers=args.workers, output=output)


def cmd_analyze(cfg: ExperimentConfig, args) -> int:
    problem = make_problem({**cfg.problem, "dim": cfg.dim})
    family = make_family(cfg.family, cfg.dim)
    ifs = influence_functions(problem, family, [cfg.theta0])
    reports = {}
    for label, direction in build_directions(cfg):
        reports[label] = {
            regime_of(a).value: asymptotic_report(problem, family, [cfg.theta0], direction, regime_of(a), ifs).to_dict()
            for a in cfg.alphas
        }
    if args.format == "json":
        text = json.dumps({"config": cfg.to_dict(), "reports": reports}, indent=2)
    else:
        text = _render_text(reports)
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        path = args.out / ("analysis.json" if args.format == "json" else "analysis.txt")
        path.write_text(text + "\n")
        print(path)
    else:
        print(text)
    return 0


def _render_text(reports: dict) -> str:
    lines = []
    for label, by_regime in reports.items():
        for regime, rep in by_regime.items():
            lines.append(f"direction {label}, {regime} regime")
            for m in ("SAA", "ETO", "IEO"):
                b = ", ".join(f"{x:.6g}" for x in rep["direction_bias"][m])
                lines.append(f"  {m}: b = [{b}]  R = {rep['limit_regret'][m]:.6g}  noise = {rep['noise_regret'][m]:.6g}")
            for key, verdict in rep["verdicts"].items():
                if isinstance(verdict, dict) and "holds" in verdict:
                    order = " <= ".join(verdict["order"])
                    lines.append(f"  {key}: {order} {'holds' if verdict['holds'] else 'violated'}")
                elif isinstance(verdict, str):
                    lines.append(f"  {key}: {verdict}")
    return "\n".join(lines)


def _finish(result, cfg: ExperimentConfig) -> int:
    for err in result.cell_errors:
        log.error("cell %s n=%s alpha=%s: %s", err["direction"], err["n"], err["alpha"], err["error"])
    written = emit(result, cfg.output.get("dir", "results"))
    for v in result.verdicts:
        means = ", ".join(f"{m}={v['means'][m]:.4g}" for m in v["ranking"])
        print(f"{v['direction']} n={v['n']} alpha={v['alpha']:g} ({v['regime']}): {means}")
    print(f"wrote {len(written)} files to {cfg.output.get('dir', 'results')}")
    return 1 if result.cell_errors and not result.verdicts else 0


def cmd_simulate(cfg: ExperimentConfig, args) -> int:
    n = args.n if args.n is not None else cfg.ns[0]
    alpha = args.alpha if args.alpha is not None else cfg.alphas[0]
    label = args.direction or cfg.direction_labels[0]
    if label not in cfg.direction_labels:
        raise MisspecError(f"no direction labelled {label!r}; have {cfg.direction_labels}")
    spec = cfg.directions[cfg.direction_labels.index(label)]
    if isinstance(spec, str):
        spec = {"name": spec}
    cfg = cfg.override(ns=[n], alphas=[alpha], directions=[{**spec, "label": label}])
    return _finish(simulate(cfg, n, alpha, label), cfg)


def cmd_sweep(cfg: ExperimentConfig, args) -> int:
    return _finish(sweep(cfg), cfg)


def cmd_check(cfg: ExperimentConfig, args) -> int:
    from .checks import run_checks

    results = run_checks()
    for r in results:
        print(r.line())
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return 1 if failed else 0


COMMANDS = {"analyze": cmd_analyze, "simulate": cmd_simulate, "sweep": cmd_sweep, "check": cmd_check}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](cfg, args)
    except MisspecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
