import json
import math

import jsonschema
import numpy as np
import pytest
from scipy import stats

from misspecopt.config import from_mapping
from misspecopt.experiments import (
    SUMMARY_SCHEMA,
    Cell,
    SweepResult,
    build_directions,
    emit,
    read_samples,
    regret,
    run_replication,
    simulate,
    summarize,
    sweep,
    true_optimum,
)
from misspecopt.model import GaussianScaledMeanFamily
from misspecopt.perturbation import TiltedDistribution, make_direction
from misspecopt.problems import NewsvendorProblem

from conftest import V1, ZQ


def _cfg(**kw):
    base = {"problem": {"dim": 1}, "directions": [{"name": "linear", "gamma": [1.0], "label": "lin"}],
            "alphas": [0.5], "ns": [100], "replications": 4}
    base.update(kw)
    return from_mapping(base, "default")


def test_true_optimum_zero_tilt(nv1, fam1):
    u = make_direction("hermite2", fam1, [3.0])
    w, v = true_optimum(nv1, TiltedDistribution(fam1, [3.0], u, 0.0))
    assert w[0] == pytest.approx(nv1.oracle_solution(fam1, [3.0])[0], abs=1e-12)


def test_true_optimum_mean_shift(nv1, fam1):
    u = make_direction({"name": "linear", "gamma": [1.0]}, fam1, [3.0])
    q = TiltedDistribution(fam1, [3.0], u, 0.2)
    w, v = true_optimum(nv1, q)
    assert w[0] == pytest.approx(3.2 + ZQ, abs=1e-3)
    for h in (-1e-2, 1e-2):
        assert nv1.expected_cost(q, w + h) > v


def test_true_optimum_two_dims(nv2, fam2):
    u = make_direction("prod_centered_sq", fam2, [3.0])
    q = TiltedDistribution(fam2, [3.0], u, 0.05, "relu_linear")
    w, v = true_optimum(nv2, q)
    for j in range(2):
        for h in (-1e-2, 1e-2):
            e = np.zeros(2)
            e[j] = h
            assert nv2.expected_cost(q, w + e) > v


def test_regret_examples(nv1, fam1):
    u = make_direction("hermite2", fam1, [3.0])
    q = TiltedDistribution(fam1, [3.0], u, 0.0)
    opt = true_optimum(nv1, q)
    assert regret(nv1, q, opt[0]) == 0.0
    r = regret(nv1, q, opt[0] + 0.1)
    assert r == pytest.approx(0.5 * V1 * 0.01, rel=0.05)


def test_regret_invariant_to_z_only_cost_term(fam1):
    class Shifted(NewsvendorProblem):
        def cost(self, w, z):
            return super().cost(w, z) + np.asarray(z, dtype=float).sum(axis=-1) ** 2

        def expected_cost(self, dist, w):
            return super().expected_cost(dist, w) + dist.expect(lambda z: z[:, 0] ** 2)

    u = make_direction("hermite2", fam1, [3.0])
    q = TiltedDistribution(fam1, [3.0], u, 0.1)
    plain, shifted = NewsvendorProblem(5.0, 1.0, 1), Shifted(5.0, 1.0, 1)
    w = np.array([2.3])
    assert regret(shifted, q, w) == pytest.approx(regret(plain, q, w), abs=1e-12)


def test_replication_determinism_and_crn():
    cfg = _cfg()
    (label, d), = build_directions(cfg)
    cell = Cell(cfg, d, label, 100, 0.5)
    a, b = run_replication(cell, 3), run_replication(cell, 3)
    assert [s.regret for s in a] == [s.regret for s in b]
    assert len({s.data_hash for s in a}) == 1
    assert [s.method for s in a] == ["SAA", "ETO", "IEO"]
    assert run_replication(cell, 4)[0].data_hash != a[0].data_hash


def test_well_specified_sanity_ceiling(ifs2):
    from misspecopt.asymptotics import variance_matrix

    n = 10_000
    cfg = _cfg(problem={"dim": 2}, directions=["hermite2"], alphas=[50.0], ns=[n])
    (label, d), = build_directions(cfg)
    cell = Cell(cfg, d, label, n, 50.0)
    bound = 10 * (2 / n) * np.trace(ifs2.matrices.V @ variance_matrix(ifs2, "SAA")) / 2
    for rep in range(3):
        for s in run_replication(cell, rep):
            assert 0.0 <= s.regret < bound


def test_pipeline_errors_are_recorded(monkeypatch):
    import misspecopt.experiments as ex
    from misspecopt.errors import SolverError

    def boom(*a, **k):
        raise SolverError("no bracket")

    monkeypatch.setattr(ex, "fit_ieo", boom)
    cfg = _cfg()
    (label, d), = build_directions(cfg)
    out = ex.run_replication(Cell(cfg, d, label, 100, 0.5), 0)
    assert out[2].error.startswith("SolverError") and math.isnan(out[2].regret)
    assert out[0].error is None


def test_sweep_records_divergent_cells():
    cfg = _cfg(problem={"dim": 2}, directions=["prod_sq"], alphas=[2.0, 0.5], ns=[50], replications=3)
    res = sweep(cfg)
    assert len(res.cell_errors) == 1 and "DivergenceError" in res.cell_errors[0]["error"]
    assert len(res.verdicts) == 1 and res.verdicts[0]["regime"] == "mild"


def test_summaries_ordered_quartiles():
    res = simulate(_cfg(replications=20), 100, 0.5)
    for s in res.summaries:
        assert s.q25 <= s.median <= s.q75 and s.count == 20 and s.sem > 0


def test_workers_do_not_change_results():
    cfg = _cfg(replications=6)
    a = simulate(cfg, 100, 0.5)
    b = simulate(cfg.override(workers=2), 100, 0.5)
    assert [(s.rep, s.method, s.regret) for s in a.samples] == [(s.rep, s.method, s.regret) for s in b.samples]


def test_emit_empty_sweep(tmp_path):
    res = SweepResult(_cfg())
    emit(res, tmp_path)
    assert (tmp_path / "samples_lin.csv").read_text().strip() == "method,n,alpha,rep,regret,w_1"
    jsonschema.validate(json.loads((tmp_path / "summary.json").read_text()), SUMMARY_SCHEMA)


def test_emit_roundtrip_and_schema(tmp_path):
    res = simulate(_cfg(replications=10), 100, 0.5)
    emit(res, tmp_path)
    doc = json.loads((tmp_path / "summary.json").read_text())
    jsonschema.validate(doc, SUMMARY_SCHEMA)
    assert doc["common_random_numbers"] is True
    back = summarize(read_samples(tmp_path / "samples_lin.csv", "lin"))
    orig = {(s.method, s.n): s for s in res.summaries}
    for s in back:
        o = orig[(s.method, s.n)]
        for f in ("mean", "median", "q25", "q75", "sem"):
            assert getattr(s, f) == pytest.approx(getattr(o, f), abs=1e-12)
    panel = tmp_path / "panels" / "lin_alpha0.5.csv"
    assert panel.read_text().startswith("method,n,alpha,statistic,value")


def test_emit_surfaces_path_on_io_error(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError, match="file"):
        emit(SweepResult(_cfg()), blocker / "sub")
