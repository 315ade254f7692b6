import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spectralign import shapes
from spectralign.config import Config
from spectralign.datagen import CutSpec, plane_cut
from spectralign.errors import EmptyUnion
from spectralign.evaluation import (
    CURVE_T,
    CaseResult,
    EvalReport,
    cumulative_curve,
    iou,
    perturbation_check,
    run_benchmark,
    weyl_ratios,
)
from spectralign.plotting import plot_cumulative


def test_iou_examples():
    mass = np.ones(10)
    assert iou([1, 2, 3], [1, 2, 3], mass) == 1.0
    assert iou([1, 2], [5, 6], mass) == 0.0
    m = np.array([1.0, 1.0, 2.0, 0.5])
    assert iou([2], [0, 1, 2], m) == pytest.approx(0.5)
    with pytest.raises(EmptyUnion):
        iou([], [], mass)


@settings(max_examples=40, deadline=None)
@given(
    a=st.sets(st.integers(0, 29), min_size=1),
    b=st.sets(st.integers(0, 29)),
    seed=st.integers(0, 100),
)
def test_iou_symmetric_and_bounded(a, b, seed):
    mass = np.random.default_rng(seed).uniform(0.1, 2.0, 30)
    x = iou(sorted(a), sorted(b), mass)
    assert x == pytest.approx(iou(sorted(b), sorted(a), mass), rel=1e-12)
    assert 0.0 <= x <= 1.0


def test_curve_examples():
    assert np.all(cumulative_curve([1.0, 1.0, 1.0]) == 1.0)
    curve = cumulative_curve([0.2, 0.8])
    assert curve[list(CURVE_T).index(0.5)] == 0.5
    assert len(curve) == 21 and CURVE_T[0] == 0.0 and CURVE_T[-1] == 1.0
    with pytest.raises(ValueError):
        cumulative_curve([1.2])


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0.0, 1.0), min_size=1, max_size=30))
def test_curve_invariants(ious):
    c = cumulative_curve(ious)
    assert c[0] == 1.0
    assert np.all(np.diff(c) <= 0)


def test_report_files(tmp_path):
    cases = [CaseResult(0, 0.75, 0.01, 3, 120, wall_ms=5.0), CaseResult(1, 0.0, float("nan"), -1, 0, error="X: y")]
    rep = EvalReport(cases, Config().to_dict(), "dual")
    paths = rep.write(tmp_path)
    data = json.loads(open(paths["report"]).read())
    assert data["mean_iou"] == pytest.approx(0.375)
    assert data["cases"][1]["error"] == "X: y" and data["cases"][1]["final_cost"] is None
    assert "wall_ms" not in open(paths["report"]).read()
    assert json.loads(open(paths["timings"]).read())["wall_ms"]["0"] == 5.0
    lines = open(paths["curve"]).read().splitlines()
    assert lines[0] == "t,fraction" and len(lines) == 22
    assert open(paths["figure"], "rb").read(4) == b"\x89PNG"


def test_plot_multiple(tmp_path):
    out = plot_cumulative({"dual": [0.9, 0.5], "single": [0.4, 0.3]}, tmp_path / "c.png", title="t")
    assert open(out, "rb").read(4) == b"\x89PNG"


@pytest.fixture(scope="module")
def tiny_bench():
    m = shapes.icosphere(3)
    n = m.vertices[0] / np.linalg.norm(m.vertices[0])
    res = plane_cut(m, CutSpec("plane", normal=tuple(n), offset=0.15))
    cases = [(0, res.partial, res.ground_truth), (1, m, np.arange(10))]  # second case has no boundary
    cfg = Config(k_per_metric=4, n_fps=2, max_iter=8)
    return m, cases, cfg


def test_run_benchmark_records_failures_and_is_deterministic(tiny_bench, tmp_path):
    m, cases, cfg = tiny_bench
    a = run_benchmark(m, cases, cfg, label="dual", out_dir=tmp_path / "a")
    b = run_benchmark(m, cases, cfg, label="dual", out_dir=tmp_path / "b")
    assert a.cases[1].iou == 0.0 and "DegenerateCut" in a.cases[1].error
    assert 0.0 <= a.cases[0].iou <= 1.0 and a.cases[0].error is None
    assert len(a.cases[0].starts) == 4
    ra = open(tmp_path / "a" / "report_dual.json", "rb").read()
    rb = open(tmp_path / "b" / "report_dual.json", "rb").read()
    assert ra == rb
    assert a.config["k_per_metric"] == 4


def test_perturbation_zero_delta(sphere2):
    rows = perturbation_check(sphere2, 0, [0.0], indices=range(2, 6))
    assert rows[0][:3] == (0.0, 0.0, 0.0)


def test_weyl_trend_two_dimensional_constant(sphere4):
    # on a closed surface lam_i ~ 4 pi i / area, so the ratios built with 2 pi sit near 2
    r = weyl_ratios(sphere4, range(20, 41)) / 2.0
    assert np.all((r > 0.7) & (r < 1.3))
