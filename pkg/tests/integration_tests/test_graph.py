import json

import pytest

from multibump import profile_graph, remark_graph, sweep_graph, theorem1_graph, theorem2_graph
from multibump.configuration import Configuration
from multibump.graph import curvature_trend


def _invoke(graph, pipeline: str, tmp_path, **overrides):
    configurable = {"output_dir": str(tmp_path), **overrides}
    return graph.invoke({"pipeline": pipeline, "label": "test"}, {"configurable": configurable})


def _statuses(result) -> dict[str, str]:
    return {c.name: c.status for c in result["checks"]}


def _failures(result) -> set[str]:
    return {c.name for c in result["checks"] if c.status == "FAIL"}


def test_profile_pipeline(tmp_path) -> None:
    res = _invoke(profile_graph, "profile", tmp_path, nonlinearity="exponential", lam=0.5)
    assert res["verdict"] == "PASS", res.get("error")
    assert sum(res["bracket"]) / 2 == pytest.approx(0.87845, abs=2e-3)
    report = json.loads((tmp_path / "profile" / "report.json").read_text())
    assert report["verdict"] == "PASS"
    assert report["profile"]["u0_center"] == pytest.approx(0.3286, abs=1e-3)
    assert report["config_hash"] == Configuration(nonlinearity="exponential", lam=0.5).config_hash()
    assert (tmp_path / "profile" / "profile.csv").exists()
    assert (tmp_path / "profile" / "combo.csv").exists()


def test_profile_pipeline_above_extremal(tmp_path) -> None:
    res = _invoke(profile_graph, "profile", tmp_path, nonlinearity="exponential", lam=1.0)
    assert res["verdict"] == "ERROR"
    assert res["error"]["stage"] == "profile"
    assert res["error"]["exit_code"] == 2


def test_sweep_needs_three_eps(tmp_path) -> None:
    res = _invoke(sweep_graph, "sweep", tmp_path, eps_list=(1e-3,))
    assert res["verdict"] == "ERROR"
    assert res["error"]["stage"] == "setup"
    assert "summary.txt" in res["artifacts"]


def test_remark_control_is_expected_fail(tmp_path) -> None:
    res = _invoke(remark_graph, "remark_r", tmp_path, remark_widths=(20.0, 40.0))
    assert res["verdict"] == "EXPECTED-FAIL"
    assert _statuses(res)["unbounded_component"] == "FAIL"
    summary = (tmp_path / "remark_r" / "summary.txt").read_text()
    assert "verdict: EXPECTED-FAIL" in summary


@pytest.mark.slow
def test_theorem2_pipeline(tmp_path) -> None:
    res = _invoke(theorem2_graph, "theorem2", tmp_path, torsion_grid_counts=(129, 65))
    assert res["verdict"] == "PASS", [c for c in res["checks"] if c.status == "FAIL"]
    statuses = _statuses(res)
    for name in ("star_shape", "symmetry", "curvature", "asymptotics", "maxima", "cylinder_convergence"):
        assert statuses[name] == "PASS"
    assert len(res["torsion_cases"]) == 2
    assert (tmp_path / "theorem2" / "boundary_0.obj").exists()
    assert (tmp_path / "theorem2" / "curvature_1.csv").exists()


@pytest.mark.slow
def test_theorem1_torsion_profile(tmp_path) -> None:
    res = _invoke(theorem1_graph, "theorem1", tmp_path, grid_counts=(193, 97))
    assert res["verdict"] == "PASS", (res.get("error"), _failures(res))
    statuses = _statuses(res)
    for name in ("stability", "bounding_box", "inclusion", "symmetry", "barriers", "monotone_bound", "phi_residual"):
        assert statuses[name] == "PASS"
    report = json.loads((tmp_path / "theorem1" / "report.json").read_text())
    assert report["rows"][0]["eps"] == pytest.approx(1e-4)
    assert (tmp_path / "theorem1" / "solution.raw").exists()
    assert (tmp_path / "theorem1" / "contour.svg").exists()


@pytest.mark.slow
def test_theorem1_two_maxima(tmp_path) -> None:
    # at eps = 1e-4 the two-bump component reaches past M_eps and the lower cosh terms
    # still dominate the far boundary
    res = _invoke(theorem1_graph, "theorem1", tmp_path, k=2, eps_list=(1e-4,), grid_counts=(193, 97))
    assert res.get("error") is None
    assert res["verdict"] == "FAIL"
    assert _failures(res) == {"bounding_box", "far_boundary"}
    tops = [p for p in res["latest"]["critical_points"] if p.kind == "max" and p.location[0] > 0]
    assert len(tops) >= 2
    assert sorted(p.location[0] for p in tops)[:2] == pytest.approx(list(res["combo"].maxima_t), rel=1e-2)


@pytest.mark.slow
def test_gelfand_sweep(tmp_path) -> None:
    res = _invoke(
        sweep_graph,
        "sweep",
        tmp_path,
        nonlinearity="exponential",
        lam=0.5,
        eps_list=(1e-3, 5e-4, 2.5e-4),
        grid_counts=(257, 129),
    )
    assert res.get("error") is None
    statuses = _statuses(res)
    assert statuses["expansion_slope"] == "PASS"
    assert statuses["strip_convergence"] == "PASS"
    slope = next(c for c in res["checks"] if c.name == "expansion_slope").detail["slope"]
    assert slope > 1.8
    assert [r["eps"] for r in res["rows"]] == [1e-3, 5e-4, 2.5e-4]
    assert (tmp_path / "sweep" / "sweep.csv").exists()


def test_reruns_are_byte_identical(tmp_path) -> None:
    for run in ("a", "b"):
        res = _invoke(profile_graph, "profile", tmp_path / run, nonlinearity="exponential", lam=0.5)
        assert res["verdict"] == "PASS", res.get("error")
    for name in ("report.json", "profile.csv", "combo.csv", "summary.txt"):
        first = (tmp_path / "a" / "profile" / name).read_bytes()
        assert first == (tmp_path / "b" / "profile" / name).read_bytes(), name


def test_curvature_trend() -> None:
    rows = [{"eps": 1e-4, "min_K_m": 0.05}, {"eps": 1e-3, "min_K_m": 0.2}]
    assert curvature_trend(rows).status == "PASS"
    assert curvature_trend([{"eps": 1e-3, "min_K_m": 0.05}, {"eps": 1e-4, "min_K_m": 0.2}]).status == "FAIL"
    assert curvature_trend([{"eps": 1e-3, "min_K_m": -0.1}, {"eps": 1e-4, "min_K_m": -0.2}]).status == "FAIL"
    assert curvature_trend([{"eps": 1e-3, "min_K_m": float("nan")}]).status == "SKIP"
