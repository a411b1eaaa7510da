import pytest

from multibump.configuration import Configuration
from multibump.errors import NotStarShaped, SolverError
from multibump.graph import decide_verdict, render_summary
from multibump.state import CheckResult, State, run_check
from multibump.templates import VERDICT_EXIT_CODES


def _fail() -> None:
    raise NotStarShaped("radial derivative is nonnegative", point=(1.0, 0.0), value=0.1)


def test_run_check_pass_and_fail() -> None:
    result, value = run_check("symmetry", lambda: 3, stage="geometry", eps=1e-3)
    assert result.status == "PASS" and value == 3
    result, value = run_check("star_shape", _fail)
    assert result.status == "FAIL"
    assert value is None
    assert result.detail["error"] == "NotStarShaped"
    assert result.detail["point"] == [1.0, 0.0]
    assert not result.passed


def test_run_check_lets_solver_errors_through() -> None:
    def boom() -> None:
        raise SolverError("no convergence")

    with pytest.raises(SolverError):
        run_check("stability", boom)


def test_skip_counts_as_passed() -> None:
    assert CheckResult(name="expansion_slope", status="SKIP").passed


@pytest.mark.parametrize(
    "pipeline,checks,error,verdict",
    [
        ("theorem1", ["PASS", "SKIP"], None, "PASS"),
        ("theorem1", ["PASS", "FAIL"], None, "FAIL"),
        ("theorem2", [], {"exit_code": 2, "stage": "setup"}, "ERROR"),
        ("theorem2", [], {"exit_code": 1, "stage": "torsion"}, "FAIL"),
        ("remark_r", ["FAIL"], None, "EXPECTED-FAIL"),
        ("remark_r", ["PASS"], None, "UNEXPECTED-PASS"),
    ],
)
def test_verdicts(pipeline, checks, error, verdict) -> None:
    state = State(
        pipeline=pipeline,
        checks=[CheckResult(name=f"c{i}", status=s) for i, s in enumerate(checks)],
        error=error,
    )
    assert decide_verdict(state) == verdict
    assert verdict in VERDICT_EXIT_CODES


def test_exit_codes() -> None:
    assert VERDICT_EXIT_CODES["PASS"] == VERDICT_EXIT_CODES["EXPECTED-FAIL"] == 0
    assert VERDICT_EXIT_CODES["FAIL"] == VERDICT_EXIT_CODES["UNEXPECTED-PASS"] == 1
    assert VERDICT_EXIT_CODES["ERROR"] == 2


def test_summary_lists_checks() -> None:
    failed, _ = run_check("star_shape", _fail, eps=1e-3)
    state = State(pipeline="theorem1", label="demo", checks=[CheckResult(name="symmetry", status="PASS"), failed])
    text = render_summary(state, "FAIL", Configuration())
    assert "theorem1 (demo)" in text
    assert "verdict: FAIL" in text
    assert "[FAIL] star_shape" in text
    assert "eps=0.001" in text
    assert Configuration().config_hash() in text
