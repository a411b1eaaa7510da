"""Define the state structures for the certification pipelines."""

from __future__ import annotations

import operator
from dataclasses import dataclass, field
from typing import Any, Callable, Optional, TypeVar

from typing_extensions import Annotated

from multibump.errors import CertificationFailure

T = TypeVar("T")


@dataclass(frozen=True)
class CheckResult:
    """Outcome of one certification check."""

    name: str
    status: str
    """PASS, FAIL or SKIP."""

    stage: str = ""
    eps: Optional[float] = None
    detail: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.status != "FAIL"

    def to_dict(self) -> dict:
        return {"name": self.name, "status": self.status, "stage": self.stage, "eps": self.eps, "detail": self.detail}


def run_check(
    name: str, fn: Callable[[], T], *, stage: str = "", eps: Optional[float] = None
) -> tuple[CheckResult, Optional[T]]:
    """Call `fn`, turning a CertificationFailure into a FAIL result.

    Solver and input errors propagate so that the pipeline can stop.
    """
    try:
        value = fn()
    except CertificationFailure as exc:
        return CheckResult(name=name, status="FAIL", stage=stage, eps=eps, detail=exc.as_dict()), None
    return CheckResult(name=name, status="PASS", stage=stage, eps=eps), value


@dataclass
class InputState:
    """Defines the input state for a pipeline run.

    Numeric parameters live in the Configuration; the input only names what
    to run.
    """

    pipeline: str = field(default="theorem1")
    """One of profile, theorem1, theorem2, sweep or remark_r."""

    label: str = field(default="")
    """Free-form run label, copied into the report."""


@dataclass
class State(InputState):
    """Represents the complete state of a pipeline run."""

    checks: Annotated[list[CheckResult], operator.add] = field(default_factory=list)
    """Certification results, appended by every stage."""

    rows: Annotated[list[dict[str, Any]], operator.add] = field(default_factory=list)
    """Per-eps summary rows for the sweep table."""

    error: Optional[dict[str, Any]] = field(default=None)
    """Solver or input failure that stopped the pipeline, with its stage."""

    eps_pending: list[float] = field(default_factory=list)
    """Perturbation sizes still to be processed, largest first."""

    profile: Any = field(default=None)
    """Profile1D of the strip problem."""

    bracket: Optional[tuple[float, float]] = field(default=None)
    """Bracket of the extremal parameter on (-1, 1)."""

    combo: Any = field(default=None)
    """CoshCombo of the perturbation."""

    modes: list[Any] = field(default_factory=list)
    """Modes omega_mu for every frequency of the combination."""

    phi: Any = field(default=None)
    """PerturbationField phi."""

    grid: Any = field(default=None)
    """GridSpec shared by every eps of the run."""

    baseline: Any = field(default=None)
    """Discrete eps = 0 solution on the shared grid."""

    slabs: Annotated[list[Any], operator.add] = field(default_factory=list)
    """Extracted components, one per processed eps."""

    latest: dict[str, Any] = field(default_factory=dict)
    """Artifacts of the most recent eps: field, slab, solution, critical points."""

    torsion_cases: Annotated[list[Any], operator.add] = field(default_factory=list)
    """TorsionCaseReport per eps."""

    remark: Any = field(default=None)
    """RemarkReport of the eigenfunction negative control."""

    verdict: str = field(default="")
    """PASS, FAIL, ERROR, EXPECTED-FAIL or UNEXPECTED-PASS."""

    report: dict[str, Any] = field(default_factory=dict)
    """JSON-ready report written by the final node."""

    artifacts: list[str] = field(default_factory=list)
    """Paths written by the run, relative to the output directory."""
