"""Certification pipelines.

Each command is a small state machine: configuration setup, the construction
stages, a per-eps loop and a report node that fixes the verdict and writes the
artifacts.  Solver and input failures short-circuit to the report.
"""

from __future__ import annotations

import functools
import itertools
import logging
import math
from typing import Any, Callable, Literal

import numpy as np
from langgraph.graph import StateGraph

from multibump import artifacts
from multibump.configuration import Configuration
from multibump.coshcombo import assemble_combo, build_polynomial, combo_table, inclusion_threshold, verify_maxima
from multibump.critscan import (
    critical_table,
    default_floor,
    find_critical_points,
    interpolate_solution,
    maxima,
    nondegeneracy_margin,
    symmetric_pairs,
)
from multibump.domainforge import (
    box_half_width,
    check_bounding_box,
    check_far_boundary,
    check_inclusion,
    check_star_shape,
    check_strip_convergence,
    check_surface_residual,
    check_symmetry,
    extract_component,
    remark_r_demo,
    symmetric_difference_volume,
)
from multibump.ellipsolve import (
    ResidualTable,
    build_barriers,
    check_barriers,
    check_defect,
    expansion_residual,
    lambda_below_extremal,
    monotone_bound_check,
    solve_stable,
    vertical_slack,
)
from multibump.errors import (
    AsymptoticViolated,
    ConfigError,
    MaximaCountTooLow,
    MultibumpError,
    NoFailureFound,
    SlopeTooLow,
)
from multibump.fieldkit import GridSpec, assemble_phi, axis_crossing, check_linearized_residual, superpose
from multibump.profile1d import (
    check_hypotheses,
    lambda_star_estimate,
    make_nonlinearity,
    omega_mode,
    profile_table,
    solve_profile,
    widened_profile,
)
from multibump.state import CheckResult, InputState, State, run_check
from multibump.templates import CHECK_LINE, EXPECTED_FAIL_NOTE, SUMMARY_TEMPLATE
from multibump.torsionlab import (
    build_torsion_field,
    certify_torsion_case,
    curvature_table,
    torsion_grid,
)

logger = logging.getLogger(__name__)

Node = Callable[[State], dict[str, Any]]


def guarded(stage: str) -> Callable[[Node], Node]:
    """Turn package errors raised by a node into a recorded stop."""

    def wrap(fn: Node) -> Node:
        @functools.wraps(fn)
        def node(state: State) -> dict[str, Any]:
            try:
                return fn(state)
            except MultibumpError as exc:
                logger.error("%s failed: %s", stage, exc)
                return {"error": {**exc.as_dict(), "stage": stage, "exit_code": exc.exit_code}}

        return node

    return wrap


def _strip_axis_names(dims: int) -> tuple[str, ...]:
    return (*(f"x{j}" for j in range(1, dims + 1)), "y")


def _x_faces(dims: int) -> tuple[str, ...]:
    return tuple(f"x{j}{s}" for j in range(1, dims + 1) for s in "-+")


# Shared stages


@guarded("setup")
def setup(state: State) -> dict[str, Any]:
    """Validate the configuration before any numerics run."""
    configuration = Configuration.from_context().validate()
    if state.pipeline == "sweep":
        eps = configuration.eps_list if configuration.sweep_target == "theorem1" else configuration.torsion_eps_list
        if len(eps) < 3:
            raise ConfigError("a sweep needs at least three eps values", values=list(eps))
    logger.info("%s run, config hash %s", state.pipeline, configuration.config_hash()[:12])
    return {"label": state.label}


@guarded("profile")
def profile(state: State) -> dict[str, Any]:
    """Solve the strip profile, its linearized eigenvalue and the extremal bracket."""
    configuration = Configuration.from_context()
    f = make_nonlinearity(
        configuration.nonlinearity, power_p=configuration.power_p, table_path=configuration.table_path
    )
    check_hypotheses(f)
    p = solve_profile(
        f,
        configuration.lam,
        configuration.sigma,
        nodes=configuration.profile_nodes,
        ode_tol=configuration.ode_tol,
        bisection_tol=configuration.bisection_tol,
        eigen_tol=configuration.eigen_tol,
    )
    try:
        bracket = lambda_star_estimate(
            f, cap=configuration.lambda_cap, tol=configuration.bracket_tol, ode_tol=configuration.ode_tol
        )
    except NoFailureFound:
        bracket = (math.inf, math.inf)
    below = lambda_below_extremal(configuration.lam, bracket, configuration.eta)
    check = CheckResult(
        name="lambda_below_extremal",
        status="PASS" if below else "FAIL",
        stage="profile",
        detail={"lambda": configuration.lam, "bracket": list(bracket), "eta": configuration.eta},
    )
    logger.info("profile: u0(0)=%.10g mu0=%.10g bracket=%s", p.center_value, p.mu0, bracket)
    return {"profile": p, "bracket": bracket, "checks": [check]}


@guarded("combo")
def combo(state: State) -> dict[str, Any]:
    """Build the cosh combination, its modes and the perturbation phi."""
    configuration = Configuration.from_context()
    p = state.profile
    c = assemble_combo(build_polynomial(configuration.resolved_taus()), p.mu0)
    maxima_check, _ = run_check("combo_maxima", lambda: verify_maxima(c), stage="combo")
    modes = [omega_mode(p, mu) for _, mu, _ in c.terms]
    mode_check = CheckResult(name="mode_monotone", status="PASS", stage="combo", detail={"modes": len(modes)})
    phi = assemble_phi(c, modes, configuration.dims)
    reach = max(c.maxima_t)
    box = [(-reach, reach)] * configuration.dims + [(-1.0, 1.0)]
    rng = np.random.default_rng(configuration.seed)
    residual_check, _ = run_check(
        "phi_residual", lambda: check_linearized_residual(phi, p, rng, box), stage="combo"
    )
    return {"combo": c, "modes": modes, "phi": phi, "checks": [maxima_check, mode_check, residual_check]}


@guarded("grid")
def grid(state: State) -> dict[str, Any]:
    """Size one grid for the smallest eps and solve the eps = 0 baseline on it."""
    configuration = Configuration.from_context()
    p, c, phi = state.profile, state.combo, state.phi
    eps_all = list(configuration.eps_list)
    if state.pipeline == "theorem1":
        eps_all = [min(eps_all)]
    eps_min = min(eps_all)
    top_mode = state.modes[-1]
    m_eps = box_half_width(c.top_mu, p.center_value, float(top_mode.value(1.0 + configuration.eta)), eps_min)
    direction = [1.0] + [0.0] * configuration.dims
    crossing = axis_crossing(superpose(p, phi, eps_min), direction, reach=2.0 * m_eps + 10.0)
    half_x = 1.15 * max(m_eps, crossing if math.isfinite(crossing) else m_eps)
    cx, cy = configuration.grid_counts
    spec = GridSpec.centered(
        [half_x] * configuration.dims + [1.0 + p.sigma], [cx] * configuration.dims + [cy]
    )
    logger.info("grid %s, M_eps=%.6g, axis crossing=%.6g", "x".join(map(str, spec.counts)), m_eps, crossing)

    strip = extract_component(
        superpose(p, phi, 0.0),
        spec,
        axis_names=_strip_axis_names(configuration.dims),
        allow_faces=_x_faces(configuration.dims),
        max_nodes=configuration.max_grid_nodes,
    )
    baseline = solve_stable(
        strip, p.f, configuration.lam, tol=configuration.solver_tol, eigen_tol=configuration.eigen_tol
    )
    residual_check, _ = run_check(
        "baseline_boundary_residual", lambda: check_surface_residual(strip, configuration.surface_tol), stage="grid"
    )
    defect_check, _ = run_check(
        "baseline_defect", lambda: check_defect(baseline, configuration.defect_tol), stage="grid"
    )
    checks = [residual_check, defect_check]
    return {"grid": spec, "baseline": baseline, "eps_pending": eps_all, "checks": checks}


def _require_maxima(count: int, expected: int) -> int:
    if count < expected:
        raise MaximaCountTooLow(f"{count} nondegenerate maxima, expected at least {expected}", value=count)
    return count


def _maxima_seeds(maxima_t: tuple[float, ...], dims: int) -> list[tuple[float, ...]]:
    signed = [s * t for t in maxima_t for s in (-1.0, 1.0)]
    return [(*xs, 0.0) for xs in itertools.product(signed, repeat=dims)]


@guarded("certify")
def certify_eps(state: State) -> dict[str, Any]:
    """Extract Omega_eps, solve on it and run every check for the next eps."""
    configuration = Configuration.from_context()
    p, c, phi, spec = state.profile, state.combo, state.phi, state.grid
    eps = state.eps_pending[0]
    dims = configuration.dims
    top_mode = state.modes[-1]
    checks: list[CheckResult] = []

    def check(name: str, fn: Callable[[], Any]) -> Any:
        result, value = run_check(name, fn, stage="certify", eps=eps)
        checks.append(result)
        return value

    U = superpose(p, phi, eps)
    d = extract_component(
        U,
        spec,
        axis_names=_strip_axis_names(dims),
        max_nodes=configuration.max_grid_nodes,
    )
    check("boundary_residual", lambda: check_surface_residual(d, configuration.surface_tol))
    box = check("bounding_box", lambda: check_bounding_box(d, p, c, top_mode, eps, configuration.eta))
    m_eps = box_half_width(c.top_mu, p.center_value, float(top_mode.value(1.0 + configuration.eta)), eps)
    check("inclusion", lambda: check_inclusion(d, c.maxima_t))
    star = check("star_shape", lambda: check_star_shape(U, d))
    check("symmetry", lambda: check_symmetry(d, configuration.symmetry_tol))
    check(
        "far_boundary",
        lambda: check_far_boundary(d, p, c.top_mu, top_mode, eps, m_eps, tol=configuration.far_boundary_tol),
    )
    logger.info("eps=%g: inclusion threshold %.6g", eps, inclusion_threshold(c, p.center_value, dims))

    k_box = [(-max(c.maxima_t), max(c.maxima_t))] * dims + [(-0.5, 0.5)]
    conv_box = [(-max(c.maxima_t), max(c.maxima_t))] * dims + [(-(1.0 + p.sigma), 1.0 + p.sigma)]
    row: dict[str, Any] = {
        "eps": eps,
        "alpha": star.alpha if star else math.nan,
        "volume": symmetric_difference_volume(d, conv_box, 1.0),
        "min_K_m": math.nan,
        "m_eps": m_eps,
        "box_margin": box.margin if box else math.nan,
    }
    latest: dict[str, Any] = {"eps": eps, "field": U, "slab": d}

    sol = check(
        "stability",
        lambda: solve_stable(
            d,
            p.f,
            configuration.lam,
            tol=configuration.solver_tol,
            eigen_tol=configuration.eigen_tol,
        ),
    )
    if sol is not None:
        latest["solution"] = sol
        check("defect", lambda: check_defect(sol, configuration.defect_tol))
        row.update(mu_lin=sol.mu_lin, sup_u=sol.sup, iterations=sol.iterations, defect=sol.defect)
        eta_eps = vertical_slack(d)
        widened = widened_profile(
            p, eta_eps, nodes=configuration.profile_nodes, ode_tol=configuration.ode_tol,
            bisection_tol=configuration.bisection_tol, eigen_tol=configuration.eigen_tol,
        )
        bound = check("monotone_bound", lambda: monotone_bound_check(sol, widened, p, tol=configuration.bound_tol))
        row.update(eta_eps=eta_eps, h_eps=bound.h_eps if bound else math.nan)
        below = lambda_below_extremal(configuration.lam, state.bracket, eta_eps)
        checks.append(
            CheckResult(
                name="lambda_below_domain_extremal", status="PASS" if below else "FAIL", stage="certify", eps=eps
            )
        )
        row["residual"] = expansion_residual(sol, p, phi, eps, k_box, baseline=state.baseline)
        barriers = build_barriers(p, c, state.modes, configuration.eta, dims)
        check(
            "barriers",
            lambda: check_barriers(
                sol, p, phi, eps, barriers, baseline=state.baseline, floor=configuration.expansion_floor
            ),
        )

        interpolant = interpolate_solution(sol)
        floor = default_floor(d, configuration.degeneracy_factor, values=sol.grid_values)
        points = check(
            "critical_points",
            lambda: find_critical_points(
                interpolant, d, extra_seeds=_maxima_seeds(c.maxima_t, dims), floor=floor
            ),
        )
        if points is not None:
            latest["critical_points"] = points
            count = len(maxima(points))
            row["n_maxima"] = count
            check("maxima_count", lambda: _require_maxima(count, configuration.k))
            margin = check("nondegeneracy", lambda: nondegeneracy_margin(points, floor))
            row["hessian_margin"] = margin if margin is not None else math.nan
            row["critical_symmetric"] = float(symmetric_pairs(points, 2.0 * max(spec.spacing)))
    return {
        "checks": checks,
        "rows": [row],
        "slabs": [d],
        "latest": latest,
        "eps_pending": state.eps_pending[1:],
    }


@guarded("summary")
def sweep_summary(state: State) -> dict[str, Any]:
    """Fit the expansion rate and check the approach to the strip."""
    configuration = Configuration.from_context()
    checks: list[CheckResult] = []
    table = ResidualTable([(r["eps"], r["residual"]) for r in state.rows if "residual" in r])
    if state.profile.f.name == "constant":
        checks.append(
            CheckResult(
                name="expansion_slope",
                status="SKIP",
                stage="summary",
                detail={"reason": "linear equation: u_eps - u0 - eps phi vanishes up to discretization"},
            )
        )
    elif len(table.rows) >= 3:
        slope = table.slope()

        def rate() -> float:
            if slope < configuration.slope_min:
                raise SlopeTooLow(f"log-log slope {slope:.4g} < {configuration.slope_min:g}", value=slope)
            return slope

        result, _ = run_check("expansion_slope", rate, stage="summary")
        checks.append(CheckResult(**{**result.to_dict(), "detail": {**result.detail, "slope": slope}}))
    reach = max(state.combo.maxima_t)
    box = [(-reach, reach)] * configuration.dims + [(-(1.0 + state.profile.sigma), 1.0 + state.profile.sigma)]
    result, _ = run_check("strip_convergence", lambda: check_strip_convergence(state.slabs, box), stage="summary")
    checks.append(result)
    return {"checks": checks}


# Torsion stages


@guarded("torsion")
def torsion_setup(state: State) -> dict[str, Any]:
    """Validate every eps and size a shared grid for the smallest one."""
    configuration = Configuration.from_context()
    fields = [
        build_torsion_field(configuration.torsion_k, configuration.torsion_roots, configuration.torsion_dims, eps)
        for eps in configuration.torsion_eps_list
    ]
    spec = torsion_grid(min(fields, key=lambda tf: tf.eps), configuration.torsion_grid_counts)
    return {"grid": spec, "eps_pending": list(configuration.torsion_eps_list)}


def _cylinder_curvature(values: np.ndarray, points: np.ndarray, dims: int, reach: float = 0.5, tol: float = 0.05) -> float:
    target = (dims - 1) / (dims * math.sqrt(dims))
    near = np.abs(points[:, 0]) <= reach
    mean = float(np.mean(values[near]))
    if abs(mean / target - 1.0) > tol:
        raise AsymptoticViolated(f"mean curvature {mean:.6g} near x = 0 is not within {tol:.0%} of {target:.6g}")
    return mean


@guarded("torsion")
def torsion_case(state: State) -> dict[str, Any]:
    """Certify the torsion construction for the next eps."""
    configuration = Configuration.from_context()
    eps = state.eps_pending[0]
    tf = build_torsion_field(configuration.torsion_k, configuration.torsion_roots, configuration.torsion_dims, eps)
    case = certify_torsion_case(
        tf,
        configuration.torsion_grid_counts,
        eta=configuration.eta,
        surface_tol=configuration.surface_tol,
        symmetry_tol=configuration.symmetry_tol,
        degeneracy_factor=configuration.degeneracy_factor,
        spec=state.grid,
        max_nodes=configuration.max_grid_nodes,
    )
    checks = [
        CheckResult(
            name=name,
            status="FAIL" if name in case.failures else "PASS",
            stage="torsion",
            eps=eps,
            detail=case.failures.get(name, {}),
        )
        for name in ("boundary_residual", "star_shape", "symmetry", "curvature", "asymptotics", "maxima")
    ]

    def check(name: str, fn: Callable[[], Any]) -> Any:
        result, value = run_check(name, fn, stage="torsion", eps=eps)
        checks.append(result)
        return value

    def radial() -> float:
        if case.radial_gap > 1e-8:
            raise AsymptoticViolated(f"radial identity off by {case.radial_gap:.3g}", value=case.radial_gap)
        return case.radial_gap

    check("radial_identity", radial)
    # checked at the smallest eps only
    if case.curvature is not None and len(state.eps_pending) == 1:
        check(
            "cylinder_curvature",
            lambda: _cylinder_curvature(case.curvature.values, case.curvature.points, tf.dims),
        )
    seeds = [(t, *([0.0] * tf.dims)) for t, _ in case.maxima]
    points = check("critical_points", lambda: find_critical_points(tf, case.slab, extra_seeds=seeds))
    found = maxima(points) if points else []
    if points:
        expected = sorted(t for t, _ in case.maxima)

        def located() -> int:
            xs = sorted(p.location[0] for p in found)
            if len(xs) < len(expected) or any(
                min(abs(x - t) for x in xs) > 1e-6 * max(1.0, abs(t)) for t in expected
            ):
                raise MaximaCountTooLow(f"maxima of u_eps at {xs}, expected {expected}", value=len(xs))
            return len(xs)

        check("maxima_located", located)
    reach = max(configuration.torsion_roots) + 1.0
    box = [(-reach, reach)] + [(-state.grid.upper[1], state.grid.upper[1])] * tf.dims
    row = {
        "eps": eps,
        "min_K_m": case.curvature.min_value if case.curvature else math.nan,
        "alpha": case.star.alpha if case.star else math.nan,
        "n_maxima": len(found),
        "volume": symmetric_difference_volume(case.slab, box, math.sqrt(tf.dims), y_axes=range(1, tf.dims + 1)),
        "crossing": case.asymptotics.crossing_measured if case.asymptotics else math.nan,
        "crossing_exact": case.asymptotics.crossing_exact if case.asymptotics else math.nan,
        "q_identity_gap": case.q_identity_gap,
        "radial_gap": case.radial_gap,
    }
    return {
        "checks": checks,
        "rows": [row],
        "slabs": [case.slab],
        "torsion_cases": [case],
        "latest": {"eps": eps, "critical_points": points or []},
        "eps_pending": state.eps_pending[1:],
    }


@guarded("summary")
def torsion_summary(state: State) -> dict[str, Any]:
    """Check the approach of the components to the cylinder."""
    configuration = Configuration.from_context()
    if len(state.slabs) < 2:
        return {"checks": [CheckResult(name="cylinder_convergence", status="SKIP", stage="summary")]}
    dims = configuration.torsion_dims
    reach = max(configuration.torsion_roots) + 1.0
    box = [(-reach, reach)] + [(-state.grid.upper[1], state.grid.upper[1])] * dims
    result, _ = run_check(
        "cylinder_convergence",
        lambda: check_strip_convergence(state.slabs, box, math.sqrt(dims), y_axes=range(1, dims + 1)),
        stage="summary",
    )
    return {"checks": [result, curvature_trend(state.rows)]}


def curvature_trend(rows: list[dict[str, Any]]) -> CheckResult:
    """min K_m must stay positive and shrink with eps; SKIP when a row has no curvature."""
    ordered = sorted(rows, key=lambda r: r["eps"], reverse=True)
    curvatures = [r["min_K_m"] for r in ordered]
    detail = {"eps": [r["eps"] for r in ordered], "min_K_m": curvatures}
    if not all(math.isfinite(v) for v in curvatures):
        return CheckResult(name="curvature_trend", status="SKIP", stage="summary", detail=detail)
    positive = all(v > 0 for v in curvatures)
    decreasing = all(b < a for a, b in zip(curvatures, curvatures[1:]))
    return CheckResult(
        name="curvature_trend", status="PASS" if positive and decreasing else "FAIL", stage="summary", detail=detail
    )


# Negative control


@guarded("remark")
def remark(state: State) -> dict[str, Any]:
    """Run the eigenfunction construction that must fail to be bounded."""
    configuration = Configuration.from_context()
    report = remark_r_demo(configuration.remark_mu1, configuration.remark_eps, configuration.remark_widths)
    check = CheckResult(
        name="unbounded_component",
        status="PASS" if report.unbounded else "FAIL",
        stage="remark",
        detail=report.to_dict(),
    )
    return {"remark": report, "checks": [check]}


# Routing


def should_continue(state: State) -> Literal["continue", "report"]:
    """Stop at the first solver or input failure."""
    return "report" if state.error else "continue"


def next_eps(state: State) -> Literal["next", "done", "report"]:
    """Loop over the pending eps values."""
    if state.error:
        return "report"
    return "next" if state.eps_pending else "done"


def sweep_target(state: State) -> Literal["theorem1", "torsion", "report"]:
    if state.error:
        return "report"
    return Configuration.from_context().sweep_target  # type: ignore[return-value]


# Report


def decide_verdict(state: State) -> str:
    if state.error and state.error.get("exit_code") != 1:
        return "ERROR"
    failed = bool(state.error) or any(c.status == "FAIL" for c in state.checks)
    if state.pipeline == "remark_r":
        return "UNEXPECTED-PASS" if failed else "EXPECTED-FAIL"
    return "FAIL" if failed else "PASS"


def render_summary(state: State, verdict: str, configuration: Configuration) -> str:
    from multibump import __version__

    lines = []
    for c in state.checks:
        eps = "" if c.eps is None else f"eps={c.eps:g} "
        message = c.detail.get("message", "") if c.status == "FAIL" else ""
        lines.append(CHECK_LINE.format(status=c.status, name=c.name, eps=eps, message=message).rstrip())
    error_line = ""
    if state.error:
        error_line = f"stopped in {state.error['stage']}: {state.error['error']}: {state.error['message']}\n"
    if verdict == "EXPECTED-FAIL" and state.remark is not None:
        error_line += EXPECTED_FAIL_NOTE.format(line_y=state.remark.line_y) + "\n"
    return SUMMARY_TEMPLATE.format(
        version=__version__,
        pipeline=state.pipeline,
        label=f" ({state.label})" if state.label else "",
        config_hash=configuration.config_hash(),
        verdict=verdict,
        check_lines="\n".join(lines),
        error_line=error_line,
    )


def _write_artifacts(state: State, configuration: Configuration) -> list[str]:
    out = artifacts.run_directory(configuration.output_dir, state.pipeline)
    written = []
    if state.profile is not None:
        header, table = profile_table(state.profile, state.modes)
        written.append(artifacts.write_csv(out / "profile.csv", header, table))
    if state.combo is not None:
        header, table = combo_table(state.combo)
        written.append(artifacts.write_csv(out / "combo.csv", header, table))
    if state.rows:
        written.append(artifacts.write_rows(out / "sweep.csv", state.rows))
    points = state.latest.get("critical_points")
    if points:
        header, table = critical_table(points)
        written.append(artifacts.write_csv(out / "critical_points.csv", header, table))
    sol = state.latest.get("solution")
    if sol is not None:
        written.append(artifacts.write_raw(out / "solution.raw", sol.grid_values, sol.slab.spec.to_dict()))
        if sol.slab.dim == 2:
            written.append(artifacts.write_pgm(out / "mask.pgm", sol.slab.mask))
            written.append(
                artifacts.write_contour_svg(
                    out / "contour.svg",
                    sol.slab.spec.axes(),
                    sol.grid_values,
                    boundary=sol.slab.vertices,
                    markers=[(p.location[0], p.location[1], p.kind) for p in points or []],
                    title=f"u_eps, eps={state.latest['eps']:g}",
                )
            )
    for i, case in enumerate(state.torsion_cases):
        if case.slab.dim == 3:
            written.append(artifacts.write_obj(out / f"boundary_{i}.obj", case.slab.vertices, case.slab.cells))
        if case.curvature is not None:
            header, table = curvature_table(case.curvature)
            written.append(artifacts.write_csv(out / f"curvature_{i}.csv", header, table))
    return [str(p.relative_to(out)) for p in written]


def report(state: State) -> dict[str, Any]:
    """Fix the verdict and write every artifact of the run."""
    from multibump import __version__

    configuration = Configuration.from_context()
    verdict = decide_verdict(state)
    payload: dict[str, Any] = {
        "pipeline": state.pipeline,
        "label": state.label,
        "verdict": verdict,
        "version": __version__,
        "config_hash": configuration.config_hash(),
        "config": {k: v for k, v in configuration.to_dict().items() if k != "output_dir"},
        "checks": [c.to_dict() for c in state.checks],
        "rows": state.rows,
        "error": state.error,
    }
    if state.profile is not None:
        payload["profile"] = {
            "u0_center": state.profile.center_value,
            "mu0": state.profile.mu0,
            "sigma": state.profile.sigma,
            "lambda_star_bracket": list(state.bracket) if state.bracket else None,
        }
    if state.combo is not None:
        payload["combo"] = {
            "delta": state.combo.delta,
            "maxima": list(state.combo.maxima_t),
            "alphas": [str(a) for a in state.combo.alphas_exact],
        }
    if state.remark is not None:
        payload["remark"] = state.remark.to_dict()
    written: list[str] = []
    try:
        written = _write_artifacts(state, configuration)
        out = artifacts.run_directory(configuration.output_dir, state.pipeline)
        artifacts.write_json(out / "report.json", payload)
        (out / "summary.txt").write_text(render_summary(state, verdict, configuration))
        written += ["report.json", "summary.txt"]
    except OSError as exc:
        logger.error("could not write artifacts: %s", exc)
    logger.info("%s verdict: %s", state.pipeline, verdict)
    return {"verdict": verdict, "report": payload, "artifacts": written}


# Graphs


def _strip_stages(builder: StateGraph, after: str, tail: str) -> None:
    """profile -> combo -> grid -> certify loop -> tail."""
    builder.add_node("profile", profile)
    builder.add_node("combo", combo)
    builder.add_node("grid", grid)
    builder.add_node("certify", certify_eps)
    builder.add_conditional_edges(after, should_continue, {"continue": "profile", "report": "report"})
    builder.add_conditional_edges("profile", should_continue, {"continue": "combo", "report": "report"})
    builder.add_conditional_edges("combo", should_continue, {"continue": "grid", "report": "report"})
    builder.add_conditional_edges("grid", next_eps, {"next": "certify", "done": tail, "report": "report"})
    builder.add_conditional_edges("certify", next_eps, {"next": "certify", "done": tail, "report": "report"})


def _torsion_stages(builder: StateGraph, tail: str) -> None:
    builder.add_node("torsion_setup", torsion_setup)
    builder.add_node("torsion_case", torsion_case)
    builder.add_node("torsion_summary", torsion_summary)
    builder.add_conditional_edges(
        "torsion_setup", next_eps, {"next": "torsion_case", "done": tail, "report": "report"}
    )
    builder.add_conditional_edges(
        "torsion_case", next_eps, {"next": "torsion_case", "done": "torsion_summary", "report": "report"}
    )
    builder.add_edge("torsion_summary", "report")


def _builder() -> StateGraph:
    builder = StateGraph(State, input=InputState, config_schema=Configuration)
    builder.add_node("setup", setup)
    builder.add_node("report", report)
    builder.add_edge("__start__", "setup")
    builder.add_edge("report", "__end__")
    return builder


def build_profile_graph():
    builder = _builder()
    builder.add_node("profile", profile)
    builder.add_node("combo", combo)
    builder.add_conditional_edges("setup", should_continue, {"continue": "profile", "report": "report"})
    builder.add_conditional_edges("profile", should_continue, {"continue": "combo", "report": "report"})
    builder.add_edge("combo", "report")
    return builder.compile(name="Profile")


def build_theorem1_graph():
    builder = _builder()
    _strip_stages(builder, after="setup", tail="report")
    return builder.compile(name="Strip certification")


def build_theorem2_graph():
    builder = _builder()
    builder.add_conditional_edges("setup", should_continue, {"continue": "torsion_setup", "report": "report"})
    _torsion_stages(builder, tail="torsion_summary")
    return builder.compile(name="Cylinder certification")


def build_sweep_graph():
    builder = _builder()
    builder.add_node("route", lambda state: {"label": state.label})
    builder.add_conditional_edges(
        "setup", sweep_target, {"theorem1": "route", "torsion": "torsion_setup", "report": "report"}
    )
    _strip_stages(builder, after="route", tail="summary")
    builder.add_node("summary", sweep_summary)
    builder.add_edge("summary", "report")
    _torsion_stages(builder, tail="torsion_summary")
    return builder.compile(name="Epsilon sweep")


def build_remark_graph():
    builder = _builder()
    builder.add_node("remark", remark)
    builder.add_conditional_edges("setup", should_continue, {"continue": "remark", "report": "report"})
    builder.add_edge("remark", "report")
    return builder.compile(name="Eigenfunction negative control")


profile_graph = build_profile_graph()
theorem1_graph = build_theorem1_graph()
theorem2_graph = build_theorem2_graph()
sweep_graph = build_sweep_graph()
remark_graph = build_remark_graph()

GRAPHS = {
    "profile": profile_graph,
    "theorem1": theorem1_graph,
    "theorem2": theorem2_graph,
    "sweep": sweep_graph,
    "remark_r": remark_graph,
}
