"""Define the configurable parameters for the construction pipelines."""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Mapping, get_type_hints

from langchain_core.runnables import ensure_config
from langgraph.config import get_config

from multibump.errors import ConfigError

NONLINEARITIES = ("constant", "exponential", "power", "table")
SWEEP_TARGETS = ("theorem1", "torsion")

# Names used in key=value files that differ from the field names.
_FILE_ALIASES = {"lambda": "lam", "N": "dims"}


@dataclass(kw_only=True)
class Configuration:
    """The configuration for a certification run."""

    nonlinearity: str = field(
        default="constant",
        metadata={
            "description": "Nonlinearity f: 'constant' (f=1), 'exponential' (f=e^u), "
            "'power' (f=(1+u)^p) or 'table' (spline through a CSV of u,f samples)."
        },
    )

    power_p: float = field(
        default=2.0,
        metadata={"description": "Exponent p of the power nonlinearity."},
    )

    table_path: str = field(
        default="",
        metadata={"description": "CSV file with columns u,f for the table nonlinearity."},
    )

    lam: float = field(
        default=1.0,
        metadata={"description": "Parameter lambda multiplying f (file key 'lambda')."},
    )

    sigma: float = field(
        default=0.1,
        metadata={"description": "Half-width of the extension of the profile past +-1."},
    )

    eta: float = field(
        default=0.05,
        metadata={"description": "Vertical slack of the bounding box, 0 < eta < sigma."},
    )

    k: int = field(
        default=1,
        metadata={"description": "Number of target maxima of the cosh combination."},
    )

    dims: int = field(
        default=1,
        metadata={"description": "Number N of unbounded x-directions for the strip construction."},
    )

    taus: tuple[float, ...] = field(
        default=(),
        metadata={
            "description": "Maxima of the auxiliary polynomial, all > 1. "
            "Empty means cosh(1), ..., cosh(k)."
        },
    )

    eps_list: tuple[float, ...] = field(
        default=(4e-4, 2e-4, 1e-4),
        metadata={
            "description": "Strictly decreasing perturbation sizes. theorem1 certifies "
            "at the smallest one; sweep uses all of them."
        },
    )

    grid_counts: tuple[int, ...] = field(
        default=(1025, 513),
        metadata={"description": "Node counts (per x-axis, y-axis) of the strip grid."},
    )

    profile_nodes: int = field(
        default=4097,
        metadata={"description": "Uniform nodes of the sampled one-dimensional profile."},
    )

    torsion_k: int = field(
        default=2,
        metadata={"description": "Degree parameter k of the torsion polynomial."},
    )

    torsion_roots: tuple[float, ...] = field(
        default=(1.0, 2.0),
        metadata={"description": "Roots 0 < t_1 < ... < t_k of the torsion polynomial."},
    )

    torsion_dims: int = field(
        default=2,
        metadata={"description": "Number N of bounded y-directions; must be >= 2."},
    )

    torsion_eps_list: tuple[float, ...] = field(
        default=(1e-3, 1e-4),
        metadata={"description": "Strictly decreasing perturbation sizes for the torsion run."},
    )

    torsion_grid_counts: tuple[int, ...] = field(
        default=(257, 257),
        metadata={"description": "Node counts (x-axis, per y-axis) of the torsion grid."},
    )

    remark_mu1: float = field(
        default=1.0,
        metadata={"description": "Frequency of the eigenfunction negative control."},
    )

    remark_eps: float = field(
        default=1e-3,
        metadata={"description": "Perturbation size of the eigenfunction negative control."},
    )

    remark_widths: tuple[float, ...] = field(
        default=(20.0, 40.0, 80.0, 160.0),
        metadata={"description": "Half-widths of the boxes tried by the negative control."},
    )

    sweep_target: str = field(
        default="theorem1",
        metadata={"description": "Construction swept by the sweep command: 'theorem1' or 'torsion'."},
    )

    ode_tol: float = field(default=1e-10, metadata={"description": "Absolute tolerance of the shooting integrator."})
    bisection_tol: float = field(default=1e-10, metadata={"description": "Bracket width of the shooting bisection."})
    eigen_tol: float = field(default=1e-8, metadata={"description": "Tolerance of the eigenvalue iterations."})
    solver_tol: float = field(default=1e-10, metadata={"description": "Sup-norm stopping change of the monotone iteration."})
    defect_tol: float = field(default=1e-8, metadata={"description": "Admissible defect of a converged discrete solution."})
    surface_tol: float = field(default=1e-10, metadata={"description": "Admissible |U| at refined boundary vertices."})
    bracket_tol: float = field(default=1e-3, metadata={"description": "Width of the extremal-parameter bracket."})
    far_boundary_tol: float = field(default=0.2, metadata={"description": "Relative tolerance of the far-boundary balance."})
    degeneracy_factor: float = field(default=1e-6, metadata={"description": "Degeneracy floor as a fraction of scale/diameter^2."})
    expansion_floor: float = field(default=1e-7, metadata={"description": "Discrete consistency floor of u_eps - u_0 - eps phi."})
    bound_tol: float = field(default=5e-6, metadata={"description": "Absolute slack of the monotone profile bound."})
    slope_min: float = field(default=1.8, metadata={"description": "Minimum log-log slope of the expansion residual."})
    symmetry_tol: float = field(default=1e-12, metadata={"description": "Tolerance of the evenness checks."})

    lambda_cap: float = field(
        default=1e3,
        metadata={"description": "Largest lambda tried when bracketing the extremal parameter."},
    )

    max_grid_nodes: int = field(
        default=64_000_000,
        metadata={"description": "Largest admissible node count of a sampling grid."},
    )

    seed: int = field(default=0, metadata={"description": "Seed of every randomized check."})

    log_level: str = field(default="INFO", metadata={"description": "Logging level of the command line."})

    output_dir: str = field(
        default_factory=lambda: os.getenv("MULTIBUMP_OUTPUT_DIR", "runs"),
        metadata={"description": "Directory receiving artifacts (from MULTIBUMP_OUTPUT_DIR env var)."},
    )

    def __post_init__(self) -> None:
        hints = get_type_hints(type(self))
        for f in fields(self):
            value = getattr(self, f.name)
            if str(hints[f.name]).startswith("tuple") and isinstance(value, list):
                setattr(self, f.name, tuple(value))

    @classmethod
    def from_context(cls) -> Configuration:
        """Create a Configuration instance from a RunnableConfig object."""
        try:
            config = get_config()
        except RuntimeError:
            config = None
        config = ensure_config(config)
        configurable = config.get("configurable") or {}
        _fields = {f.name for f in fields(cls) if f.init}
        return cls(**{k: v for k, v in configurable.items() if k in _fields})

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, Any]) -> Configuration:
        """Build a configuration from loosely typed values, e.g. parsed text."""
        hints = get_type_hints(cls)
        known = {f.name for f in fields(cls) if f.init}
        kwargs: dict[str, Any] = {}
        for raw_key, raw in mapping.items():
            key = _FILE_ALIASES.get(raw_key, raw_key)
            if key not in known:
                raise ConfigError(f"unknown configuration key {raw_key!r}")
            kwargs[key] = _coerce(key, hints[key], raw)
        return cls(**kwargs)

    def with_overrides(self, mapping: Mapping[str, Any]) -> Configuration:
        """Return a copy with the given keys replaced."""
        merged = {**self.to_dict(), **{_FILE_ALIASES.get(k, k): v for k, v in mapping.items()}}
        return type(self).from_mapping(merged)

    def to_dict(self) -> dict[str, Any]:
        """Return the fields as plain JSON-compatible values."""
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()}

    def config_hash(self) -> str:
        """Hash every field except the output directory and log level."""
        payload = {k: v for k, v in self.to_dict().items() if k not in ("output_dir", "log_level")}
        text = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()

    def resolved_taus(self) -> tuple[float, ...]:
        """Return the configured maxima, defaulting to cosh(1), ..., cosh(k)."""
        if self.taus:
            return tuple(self.taus)
        return tuple(math.cosh(i) for i in range(1, self.k + 1))

    def validate(self) -> Configuration:
        """Check every invariant of the configuration and return it unchanged."""
        tolerances = (
            "ode_tol", "bisection_tol", "eigen_tol", "solver_tol", "defect_tol",
            "surface_tol", "bracket_tol", "far_boundary_tol", "degeneracy_factor",
            "expansion_floor", "bound_tol", "symmetry_tol",
        )
        for name in tolerances:
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive", value=getattr(self, name))
        if self.nonlinearity not in NONLINEARITIES:
            raise ConfigError(f"unknown nonlinearity {self.nonlinearity!r}")
        if self.nonlinearity == "table" and not self.table_path:
            raise ConfigError("table nonlinearity requires table_path")
        if self.nonlinearity == "power" and self.power_p < 1:
            raise ConfigError("power nonlinearity needs p >= 1 to be convex", value=self.power_p)
        if self.sweep_target not in SWEEP_TARGETS:
            raise ConfigError(f"unknown sweep target {self.sweep_target!r}")
        if not self.lam > 0:
            raise ConfigError("lambda must be positive", value=self.lam)
        if not self.sigma > 0:
            raise ConfigError("sigma must be positive", value=self.sigma)
        if not 0 < self.eta < self.sigma:
            raise ConfigError("eta must satisfy 0 < eta < sigma", value=self.eta)
        if self.k < 1:
            raise ConfigError("k must be >= 1", value=self.k)
        if self.dims < 1:
            raise ConfigError("dims must be >= 1", value=self.dims)
        if self.taus:
            if len(self.taus) != self.k:
                raise ConfigError("taus must list exactly k values")
            if any(t <= 1 for t in self.taus) or any(b <= a for a, b in zip(self.taus, self.taus[1:])):
                raise ConfigError("taus must be strictly increasing and > 1")
        for name in ("eps_list", "torsion_eps_list"):
            _check_eps(name, getattr(self, name))
        if self.torsion_dims < 2:
            raise ConfigError(
                "torsion construction needs N >= 2; for N = 1 the boundary curvature changes sign",
                value=self.torsion_dims,
            )
        roots = self.torsion_roots
        if len(roots) != self.torsion_k:
            raise ConfigError("torsion_roots must list exactly torsion_k values")
        if any(r <= 0 for r in roots) or any(b <= a for a, b in zip(roots, roots[1:])):
            raise ConfigError("torsion_roots must be strictly increasing and positive")
        for name in ("grid_counts", "torsion_grid_counts"):
            counts = getattr(self, name)
            if len(counts) != 2:
                raise ConfigError(f"{name} takes two counts")
            if any(c < 3 or c % 2 == 0 for c in counts):
                raise ConfigError(f"{name} must be odd and >= 3", counts=list(counts))
        if self.profile_nodes < 3 or self.profile_nodes % 2 == 0:
            raise ConfigError("profile_nodes must be odd and >= 3")
        if not self.remark_widths or any(w <= 0 for w in self.remark_widths):
            raise ConfigError("remark_widths must be positive")
        return self


def load_config_file(path: str | Path) -> Configuration:
    """Read a key=value configuration file."""
    entries: dict[str, str] = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected key=value", line=line)
        key, value = (part.strip() for part in stripped.split("=", 1))
        entries[key] = value
    return Configuration.from_mapping(entries)


def parse_assignments(items: list[str]) -> dict[str, str]:
    """Split ``key=value`` command-line overrides."""
    out: dict[str, str] = {}
    for item in items:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, value = item.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def _check_eps(name: str, values: tuple[float, ...]) -> None:
    if not values:
        raise ConfigError(f"{name} must not be empty")
    if any(e <= 0 for e in values):
        raise ConfigError(f"{name} must be positive")
    if any(b >= a for a, b in zip(values, values[1:])):
        raise ConfigError(f"{name} must be strictly decreasing", values=list(values))


def _coerce(key: str, hint: Any, raw: Any) -> Any:
    text = str(hint)
    try:
        if text.startswith("tuple"):
            scalar = int if "int" in text else float
            if isinstance(raw, str):
                items = [s for s in raw.replace(" ", "").split(",") if s]
            else:
                items = list(raw)
            return tuple(scalar(float(i)) if scalar is int else scalar(i) for i in items)
        if text == "int" or hint is int:
            return int(float(raw))
        if text == "float" or hint is float:
            return float(raw)
        return str(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"cannot parse {key}={raw!r}") from exc
