"""Multi-peak solutions on perturbed strips and cylinders.

This package builds the perturbed domains, solves the semilinear problem on
them and certifies the critical-point structure of the solution. Each command
is a LangGraph pipeline.
"""

__version__ = "0.1.0"

from multibump.graph import (  # noqa: E402
    profile_graph,
    remark_graph,
    sweep_graph,
    theorem1_graph,
    theorem2_graph,
)

__all__ = ["profile_graph", "remark_graph", "sweep_graph", "theorem1_graph", "theorem2_graph", "__version__"]
