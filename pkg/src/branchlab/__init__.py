"""Chaos certification for planar two-branch differential inclusions."""

__version__ = "0.1.0"

from .branching import EulerBranching, SwitchingSchedule, solve_switched, validate_branching  # noqa: E402
from .chaos import ChaosCertificate, ChaosOptions, certify, detect_configuration  # noqa: E402
from .fields import EquilibriumKind, PlanarField, Rect, find_singular_points, linear_field  # noqa: E402
from .integrate import integrate  # noqa: E402

__all__ = [
    "__version__",
    "EulerBranching",
    "SwitchingSchedule",
    "solve_switched",
    "validate_branching",
    "ChaosCertificate",
    "ChaosOptions",
    "certify",
    "detect_configuration",
    "EquilibriumKind",
    "PlanarField",
    "Rect",
    "find_singular_points",
    "linear_field",
    "integrate",
]
