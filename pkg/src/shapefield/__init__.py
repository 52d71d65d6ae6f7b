"""Approximate distance fields, shape morphing, and granular swarm control."""

from .fields import (
    Circle,
    Conjunction,
    DegenerateSegmentError,
    Diagnostic,
    DimensionMismatchError,
    Disjunction,
    Equivalence,
    FieldError,
    FieldExpr,
    GradientSample,
    Negation,
    Plane,
    Segment,
    Sphere,
    Trim,
    evaluate,
    gradient,
    validate,
)
from .gridio import GridSpec, export_grid, export_trajectory, sample_grid
from .lang import ParseError, SemanticError, ShapeProgram, parse, serialize
from .morph import DegenerateBlendError, MorphSchedule, ramp
from .sim import Disturbance, SimConfig, Trajectory, WorldState, build_world, run

__version__ = "0.1.0"

__all__ = [
    "Circle",
    "Conjunction",
    "DegenerateBlendError",
    "DegenerateSegmentError",
    "Diagnostic",
    "DimensionMismatchError",
    "Disjunction",
    "Disturbance",
    "Equivalence",
    "FieldError",
    "FieldExpr",
    "GradientSample",
    "GridSpec",
    "MorphSchedule",
    "Negation",
    "ParseError",
    "Plane",
    "Segment",
    "SemanticError",
    "ShapeProgram",
    "SimConfig",
    "Sphere",
    "Trajectory",
    "Trim",
    "WorldState",
    "build_world",
    "evaluate",
    "export_grid",
    "export_trajectory",
    "gradient",
    "parse",
    "ramp",
    "run",
    "sample_grid",
    "serialize",
    "validate",
    "__version__",
]
