"""Numerical toolkit for Milnor fibrations of real map germs via conic flows."""

__version__ = "0.1.0"

from .corpus import corpus_germ  # noqa: E402
from .flows import ConicParameter, h_apply, h_invert  # noqa: E402
from .germ import MapGerm, evaluate, jacobian, load_germ, parse_germ  # noqa: E402
from .regularity import (canonical_lift, d_h_regularity_check,  # noqa: E402
                         d_regularity_check, suitability_at)
from .tolerances import ToleranceProfile  # noqa: E402

__all__ = [
    "ConicParameter", "MapGerm", "ToleranceProfile", "canonical_lift", "corpus_germ",
    "d_h_regularity_check", "d_regularity_check", "evaluate", "h_apply", "h_invert",
    "jacobian", "load_germ", "parse_germ", "suitability_at",
]
