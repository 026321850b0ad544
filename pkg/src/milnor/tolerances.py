from __future__ import annotations

from dataclasses import asdict, dataclass, replace


@dataclass(frozen=True)
class ToleranceProfile:
    """Numerical thresholds shared by every predicate.

    ``radial_margin`` and ``vertical_margin`` apply to the normalized
    suitability margins (both live in [0, 1]). ``submersion_floor`` is the
    threshold on ``|x| * sigma_min`` for the sphere-submersion oracle.
    ``denominator_floor`` is relative to |y|^2 in the normalized field.
    """

    rank_tol: float = 1e-10
    radial_margin: float = 1e-8
    vertical_margin: float = 1e-8
    fd_step: float = 1e-6
    denominator_floor: float = 1e-12
    zero_tol: float = 1e-12
    submersion_floor: float = 1e-4
    flow_tol: float = 1e-9
    ode_rtol: float = 1e-12

    def __post_init__(self):
        for name, value in asdict(self).items():
            if not value > 0:
                raise ValueError(f"tolerance {name} must be positive, got {value!r}")

    def to_dict(self):
        return asdict(self)

    def updated(self, **changes):
        return replace(self, **changes)


DEFAULT_TOLERANCES = ToleranceProfile()
