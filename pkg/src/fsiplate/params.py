"""Physical coefficients of the coupled fluid/plate model."""
from __future__ import annotations

from dataclasses import asdict, dataclass

from .errors import InvalidArgumentError


@dataclass(frozen=True)
class PhysicalParams:
    """Coefficients; ``omega`` scales the two plate time-derivative terms only."""

    rho_f: float = 1.0
    nu_f: float = 1.0
    rho_rot: float = 1.0
    rho_p: float = 1.0
    D: float = 1.0
    omega: float = 1.0

    def __post_init__(self):
        for name, val in asdict(self).items():
            if not isinstance(val, (int, float)) or val != val:
                raise InvalidArgumentError(f"{name} must be a real number, got {val!r}")
            if val < 0:
                raise InvalidArgumentError(f"{name} must be nonnegative, got {val}")
        for name in ("rho_f", "nu_f", "rho_p", "D"):
            if getattr(self, name) <= 0:
                raise InvalidArgumentError(f"{name} must be positive")

    def replace(self, **kw):
        d = asdict(self)
        d.update(kw)
        return PhysicalParams(**d)

    def as_dict(self):
        return asdict(self)


# free vibration setup: aluminium-like plate, no rotational inertia
VIBRATION_PARAMS = PhysicalParams(rho_f=1.0, nu_f=1.0, rho_rot=0.0, rho_p=2.7, D=6.4527, omega=1.0)
VIBRATION_AMPLITUDE = 1e-2
