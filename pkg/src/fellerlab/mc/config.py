from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

from ..errors import SpecValidationError


@dataclass(frozen=True)
class PathConfig:
    """Discretization and sampling settings for Monte Carlo runs.

    ``eps_c`` sets the boundary layer eps_layer = eps_c * sqrt(dt).
    ``cap_time`` bounds how far past the horizon a path is followed to close
    its last excursion.  ``noise`` scales every Gaussian increment (0 gives
    the degenerate constant path).
    """
    dt: float = 1e-4
    horizon: float = 1.0
    eps_c: float = 5.0
    seed: int = 0
    n_paths: int = 1000
    r_escape: float | None = None
    delta_min: float = 0.05
    cap_time: float = 10.0
    noise: float = 1.0
    extra: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not self.dt > 0:
            raise SpecValidationError("dt must be positive")
        if self.horizon < 100 * self.dt * (1 - 1e-12):
            raise SpecValidationError("horizon must be at least 100 dt")
        if self.eps_c <= 0:
            raise SpecValidationError("eps_c must be positive")
        if self.n_paths < 1:
            raise SpecValidationError("n_paths must be >= 1")
        if not 0 <= self.seed < 2 ** 64:
            raise SpecValidationError("seed must fit in 64 bits")
        if self.delta_min < 0:
            raise SpecValidationError("delta_min must be >= 0")
        if self.cap_time < 0:
            raise SpecValidationError("cap_time must be >= 0")

    @property
    def eps_layer(self) -> float:
        return self.eps_c * math.sqrt(self.dt)

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.dt))

    @property
    def cap_steps(self) -> int:
        return int(round(self.cap_time / self.dt))

    def check_escape_radius(self, R: float) -> float:
        if self.r_escape is None:
            raise SpecValidationError("r_escape required for exterior geometries")
        if not self.r_escape > R:
            raise SpecValidationError("r_escape must exceed R")
        return float(self.r_escape)

    def replace(self, **kw) -> "PathConfig":
        d = asdict(self)
        d.update(kw)
        return PathConfig(**d)

    def as_dict(self) -> dict:
        d = asdict(self)
        d["eps_layer"] = self.eps_layer
        return d
