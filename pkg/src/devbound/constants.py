"""Universal constants that the theory only bounds, never pins down."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

from .errors import ValidationError


@dataclass(frozen=True)
class ConcentrationConstants:
    """Configurable record of the unspecified universal constants.

    ``c0`` and ``C_anti`` are the anti-concentration pair
    P(Y/n >= q) >= c0 * exp(-C_anti * n * D(q||p)); ``c0`` is also the level in
    the definition of the tail quantile epsilon (one knob, both roles).
    ``C1``/``c2`` bracket epsilon against phi, ``dkw_c1``/``dkw_c2`` parametrise
    the localized DKW tail and ``hp_a1``/``hp_a2`` scale the high-probability band.

    None of the defaults is a known true value; tests fit constants
    empirically instead of asserting these.
    """

    c0: float = 0.125
    C_anti: float = 4.0
    C1: float = 1.0
    c2: float = 0.1
    dkw_c1: float = 2.0
    dkw_c2: float = 0.5
    hp_a1: float = 1.0
    hp_a2: float = 1.0

    def __post_init__(self) -> None:
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if not (isinstance(v, (int, float)) and v > 0 and v == v and v != float("inf")):
                raise ValidationError(f"{f.name} must be a finite positive number, got {v!r}")
        if not self.c0 < 0.25:
            raise ValidationError(f"c0 must lie in (0, 1/4), got {self.c0}")
        if self.C_anti < 1:
            raise ValidationError(f"C_anti must be >= 1, got {self.C_anti}")
        if self.C1 < 1:
            raise ValidationError(f"C1 must be >= 1, got {self.C1}")

    def with_overrides(self, **overrides: float) -> "ConcentrationConstants":
        names = {f.name for f in dataclasses.fields(self)}
        unknown = set(overrides) - names
        if unknown:
            raise ValidationError(f"unknown constant(s): {', '.join(sorted(unknown))}")
        return dataclasses.replace(self, **{k: float(v) for k, v in overrides.items()})


DEFAULT_CONSTANTS = ConcentrationConstants()
