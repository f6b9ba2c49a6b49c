from dataclasses import dataclass
from typing import Optional

from src.utils.constants import PotentialFamily
from src.utils.exceptions import ValidationError


@dataclass(frozen=True)
class PotentialSpec:
    """Potential family and parameters.

    Attributes:
        family: Singular, Smoothed or HigherPower
        b: smoothing parameter, required positive for Smoothed and HigherPower
        L: power, 1 unless the family is HigherPower
        l: matrix size
        disabled: treat W as identically zero (pure heat flow)
    """
    family: PotentialFamily
    b: Optional[float] = None
    L: int = 1
    l: int = 2
    disabled: bool = False

    def __post_init__(self):
        object.__setattr__(self, "family", PotentialFamily(self.family))
        if self.l < 1:
            raise ValidationError(f"Matrix size l must be >= 1, got {self.l}", field="l")
        if int(self.L) != self.L or self.L < 1:
            raise ValidationError(f"L must be an integer >= 1, got {self.L}", field="L")
        object.__setattr__(self, "L", int(self.L))
        if self.L != 1 and self.family != PotentialFamily.HIGHER_POWER:
            raise ValidationError(f"L={self.L} is only valid for the HigherPower family", field="L")
        if self.family != PotentialFamily.SINGULAR:
            if self.b is None or not self.b > 0:
                raise ValidationError(f"b must be positive for {self.family.value}, got {self.b}", field="b")
            object.__setattr__(self, "b", float(self.b))

    @property
    def is_regularized(self) -> bool:
        return self.family != PotentialFamily.SINGULAR

    @property
    def scale(self) -> float:
        """b^(1/L), the natural energy scale of the regularized families; 1 otherwise."""
        if self.is_regularized and not self.disabled:
            return self.b ** (1.0 / self.L)
        return 1.0

    def with_b(self, b: float) -> "PotentialSpec":
        return PotentialSpec(self.family, b, self.L, self.l, self.disabled)

    def label(self) -> str:
        if self.disabled:
            return "disabled"
        if self.family == PotentialFamily.SINGULAR:
            return "Singular"
        if self.family == PotentialFamily.SMOOTHED:
            return f"Smoothed(b={self.b:g})"
        return f"HigherPower(b={self.b:g}, L={self.L})"


@dataclass(frozen=True)
class EnergyReport:
    """Total energy with its parts and the location of sup e."""
    total: float
    kinetic: float
    potential: float
    sup_e: float
    sup_site: int
    t: float
