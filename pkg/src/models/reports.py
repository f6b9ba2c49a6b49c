"""Result records of the monotonicity and regularity analyses."""
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np


@dataclass
class RatioProfile:
    """mu(R, x) and nu(R, x) over sampled radii, with infima over R <= rho."""
    center: int
    radii: List[float]
    mu: List[float]
    nu: List[float]
    rho: float
    mu_inf: float
    nu_inf: float

    @property
    def valid_count(self) -> int:
        return int(sum(1 for R, mu in zip(self.radii, self.mu) if R <= self.rho and np.isfinite(mu)))


@dataclass(frozen=True)
class InfimumRatios:
    mu0: float
    nu0: float
    p0: float


@dataclass
class MonotonicityVerdict:
    """Signed worst violation of a monotonicity or comparison statement."""
    functional: str
    samples: List[float]
    values: List[float]
    violation: float
    tolerance: float
    passed: bool
    details: Dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class PsiEvaluation:
    value: float
    coverage: float
    low_coverage: bool
    samples: int


@dataclass
class BoundCheck:
    """lhs <= rhs comparison of a sup bound; pass iff lhs/rhs <= 1."""
    claim: str
    lhs: float
    rhs: float
    constants: Dict[str, float]
    ratio: float
    passed: bool

    @classmethod
    def compare(cls, claim: str, lhs: float, rhs: float, constants: Dict[str, float]) -> "BoundCheck":
        if rhs > 0:
            ratio = lhs / rhs
        else:
            ratio = 0.0 if lhs <= 0 else float("inf")
        return cls(claim, float(lhs), float(rhs), constants, float(ratio), bool(ratio <= 1.0))


@dataclass
class HProfile:
    """h(sigma) = (R1 - sigma)^(2 - p0) sup_{B_sigma} e with its maximizer."""
    sigmas: List[float]
    values: List[float]
    sigma_max: float
    site_max: int
    e_max: float


@dataclass
class CoverReport:
    """Greedy Vitali cover: disjoint r-balls whose 3r-dilates cover the set."""
    radius: float
    centers: List[int]
    covered: bool
    dimension: Optional[float]
    scale: Optional[float] = None
    expansion: float = 3.0

    @property
    def count(self) -> int:
        return len(self.centers)

    @property
    def measure(self) -> float:
        if self.dimension is None:
            return float("nan")
        return self.count * (self.expansion * self.radius) ** self.dimension


@dataclass
class EpsProbe:
    center: int
    t0: Optional[float]
    R: float
    delta: float
    value: float
    triggered: bool
    sup_delta: float = float("nan")
    sup_half_delta: float = float("nan")
    implied_constant: float = float("nan")
    fixed_sigma_constant: float = float("nan")

    def as_row(self) -> list:
        return [
            self.center, self.t0, self.R, self.delta, self.value, None, self.triggered,
            self.sup_delta, self.sup_half_delta, self.implied_constant, self.fixed_sigma_constant,
        ]


@dataclass
class EpsRegReport:
    """Epsilon-regularity scan: probes, threshold and implied constants."""
    functional: str
    eps0: float
    probes: List[EpsProbe]

    @property
    def triggered(self) -> List[EpsProbe]:
        return [p for p in self.probes if p.triggered]

    @property
    def empty(self) -> bool:
        return not self.triggered

    @property
    def max_implied_constant(self) -> float:
        values = [p.implied_constant for p in self.triggered]
        return float(max(values)) if values else 0.0

    def trigger_keys(self) -> set:
        return {(p.center, p.t0, p.R) for p in self.triggered}


@dataclass
class HausdorffRow:
    b: float
    L: int
    radius: float
    count: int
    dimension: float
    measure: float
    E0: float
    ratio: float
    stationary: bool
    status: str = "ok"

    def as_row(self) -> list:
        return [self.b, self.L, self.radius, self.count, self.dimension, self.measure,
                self.E0, self.ratio, self.stationary, self.status]


@dataclass
class SupERow:
    b: float
    E_b: float
    sup_e: float
    bound1: float
    bound2: float
    bound_p0: float
    fallback_bound: float
    higher_power_bound: float
    C: float
    passed: bool
    status: str = "ok"

    def as_row(self) -> list:
        return [self.b, self.E_b, self.sup_e, self.bound1, self.bound2, self.bound_p0,
                self.fallback_bound, self.higher_power_bound, self.C, self.passed, self.status]


@dataclass
class SweepSummary:
    rows: List[Any]
    bounded_variation: Optional[bool] = None
    slope: Optional[float] = None
    extras: Dict[str, Any] = field(default_factory=dict)


def ratio_band(values: List[float]) -> Tuple[float, float]:
    """(min, max) over positive finite values, (nan, nan) if none."""
    arr = np.array([v for v in values if np.isfinite(v) and v > 0], dtype=float)
    if arr.size == 0:
        return float("nan"), float("nan")
    return float(arr.min()), float(arr.max())
