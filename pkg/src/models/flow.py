from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from src.models.fields import SymmetricMatrixField
from src.models.potentials import EnergyReport
from src.utils.constants import Defaults, Integrator, RunStatus, Tolerances
from src.utils.exceptions import ValidationError
from src.utils.time_utils import DtPolicy, parse_dt_policy


@dataclass
class FlowConfig:
    """Integration settings for one trajectory."""
    dt_policy: DtPolicy = field(default_factory=lambda: parse_dt_policy("adaptive"))
    t_end: float = 1.0
    snapshot_stride: int = Defaults.SNAPSHOT_STRIDE
    integrator: Integrator = Integrator.SPECTRAL_IMEX
    max_steps: Optional[int] = None
    divergence_growth: float = Tolerances.DIVERGENCE_GROWTH

    def __post_init__(self):
        if isinstance(self.dt_policy, str):
            self.dt_policy = parse_dt_policy(self.dt_policy)
        self.integrator = Integrator(self.integrator)
        if not self.t_end > 0:
            raise ValidationError(f"t_end must be positive, got {self.t_end}", field="t_end")
        if self.snapshot_stride < 1:
            raise ValidationError(f"snapshot_stride must be >= 1, got {self.snapshot_stride}", field="snapshot_stride")
        if self.max_steps is not None and self.max_steps < 1:
            raise ValidationError(f"max_steps must be >= 1, got {self.max_steps}", field="max_steps")


@dataclass(frozen=True)
class StepRecord:
    """Diagnostics after one step; dissipation is -sum |df/dt|^2 h^m."""
    t: float
    E: float
    kinetic: float
    potential: float
    sup_e: float
    residual: float
    dEdt: float
    dissipation: float

    def as_row(self) -> list:
        return [self.t, self.E, self.kinetic, self.potential, self.sup_e, self.residual, self.dEdt, self.dissipation]


@dataclass
class DivergenceInfo:
    step: int
    t: float
    sup_e: float
    site: Optional[int]
    reason: str


@dataclass
class Trajectory:
    """Snapshots with their step indices, the per-step series and the run outcome."""
    snapshots: List[SymmetricMatrixField] = field(default_factory=list)
    snapshot_steps: List[int] = field(default_factory=list)
    series: List[StepRecord] = field(default_factory=list)
    initial_energy: Optional[EnergyReport] = None
    status: RunStatus = RunStatus.COMPLETED
    divergence: Optional[DivergenceInfo] = None
    # (t, min |lambda|, site) per step
    eigen_trace: List[Tuple[float, float, int]] = field(default_factory=list)
    dt: Optional[float] = None

    @property
    def times(self) -> np.ndarray:
        return np.array([snap.t for snap in self.snapshots], dtype=float)

    @property
    def domain(self):
        return self.snapshots[0].domain

    @property
    def final(self) -> SymmetricMatrixField:
        return self.snapshots[-1]

    @property
    def step_count(self) -> int:
        return len(self.series)

    def add_snapshot(self, snapshot: SymmetricMatrixField, step: int):
        if self.snapshots and not snapshot.t > self.snapshots[-1].t:
            raise ValidationError(
                f"Snapshot time {snapshot.t} does not follow {self.snapshots[-1].t}", field="t"
            )
        self.snapshots.append(snapshot)
        self.snapshot_steps.append(step)


@dataclass(frozen=True)
class DissipationReport:
    """Per-step relative mismatch |dE/dt + D| / max(D, floor)."""
    mismatch: np.ndarray
    worst: float
    worst_step: int
