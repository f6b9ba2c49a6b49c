"""Gradient-flow integration: df/dt = -d*df - grad W(f) on the periodic lattice."""
from typing import Optional, Tuple
import logging
import math

import numpy as np
from scipy import fft

from src.config.settings import settings
from src.models.fields import ScalarField, SymmetricMatrixField, hs_norm_squared
from src.models.flow import DissipationReport, DivergenceInfo, FlowConfig, StepRecord, Trajectory
from src.models.lattice import LatticeDomain
from src.models.potentials import PotentialSpec
from src.services.field_service import rough_laplacian
from src.services.potential_service import PotentialService
from src.utils.constants import Integrator, Messages, PotentialFamily, RunStatus, Tolerances
from src.utils.exceptions import (
    DivergenceError,
    SingularPotentialError,
    UnsupportedFamilyError,
    ValidationError,
)

logger = logging.getLogger(__name__)


def laplacian_symbol(domain: LatticeDomain) -> np.ndarray:
    """Discrete symbol of d*d: sum_j (2/h^2)(1 - cos(2 pi k_j / n)), shape domain.shape."""
    freqs = fft.fftfreq(domain.n_per_axis)
    axis_symbol = (2.0 / domain.h ** 2) * (1.0 - np.cos(2 * np.pi * freqs))
    grids = np.meshgrid(*([axis_symbol] * domain.m), indexing='ij')
    return np.sum(grids, axis=0)


class FlowService:
    """Steps and records one trajectory of the matrix-field gradient flow."""

    def __init__(self, spec: PotentialSpec, workers: Optional[int] = None):
        self.spec = spec
        self.potential = PotentialService(spec)
        self.workers = workers or settings.THREADS
        self.logger = logging.getLogger(__name__)
        self._symbols = {}

    def _symbol(self, domain: LatticeDomain) -> np.ndarray:
        if domain not in self._symbols:
            self._symbols[domain] = laplacian_symbol(domain)
        return self._symbols[domain]

    def elliptic_residual(self, field: SymmetricMatrixField) -> Tuple[ScalarField, float]:
        """Per-site |d*df + grad W(f)| and its lattice L2 norm."""
        residual = rough_laplacian(field).data + self.potential.gradient_field(field).data
        squared = hs_norm_squared(residual, field.l)
        norm = float(np.sqrt(squared.sum() * field.domain.cell_volume()))
        return ScalarField(field.domain, np.sqrt(squared), "residual"), norm

    def _spectral_step(self, field: SymmetricMatrixField, dt: float) -> np.ndarray:
        """Exponential Euler: exact diffusion, potential frozen over the step."""
        domain = field.domain
        axes = tuple(range(domain.m))
        mu = self._symbol(domain)[..., None]
        decay = np.exp(-mu * dt)
        with np.errstate(divide='ignore', invalid='ignore'):
            weight = np.where(mu > 0, -np.expm1(-mu * dt) / mu, dt)

        f_hat = fft.fftn(field.grid(), axes=axes, workers=self.workers)
        g_hat = fft.fftn(self.potential.gradient_field(field).grid(), axes=axes, workers=self.workers)
        updated = fft.ifftn(decay * f_hat - weight * g_hat, axes=axes, workers=self.workers).real
        return updated.reshape(field.data.shape)

    def step(
        self,
        field: SymmetricMatrixField,
        dt: float,
        integrator: Integrator = Integrator.SPECTRAL_IMEX,
        step_index: int = 0,
    ) -> SymmetricMatrixField:
        """Advance one step of size dt."""
        if not dt > 0:
            raise ValidationError(f"dt must be positive, got {dt}", field="dt")
        integrator = Integrator(integrator)
        if integrator == Integrator.EXPLICIT_EULER:
            velocity = rough_laplacian(field).data + self.potential.gradient_field(field).data
            data = field.data - dt * velocity
        else:
            data = self._spectral_step(field, dt)

        if not np.all(np.isfinite(data)):
            bad = np.nonzero(~np.all(np.isfinite(data), axis=1))[0]
            raise DivergenceError(
                f"Non-finite state after step {step_index}",
                step=step_index,
                t=field.t + dt,
                site=int(bad[0]) if bad.size else None,
            )
        return field.with_data(data, field.t + dt)

    def stable_dt(
        self,
        domain: LatticeDomain,
        integrator: Integrator = Integrator.SPECTRAL_IMEX,
        safety: float = Tolerances.ADAPTIVE_SAFETY,
    ) -> float:
        """0.9 min(h^2/(2m), safety/uniform), the diffusion limit applying to ExplicitEuler only."""
        integrator = Integrator(integrator)
        limits = []
        if integrator == Integrator.EXPLICIT_EULER:
            limits.append(domain.h ** 2 / (2 * domain.m))
        if not self.spec.disabled:
            if self.spec.family == PotentialFamily.SINGULAR:
                raise UnsupportedFamilyError(
                    "Singular potential has no stiffness bound; use a fixed dt", family=self.spec.family.value
                )
            uniform, _ = self.potential.hessian_bound()
            limits.append(safety / uniform)
        if not limits:
            raise UnsupportedFamilyError(
                "Heat flow under SpectralIMEX is unconditionally stable; use a fixed dt", family="disabled"
            )
        return Tolerances.DT_SAFETY * min(limits)

    def _min_eigen(self, field: SymmetricMatrixField) -> Tuple[float, int]:
        magnitude = np.min(np.abs(np.linalg.eigvalsh(field.matrices())), axis=1)
        site = int(np.argmin(magnitude))
        return float(magnitude[site]), site

    def run_flow(self, initial: SymmetricMatrixField, config: FlowConfig) -> Trajectory:
        """Integrate from initial to config.t_end, or until the state diverges."""
        if config.dt_policy.is_fixed:
            dt = config.dt_policy.dt
        else:
            dt = self.stable_dt(initial.domain, config.integrator, config.dt_policy.safety)
        span = config.t_end
        n_steps = max(1, math.ceil(span / dt - 1e-9))
        if config.max_steps is not None:
            n_steps = min(n_steps, config.max_steps)

        initial_report = self.potential.total_energy(initial)
        trajectory = Trajectory(initial_energy=initial_report, dt=dt)
        trajectory.add_snapshot(initial, 0)
        e0 = initial_report.total
        growth_limit = config.divergence_growth * max(abs(e0), 1.0)
        self.logger.info(
            f"Starting {config.integrator.value} run: {self.spec.label()}, dt={dt:.6g}, "
            f"steps={n_steps}, E0={e0:.6g}"
        )

        current, energy = initial, e0
        t_start = initial.t
        for k in range(n_steps):
            t_next = t_start + min((k + 1) * dt, span)
            dt_k = t_next - current.t
            try:
                updated = self.step(current, dt_k, config.integrator, step_index=k + 1)
                updated = updated.with_data(updated.data, t_next)
                report = self.potential.total_energy(updated)
                if not report.total <= growth_limit:
                    raise DivergenceError(
                        f"Energy {report.total:.3g} exceeded {growth_limit:.3g}",
                        step=k + 1, t=t_next, sup_e=report.sup_e, site=report.sup_site,
                    )
                _, residual = self.elliptic_residual(updated)
            except DivergenceError as e:
                self._mark_diverged(trajectory, current, k, e.t, e.sup_e, e.site, e.message)
                break
            except SingularPotentialError as e:
                self._mark_diverged(trajectory, current, k, t_next, float("nan"), e.site, e.message)
                break
            except ValidationError as e:
                # finite state whose densities overflow
                self._mark_diverged(trajectory, current, k, t_next, float("inf"), None, e.message)
                break

            velocity = (updated.data - current.data) / dt_k
            dissipation = -float(hs_norm_squared(velocity, updated.l).sum() * updated.domain.cell_volume())
            trajectory.series.append(StepRecord(
                t=t_next,
                E=report.total,
                kinetic=report.kinetic,
                potential=report.potential,
                sup_e=report.sup_e,
                residual=residual,
                dEdt=(report.total - energy) / dt_k,
                dissipation=dissipation,
            ))
            min_eigen, site = self._min_eigen(updated)
            trajectory.eigen_trace.append((t_next, min_eigen, site))

            if (k + 1) % config.snapshot_stride == 0 or k + 1 == n_steps:
                trajectory.add_snapshot(updated, k + 1)
            current, energy = updated, report.total

        if trajectory.status == RunStatus.COMPLETED:
            self.logger.info(f"{Messages.RUN_COMPLETED}: {trajectory.step_count} steps, E={energy:.6g}")
        return trajectory

    def _mark_diverged(self, trajectory: Trajectory, last_good: SymmetricMatrixField, k: int,
                       t: float, sup_e: float, site: Optional[int], reason: str):
        trajectory.status = RunStatus.DIVERGED
        trajectory.divergence = DivergenceInfo(step=k + 1, t=t, sup_e=sup_e, site=site, reason=reason)
        if trajectory.snapshot_steps[-1] != k:
            trajectory.add_snapshot(last_good, k)
        self.logger.warning(f"{Messages.RUN_DIVERGED} at step {k + 1} (t={t:.6g}, site={site}): {reason}")

    def dissipation_report(self, trajectory: Trajectory) -> DissipationReport:
        """Relative mismatch of dE/dt + D per step, D = sum |df/dt|^2 h^m."""
        series = trajectory.series
        if len(series) < 2:
            raise ValidationError(f"Dissipation report needs at least 2 steps, got {len(series)}", field="series")
        times = np.array([trajectory.snapshots[0].t] + [r.t for r in series])
        dts = np.diff(times)
        dEdt = np.array([r.dEdt for r in series])
        D = -np.array([r.dissipation for r in series])
        e0 = trajectory.initial_energy.total if trajectory.initial_energy else series[0].E
        floor = Tolerances.DISSIPATION_FLOOR * max(abs(e0), np.finfo(float).tiny) / dts
        mismatch = np.abs(dEdt + D) / np.maximum(D, floor)
        worst_step = int(np.argmax(mismatch))
        return DissipationReport(mismatch=mismatch, worst=float(mismatch[worst_step]), worst_step=worst_step + 1)
