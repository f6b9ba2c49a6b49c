"""Local monotonicity quantities: Phi, Psi and the infimum ratios."""
from typing import List, Optional, Sequence, Tuple
import logging

import numpy as np

from src.models.fields import SymmetricMatrixField, hs_norm_squared
from src.models.flow import Trajectory
from src.models.lattice import LatticeDomain, Point, SiteSet
from src.models.potentials import PotentialSpec
from src.models.reports import InfimumRatios, MonotonicityVerdict, PsiEvaluation, RatioProfile
from src.services.field_service import spatial_gradient
from src.services.potential_service import PotentialService
from src.utils.constants import PhiWeighting, Tolerances
from src.utils.exceptions import (
    CoverageError,
    DomainError,
    EmptyWindowError,
    FormulaDomainError,
    UndefinedRatioError,
    ValidationError,
)
from src.utils.time_utils import held_trapezoid, window_indices

logger = logging.getLogger(__name__)


def backward_gaussian(domain: LatticeDomain, x0: Point, t0: float, x: Optional[Point], t: float):
    """G_(x0,t0)(x, t) with periodic distance; x=None evaluates every site."""
    if not t < t0:
        raise DomainError(f"Backward Gaussian needs t < t0, got t={t}, t0={t0}", quantity="time")
    tau = t0 - t
    if x is None:
        dist_sq = domain.distances_from(x0) ** 2
    else:
        dist_sq = domain.periodic_distance(x0, x) ** 2
    return (4 * np.pi * tau) ** (-domain.m / 2) * np.exp(-dist_sq / (4 * tau))


def cutoff_phi(domain: LatticeDomain, x0: Point, x: Optional[Point] = None):
    """Radial cutoff: 1 on [0, R_M/2], 0 beyond R_M, cubic smoothstep between."""
    half = domain.R_M / 2
    dist = domain.distances_from(x0) if x is None else domain.periodic_distance(x0, x)
    s = np.clip((dist - half) / half, 0.0, 1.0)
    return 1.0 - s * s * (3.0 - 2.0 * s)


def exponent_p0(mu0: float, nu0: float, m: int) -> float:
    """p0 = (2 nu0 + (m - 2) mu0) / (1 - mu0)."""
    if mu0 >= 1:
        raise FormulaDomainError(f"mu0 = {mu0} >= 1, exponent p0 is undefined")
    return (2 * nu0 + (m - 2) * mu0) / (1 - mu0)


def gaussian_recentred_lower_bound_check(
    domain: LatticeDomain, x1: Point, t1: float, rho: float, x: Point, t: float,
) -> Tuple[float, float]:
    """(G_(x1, t1 + 2 rho^2)(x, t), (12 pi)^(-m/2) e^(-1/4) rho^-m) for (x, t) in P_rho(x1, t1)."""
    if domain.periodic_distance(x1, x) > rho * (1 + 1e-12) or abs(t - t1) > rho ** 2 * (1 + 1e-12):
        raise DomainError(f"Sample point lies outside the cylinder of radius {rho}", quantity="cylinder")
    lhs = float(backward_gaussian(domain, x1, t1 + 2 * rho ** 2, x, t))
    rhs = (12 * np.pi) ** (-domain.m / 2) * np.exp(-0.25) * rho ** (-domain.m)
    return lhs, float(rhs)


def gaussian_far_field_bound_check(
    domain: LatticeDomain, x1: Point, t1: float, rho: float, x: Point, t: float, R: float, delta: float,
) -> Tuple[float, float]:
    """(G_(x1, t1 + 2 rho^2)(x, t), (3 pi)^(-m/2) R^-m exp(-delta^-2 / 19)) for far points.

    Requires delta < 1/2, rho < delta R, |x - x1| >= R / delta and an elapsed
    time t1 + 2 rho^2 - t inside [3R^2/4, 19R^2/4], which holds when (x, t)
    lies in the strip below a cylinder of radius delta R containing (x1, t1).
    """
    if not 0 < delta < 0.5:
        raise DomainError(f"delta must lie in (0, 1/2), got {delta}", quantity="delta")
    if not 0 < rho < delta * R:
        raise DomainError(f"rho must lie in (0, delta R), got {rho}", quantity="radius")
    if domain.periodic_distance(x1, x) < R / delta:
        raise DomainError(f"Point is closer than R/delta = {R / delta} to the center", quantity="distance")
    elapsed = t1 + 2 * rho ** 2 - t
    if not 0.75 * R ** 2 <= elapsed <= 4.75 * R ** 2:
        raise DomainError(f"Elapsed time {elapsed} outside [{0.75 * R ** 2}, {4.75 * R ** 2}]", quantity="time")
    lhs = float(backward_gaussian(domain, x1, t1 + 2 * rho ** 2, x, t))
    rhs = (3 * np.pi) ** (-domain.m / 2) * R ** (-domain.m) * np.exp(-delta ** -2 / 19)
    return lhs, float(rhs)


class MonotonicityService:
    """Shell ratios, elliptic Phi and the parabolic Gaussian functionals."""

    def __init__(self, spec: PotentialSpec):
        self.spec = spec
        self.potential = PotentialService(spec)
        self.logger = logging.getLogger(__name__)
        self._cached_field = None
        self._cached_densities = None

    def densities(self, field: SymmetricMatrixField) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(central gradient data, kinetic density, potential density) of one field."""
        if self._cached_field is not field:
            gradient = spatial_gradient(field).data
            kinetic = 0.5 * np.sum(hs_norm_squared(gradient, field.l), axis=0)
            potential = self.potential.pointwise_potential(field).values
            self._cached_field = field
            self._cached_densities = (gradient, kinetic, potential)
        return self._cached_densities

    def _shell(self, field: SymmetricMatrixField, x: Point, R: float, width: float = None):
        domain = field.domain
        sites = domain.shell_sites(x, R, width)
        offsets = domain.displacement(x, domain.coordinates[sites.indices])
        dist = np.sqrt(np.sum(offsets ** 2, axis=1))
        keep = dist > 0
        if not np.any(keep):
            raise UndefinedRatioError(f"Shell of radius {R} around {x} has no sites")
        return sites.indices[keep], offsets[keep] / dist[keep, None]

    def _shell_sums(self, field: SymmetricMatrixField, x: Point, R: float, width: float = None):
        indices, units = self._shell(field, x, R, width)
        gradient, kinetic, potential = self.densities(field)
        radial = np.einsum('jsp,sj->sp', gradient[:, indices], units)
        e_sum = float(np.sum(kinetic[indices] + potential[indices]))
        if not e_sum > 0:
            raise UndefinedRatioError(f"Energy vanishes on the shell of radius {R} around {x}")
        return float(np.sum(hs_norm_squared(radial, field.l))), float(np.sum(potential[indices])), e_sum

    def mu_ratio(self, field: SymmetricMatrixField, x: Point, R: float, width: float = None) -> float:
        """mu(R, x) = sum_S |f_r|^2 / sum_S e over the width-h shell."""
        radial, _, e_sum = self._shell_sums(field, x, R, width)
        return radial / e_sum

    def nu_ratio(self, field: SymmetricMatrixField, x: Point, R: float, width: float = None) -> float:
        """nu(R, x) = sum_S W / sum_S e over the width-h shell."""
        _, w_sum, e_sum = self._shell_sums(field, x, R, width)
        return w_sum / e_sum

    def default_radii(self, domain: LatticeDomain, rho: float) -> List[float]:
        """k h for k >= 2 up to rho."""
        count = int(np.floor(rho / domain.h + 1e-9))
        return [k * domain.h for k in range(2, count + 1)]

    def ratio_profile(self, field: SymmetricMatrixField, x: int, radii: Sequence[float], rho: float) -> RatioProfile:
        mus, nus = [], []
        for R in radii:
            try:
                mu, nu = self.mu_ratio(field, x, R), self.nu_ratio(field, x, R)
            except UndefinedRatioError:
                mu, nu = float("nan"), float("nan")
            mus.append(mu)
            nus.append(nu)
        inside = [i for i, R in enumerate(radii) if R <= rho * (1 + 1e-12)]
        mu_in = [mus[i] for i in inside if np.isfinite(mus[i])]
        nu_in = [nus[i] for i in inside if np.isfinite(nus[i])]
        return RatioProfile(
            center=int(x),
            radii=list(radii),
            mu=mus,
            nu=nus,
            rho=rho,
            mu_inf=float(min(mu_in)) if mu_in else float("nan"),
            nu_inf=float(min(nu_in)) if nu_in else float("nan"),
        )

    def infimum_ratios(
        self,
        field: SymmetricMatrixField,
        region: SiteSet,
        rho: float = None,
        radii: Sequence[float] = None,
    ) -> InfimumRatios:
        """(mu0, nu0, p0) as infima over the region's centers and sampled radii <= rho."""
        domain = field.domain
        rho = domain.R_M / 2 if rho is None else rho
        if not 0 < rho <= domain.R_M:
            raise DomainError(f"rho must lie in (0, R_M={domain.R_M}], got {rho}", quantity="rho")
        if len(region) == 0:
            raise CoverageError("Region has no centers")
        radii = self.default_radii(domain, rho) if radii is None else list(radii)

        mu0, nu0 = float("inf"), float("inf")
        for center in region:
            profile = self.ratio_profile(field, center, radii, rho)
            if profile.valid_count < 3:
                raise CoverageError(f"Center {center} has {profile.valid_count} valid shells below rho={rho}, need 3")
            mu0 = min(mu0, profile.mu_inf)
            nu0 = min(nu0, profile.nu_inf)
        p0 = exponent_p0(mu0, nu0, domain.m)
        self.logger.debug(f"Infimum ratios over {len(region)} centers: mu0={mu0:.4g} nu0={nu0:.4g} p0={p0:.4g}")
        return InfimumRatios(mu0=mu0, nu0=nu0, p0=p0)

    def elliptic_phi(
        self,
        field: SymmetricMatrixField,
        x: Point,
        R: float,
        p0: float,
        weighting: PhiWeighting = PhiWeighting.CHAPTER_MONO,
    ) -> float:
        """R^(2 - m - p0) times the ball integral of the chosen energy integrand."""
        domain = field.domain
        weighting = PhiWeighting(weighting)
        if not R < domain.R_M:
            raise DomainError(f"R={R} must be below R_M={domain.R_M}", quantity="radius")
        _, kinetic, potential = self.densities(field)
        indices, weights = domain.ball_quadrature(x, R)

        if weighting == PhiWeighting.CHAPTER_MONO:
            if domain.m == 2:
                raise DomainError("ChapterMono weighting m/(m-2) is undefined for m = 2", quantity="dimension")
            integrand = kinetic[indices] + domain.m / (domain.m - 2) * potential[indices]
        else:
            e = kinetic[indices] + potential[indices]
            rings = np.rint(domain.distances_from(x)[indices] / domain.h).astype(int)
            e_per_ring = np.bincount(rings, weights=e)
            w_per_ring = np.bincount(rings, weights=potential[indices])
            nu = np.divide(w_per_ring, e_per_ring, out=np.zeros_like(e_per_ring), where=e_per_ring > 0)
            integrand = (1.0 + nu[rings]) * e
        return float(R ** (2 - domain.m - p0) * np.sum(integrand * weights))

    def phi_monotonicity_verdict(
        self,
        field: SymmetricMatrixField,
        x: Point,
        radii: Sequence[float],
        p0: float,
        slack: float = Tolerances.MONOTONICITY_SLACK,
        weighting: PhiWeighting = None,
    ) -> MonotonicityVerdict:
        """Worst relative decrease (Phi(R_i) - Phi(R_i+1)) / Phi(R_i+1) over consecutive radii."""
        radii = list(radii)
        if len(radii) < 2:
            raise ValidationError("Need at least two radii", field="radii")
        if any(b <= a for a, b in zip(radii, radii[1:])):
            raise ValidationError("Radii must be strictly ascending", field="radii")
        if weighting is None:
            weighting = PhiWeighting.CHAPTER_MONO if field.domain.m > 2 else PhiWeighting.CHAPTER_EPS

        values = [self.elliptic_phi(field, x, R, p0, weighting) for R in radii]
        drops = []
        for lower, upper in zip(values, values[1:]):
            if upper > 0:
                drops.append((lower - upper) / upper)
            else:
                drops.append(0.0 if lower <= 0 else float("inf"))
        violation = float(max(drops))
        passed = violation <= slack
        if not passed:
            self.logger.warning(f"Phi decreases at center {x}: violation {violation:.3g} > slack {slack}")
        return MonotonicityVerdict(
            functional="Phi",
            samples=radii,
            values=values,
            violation=violation,
            tolerance=slack,
            passed=passed,
            details={"weighting": PhiWeighting(weighting).value, "p0": p0},
        )

    # parabolic functionals

    def _gaussian_integral(self, snapshot: SymmetricMatrixField, x0: Point, t0: float) -> float:
        """sum_x G_(x0,t0)(x, t) e(x) phi(x)^2 h^m at the snapshot time t."""
        domain = snapshot.domain
        _, kinetic, potential = self.densities(snapshot)
        weights = backward_gaussian(domain, x0, t0, None, snapshot.t) * cutoff_phi(domain, x0) ** 2
        return float(np.sum(weights * (kinetic + potential)) * domain.cell_volume())

    def parabolic_small_phi(self, trajectory: Trajectory, x0: Point, t0: float, t: float, nu0: float) -> float:
        """(t0 - t)^(1 - nu0) times the Gaussian-weighted energy at time t."""
        domain = trajectory.domain
        if not t < t0:
            raise DomainError(f"Need t < t0, got t={t}, t0={t0}", quantity="time")
        if t0 - t > domain.R_M ** 2:
            raise DomainError(f"t0 - t = {t0 - t} exceeds R_M^2 = {domain.R_M ** 2}", quantity="time")

        times = trajectory.times
        exact = window_indices(times, t, t)
        if len(exact):
            inner = self._gaussian_integral(trajectory.snapshots[exact.start], x0, t0)
        else:
            after = int(np.searchsorted(times, t))
            if after == 0 or after == len(times):
                raise EmptyWindowError(f"No snapshots around t={t}")
            gap = times[after] - times[after - 1]
            spacing = float(np.median(np.diff(times)))
            if gap > 2 * spacing:
                raise EmptyWindowError(f"Snapshot gap {gap:.3g} around t={t} is wider than {2 * spacing:.3g}")
            before_value = self._gaussian_integral(trajectory.snapshots[after - 1], x0, t0)
            after_value = self._gaussian_integral(trajectory.snapshots[after], x0, t0)
            weight = (t - times[after - 1]) / gap
            inner = (1 - weight) * before_value + weight * after_value
        return float((t0 - t) ** (1 - nu0) * inner)

    def parabolic_psi(self, trajectory: Trajectory, x0: Point, t0: float, R: float, nu0: float) -> PsiEvaluation:
        """Time integral over [t0 - 4R^2, t0 - R^2] of (t0 - t)^-nu0 times the Gaussian-weighted energy."""
        times = trajectory.times
        if not 0 < R <= np.sqrt(max(t0 - times[0], 0.0)) / 2 * (1 + 1e-12):
            raise DomainError(f"R={R} exceeds sqrt(t0 - t_min)/2 for t0={t0}", quantity="radius")
        lo, hi = t0 - 4 * R ** 2, t0 - R ** 2
        window = window_indices(times, lo, hi)
        if len(window) == 0:
            raise EmptyWindowError(f"No snapshots in the strip [{lo:.6g}, {hi:.6g}]")

        sample_times = times[window.start:window.stop]
        values = [
            (t0 - trajectory.snapshots[i].t) ** (-nu0) * self._gaussian_integral(trajectory.snapshots[i], x0, t0)
            for i in window
        ]
        value, coverage = held_trapezoid(sample_times, values, lo, hi)
        low = coverage < Tolerances.STRIP_COVERAGE
        if low:
            self.logger.warning(f"Psi strip at t0={t0:.6g}, R={R:.4g} is {coverage:.0%} covered by snapshots")
        return PsiEvaluation(value=value, coverage=coverage, low_coverage=low, samples=len(window))

    def psi_inequality_verdict(
        self,
        trajectory: Trajectory,
        x0: Point,
        t0: float,
        R: float,
        R0: float,
        E0: float,
        nu0: float,
        c: float = 0.0,
        C_hat: float = 0.0,
        tolerance: float = 1e-12,
    ) -> MonotonicityVerdict:
        """Psi(R) <= exp(c (R0^2 - R^2)) Psi(R0) + C_hat E0 (R0^2 - R^2)."""
        if R > R0:
            raise ValidationError(f"Need R <= R0, got R={R}, R0={R0}", field="radii")
        psi_r = self.parabolic_psi(trajectory, x0, t0, R, nu0)
        psi_r0 = psi_r if R == R0 else self.parabolic_psi(trajectory, x0, t0, R0, nu0)
        span = R0 ** 2 - R ** 2
        rhs = np.exp(c * span) * psi_r0.value + C_hat * E0 * span

        excess = psi_r.value - psi_r0.value
        if excess <= 0:
            c_hat_min = 0.0
        elif E0 > 0 and span > 0:
            c_hat_min = excess / (E0 * span)
        else:
            c_hat_min = float("inf")

        scale = max(abs(rhs), np.finfo(float).tiny)
        violation = float((psi_r.value - rhs) / scale)
        return MonotonicityVerdict(
            functional="Psi",
            samples=[R, R0],
            values=[psi_r.value, psi_r0.value],
            violation=violation,
            tolerance=tolerance,
            passed=violation <= tolerance,
            details={
                "rhs": float(rhs),
                "E0": E0,
                "C_hat_min": float(c_hat_min),
                "coverage": min(psi_r.coverage, psi_r0.coverage),
                "low_coverage": psi_r.low_coverage or psi_r0.low_coverage,
            },
        )
