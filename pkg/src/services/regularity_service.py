"""Moser bounds, epsilon regularity, bad-set covers and the b sweeps."""
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional, Sequence, Tuple
import logging

import numpy as np
from scipy.stats import linregress

from src.config.settings import settings
from src.models.fields import ScalarField, SymmetricMatrixField
from src.models.flow import FlowConfig, Trajectory
from src.models.lattice import LatticeDomain, Point, SiteSet
from src.models.potentials import PotentialSpec
from src.models.reports import (
    BoundCheck,
    CoverReport,
    EpsProbe,
    EpsRegReport,
    HausdorffRow,
    HProfile,
    SupERow,
    SweepSummary,
    ratio_band,
)
from src.services.flow_service import FlowService
from src.services.monotonicity_service import MonotonicityService
from src.services.potential_service import PotentialService
from src.storage.constants_store import CalibratedConstants
from src.utils.constants import Defaults, PhiWeighting, PotentialFamily, RunStatus, Tolerances
from src.utils.exceptions import (
    CoverInvariantError,
    DomainError,
    EmptyWindowError,
    SigmaFlowError,
    UnsupportedFamilyError,
    ValidationError,
)
from src.utils.time_utils import held_trapezoid, window_indices

logger = logging.getLogger(__name__)


def parabolic_delta(R: float, c: float = 1.0) -> float:
    """delta = min(1/2, c |ln R|^(-1/2))."""
    log_r = abs(np.log(R))
    if log_r == 0:
        return 0.5
    return float(min(0.5, c / np.sqrt(log_r)))


def bad_set(e: ScalarField, b: float) -> SiteSet:
    """Sites with e >= 1/b."""
    if not b > 0:
        raise ValidationError(f"b must be positive, got {b}", field="b")
    return SiteSet(np.nonzero(e.values >= 1.0 / b)[0], e.domain)


def subsolution_constant(e: ScalarField) -> float:
    """Smallest C0 >= 0 with d*d e <= C0 e at every site where e > 0."""
    domain = e.domain
    grid = e.values.reshape(domain.shape)
    lap = np.zeros_like(grid)
    for j in range(domain.m):
        lap -= (np.roll(grid, -1, axis=j) - 2 * grid + np.roll(grid, 1, axis=j)) / domain.h ** 2
    lap = lap.reshape(-1)
    positive = e.values > 0
    if not np.any(positive):
        return 0.0
    return float(max(0.0, np.max(lap[positive] / e.values[positive])))


def vitali_cover(domain: LatticeDomain, sites: SiteSet, r: float, dimension: float = None,
                 scale: float = None) -> CoverReport:
    """Greedy disjoint r-balls in site order; their 3r-dilates must cover every site."""
    if not r > 0:
        raise ValidationError(f"Cover radius must be positive, got {r}", field="r")
    if len(sites) == 0:
        return CoverReport(radius=r, centers=[], covered=True, dimension=dimension, scale=scale)

    coords = domain.coordinates[sites.indices]
    accepted: List[int] = []
    for i in range(len(sites)):
        if accepted:
            dist = np.sqrt(np.sum(domain.displacement(coords[i], coords[accepted]) ** 2, axis=1))
            if np.any(dist <= 2 * r):
                continue
        accepted.append(i)

    centers = coords[accepted]
    for k in range(len(accepted)):
        dist = np.sqrt(np.sum(domain.displacement(centers[k], centers) ** 2, axis=1))
        dist[k] = np.inf
        if np.any(dist <= 2 * r):
            raise CoverInvariantError(f"Cover centers closer than 2r={2 * r}")
    nearest = np.full(len(sites), np.inf)
    for center in centers:
        nearest = np.minimum(nearest, np.sqrt(np.sum(domain.displacement(center, coords) ** 2, axis=1)))
    if np.any(nearest > 3 * r * (1 + 1e-12)):
        raise CoverInvariantError(f"{int(np.sum(nearest > 3 * r))} sites lie outside every 3r ball")

    return CoverReport(
        radius=r,
        centers=[int(sites.indices[i]) for i in accepted],
        covered=True,
        dimension=dimension,
        scale=scale,
    )


class RegularityService:
    """Moser bounds, epsilon-regularity scans, bad sets and their coverings."""

    def __init__(self, spec: PotentialSpec, constants: Optional[CalibratedConstants] = None):
        self.spec = spec
        self.constants = constants or CalibratedConstants()
        self.potential = PotentialService(spec)
        self.monotonicity = MonotonicityService(spec)
        self.logger = logging.getLogger(__name__)
        self._e_cache: Dict[int, Tuple[Trajectory, List[ScalarField]]] = {}

    def energy_series(self, trajectory: Trajectory) -> List[ScalarField]:
        """Energy density of every snapshot, computed once per trajectory."""
        key = id(trajectory)
        cached = self._e_cache.get(key)
        if cached is None or cached[0] is not trajectory or len(cached[1]) != len(trajectory.snapshots):
            self._e_cache[key] = (trajectory, [self.potential.energy_density(s) for s in trajectory.snapshots])
        return self._e_cache[key][1]

    def moser_c0(self, e: ScalarField) -> float:
        """C0 of d*d e <= C0 e: the uniform Hessian bound, or the lattice subsolution constant."""
        if self.spec.is_regularized or self.spec.disabled:
            return self.potential.hessian_bound()[0]
        return subsolution_constant(e)

    # sups over balls

    def _nearest_site(self, domain: LatticeDomain, x0: Point) -> int:
        if isinstance(x0, (int, np.integer)):
            return int(x0)
        return int(np.argmin(domain.distances_from(x0)))

    def _ball_sup(self, e: ScalarField, x0: Point, radius: float) -> Tuple[float, int]:
        """max of e over B_radius(x0); the nearest site when the ball holds none."""
        if radius > 0:
            sites = e.domain.ball_sites(x0, radius)
            if len(sites):
                values = e.values[sites.indices]
                k = int(np.argmax(values))
                return float(values[k]), int(sites.indices[k])
        site = self._nearest_site(e.domain, x0)
        return float(e.values[site]), site

    def _ball_integral(self, e: ScalarField, x0: Point, R: float) -> float:
        indices, weights = e.domain.ball_quadrature(x0, R)
        return float(np.sum(e.values[indices] * weights))

    def _check_delta(self, delta: float, upper: float = 1.0):
        if not 0 <= delta < upper:
            raise DomainError(f"delta must lie in [0, {upper}), got {delta}", quantity="delta")

    # Moser bounds

    def moser_elliptic_check(
        self,
        e: ScalarField,
        C0: float,
        x0: Point,
        R: float,
        delta: float = Defaults.DELTA,
        C1: float = None,
        C2: float = None,
    ) -> BoundCheck:
        """sup_{B_dR} e <= (C1 C0 + C2 / ((1 - d) R)^2)^(m/2) int_{B_R} e."""
        domain = e.domain
        C1 = self.constants.moser_C1 if C1 is None else C1
        C2 = self.constants.moser_C2 if C2 is None else C2
        self._check_delta(delta)
        if not R < domain.R_M:
            raise DomainError(f"R={R} must be below R_M={domain.R_M}", quantity="radius")
        if np.any(e.values < 0):
            raise ValidationError("Moser bound needs a non-negative function", field="e")

        lhs, _ = self._ball_sup(e, x0, delta * R)
        factor = (C1 * C0 + C2 / ((1 - delta) * R) ** 2) ** (domain.m / 2)
        rhs = factor * self._ball_integral(e, x0, R)
        return BoundCheck.compare(
            "moser_elliptic", lhs, rhs, {"C0": C0, "C1": C1, "C2": C2, "delta": delta, "R": R}
        )

    def _cylinder_sup(self, trajectory: Trajectory, x0: Point, t0: float, radius: float) -> float:
        """max of e over P_radius(x0, t0), using the snapshot nearest t0 when the window is empty."""
        series = self.energy_series(trajectory)
        times = trajectory.times
        window = window_indices(times, t0 - radius ** 2, t0 + radius ** 2) if radius > 0 else range(0)
        if len(window) == 0:
            window = [int(np.argmin(np.abs(times - t0)))]
        return max(self._ball_sup(series[i], x0, radius)[0] for i in window)

    def moser_parabolic_check(
        self,
        trajectory: Trajectory,
        C0: float,
        x0: Point,
        t0: float,
        R: float,
        delta: float = Defaults.DELTA,
        C1: float = None,
        C2: float = None,
    ) -> BoundCheck:
        """sup_{P_dR} e <= (C1 C0 + C2 / ((1 - d) R)^2)^((m+2)/2) int_{P_R} e."""
        domain = trajectory.domain
        C1 = self.constants.moser_C1 if C1 is None else C1
        C2 = self.constants.moser_C2 if C2 is None else C2
        self._check_delta(delta)
        times = trajectory.times
        _, window = domain.cylinder_window(times, x0, t0, R)

        series = self.energy_series(trajectory)
        lhs = self._cylinder_sup(trajectory, x0, t0, delta * R)
        lo = max(t0 - R ** 2, times[0])
        hi = min(t0 + R ** 2, times[-1])
        values = [self._ball_integral(series[i], x0, R) for i in window]
        integral, _ = held_trapezoid(times[window.start:window.stop], values, lo, hi)
        if hi <= lo:
            # single instant: the cylinder degenerates to one time slice
            integral = values[0]

        factor = (C1 * C0 + C2 / ((1 - delta) * R) ** 2) ** ((domain.m + 2) / 2)
        return BoundCheck.compare(
            "moser_parabolic", lhs, factor * integral,
            {"C0": C0, "C1": C1, "C2": C2, "delta": delta, "R": R},
        )

    def h_profile(self, e: ScalarField, x0: Point, R1: float, p0: float, sigmas: Sequence[float]) -> HProfile:
        """h(sigma) = (R1 - sigma)^(2 - p0) sup_{B_sigma} e and its maximizer."""
        domain = e.domain
        if not 0 < R1 <= 0.75 * domain.R_M:
            raise DomainError(f"R1={R1} must lie in (0, 3 R_M / 4]", quantity="radius")
        sigmas = list(sigmas)
        if not sigmas or any(not 0 <= s < R1 for s in sigmas):
            raise DomainError(f"sigma samples must lie in [0, {R1})", quantity="sigma")

        values, sites, sups = [], [], []
        for sigma in sigmas:
            sup, site = self._ball_sup(e, x0, sigma)
            values.append(float((R1 - sigma) ** (2 - p0) * sup))
            sites.append(site)
            sups.append(sup)
        k = int(np.argmax(values))
        return HProfile(sigmas=sigmas, values=values, sigma_max=sigmas[k], site_max=sites[k], e_max=sups[k])

    # epsilon regularity

    def default_eps0(self) -> float:
        """b^(1/L) / (2 C) with the calibrated C."""
        return self.spec.scale / (2 * self.constants.eps_C)

    def epsilon_scan_elliptic(
        self,
        field: SymmetricMatrixField,
        p0: float,
        centers: Sequence[int],
        radii: Sequence[float],
        delta: float = Defaults.DELTA,
        eps0: float = None,
    ) -> EpsRegReport:
        """Probe Phi (ChapterEps) over centers x radii; triggered probes record sup e and implied constants."""
        if not 0 < delta <= 0.75:
            raise DomainError(f"delta must lie in (0, 3/4], got {delta}", quantity="delta")
        eps0 = self.default_eps0() if eps0 is None else eps0
        e = self.potential.energy_density(field)
        scale = self.spec.scale
        m = field.domain.m

        probes = []
        for x0 in centers:
            for R in radii:
                value = self.monotonicity.elliptic_phi(field, x0, R, p0, PhiWeighting.CHAPTER_EPS)
                probe = EpsProbe(center=int(x0), t0=None, R=R, delta=delta, value=value, triggered=value <= eps0)
                if probe.triggered:
                    probe.sup_delta, _ = self._ball_sup(e, x0, delta * R)
                    probe.sup_half_delta, _ = self._ball_sup(e, x0, delta * R / 2)
                    probe.implied_constant = probe.sup_delta * (delta * R) ** (2 - p0) / scale
                    sup_half_R, _ = self._ball_sup(e, x0, R / 2)
                    integral = value * R ** (m - 2 + p0)
                    probe.fixed_sigma_constant = sup_half_R * R ** m / integral if integral > 0 else 0.0
                probes.append(probe)

        report = EpsRegReport(functional="Phi", eps0=eps0, probes=probes)
        if report.empty:
            self.logger.info(f"Elliptic scan: no probe below eps0={eps0:.4g}")
        else:
            self.logger.info(
                f"Elliptic scan: {len(report.triggered)}/{len(probes)} probes triggered, "
                f"max implied constant {report.max_implied_constant:.4g}"
            )
        return report

    def epsilon_scan_parabolic(
        self,
        trajectory: Trajectory,
        nu0: float,
        centers: Sequence[int],
        times: Sequence[float],
        radii: Sequence[float],
        delta: float = None,
        eps0: float = None,
        delta_c: float = 1.0,
    ) -> EpsRegReport:
        """Probe Psi over (x0, t0, R); delta defaults to the |ln R|^(-1/2) rule."""
        eps0 = self.default_eps0() if eps0 is None else eps0
        scale = self.spec.scale
        t_min = trajectory.times[0]

        probes = []
        for t0 in times:
            for R in radii:
                if R > np.sqrt(max(t0 - t_min, 0.0)) / 2:
                    self.logger.debug(f"Skipping parabolic probe t0={t0:.4g} R={R:.4g}: strip before t_min")
                    continue
                probe_delta = parabolic_delta(R, delta_c) if delta is None else delta
                for x0 in centers:
                    try:
                        psi = self.monotonicity.parabolic_psi(trajectory, x0, t0, R, nu0)
                    except EmptyWindowError as e:
                        self.logger.debug(f"Skipping parabolic probe t0={t0:.4g} R={R:.4g}: {e.message}")
                        break
                    probe = EpsProbe(center=int(x0), t0=float(t0), R=R, delta=probe_delta, value=psi.value,
                                     triggered=psi.value <= eps0)
                    if probe.triggered:
                        probe.sup_delta = self._cylinder_sup(trajectory, x0, t0, probe_delta * R)
                        probe.sup_half_delta = self._cylinder_sup(trajectory, x0, t0, probe_delta * R / 2)
                        probe.implied_constant = probe.sup_delta * (probe_delta * R) ** (2 - 2 * nu0) / scale
                    probes.append(probe)

        report = EpsRegReport(functional="Psi", eps0=eps0, probes=probes)
        self.logger.info(f"Parabolic scan: {len(report.triggered)}/{len(probes)} probes triggered")
        return report

    # bad sets

    def cover_radius(self, b: float) -> float:
        """r = 2 sqrt(4 c b^(1 + 1/L))."""
        return float(2 * np.sqrt(4 * self.constants.cover_c * b ** (1 + 1.0 / self.spec.L)))

    def cover_dimension(self, m: int) -> float:
        """2/(L + 1) + (m - 2); m - 1 for L = 1."""
        return 2.0 / (self.spec.L + 1) + (m - 2)

    def hausdorff_at_scale(self, e: ScalarField, b: float, E0: float, stationary: bool = True) -> HausdorffRow:
        domain = e.domain
        radius = self.cover_radius(b)
        dimension = self.cover_dimension(domain.m)
        cover = vitali_cover(domain, bad_set(e, b), radius, dimension, scale=b)
        measure = cover.measure if cover.count else 0.0
        ratio = measure / E0 if E0 > 0 else float("nan")
        return HausdorffRow(
            b=b, L=self.spec.L, radius=radius, count=cover.count, dimension=dimension,
            measure=measure, E0=E0, ratio=ratio, stationary=stationary,
        )

    def _settle(self, initial: SymmetricMatrixField, config: FlowConfig, b: float):
        """Flow to the configured end time at smoothing b; returns (spec, trajectory, E0, stationary)."""
        spec_b = self.spec.with_b(b)
        flow = FlowService(spec_b, workers=1)
        trajectory = flow.run_flow(initial, config)
        E0 = trajectory.initial_energy.total
        final = trajectory.final
        _, residual = flow.elliptic_residual(final)
        energy = flow.potential.total_energy(final).total
        stationary = residual <= Tolerances.STATIONARY_GATE * max(energy, np.finfo(float).tiny)
        if not stationary:
            self.logger.warning(f"b={b:g}: endpoint residual {residual:.3g} above the stationary gate")
        return spec_b, trajectory, E0, stationary

    def _map_b(self, worker, b_values: Sequence[float]) -> list:
        with ThreadPoolExecutor(max_workers=settings.THREADS) as pool:
            return list(pool.map(worker, b_values))

    def hausdorff_sweep(self, initial: SymmetricMatrixField, config: FlowConfig, b_values: Sequence[float]) -> SweepSummary:
        """Settle at each b, cover the bad set at scale b and compare H to E(f0)."""
        b_values = [float(b) for b in b_values]
        if not b_values:
            raise ValidationError("b sweep list is empty", field="b_sweep")
        if any(b2 >= b1 for b1, b2 in zip(b_values, b_values[1:])):
            raise ValidationError("b sweep list must be strictly descending", field="b_sweep")

        def worker(b: float) -> HausdorffRow:
            try:
                spec_b, trajectory, E0, stationary = self._settle(initial, config, b)
                if trajectory.status == RunStatus.DIVERGED:
                    return HausdorffRow(b, self.spec.L, float("nan"), 0, float("nan"), float("nan"),
                                        E0, float("nan"), False, status=RunStatus.DIVERGED.value)
                e = PotentialService(spec_b).energy_density(trajectory.final)
                return RegularityService(spec_b, self.constants).hausdorff_at_scale(e, b, E0, stationary)
            except SigmaFlowError as e:
                self.logger.error(f"Bad-set sweep failed at b={b:g}: {e.message}")
                return HausdorffRow(b, self.spec.L, float("nan"), 0, float("nan"), float("nan"),
                                    float("nan"), float("nan"), False, status=f"error: {e.error_code}")

        rows = self._map_b(worker, b_values)
        ratios = [row.ratio for row in rows if row.status == "ok"]
        low, high = ratio_band(ratios)
        bounded = bool(np.isfinite(low) and high <= Defaults.BOUNDED_VARIATION_BAND * low)
        ok_rows = [row for row in rows if row.status == "ok"]
        all_zero = bool(ok_rows) and all(row.measure == 0 for row in ok_rows)
        return SweepSummary(rows=rows, bounded_variation=bounded or all_zero, extras={"ratio_min": low, "ratio_max": high})

    def sup_e_bounds(self, e: ScalarField, E_b: float, b: float, p0: float = None) -> SupERow:
        """sup e_b against C b^-m E_b, the improved exponent bound and the informational variants."""
        if self.spec.family != PotentialFamily.SMOOTHED:
            raise UnsupportedFamilyError("sup e sweep is defined for the Smoothed family", family=self.spec.family.value)
        m = e.domain.m
        C = self.constants.sup_e_C
        bound1 = C * b ** (-m) * E_b
        bound2 = C * E_b ** (2 * m / (2 * m - 2)) * b ** (-(2 * m - 1) / (m - 1))
        if p0 is None:
            bound_p0 = float("nan")
        else:
            denominator = p0 + 2 * m - 2
            bound_p0 = C * E_b ** (2 * m / denominator) * b ** ((2 * m - 1) * (p0 - 2) / denominator)
        fallback = b ** (2 * m - 1) / e.domain.R_M ** (2 * m)
        higher_power = C * b ** (-(1 + 1.0 / self.spec.L) * m / 2) * E_b
        sup_e = e.sup
        return SupERow(
            b=b, E_b=E_b, sup_e=sup_e, bound1=bound1, bound2=bound2, bound_p0=bound_p0,
            fallback_bound=fallback, higher_power_bound=higher_power, C=C,
            passed=bool(sup_e <= min(bound1, bound2)),
        )

    def sup_e_bound_sweep(self, initial: SymmetricMatrixField, config: FlowConfig, b_values: Sequence[float],
                          p0: float = None) -> SweepSummary:
        """Settle at each b and check sup e_b against the bounds with one C; slope of log sup e vs log b."""
        if self.spec.family != PotentialFamily.SMOOTHED:
            raise UnsupportedFamilyError("sup e sweep is defined for the Smoothed family", family=self.spec.family.value)
        b_values = [float(b) for b in b_values]
        if not b_values:
            raise ValidationError("b sweep list is empty", field="b_sweep")

        def worker(b: float) -> SupERow:
            nan = float("nan")
            try:
                spec_b, trajectory, _, stationary = self._settle(initial, config, b)
                if trajectory.status == RunStatus.DIVERGED:
                    return SupERow(b, nan, nan, nan, nan, nan, nan, nan, self.constants.sup_e_C, False,
                                   status=RunStatus.DIVERGED.value)
                potential = PotentialService(spec_b)
                final = trajectory.final
                row = RegularityService(spec_b, self.constants).sup_e_bounds(
                    potential.energy_density(final), potential.total_energy(final).total, b, p0
                )
                if not stationary:
                    row.status = "non-stationary"
                return row
            except SigmaFlowError as e:
                self.logger.error(f"sup e sweep failed at b={b:g}: {e.message}")
                return SupERow(b, nan, nan, nan, nan, nan, nan, nan, self.constants.sup_e_C, False,
                               status=f"error: {e.error_code}")

        rows = self._map_b(worker, b_values)
        fit = [(row.b, row.sup_e) for row in rows if np.isfinite(row.sup_e) and row.sup_e > 0]
        slope = None
        if len(fit) >= 2 and len({b for b, _ in fit}) >= 2:
            log_b, log_sup = np.log(np.array(fit)).T
            slope = float(linregress(log_b, log_sup).slope)
            self.logger.info(f"sup e sweep: log-log slope {slope:.3f} over {len(fit)} values of b")
        return SweepSummary(rows=rows, slope=slope)
