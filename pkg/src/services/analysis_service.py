"""Drives the monotonicity and regularity checks over one trajectory."""
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional
import logging

import numpy as np

from src.config.run_config import AnalysisBlock
from src.models.flow import Trajectory
from src.models.lattice import LatticeDomain, SiteSet
from src.models.potentials import PotentialSpec
from src.models.reports import InfimumRatios
from src.services.flow_service import FlowService
from src.services.monotonicity_service import MonotonicityService
from src.services.regularity_service import RegularityService
from src.storage.constants_store import CalibratedConstants
from src.utils.constants import Defaults, PhiWeighting, Tolerances
from src.utils.exceptions import CoverageError, EmptyWindowError, FormulaDomainError

logger = logging.getLogger(__name__)


@dataclass
class AnalysisTables:
    """Rows of every analysis report plus the structured summary."""
    phi_profile: List[list] = field(default_factory=list)
    psi_checks: List[list] = field(default_factory=list)
    moser_checks: List[list] = field(default_factory=list)
    epsreg_elliptic: List[list] = field(default_factory=list)
    epsreg_parabolic: List[list] = field(default_factory=list)
    summary: Dict[str, Any] = field(default_factory=dict)


def default_centers(domain: LatticeDomain, count: int) -> List[int]:
    """Sites on the main diagonal, evenly spaced."""
    n = domain.n_per_axis
    centers = []
    for k in range(count):
        position = (k * n) // count
        centers.append(int(np.ravel_multi_index((position,) * domain.m, domain.shape)))
    return sorted(set(centers))


def default_radii(domain: LatticeDomain) -> List[float]:
    radii = [k * domain.h for k in Defaults.PROFILE_RADII if k * domain.h < domain.R_M]
    if len(radii) < 2:
        # coarse lattices: every multiple of h from 2h up to R_M
        radii = [k * domain.h for k in range(2, domain.n_per_axis) if k * domain.h < domain.R_M]
    return radii


class AnalysisService:
    def __init__(self, spec: PotentialSpec, constants: CalibratedConstants, analysis: Optional[AnalysisBlock] = None):
        self.spec = spec
        self.constants = constants
        self.analysis = analysis or AnalysisBlock()
        self.monotonicity = MonotonicityService(spec)
        self.regularity = RegularityService(spec, constants)
        self.flow = FlowService(spec)
        self.logger = logging.getLogger(__name__)

    def _ratios(self, snapshot, region: SiteSet, rho: float, label: str) -> InfimumRatios:
        try:
            return self.monotonicity.infimum_ratios(snapshot, region, rho)
        except (CoverageError, FormulaDomainError) as e:
            self.logger.warning(f"Infimum ratios on the {label} snapshot unavailable ({e.error_code}); using mu0 = nu0 = 0")
            return InfimumRatios(mu0=0.0, nu0=0.0, p0=0.0)

    def psi_radii(self, trajectory: Trajectory, t0: float) -> List[float]:
        if self.analysis.psi_radii:
            return list(self.analysis.psi_radii)
        largest = np.sqrt(max(t0 - trajectory.times[0], 0.0)) / 2
        return [fraction * largest for fraction in (0.25, 0.5, 0.75, 1.0)] if largest > 0 else []

    def analyze(self, trajectory: Trajectory) -> AnalysisTables:
        domain = trajectory.domain
        initial, final = trajectory.snapshots[0], trajectory.final
        centers = self.analysis.centers or default_centers(domain, self.analysis.center_count)
        radii = list(self.analysis.radii) if self.analysis.radii else default_radii(domain)
        region = SiteSet(centers, domain)
        rho = self.analysis.rho or domain.R_M / 2
        delta = self.analysis.delta
        tables = AnalysisTables()

        nu0 = self._ratios(initial, region, rho, "initial").nu0
        ratios = self._ratios(final, region, rho, "final")
        p0 = ratios.p0
        _, residual = self.flow.elliptic_residual(final)
        final_energy = self.flow.potential.total_energy(final).total
        stationary = residual <= Tolerances.STATIONARY_GATE * max(final_energy, np.finfo(float).tiny)
        if not stationary:
            self.logger.warning(f"Final state is not near-stationary (residual {residual:.3g}); elliptic verdicts are indicative")

        # elliptic Phi profiles
        phi_verdicts = []
        for x0 in centers:
            for R in radii:
                mono = (self.monotonicity.elliptic_phi(final, x0, R, p0, PhiWeighting.CHAPTER_MONO)
                        if domain.m > 2 else float("nan"))
                eps = self.monotonicity.elliptic_phi(final, x0, R, p0, PhiWeighting.CHAPTER_EPS)
                tables.phi_profile.append([x0, R, mono, eps, p0])
            if len(radii) >= 2:
                phi_verdicts.append(self.monotonicity.phi_monotonicity_verdict(final, x0, radii, p0, self.analysis.slack))

        # parabolic Psi inequality, largest radius as R0
        E0 = trajectory.initial_energy.total if trajectory.initial_energy else self.flow.potential.total_energy(initial).total
        t0 = float(trajectory.times[-1])
        psi_radii = self.psi_radii(trajectory, t0)
        psi_verdicts = []
        if psi_radii:
            R0 = psi_radii[-1]
            for x0 in centers:
                for R in psi_radii:
                    try:
                        verdict = self.monotonicity.psi_inequality_verdict(
                            trajectory, x0, t0, R, R0, E0, nu0, self.constants.psi_c, self.constants.psi_C_hat
                        )
                    except EmptyWindowError as e:
                        self.logger.warning(f"Psi check skipped at center {x0}, R={R:.4g}: {e.message}")
                        continue
                    psi_verdicts.append(verdict)
                    d = verdict.details
                    tables.psi_checks.append([
                        x0, t0, R, R0, verdict.values[0], verdict.values[1], E0, d["rhs"],
                        d["C_hat_min"], d["coverage"], d["low_coverage"], verdict.passed,
                    ])

        # Moser bounds on the final state and the cylinder at the final time
        e_final = self.regularity.energy_series(trajectory)[-1]
        C0 = self.regularity.moser_c0(e_final)
        moser_checks = []
        for x0 in centers:
            for R in radii:
                check = self.regularity.moser_elliptic_check(e_final, C0, x0, R, delta)
                moser_checks.append(check)
                tables.moser_checks.append(self._moser_row("elliptic", x0, None, check))
                check = self.regularity.moser_parabolic_check(trajectory, C0, x0, t0, R, delta)
                moser_checks.append(check)
                tables.moser_checks.append(self._moser_row("parabolic", x0, t0, check))

        # epsilon regularity scans
        eps0 = self.analysis.eps0
        elliptic = self.regularity.epsilon_scan_elliptic(final, p0, centers, radii, delta, eps0)
        for probe in elliptic.probes:
            row = probe.as_row()
            row[5] = elliptic.eps0
            tables.epsreg_elliptic.append(row)
        parabolic = self.regularity.epsilon_scan_parabolic(trajectory, nu0, centers, [t0], psi_radii, eps0=eps0)
        for probe in parabolic.probes:
            row = probe.as_row()
            row[5] = parabolic.eps0
            tables.epsreg_parabolic.append(row)

        tables.summary = {
            "potential": self.spec.label(),
            "status": trajectory.status.value,
            "t_final": t0,
            "E0": E0,
            "mu0": ratios.mu0,
            "nu0": nu0,
            "p0": p0,
            "residual": residual,
            "stationary": bool(stationary),
            "phi_monotone": all(v.passed for v in phi_verdicts),
            "phi_worst_violation": max((v.violation for v in phi_verdicts), default=None),
            "psi_pass": all(v.passed for v in psi_verdicts),
            "psi_C_hat_min": max((v.details["C_hat_min"] for v in psi_verdicts), default=0.0),
            "moser_pass": all(c.passed for c in moser_checks),
            "moser_worst_ratio": max((c.ratio for c in moser_checks), default=0.0),
            "eps_elliptic_triggered": len(elliptic.triggered),
            "eps_elliptic_max_constant": elliptic.max_implied_constant,
            "eps_parabolic_triggered": len(parabolic.triggered),
            "eps_parabolic_max_constant": parabolic.max_implied_constant,
            "eps_pass": max(elliptic.max_implied_constant, parabolic.max_implied_constant) <= self.constants.cover_c,
            "constants": self.constants.dict(),
        }
        self.logger.info(
            f"Analysis: p0={p0:.4g} nu0={nu0:.4g} phi_monotone={tables.summary['phi_monotone']} "
            f"psi_pass={tables.summary['psi_pass']} moser_pass={tables.summary['moser_pass']}"
        )
        return tables

    def _moser_row(self, kind: str, x0: int, t0: Optional[float], check) -> list:
        c = check.constants
        return [kind, x0, t0, c["R"], c["delta"], c["C0"], c["C1"], c["C2"],
                check.lhs, check.rhs, check.ratio, check.passed]
