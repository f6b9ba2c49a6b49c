"""Fits the shared analysis constants over the scenario matrix."""
from typing import List, Optional
import logging
import os

import numpy as np

from src.config.run_config import RunConfig
from src.config.settings import settings
from src.services.analysis_service import AnalysisService
from src.services.flow_service import FlowService
from src.services.regularity_service import RegularityService
from src.services.scenario_service import build_scenario, scenario_matrix
from src.storage.constants_store import CalibratedConstants, load_constants, save_constants
from src.utils.constants import Defaults, PotentialFamily, RunStatus, Tolerances

logger = logging.getLogger(__name__)


class CalibrationService:
    """Derives the smallest shared constants that make every probe of a scenario matrix pass."""

    def __init__(self, margin: float = Tolerances.CALIBRATION_MARGIN):
        self.margin = margin
        self.logger = logging.getLogger(__name__)

    def _required_C1(self, kind: str, m: int, lhs: float, rhs: float, C0: float, C1: float, C2: float,
                     delta: float, R: float) -> float:
        """C1 needed for lhs <= (C1 C0 + C2 / ((1 - d) R)^2)^k int e at fixed C2."""
        exponent = m / 2 if kind == "elliptic" else (m + 2) / 2
        base = C1 * C0 + C2 / ((1 - delta) * R) ** 2
        integral = rhs / base ** exponent if base > 0 else 0.0
        if lhs <= 0 or integral <= 0 or C0 <= 0:
            return 0.0
        needed_base = (lhs / integral) ** (1 / exponent)
        return max(0.0, (needed_base - C2 / ((1 - delta) * R) ** 2) / C0)

    def calibrate(self, configs: Optional[List[RunConfig]] = None) -> CalibratedConstants:
        configs = configs or scenario_matrix()
        probe_constants = CalibratedConstants(moser_C1=0.0, psi_C_hat=0.0, eps_C=1.0, cover_c=1.0, sup_e_C=1.0)

        C1_needed, C_hat_needed, sup_e_needed = [0.0], [0.0], [0.0]
        eps_candidates, implied = [], [0.0]
        for index, config in enumerate(configs, start=1):
            scenario = build_scenario(config)
            self.logger.info(f"Calibration scenario {index}/{len(configs)}: {scenario.spec.label()} m={scenario.domain.m}")
            trajectory = FlowService(scenario.spec).run_flow(scenario.initial, scenario.flow)
            if trajectory.status == RunStatus.DIVERGED:
                self.logger.warning(f"Scenario {index} diverged; skipped")
                continue

            # every epsilon probe triggers so the implied constants cover any threshold
            analysis = config.analysis.copy(update={"eps0": float("inf")})
            tables = AnalysisService(scenario.spec, probe_constants, analysis).analyze(trajectory)
            m = scenario.domain.m
            for kind, _, _, R, delta, C0, C1, C2, lhs, rhs, _, _ in tables.moser_checks:
                C1_needed.append(self._required_C1(kind, m, lhs, rhs, C0, C1, C2, delta, R))
            C_hat_needed.extend(row[8] for row in tables.psi_checks if np.isfinite(row[8]))

            phi_eps = [row[3] for row in tables.phi_profile if row[3] > 0]
            if phi_eps:
                eps_candidates.append(scenario.spec.scale / (2 * float(np.median(phi_eps))))
            implied.append(tables.summary["eps_elliptic_max_constant"])
            implied.append(tables.summary["eps_parabolic_max_constant"])

            if scenario.spec.family == PotentialFamily.SMOOTHED:
                sup_e_needed.extend(self._required_sup_e_C(scenario, config.analysis.b_sweep, probe_constants))

        constants = CalibratedConstants(
            moser_C1=self.margin * max(C1_needed),
            moser_C2=Defaults.MOSER_C2,
            psi_c=0.0,
            psi_C_hat=self.margin * max(C_hat_needed),
            eps_C=self.margin * min(eps_candidates) if eps_candidates else 1.0,
            cover_c=self.margin * max(implied) if max(implied) > 0 else 1.0,
            sup_e_C=self.margin * max(sup_e_needed) if max(sup_e_needed) > 0 else 1.0,
        )
        self.logger.info(f"Calibrated constants: {constants.dict()}")
        return constants

    def _required_sup_e_C(self, scenario, b_values, probe_constants) -> List[float]:
        """sup e / min(bound1, bound2) at C = 1 for every settled b of the sweep."""
        sweep = RegularityService(scenario.spec, probe_constants).sup_e_bound_sweep(
            scenario.initial, scenario.flow, b_values
        )
        needed = []
        for row in sweep.rows:
            floor = min(row.bound1, row.bound2)
            if np.isfinite(row.sup_e) and floor > 0:
                needed.append(row.sup_e / floor)
        return needed


def resolve_constants(path: Optional[str] = None) -> CalibratedConstants:
    """Constants from the file, running the matrix calibration once when it is missing."""
    path = path or settings.CONSTANTS_FILE
    if os.path.exists(path):
        return load_constants(path)
    logger.warning(f"Constants file {path} not found, calibrating over the scenario matrix")
    constants = CalibrationService().calibrate()
    save_constants(constants, path)
    return constants
