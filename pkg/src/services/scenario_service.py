"""Builds domains, initial fields and flow settings from run configurations."""
from typing import List, NamedTuple
import logging

import numpy as np

from src.config.run_config import RunConfig, parse_config
from src.models.fields import SymmetricMatrixField
from src.models.flow import FlowConfig
from src.models.lattice import LatticeDomain, build_domain
from src.models.potentials import PotentialSpec
from src.services.field_service import constant_field, grassmannian_winding_field
from src.services.potential_service import PotentialService
from src.utils.constants import Defaults, PotentialFamily, Tolerances

logger = logging.getLogger(__name__)


class Scenario(NamedTuple):
    domain: LatticeDomain
    initial: SymmetricMatrixField
    spec: PotentialSpec
    flow: FlowConfig


def build_initial_field(config: RunConfig, domain: LatticeDomain) -> SymmetricMatrixField:
    matrix = config.matrix
    if matrix.constant is not None:
        return constant_field(domain, np.array(matrix.constant, dtype=float))
    return grassmannian_winding_field(
        domain,
        l=matrix.l,
        k=matrix.k,
        winding=matrix.winding,
        seed=matrix.seed,
        perturbation=matrix.perturbation,
    )


def build_scenario(config: RunConfig) -> Scenario:
    domain = build_domain(config.domain.m, config.domain.n_per_axis, config.domain.period)
    initial = build_initial_field(config, domain)
    scenario = Scenario(domain, initial, config.spec(), config.flow.to_flow_config())
    logger.info(
        f"Scenario: m={domain.m} n={domain.n_per_axis} period={domain.period} "
        f"{scenario.spec.label()} integrator={scenario.flow.integrator.value}"
    )
    return scenario


def scenario_matrix(
    n_2d: int = 32,
    n_3d: int = 16,
    t_end: float = 0.05,
    max_steps: int = 400,
    b_values=Defaults.CALIBRATION_B,
    L_values=Defaults.CALIBRATION_L,
    m_values=Defaults.CALIBRATION_M,
) -> List[RunConfig]:
    """The calibration grid: m x b x L, Smoothed for L = 1 and HigherPower otherwise.

    The adaptive safety factor is capped so that every run takes max_steps steps.
    """
    configs = []
    for m in m_values:
        n = n_2d if m == 2 else n_3d
        for L in L_values:
            family = PotentialFamily.SMOOTHED if L == 1 else PotentialFamily.HIGHER_POWER
            for b in b_values:
                winding = [1] + [0] * (m - 1)
                raw = {
                    "domain": {"m": m, "n_per_axis": n, "period": 1.0},
                    "matrix": {"l": 2, "k": 1, "winding": winding, "seed": 7, "perturbation": 0.3},
                    "potential": {"family": family.value, "b": b, "L": L},
                    "flow": {"t_end": t_end, "max_steps": max_steps, "snapshot_stride": 10},
                    "analysis": {"center_count": 5},
                }
                uniform, _ = PotentialService(RunConfig.parse_obj(raw).spec()).hessian_bound()
                safety = min(Tolerances.ADAPTIVE_SAFETY, uniform * t_end / (Tolerances.DT_SAFETY * max_steps))
                raw["flow"]["dt"] = f"adaptive:{safety!r}"
                configs.append(parse_config(RunConfig.parse_obj(raw).json()))
    return configs
