import logging
import os
from typing import Optional

from src.config.run_config import RunConfig
from src.services.calibration_service import resolve_constants
from src.services.regularity_service import RegularityService
from src.services.scenario_service import build_scenario
from src.storage.report_writer import write_json, write_table
from src.utils.constants import CsvColumns, ExitCode, Messages, PotentialFamily
from src.utils.exceptions import ConfigError

logger = logging.getLogger(__name__)


def cmd_sweep(config: RunConfig, out_dir: Optional[str] = None, constants_file: Optional[str] = None) -> int:
    """Bad-set and sup e sweeps over analysis.b_sweep."""
    b_values = list(config.analysis.b_sweep)
    if any(b2 >= b1 for b1, b2 in zip(b_values, b_values[1:])):
        raise ConfigError("analysis.b_sweep must be strictly descending", config_key="analysis.b_sweep")
    out_dir = out_dir or config.output.directory
    os.makedirs(out_dir, exist_ok=True)

    scenario = build_scenario(config)
    regularity = RegularityService(scenario.spec, resolve_constants(constants_file))

    hausdorff = regularity.hausdorff_sweep(scenario.initial, scenario.flow, b_values)
    write_table([row.as_row() for row in hausdorff.rows], CsvColumns.BADSET_SWEEP,
                os.path.join(out_dir, "badset_sweep.csv"))

    summary = {
        "potential": scenario.spec.label(),
        "b_sweep": b_values,
        "bounded_variation": hausdorff.bounded_variation,
        "ratio_min": hausdorff.extras.get("ratio_min"),
        "ratio_max": hausdorff.extras.get("ratio_max"),
    }
    if scenario.spec.family == PotentialFamily.SMOOTHED:
        sup_e = regularity.sup_e_bound_sweep(scenario.initial, scenario.flow, b_values)
        rows = [row.as_row() for row in sup_e.rows]
        summary["sup_e_slope"] = sup_e.slope
        summary["sup_e_pass"] = all(row.passed for row in sup_e.rows if row.status == "ok")
    else:
        logger.info(f"sup e sweep applies to the Smoothed family only; {scenario.spec.label()} gets an empty table")
        rows = []
    write_table(rows, CsvColumns.SUP_E_SWEEP, os.path.join(out_dir, "sup_e_sweep.csv"))
    write_json(summary, os.path.join(out_dir, "sweep_summary.json"))

    logger.info(f"{Messages.SWEEP_DONE} in {out_dir}")
    return ExitCode.OK
