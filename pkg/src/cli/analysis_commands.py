import logging
import os
from typing import Optional

from src.cli.run_commands import STATUS_FILE
from src.config.run_config import RunConfig
from src.models.lattice import build_domain
from src.services.analysis_service import AnalysisService
from src.services.calibration_service import resolve_constants
from src.storage.report_writer import read_json, write_json, write_table
from src.storage.snapshot_store import read_trajectory
from src.utils.constants import CsvColumns, ExitCode, Messages, RunStatus
from src.utils.exceptions import ConfigError

logger = logging.getLogger(__name__)


def cmd_analyze(
    config: RunConfig,
    trajectory_dir: Optional[str] = None,
    out_dir: Optional[str] = None,
    constants_file: Optional[str] = None,
) -> int:
    """Evaluate the monotonicity and regularity reports over a stored trajectory."""
    trajectory_dir = trajectory_dir or config.output.directory
    out_dir = out_dir or trajectory_dir
    os.makedirs(out_dir, exist_ok=True)

    status_path = os.path.join(trajectory_dir, STATUS_FILE)
    status = RunStatus(read_json(status_path)["status"]) if os.path.exists(status_path) else RunStatus.COMPLETED
    trajectory = read_trajectory(trajectory_dir, status)
    expected = build_domain(config.domain.m, config.domain.n_per_axis, config.domain.period)
    if trajectory.domain != expected:
        raise ConfigError(
            f"Snapshots in {trajectory_dir} were written on {trajectory.domain}, config describes {expected}",
            config_key="domain",
        )

    constants = resolve_constants(constants_file)
    tables = AnalysisService(config.spec(), constants, config.analysis).analyze(trajectory)

    write_table(tables.phi_profile, CsvColumns.PHI_PROFILE, os.path.join(out_dir, "phi_profile.csv"))
    write_table(tables.psi_checks, CsvColumns.PSI_CHECKS, os.path.join(out_dir, "psi_checks.csv"))
    write_table(tables.moser_checks, CsvColumns.MOSER_CHECKS, os.path.join(out_dir, "moser_checks.csv"))
    write_table(tables.epsreg_elliptic, CsvColumns.EPSREG, os.path.join(out_dir, "epsreg_elliptic.csv"))
    write_table(tables.epsreg_parabolic, CsvColumns.EPSREG, os.path.join(out_dir, "epsreg_parabolic.csv"))
    write_json(tables.summary, os.path.join(out_dir, "summary.json"))

    logger.info(f"{Messages.ANALYSIS_DONE} in {out_dir}")
    return ExitCode.OK
