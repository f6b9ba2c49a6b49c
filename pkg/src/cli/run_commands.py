import logging
import os
from typing import Optional

from src.config.run_config import RunConfig
from src.services.flow_service import FlowService
from src.services.scenario_service import build_scenario
from src.storage.report_writer import write_json, write_series
from src.storage.snapshot_store import write_trajectory
from src.utils.constants import ExitCode, Messages, RunStatus

logger = logging.getLogger(__name__)

RESOLVED_CONFIG = "config.resolved.json"
STATUS_FILE = "status.json"
SERIES_FILE = "series.csv"


def cmd_run(config: RunConfig, out_dir: Optional[str] = None) -> int:
    """Integrate the configured flow and write snapshots, series.csv and status.json."""
    out_dir = out_dir or config.output.directory
    os.makedirs(out_dir, exist_ok=True)
    write_json(config.resolved(), os.path.join(out_dir, RESOLVED_CONFIG))

    scenario = build_scenario(config)
    flow = FlowService(scenario.spec)
    trajectory = flow.run_flow(scenario.initial, scenario.flow)

    if config.output.emit_snapshots:
        write_trajectory(trajectory, out_dir)
    if config.output.emit_series:
        write_series(trajectory, os.path.join(out_dir, SERIES_FILE))

    status = {
        "status": trajectory.status.value,
        "steps": trajectory.step_count,
        "dt": trajectory.dt,
        "t_final": float(trajectory.final.t),
        "E0": trajectory.initial_energy.total,
        "E_final": trajectory.series[-1].E if trajectory.series else trajectory.initial_energy.total,
        "snapshots": len(trajectory.snapshots),
    }
    if trajectory.eigen_trace:
        t, value, site = min(trajectory.eigen_trace, key=lambda entry: entry[1])
        status["min_eigenvalue"] = {"t": t, "value": value, "site": site}
    if trajectory.divergence is not None:
        d = trajectory.divergence
        status["divergence"] = {"step": d.step, "t": d.t, "sup_e": d.sup_e, "site": d.site, "reason": d.reason}
        status["eigen_trace_tail"] = [list(entry) for entry in trajectory.eigen_trace[-10:]]
    write_json(status, os.path.join(out_dir, STATUS_FILE))

    if trajectory.status == RunStatus.DIVERGED:
        logger.warning(f"{Messages.RUN_DIVERGED}; partial artifacts kept in {out_dir}")
        return ExitCode.DIVERGED
    logger.info(f"{Messages.RUN_COMPLETED}; artifacts in {out_dir}")
    return ExitCode.OK
