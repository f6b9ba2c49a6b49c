import logging
from typing import Optional

from src.config.run_config import RunConfig
from src.services.calibration_service import CalibrationService
from src.storage.constants_store import save_constants
from src.utils.constants import ExitCode, Messages

logger = logging.getLogger(__name__)


def cmd_calibrate(config: Optional[RunConfig] = None, out_path: Optional[str] = None) -> int:
    """Calibrate on the scenario matrix, or on a single configuration when one is given."""
    configs = [config] if config is not None else None
    constants = CalibrationService().calibrate(configs)
    path = save_constants(constants, out_path)
    logger.info(f"{Messages.CALIBRATION_DONE} to {path}")
    return ExitCode.OK
