"""Persistence of the calibrated analysis constants."""
from typing import Optional
import json
import logging
import os

from pydantic import BaseModel, Extra, ValidationError as PydanticValidationError, validator

from src.config.settings import settings
from src.utils.constants import Defaults
from src.utils.exceptions import ConfigError, StorageError

logger = logging.getLogger(__name__)


class CalibratedConstants(BaseModel):
    """Constants the bounds assert, shared by every scenario."""
    moser_C1: float = 1.0
    moser_C2: float = Defaults.MOSER_C2
    psi_c: float = 0.0
    psi_C_hat: float = 1.0
    eps_C: float = 1.0
    cover_c: float = 1.0
    sup_e_C: float = 10.0

    class Config:
        extra = Extra.forbid
        allow_mutation = False

    @validator("*")
    def non_negative(cls, v, field):
        if not v >= 0:
            raise ValueError(f"{field.name} must be non-negative")
        return v

    @validator("eps_C")
    def eps_positive(cls, v):
        if not v > 0:
            raise ValueError("eps_C must be positive")
        return v


def load_constants(path: Optional[str] = None) -> CalibratedConstants:
    path = path or settings.CONSTANTS_FILE
    if not os.path.exists(path):
        raise StorageError(f"Constants file {path} not found; run calibrate first", path=path)
    try:
        constants = CalibratedConstants.parse_file(path)
    except PydanticValidationError as e:
        first = e.errors()[0]
        key = ".".join(str(part) for part in first["loc"])
        raise ConfigError(f"Invalid constants file {path}: {first['msg']}", config_key=key)
    except (OSError, ValueError) as e:
        raise StorageError(f"Could not read constants file {path}: {e}", path=path)
    logger.debug(f"Loaded calibrated constants from {path}")
    return constants


def save_constants(constants: CalibratedConstants, path: Optional[str] = None) -> str:
    path = path or settings.CONSTANTS_FILE
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    try:
        with open(path, "w") as handle:
            json.dump(constants.dict(), handle, indent=2, sort_keys=True)
            handle.write("\n")
    except OSError as e:
        raise StorageError(f"Could not write constants file {path}: {e}", path=path)
    logger.info(f"Saved calibrated constants to {path}")
    return path
