import os
from dotenv import load_dotenv

from src.utils.exceptions import ConfigError

DEFAULT_CONSTANTS_FILE = os.path.join(os.path.dirname(__file__), "calibrated_constants.json")


class Settings:
    """Process settings loaded from environment variables."""

    def __init__(self):
        # Load environment variables from .env file
        load_dotenv(override=False)

        # Logging
        self.LOG_DIR = os.getenv("SIGMAFLOW_LOG_DIR", "logs")
        self.LOG_LEVEL = os.getenv("SIGMAFLOW_LOG_LEVEL", "DEBUG").upper()
        self.CONSOLE_LOG_LEVEL = os.getenv("SIGMAFLOW_CONSOLE_LOG_LEVEL", "INFO").upper()
        self.FILE_LOG_LEVEL = os.getenv("SIGMAFLOW_FILE_LOG_LEVEL", "DEBUG").upper()
        self.LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'

        # Worker count for FFTs and sweeps
        self.THREADS = self._get_int_env("SIGMAFLOW_THREADS", 1)

        # Calibrated constants
        self.CONSTANTS_FILE = os.getenv("SIGMAFLOW_CONSTANTS_FILE", DEFAULT_CONSTANTS_FILE)

    def _get_int_env(self, key: str, default: int) -> int:
        """Get a positive integer environment variable."""
        value = os.getenv(key)
        if value is None or value.strip() == "":
            return default
        try:
            parsed = int(value)
        except ValueError:
            raise ConfigError(f"Environment variable {key} must be an integer, got {value!r}", config_key=key)
        if parsed < 1:
            raise ConfigError(f"Environment variable {key} must be at least 1, got {parsed}", config_key=key)
        return parsed


# Create a default settings instance
settings = Settings()
