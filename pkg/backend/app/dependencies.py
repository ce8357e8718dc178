import logging
import os

from fastapi import HTTPException, status

from backend.app.exceptions import ConfigError
from backend.app.schemas import RunConfig
from backend.app.utils import load_run_config

logger = logging.getLogger(__name__)


def get_run_config() -> RunConfig:
    """Defaults for omitted request fields, from the key=value file named by QBM_CONFIG."""
    try:
        return load_run_config(os.getenv("QBM_CONFIG"))
    except ConfigError as e:
        logger.error(f"Server run config is invalid: {e}")
        raise HTTPException(
            status_code=status.HTTP_500_INTERNAL_SERVER_ERROR,
            detail=f"Server run config is invalid: {e}"
        )
