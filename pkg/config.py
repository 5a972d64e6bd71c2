"""
qoverlap - runtime configuration and logging setup
"""

import logging
import multiprocessing
import os
from pathlib import Path
from typing import Optional

from dotenv import load_dotenv

# Load environment variables for local runs
_env_name = os.getenv('QOVERLAP_ENV')
_base_dir = Path(__file__).resolve().parent
if _env_name:
    _env_path = _base_dir / f".env.{_env_name}"
    if _env_path.exists():
        load_dotenv(_env_path, override=False)
else:
    _default_env = _base_dir / ".env"
    if _default_env.exists():
        load_dotenv(_default_env, override=False)


def _env_int(name: str, default: int, minimum: int = 0) -> int:
    raw = os.getenv(name)
    if raw is None or not raw.strip():
        return default
    try:
        return max(minimum, int(raw))
    except ValueError:
        logging.getLogger(__name__).warning('Ignoring non-integer %s=%r', name, raw)
        return default


class Config:
    """Application configuration"""
    ENV = os.getenv('QOVERLAP_ENV', 'production')
    THREADS = _env_int('QOVERLAP_THREADS', multiprocessing.cpu_count(), minimum=1)
    SHOTS = _env_int('QOVERLAP_SHOTS', 8192, minimum=1)
    RUNS = _env_int('QOVERLAP_RUNS', 100, minimum=1)
    SEED = _env_int('QOVERLAP_SEED', 0)
    LOG_LEVEL = os.getenv('QOVERLAP_LOG_LEVEL', 'INFO').upper()
    LOG_FILE = os.getenv('QOVERLAP_LOG_FILE') or None


def worker_count(requested: Optional[int] = None) -> int:
    """Clamp a requested degree of parallelism to QOVERLAP_THREADS."""
    if requested is None or requested < 1:
        return Config.THREADS
    return max(1, min(requested, Config.THREADS))


def configure_logging(level: Optional[str] = None) -> None:
    """Install the stderr handler plus the optional log file, replacing earlier handlers."""
    handlers = [logging.StreamHandler()]
    if Config.LOG_FILE:
        handlers.append(logging.FileHandler(Config.LOG_FILE))
    logging.basicConfig(
        level=getattr(logging, (level or Config.LOG_LEVEL).upper(), logging.INFO),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=handlers,
        force=True,
    )
