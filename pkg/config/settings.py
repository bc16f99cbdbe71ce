# config/settings.py
import logging
import os
from dataclasses import dataclass, fields, replace
from pathlib import Path

from dotenv import dotenv_values, load_dotenv

from utils.errors import ConfigError

logger = logging.getLogger(__name__)


def load_env():
    """Load environment variables from .env file"""
    env_path = Path(__file__).parent.parent / '.env'
    load_dotenv(dotenv_path=env_path)


# Numeric kernel settings
GUARD_BITS = 16
DEFAULT_PRECISION = 64
MIN_PRECISION = 16

# Jet settings
DEFAULT_ORDER = 12
MAX_ORDER = 30

# Sign test settings
DEFAULT_GRID_SIZE = 48
DECADE_POINTS = 8  # extra samples at lo + 10^k, k = -2..5
LEFT_OFFSET_EXPONENT = -10  # first sample sits (len or 1) * 2^-10 right of lo

# Radius probe
RADIUS_SLACK = 0.15

# alpha0 explorer
ALPHA0_ORDER = 14
ALPHA0_GRID_SIZE = 96
ALPHA0_SEARCH = (1.0, 2.5)
ALPHA0_BISECT_TOL = 2.0 ** -10
ALPHA0_MIN_BISECT_TOL = 2.0 ** -20
ALPHA0_MIN_ORDER = 8
ALPHA0_LEFT_OFFSET = 2.0 ** -8  # probes start this far right of -a
ALPHA0_ESCALATIONS = 2  # precision doublings before an inconclusive probe aborts
ALPHA0_SWEEP_A = (0.0, 0.5, 1.0)
ALPHA0_SWEEP_OFFSETS = (0.1, 0.5, 0.9)

# asymptotic slope checks
ASYMCHECK_RANGE = (10 ** 2, 10 ** 5)
ASYMCHECK_POINTS = 16
ASYMCHECK_TOLERANCE = 0.2
ASYMCHECK_PRECISION = 256
ASYMCHECK_SHIFT = '1/3'  # keeps B_2..B_4 at the shift non-zero
ASYMCHECK_GAP = (0, 0.9)

OUTPUT_FORMATS = ('json', 'csv', 'text')
LOG_LEVELS = ('DEBUG', 'INFO', 'WARNING', 'ERROR')
REPORT_SCHEMA_VERSION = '1'


def default_precision(order):
    """Precision in bits used when none is configured: max(64, 8N)"""
    return max(DEFAULT_PRECISION, 8 * order)


@dataclass(frozen=True)
class RunConfig:
    """Resolved settings for one CLI run"""
    precision_bits: int = None
    order: int = DEFAULT_ORDER
    grid_size: int = DEFAULT_GRID_SIZE
    tol: float = None
    output_format: str = 'text'
    output_path: str = None
    threads: int = None
    seed: int = 0
    timestamp: bool = True
    log_level: str = 'INFO'

    @property
    def precision(self):
        if self.precision_bits is not None:
            return self.precision_bits
        return default_precision(self.order)

    @property
    def workers(self):
        return self.threads if self.threads is not None else (os.cpu_count() or 1)


# Environment variable -> RunConfig field
ENV_KEYS = {
    'CMONO_PRECISION': 'precision_bits',
    'CMONO_ORDER': 'order',
    'CMONO_GRID': 'grid_size',
    'CMONO_TOL': 'tol',
    'CMONO_FORMAT': 'output_format',
    'CMONO_OUT': 'output_path',
    'CMONO_THREADS': 'threads',
    'CMONO_SEED': 'seed',
    'CMONO_LOG_LEVEL': 'log_level',
}

# Config file keys may use the flag spelling as well as the field name
FILE_KEY_ALIASES = {
    'precision': 'precision_bits',
    'grid': 'grid_size',
    'format': 'output_format',
    'out': 'output_path',
}


def _coerce(name, raw):
    """Convert a textual setting to the type of the RunConfig field"""
    if raw is None:
        return None
    if not isinstance(raw, str):
        return raw
    text = raw.strip()
    if not text:
        return None
    try:
        if name in ('precision_bits', 'order', 'grid_size', 'threads', 'seed'):
            return int(text)
        if name == 'tol':
            return float(text)
        if name == 'timestamp':
            return text.lower() in ('1', 'true', 'yes', 'on')
    except ValueError:
        raise ConfigError(f"Invalid value for {name}: {raw!r}")
    return text


def _validate(config):
    if config.precision_bits is not None and config.precision_bits < MIN_PRECISION:
        raise ConfigError(f"precision must be at least {MIN_PRECISION} bits")
    if not 0 <= config.order <= MAX_ORDER:
        raise ConfigError(f"order must lie in [0, {MAX_ORDER}]")
    if config.grid_size < 2:
        raise ConfigError("grid must have at least 2 points")
    if config.tol is not None and config.tol <= 0:
        raise ConfigError("tol must be positive")
    if config.output_format not in OUTPUT_FORMATS:
        raise ConfigError(f"format must be one of {', '.join(OUTPUT_FORMATS)}")
    if config.log_level.upper() not in LOG_LEVELS:
        raise ConfigError(f"log level must be one of {', '.join(LOG_LEVELS)}")
    return config


def get_run_config(config_path=None, overrides=None):
    """
    Resolve the run configuration

    Defaults are overridden by CMONO_* environment variables, those by the
    key=value config file, and those by explicit overrides (command-line flags).

    Args:
        config_path (str, optional): Path to a key=value config file
        overrides (dict, optional): Field values from flags; None values are ignored

    Returns:
        RunConfig: Validated configuration
    """
    valid = {f.name for f in fields(RunConfig)}
    values = {}

    for env_key, name in ENV_KEYS.items():
        value = _coerce(name, os.getenv(env_key))
        if value is not None:
            values[name] = value

    if config_path:
        path = Path(config_path)
        if not path.is_file():
            raise ConfigError(f"Config file not found: {config_path}")
        for key, raw in dotenv_values(path).items():
            name = FILE_KEY_ALIASES.get(key.strip().lower(), key.strip().lower())
            if name not in valid:
                logger.warning(f"Ignoring unknown config key: {key}")
                continue
            value = _coerce(name, raw)
            if value is not None:
                values[name] = value
        logger.debug(f"Loaded config file {config_path}")

    for name, value in (overrides or {}).items():
        if value is not None:
            values[name] = _coerce(name, value)

    return _validate(replace(RunConfig(), **values))
