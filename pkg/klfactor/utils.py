#
#  utils.py
#
#  Errors, logging and small numeric helpers shared across modules.
#

import logging
import os
import sys
from typing import Literal, Optional

import numpy as np
import structlog

LOG_LEVEL = Literal["error", "info", "debug"]

LOG_LEVELS = {
    "error": logging.ERROR,
    "info": logging.INFO,
    "debug": logging.DEBUG,
}

# environment variable read by the command-line tool
LOG_ENV_VAR = "KLFACTOR_LOG"

DEFAULT_LOG_LEVEL: LOG_LEVEL = "error"

# sanity checks
assert DEFAULT_LOG_LEVEL in LOG_LEVELS

log = structlog.get_logger()


def configure_logging(level: Optional[str] = None) -> str:
    """Route structlog events to stderr, filtered at `level` (or $KLFACTOR_LOG).

    Returns the level name actually in effect.
    """
    requested = (level or os.environ.get(LOG_ENV_VAR) or DEFAULT_LOG_LEVEL).strip().lower()
    effective = requested if requested in LOG_LEVELS else DEFAULT_LOG_LEVEL

    structlog.configure(
        processors=[
            structlog.processors.add_log_level,
            structlog.dev.ConsoleRenderer(colors=False),
        ],
        wrapper_class=structlog.make_filtering_bound_logger(LOG_LEVELS[effective]),
        logger_factory=structlog.PrintLoggerFactory(file=sys.stderr),
        cache_logger_on_first_use=False,
    )

    if effective != requested:
        log.warning("logging.unknown_level", requested=requested, using=effective)

    return effective


def max_abs(x: np.ndarray) -> float:
    """Max-modulus norm, 0 for empty arrays."""
    x = np.asarray(x)
    return float(np.max(np.abs(x))) if x.size else 0.0


def hermitian_part(a: np.ndarray) -> np.ndarray:
    return (a + np.conj(np.swapaxes(a, -1, -2))) / 2


def leading_sign(v: np.ndarray, rel: float = 1e-8) -> float:
    """Sign that makes the first component of (near) largest magnitude positive.

    Ties within `rel` of the maximum resolve to the lowest index, so the choice
    is stable under round-off.
    """
    mags = np.abs(v)
    top = mags.max() if mags.size else 0.0
    if top == 0.0:
        return 1.0
    j = int(np.argmax(mags >= (1 - rel) * top))
    return -1.0 if np.real(v[j]) < 0 else 1.0


def fix_sign(v: np.ndarray, rel: float = 1e-8) -> np.ndarray:
    return leading_sign(v, rel) * v


def is_finite(x: np.ndarray) -> bool:
    return bool(np.all(np.isfinite(x)))


class KLFactorError(Exception):
    pass


class InputError(KLFactorError, ValueError):
    """Invalid input: malformed files, violated preconditions. Exit code 2."""


class NumericalError(KLFactorError, ArithmeticError):
    """A computation failed or produced an invalid result. Exit code 3."""
