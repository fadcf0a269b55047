"""Logger factory shared by every varselclust module.

`richcolorlog` renders levels and tracebacks in colour; when it is missing
the stdlib `logging` module is configured with a plain format instead.
"""

import os
import logging

exceptions = ['numba', 'matplotlib', 'joblib']
LOG_LEVEL = os.getenv('LOG_LEVEL', 'WARNING').upper()
tprint = None  # type: ignore

if str(os.getenv('DEBUG', '0')).lower() in ['1', 'true', 'ok', 'yes']:
    LOG_LEVEL = "DEBUG"
    os.environ['LOGGING'] = "1"
    os.environ.pop('NO_LOGGING', None)
    os.environ['TRACEBACK'] = "1"

try:
    from richcolorlog import setup_logging, print_exception as tprint  # type: ignore
    setup_logging(exceptions=exceptions)
    _RICH = True
except ImportError:
    _RICH = False
    logging.basicConfig(
        level=getattr(logging, LOG_LEVEL, logging.WARNING),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )
    for exc in exceptions:
        logging.getLogger(exc).setLevel(logging.CRITICAL)

if not tprint:
    import traceback

    def tprint(*args, **kwargs):
        traceback.print_exc(*args, **kwargs)


def get_logger(name: str) -> logging.Logger:
    """Return a module logger at the configured level."""
    if _RICH:
        return setup_logging(name, level=LOG_LEVEL, exceptions=exceptions)  # type: ignore
    logger = logging.getLogger(name)
    logger.setLevel(getattr(logging, LOG_LEVEL, logging.WARNING))
    return logger


def traceback_enabled() -> bool:
    return os.getenv('TRACEBACK', '0').lower() in ['1', 'yes', 'true']
