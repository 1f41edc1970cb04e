import logging
import sys


def get_logger(debug, name=None):
    return __get_logger(debug, name or __package__)


def get_stderr_logger(debug):
    stderr_logger = __get_logger(debug, __package__ + '_stderr', logging.StreamHandler(sys.stderr))
    stderr_logger.propagate = False
    return stderr_logger


def __get_logger(debug, name, handler=None):
    logger = logging.getLogger(name)
    logger.setLevel(logging.DEBUG if debug else logging.INFO)
    if handler and not any(type(h) is type(handler) for h in logger.handlers):
        logger.addHandler(handler)
    return logger
