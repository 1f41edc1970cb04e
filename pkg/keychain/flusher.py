import functools
import logging

from .exceptions import SolverError, ValidationError

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_SOLVER = 3


class CommandGuard:
    """Runs a CLI command, turning library errors into exit statuses.

    Validation problems exit with 2 and solver failures with 3. Anything
    else propagates. Handlers of the guarded logger are flushed on every path.
    """

    def __init__(self, logger: logging.Logger):
        self.logger = logger

    def __call__(self, function):
        @functools.wraps(function)
        def wrapper(*args, **kwargs):
            try:
                status = function(*args, **kwargs)
                return EXIT_OK if status is None else status
            except ValidationError as e:
                self.logger.error('invalid input: %s', e)
                return EXIT_VALIDATION
            except SolverError as e:
                self.logger.error('solver failed: %s', e, exc_info=self.logger.isEnabledFor(logging.DEBUG))
                return EXIT_SOLVER
            except Exception as e:
                self.logger.exception('call failed: {}'.format(e))
                raise
            finally:
                [h.flush() for h in self.logger.handlers]

        return wrapper
