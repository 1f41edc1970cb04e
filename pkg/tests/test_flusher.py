import io
import logging
from unittest import TestCase

from keychain.exceptions import ConvergenceError, LaminarityError, SizeGuardError, ValidationError
from keychain.flusher import EXIT_OK, EXIT_SOLVER, EXIT_VALIDATION, CommandGuard
from keychain.logger import get_logger, get_stderr_logger


class CountingStream(io.StringIO):
    def __init__(self):
        super().__init__()
        self.flushes = 0

    def flush(self):
        self.flushes += 1
        super().flush()


class TestCommandGuard(TestCase):
    def setUp(self):
        self.stream = CountingStream()
        self.logger = logging.getLogger('keychain-guard-test')
        self.logger.propagate = False
        self.logger.setLevel(logging.INFO)
        self.handler = logging.StreamHandler(self.stream)
        self.logger.addHandler(self.handler)

    def tearDown(self):
        self.logger.removeHandler(self.handler)

    def _guarded(self, error=None, status=None):
        @CommandGuard(self.logger)
        def command():
            if error is not None:
                raise error
            return status

        return command

    def test_success(self):
        self.assertEqual(self._guarded()(), EXIT_OK)
        self.assertEqual(self._guarded(status=5)(), 5)
        self.assertGreater(self.stream.flushes, 0)

    def test_validation_error(self):
        self.assertEqual(self._guarded(ValidationError('bad instance'))(), EXIT_VALIDATION)
        self.assertIn('invalid input: bad instance', self.stream.getvalue())

    def test_subclasses_keep_their_category(self):
        self.assertEqual(self._guarded(LaminarityError('overlap', pair=(0, 1)))(), EXIT_VALIDATION)
        self.assertEqual(self._guarded(SizeGuardError('too big', bounds={'num_keys': 20}))(), EXIT_SOLVER)
        self.assertEqual(self._guarded(ConvergenceError('stalled', gap=0.1))(), EXIT_SOLVER)
        self.assertIn('solver failed: too big', self.stream.getvalue())

    def test_other_errors_propagate(self):
        with self.assertRaises(KeyError):
            self._guarded(KeyError('boom'))()
        self.assertIn('call failed', self.stream.getvalue())


class TestLoggers(TestCase):

    def test_package_logger(self):
        logger = get_logger(True)
        self.assertEqual(logger.name, 'keychain')
        self.assertEqual(logger.level, logging.DEBUG)
        self.assertEqual(get_logger(False).level, logging.INFO)

    def test_stderr_logger_has_one_handler(self):
        get_stderr_logger(False)
        logger = get_stderr_logger(False)
        self.assertFalse(logger.propagate)
        self.assertEqual(len(logger.handlers), 1)
