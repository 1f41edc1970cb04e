import datetime
import json
import logging
import sys
import traceback

from .schema import KeychainJSONEncoder


class ExtraFieldsLogFilter(logging.Filter):
    """Stamps fixed fields (seed, tool version, command) on every record."""

    def __init__(self, extra: dict, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.extra = extra

    def filter(self, record):
        record.__dict__.update(self.extra)
        return True


class JsonLogHandler(logging.StreamHandler):
    """Writes one JSON object per record, carrying every extra attribute of the record."""

    not_allowed_keys = (
        'args', 'asctime', 'created', 'exc_info', 'stack_info', 'exc_text',
        'filename', 'funcName', 'levelname', 'levelno', 'lineno', 'module',
        'msecs', 'message', 'msg', 'name', 'pathname', 'process',
        'processName', 'relativeCreated', 'thread', 'threadName', 'taskName')

    def __init__(self, stream=None, log_type="keychain"):
        super().__init__(stream if stream is not None else sys.stderr)
        self.log_type = log_type

    def extra_fields(self, record):
        var_type = (str, bool, dict, float, int, list, type(None))
        extra_fields = {}
        for key, value in record.__dict__.items():
            if key in self.not_allowed_keys:
                continue
            extra_fields[key] = value if isinstance(value, var_type) else repr(value)
        return extra_fields

    def format_exception(self, exc_info):
        return ''.join(traceback.format_exception(*exc_info))

    def format_message(self, record):
        now = datetime.datetime.now(datetime.timezone.utc)
        timestamp = now.strftime('%Y-%m-%dT%H:%M:%S') + \
            '.%03d' % (now.microsecond / 1000) + 'Z'

        return_json = {
            'logger': record.name,
            'line_number': record.lineno,
            'path_name': record.pathname,
            'log_level': record.levelname,
            'type': self.log_type,
            'message': record.getMessage(),
            '@timestamp': timestamp
        }
        if record.exc_info:
            return_json['exception'] = self.format_exception(record.exc_info)

        return_json.update(self.extra_fields(record))
        return return_json

    def format(self, record):
        return json.dumps(self.format_message(record), cls=KeychainJSONEncoder, sort_keys=True)
