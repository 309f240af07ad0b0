"""Reporting of recoverable errors.

In strict mode (the default) reported errors are raised; otherwise they are
logged as warnings and remembered in ``error_code``.
"""
import logging
from contextlib import contextmanager

log = logging.getLogger(__name__)

strict = True
error_code = 0
captured_errors = None


def set_strict_mode(enable=True):
    global strict
    strict = enable


@contextmanager
def capture():
    """Capture exceptions for debug purposes.

    >>> from pbrwp.exceptions import PbrwpError
    >>> with capture() as errors:
    ...     report_error(PbrwpError('oops'))
    >>> errors
    [PbrwpError('oops')]
    """
    global captured_errors
    captured_errors = []
    try:
        yield captured_errors
    finally:
        captured_errors = None


def format_error(exception, prefix='ERROR: '):
    """
    >>> from pbrwp.exceptions import ConfigError
    >>> print(format_error(ConfigError('bad', filename='a.ini', section='init', key='mean')))
    a.ini: in section [init]
    a.ini: ERROR: [init] mean: bad
    """
    lines = []
    context = exception.get_context()
    if context:
        lines += context.splitlines()
    lines.append('{0}{1}'.format(prefix, str(exception)))
    filename = exception.get_filename()
    if filename:
        lines = ['{0}: {1}'.format(filename, line) for line in lines]
    return '\n'.join(lines)


def print_error(exception, prefix='ERROR: '):
    log.warning(format_error(exception, prefix))


def report_error(exception):
    global error_code

    if captured_errors is not None:
        captured_errors.append(exception)
        return

    if strict:
        raise exception
    else:
        print_error(exception, 'WARNING: ')
        error_code = 2
