"""File helpers shared by the config readers and the output writers."""
import io
import os
import pathlib

from pbrwp.exceptions import PbrwpError


def get_default_encoding():
    return 'UTF-8'


def _open(opener, filename_or_file, mode, **kwargs):
    if hasattr(filename_or_file, 'read') and hasattr(filename_or_file, 'close'):
        return filename_or_file
    filename = filename_or_file
    try:
        return opener(filename, mode, **kwargs)
    except EnvironmentError as error:
        raise PbrwpError("unable to open %s. %s" % (filename, error.strerror), filename=filename)


def open_unicode(filename, mode='r', encoding=None):
    """Open a text file; CSV and manifest output always uses LF line endings."""
    if encoding is None:
        encoding = get_default_encoding()
    return _open(io.open, filename, mode, encoding=encoding, newline='\n' if 'w' in mode else None)


def ensure_dir(path):
    """Create ``path`` (and parents) if needed and return it as a :class:`pathlib.Path`."""
    path = pathlib.Path(path)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as error:
        raise PbrwpError("unable to create %s. %s" % (path, error.strerror), filename=path)
    return path


def worker_count(environ=None):
    """Number of worker threads, capped by ``SAMPLER_THREADS``.

    >>> worker_count({'SAMPLER_THREADS': '3'})
    3
    """
    environ = os.environ if environ is None else environ
    value = environ.get('SAMPLER_THREADS')
    if value:
        try:
            n = int(value)
        except ValueError:
            raise PbrwpError('SAMPLER_THREADS must be a positive integer, got %r' % value)
        if n < 1:
            raise PbrwpError('SAMPLER_THREADS must be a positive integer, got %r' % value)
        return n
    return os.cpu_count() or 1
