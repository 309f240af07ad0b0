import io

import pbrwp.io
from pbrwp.exceptions import PbrwpError


class BaseParser:
    default_suffix = None
    filename = '<INPUT>'

    def __init__(self, encoding=None, **kwargs):
        self.encoding = encoding or pbrwp.io.get_default_encoding()

    def parse_file(self, filename):
        self.filename = getattr(filename, 'name', filename)
        open_file = pbrwp.io.open_unicode
        with open_file(filename, encoding=self.encoding) as f:
            try:
                return self.parse_stream(f)
            except UnicodeDecodeError as e:  # pragma: no cover
                raise PbrwpError(str(e), filename=self.filename)

    def parse_string(self, value):
        return self.parse_stream(io.StringIO(value))

    def parse_bytes(self, value):
        assert not isinstance(value, str)
        return self.parse_string(value.decode(self.encoding))

    def parse_stream(self, stream):  # pragma: no cover
        raise NotImplementedError
