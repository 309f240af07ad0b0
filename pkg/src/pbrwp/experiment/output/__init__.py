import io

import pbrwp.io


class BaseWriter:
    default_suffix = None

    def __init__(self, encoding=None):
        self.encoding = encoding or pbrwp.io.get_default_encoding()

    def write_file(self, data, filename):
        with pbrwp.io.open_unicode(filename, 'w', encoding=self.encoding) as stream:
            self.write_stream(data, stream)

    def write_stream(self, data, stream):  # pragma: no cover
        raise NotImplementedError

    def to_string(self, data):
        stream = io.StringIO()
        self.write_stream(data, stream)
        return stream.getvalue()

    def to_bytes(self, data):
        return self.to_string(data).encode(self.encoding)
