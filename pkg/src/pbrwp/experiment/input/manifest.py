import json

from pbrwp.exceptions import PbrwpError
from pbrwp.experiment import RunManifest
from pbrwp.experiment.input import BaseParser


class Parser(BaseParser):
    default_suffix = '.json'

    def parse_stream(self, stream):
        try:
            return RunManifest.from_dict(json.load(stream))
        except (ValueError, TypeError) as error:
            raise PbrwpError('invalid manifest: %s' % error, filename=self.filename)
