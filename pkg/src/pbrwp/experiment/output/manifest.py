"""JSON run manifests.  ``json`` writes floats with ``repr``, so they read back exactly."""
import json

from pbrwp.experiment.output import BaseWriter


class Writer(BaseWriter):
    default_suffix = '.json'

    def write_stream(self, manifest, stream):
        json.dump(manifest.to_dict(), stream, indent=2, sort_keys=True)
        stream.write('\n')
