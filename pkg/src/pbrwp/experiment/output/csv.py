"""CSV writers: comma separated, one header row, LF line endings.

Floats are written with 17 significant digits, which reads back bit-exactly.

>>> print(SnapshotWriter().to_string(np.array([[0.1, 2.0], [-1.0, 0.5]])), end='')
x_1,x_2
0.10000000000000001,-1
2,0.5
"""
import numpy as np

from pbrwp.experiment.input.csv import snapshot_header
from pbrwp.experiment.output import BaseWriter

FLOAT_FORMAT = '%.17g'


class SnapshotWriter(BaseWriter):
    """A d x N ensemble as N rows of d coordinates."""
    default_suffix = '.csv'

    def write_stream(self, X, stream):
        X = np.asarray(X, dtype=float)
        stream.write(','.join(snapshot_header(X.shape[0])) + '\n')
        for row in X.T:
            stream.write(','.join(FLOAT_FORMAT % v for v in row) + '\n')


class MetricsWriter(BaseWriter):
    """
    Rows of (iter, value, ...) under the given column names.

    >>> print(MetricsWriter(['iter', 'mean_norm']).to_string([(10, 0.5)]), end='')
    iter,mean_norm
    10,0.5
    """
    default_suffix = '.csv'

    def __init__(self, columns, encoding=None):
        BaseWriter.__init__(self, encoding)
        self.columns = list(columns)

    def write_stream(self, rows, stream):
        stream.write(','.join(self.columns) + '\n')
        for row in rows:
            if len(row) != len(self.columns):
                raise ValueError('row has %d fields, expected %d' % (len(row), len(self.columns)))
            iteration, values = row[0], row[1:]
            stream.write(','.join(['%d' % iteration] + [FLOAT_FORMAT % v for v in values]) + '\n')
