"""Readers for snapshot and metrics CSV files.

>>> SnapshotParser().parse_string('x_1,x_2\\n0.5,1\\n-2,3\\n').tolist()
[[0.5, -2.0], [1.0, 3.0]]
"""
import io

import numpy as np

from pbrwp.exceptions import PbrwpError
from pbrwp.experiment.input import BaseParser


def snapshot_header(dim):
    """
    >>> snapshot_header(3)
    ['x_1', 'x_2', 'x_3']
    """
    return ['x_%d' % (i + 1) for i in range(dim)]


class _CsvParser(BaseParser):
    default_suffix = '.csv'

    def _read(self, stream):
        header = stream.readline().strip()
        if not header:
            raise PbrwpError('missing CSV header', filename=self.filename)
        columns = header.split(',')
        body = stream.read()
        if not body.strip():
            return columns, np.empty((0, len(columns)))
        try:
            rows = np.loadtxt(io.StringIO(body), delimiter=',', ndmin=2)
        except ValueError as error:
            raise PbrwpError('malformed CSV: %s' % error, filename=self.filename)
        if rows.shape[1] != len(columns):
            raise PbrwpError('rows have %d fields, header has %d'
                             % (rows.shape[1], len(columns)), filename=self.filename)
        return columns, rows


class SnapshotParser(_CsvParser):
    """Reads ``x_1,...,x_d`` rows back into a d x N ensemble."""

    def parse_stream(self, stream):
        columns, rows = self._read(stream)
        if columns != snapshot_header(len(columns)):
            raise PbrwpError('not a particle snapshot: header %s' % ','.join(columns),
                             filename=self.filename)
        return np.ascontiguousarray(rows.T)


class MetricsParser(_CsvParser):
    """
    Column name -> values.

    >>> MetricsParser().parse_string('iter,mean_norm\\n10,0.5\\n20,0.25\\n')['mean_norm'].tolist()
    [0.5, 0.25]
    """

    def parse_stream(self, stream):
        columns, rows = self._read(stream)
        if 'iter' not in columns:
            raise PbrwpError('not a metrics file: no iter column', filename=self.filename)
        return {name: rows[:, i] for i, name in enumerate(columns)}
