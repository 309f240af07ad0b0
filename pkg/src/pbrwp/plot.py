"""SVG plots of a run: metrics against iteration, and particle scatter plots."""
import logging

from matplotlib.figure import Figure

from pbrwp.exceptions import DimensionError
from pbrwp.experiment import read_metrics, read_snapshot
from pbrwp.io import open_unicode

__all__ = ['metrics_figure', 'particles_figure', 'plot_metrics', 'plot_particles']

log = logging.getLogger(__name__)

LOG_SCALE_COLUMNS = {'kl_estimate'}


def metrics_figure(metrics: dict) -> Figure:
    """One panel per metric column, all sharing the iteration axis."""
    names = [name for name in metrics if name != 'iter']
    fig = Figure(figsize=(6, 2.2 * max(1, len(names))))
    axes = fig.subplots(max(1, len(names)), 1, sharex=True, squeeze=False)[:, 0]
    for ax, name in zip(axes, names):
        values = metrics[name]
        ax.plot(metrics['iter'], values, marker='.', linewidth=1)
        if name in LOG_SCALE_COLUMNS and len(values) and values.min() > 0:
            ax.set_yscale('log')
        ax.set_ylabel(name)
    axes[-1].set_xlabel('iteration')
    fig.tight_layout()
    return fig


def particles_figure(X, title=None) -> Figure:
    """Scatter plot of the first two coordinates."""
    if X.shape[0] < 2:
        raise DimensionError('a scatter plot needs at least two coordinates')
    fig = Figure(figsize=(5, 5))
    ax = fig.subplots()
    ax.scatter(X[0], X[1], s=6)
    ax.set_aspect('equal', adjustable='datalim')
    ax.set_xlabel('x_1')
    ax.set_ylabel('x_2')
    if title:
        ax.set_title(title)
    return fig


def _save(fig, filename):
    with open_unicode(filename, 'w') as stream:
        fig.savefig(stream, format='svg')
    log.info('wrote %s', filename)


def plot_metrics(metrics_file, out):
    _save(metrics_figure(read_metrics(metrics_file)), out)


def plot_particles(snapshot_file, out):
    _save(particles_figure(read_snapshot(snapshot_file), title=str(snapshot_file)), out)
